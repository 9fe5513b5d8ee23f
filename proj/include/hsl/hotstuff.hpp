#pragma once

// Chained three-phase HotStuff. Every view runs the same generic step: the
// leader proposes a block justified by its highest certificate, replicas vote
// to the next view's leader, and that leader's certificate rides in the next
// proposal. A certificate on b whose chain b <- b' <- b'' has consecutive views
// commits b''.

#include "hsl/replica.hpp"

namespace hsl {

class HotStuffNode : public ReplicaBase {
 public:
  explicit HotStuffNode(NodeParams p) : ReplicaBase(std::move(p)) {}

  static constexpr const char* protocol_name = "hotstuff3";
  static constexpr Phase proposal_phase = Phase::Generic;
  static constexpr bool votes_to_next_leader = true;

  /// Pacemaker granted `view`. Without a certificate for the preceding view
  /// the node hands its key (and last vote) to the new leader.
  ProtocolOutput enter_view(ViewNumber view, bool via_qc) {
    ProtocolOutput out;
    if (view <= safety_.current_view) return out;
    safety_.current_view = view;
    prune_votes();
    if (!via_qc) {
      NewViewMsg nv{view, safety_.highest_qc, last_vote_};
      const NodeId leader = leader_of(view);
      if (leader == id()) out.merge(on_new_view(id(), nv));
      else out.send(leader, std::move(nv));
    }
    try_propose(out);
    return out;
  }

  ProtocolOutput on_message(NodeId from, const Payload& msg) {
    if (auto* m = std::get_if<ProposalMsg>(&msg)) return on_proposal(m->block, from);
    if (auto* m = std::get_if<VoteMsg>(&msg)) return on_vote(m->vote);
    if (auto* m = std::get_if<NewViewMsg>(&msg)) return on_new_view(from, *m);
    if (auto* m = std::get_if<FetchReplyMsg>(&msg)) return on_proposal(m->block, from);
    if (auto* m = std::get_if<QcMsg>(&msg)) return observe_qc(m->qc, from);
    ProtocolOutput out;
    if (auto* m = std::get_if<FetchMsg>(&msg)) answer_fetch(from, *m, out);
    return out;
  }

  ProtocolOutput on_timer(const TimerRequest&) { return {}; }

  /// A certificate learned outside the proposal path (pacemaker sync traffic).
  ProtocolOutput observe_qc(const QuorumCertificate& qc, NodeId source) {
    ProtocolOutput out;
    if (!verify_qc(qc, params_.n)) throw ConsensusError(ErrorKind::InvalidQC, "observed " + qc.block_id.hex());
    if (!store_.contains(qc.block_id)) {
      park_qc(qc, source, out);
      return out;
    }
    out.merge(process_qc(qc));
    try_propose(out);
    return out;
  }

  Block make_proposal(ViewNumber view, std::uint64_t payload_units) const {
    if (leader_of(view) != id()) throw ConsensusError(ErrorKind::NotLeader, "view " + std::to_string(view));
    if (safety_.current_view != view)
      throw ConsensusError(ErrorKind::StaleView,
                           "asked for view " + std::to_string(view) + " in view " + std::to_string(safety_.current_view));
    return make_block(safety_.highest_qc.block_id, view, safety_.highest_qc, payload_units, id());
  }

  ProtocolOutput on_proposal(const Block& block, NodeId from) {
    ProtocolOutput out;
    if (!admit_block(block, out, from)) return out;
    handle_block(block, out);
    return out;
  }

  ProtocolOutput on_vote(const Vote& vote) {
    ProtocolOutput out;
    auto qc = add_vote(vote);
    if (!qc) return out;
    if (!store_.contains(qc->block_id)) {
      park_qc(*qc, vote.voter, out);
      return out;
    }
    out.merge(process_qc(*qc));
    try_propose(out);
    return out;
  }

  /// One-chain: raise the key. Two-chain: lock on b.justify. Three-chain with
  /// consecutive views: commit.
  ProtocolOutput process_qc(const QuorumCertificate& qc) {
    ProtocolOutput out;
    if (!verify_qc(qc, params_.n)) throw ConsensusError(ErrorKind::InvalidQC, qc.block_id.hex());
    if (!store_.contains(qc.block_id)) throw ConsensusError(ErrorKind::UnknownBlock, qc.block_id.hex());
    safety_.raise_highest(qc);
    const Block& b = store_.get(qc.block_id);
    if (b.id != kGenesisId) {
      if (params_.mutation != Mutation::DropLockUpdate && safety_.raise_lock(b.justify))
        out.note(NoteKind::Lock, b.justify.view, b.justify.block_id);
      const Block& b1 = store_.get(b.justify.block_id);
      const bool one_link = b.parent == b1.id && b.view == b1.view + 1;
      if (params_.mutation == Mutation::TwoChainCommit) {
        if (one_link && b1.id != kGenesisId) commit(b1.id, qc.view, out);
      } else if (one_link && b1.id != kGenesisId) {
        const Block& b2 = store_.get(b1.justify.block_id);
        if (b1.parent == b2.id && b1.view == b2.view + 1 && b2.id != kGenesisId) commit(b2.id, qc.view, out);
      }
    }
    out.observe(qc.view);
    return out;
  }

  const std::optional<Vote>& last_vote() const { return last_vote_; }
  std::size_t new_view_count(ViewNumber v) const {
    auto it = new_views_.find(v);
    return it == new_views_.end() ? 0 : it->second.size();
  }

 private:
  void handle_block(const Block& block, ProtocolOutput& out) {
    out.merge(process_qc(block.justify));
    maybe_vote(block, out);
    for (const Block& child : take_orphans(block.id)) {
      if (!store_.contains(child.id)) {
        store_.insert(child);
        handle_block(child, out);
      }
    }
    for (const QuorumCertificate& qc : take_parked_qcs(block.id)) out.merge(process_qc(qc));
    try_propose(out);
  }

  void maybe_vote(const Block& block, ProtocolOutput& out) {
    if (params_.mutation != Mutation::AllowDoubleVote && block.view <= safety_.voted(Phase::Generic)) return;
    if (params_.mutation == Mutation::AllowDoubleVote && voted_blocks_.count(block.id)) return;
    const QuorumCertificate& lock = safety_.locked_qc;
    const bool safe = store_.extends(block.id, lock.block_id) || block.justify.view > lock.view;
    if (!safe) return;
    safety_.record_vote(Phase::Generic, block.view);
    voted_blocks_.insert(block.id);
    Vote v = make_vote(block.id, block.view, Phase::Generic, id());
    last_vote_ = v;
    const NodeId next = leader_of(block.view + 1);
    if (next == id()) out.merge(on_vote(v));
    else out.send(next, VoteMsg{v});
  }

  ProtocolOutput on_new_view(NodeId from, const NewViewMsg& nv) {
    ProtocolOutput out;
    if (verify_qc(nv.highest_qc, params_.n)) {
      if (store_.contains(nv.highest_qc.block_id)) out.merge(process_qc(nv.highest_qc));
      else park_qc(nv.highest_qc, from, out);
    }
    if (nv.last_vote && nv.last_vote->voter == from) out.merge(on_vote(*nv.last_vote));
    new_views_[nv.view].insert(from);
    try_propose(out);
    return out;
  }

  /// Leaders propose at once when holding the preceding view's certificate,
  /// otherwise after 2f+1 new-view messages have reported their keys.
  void try_propose(ProtocolOutput& out) {
    const ViewNumber v = safety_.current_view;
    if (v == 0 || proposed_view_ >= v || leader_of(v) != id()) return;
    const bool ready = safety_.highest_qc.view + 1 == v || new_view_count(v) >= quorum_;
    if (!ready) return;
    proposed_view_ = v;
    Block block = make_proposal(v, params_.payload_units);
    out.note(NoteKind::Propose, v, block.id);
    out.broadcast(ProposalMsg{block});
    out.merge(on_proposal(block, id()));
  }

  std::optional<Vote> last_vote_;
  std::set<BlockId> voted_blocks_;
  std::map<ViewNumber, std::set<NodeId>> new_views_;
};

}  // namespace hsl
