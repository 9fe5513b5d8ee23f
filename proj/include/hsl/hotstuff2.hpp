#pragma once

// Two-phase HotStuff, view by view. Prepare certifies the uniqueness of the
// leader's proposal; Commit ratifies it (lock, then commit). A new leader
// holding a certificate from the preceding view proposes responsively;
// otherwise it collects locks for a bounded wait before proposing.

#include "hsl/replica.hpp"

namespace hsl {

enum class EntryMode : std::uint8_t { Responsive, DeltaWait };

class HotStuff2Node : public ReplicaBase {
 public:
  explicit HotStuff2Node(NodeParams p) : ReplicaBase(std::move(p)) {}

  static constexpr const char* protocol_name = "hotstuff2";
  static constexpr Phase proposal_phase = Phase::Prepare;
  static constexpr bool votes_to_next_leader = false;

  /// Status requests and replies each take at most the known bound after GST,
  /// so the wait covers one round trip.
  SimTime status_wait() const { return 2 * params_.delta; }

  ProtocolOutput enter_view(ViewNumber view, bool /*via_qc*/) {
    ProtocolOutput out;
    if (view <= safety_.current_view) return out;
    safety_.current_view = view;
    prune_votes();
    if (leader_of(view) != id()) return out;
    if (safety_.highest_qc.view + 1 == view) {
      entry_mode_ = EntryMode::Responsive;
      out.note(NoteKind::Responsive, view);
      propose(out);
    } else {
      entry_mode_ = EntryMode::DeltaWait;
      out.note(NoteKind::DeltaWait, view, safety_.highest_qc.block_id,
               "highest certificate from view " + std::to_string(safety_.highest_qc.view));
      out.broadcast(StatusRequestMsg{view});
      out.timers.push_back(TimerRequest{TimerKind::DeltaWait, view, 0, status_wait()});
    }
    return out;
  }

  ProtocolOutput on_message(NodeId from, const Payload& msg) {
    if (auto* m = std::get_if<ProposalMsg>(&msg)) return on_proposal(m->block, from);
    if (auto* m = std::get_if<VoteMsg>(&msg)) return on_vote(m->vote);
    if (auto* m = std::get_if<QcMsg>(&msg)) return on_qc(m->qc, from);
    if (auto* m = std::get_if<FetchReplyMsg>(&msg)) return on_proposal(m->block, from);
    if (auto* m = std::get_if<StatusMsg>(&msg)) return on_status(from, *m);
    ProtocolOutput out;
    if (auto* m = std::get_if<StatusRequestMsg>(&msg)) {
      if (from == leader_of(m->view)) out.send(from, StatusMsg{id(), m->view, safety_.locked_qc});
    } else if (auto* m = std::get_if<FetchMsg>(&msg)) {
      answer_fetch(from, *m, out);
    } else if (auto* m = std::get_if<NewViewMsg>(&msg)) {
      out.merge(observe_qc(m->highest_qc, from));
    }
    return out;
  }

  ProtocolOutput on_timer(const TimerRequest& t) {
    ProtocolOutput out;
    if (t.kind == TimerKind::DeltaWait && t.view == safety_.current_view && leader_of(t.view) == id()) propose(out);
    return out;
  }

  ProtocolOutput observe_qc(const QuorumCertificate& qc, NodeId source) {
    ProtocolOutput out;
    if (!verify_qc(qc, params_.n)) throw ConsensusError(ErrorKind::InvalidQC, "observed " + qc.block_id.hex());
    if (!store_.contains(qc.block_id)) park_qc(qc, source, out);
    else safety_.raise_highest(qc);
    return out;
  }

  Block make_proposal(ViewNumber view, std::uint64_t payload_units) const {
    if (leader_of(view) != id()) throw ConsensusError(ErrorKind::NotLeader, "view " + std::to_string(view));
    if (safety_.current_view != view) throw ConsensusError(ErrorKind::StaleView, "view " + std::to_string(view));
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
    if (vote.phase == Phase::Generic) throw ConsensusError(ErrorKind::BadSignatureToken, "generic vote in two-phase mode");
    auto qc = add_vote(vote);
    if (!qc) return out;
    out.broadcast(QcMsg{*qc});
    out.merge(on_qc(*qc, vote.voter));
    return out;
  }

  /// Lock on the proposal and ratify it with a Commit vote, unless the
  /// certificate is stale.
  ProtocolOutput on_prepare_qc(const QuorumCertificate& qc) {
    ProtocolOutput out;
    if (qc.phase != Phase::Prepare || !verify_qc(qc, params_.n))
      throw ConsensusError(ErrorKind::InvalidQC, "prepare " + qc.block_id.hex());
    if (!record_certificate(qc, out)) return out;
    if (params_.mutation != Mutation::DropLockUpdate && safety_.raise_lock(qc))
      out.note(NoteKind::Lock, qc.view, qc.block_id);
    safety_.raise_highest(qc);
    const bool fresh = params_.mutation == Mutation::AllowDoubleVote
                           ? !commit_voted_.count(qc.block_id)
                           : qc.view > safety_.voted(Phase::Commit);
    if (qc.view >= safety_.current_view && fresh) {
      safety_.record_vote(Phase::Commit, qc.view);
      commit_voted_.insert(qc.block_id);
      Vote v = make_vote(qc.block_id, qc.view, Phase::Commit, id());
      const NodeId leader = leader_of(qc.view);
      if (leader == id()) out.merge(on_vote(v));
      else out.send(leader, VoteMsg{v});
    }
    return out;
  }

  ProtocolOutput on_commit_qc(const QuorumCertificate& qc) {
    ProtocolOutput out;
    if (qc.phase != Phase::Commit || !verify_qc(qc, params_.n))
      throw ConsensusError(ErrorKind::InvalidQC, "commit " + qc.block_id.hex());
    if (!record_certificate(qc, out)) return out;
    if (params_.mutation != Mutation::DropLockUpdate && safety_.raise_lock(qc))
      out.note(NoteKind::Lock, qc.view, qc.block_id);
    safety_.raise_highest(qc);
    commit(qc.block_id, qc.view, out);
    out.observe(qc.view);
    return out;
  }

  EntryMode entry_mode() const { return entry_mode_; }

 private:
  ProtocolOutput on_qc(const QuorumCertificate& qc, NodeId source) {
    ProtocolOutput out;
    if (!verify_qc(qc, params_.n)) throw ConsensusError(ErrorKind::InvalidQC, qc.block_id.hex());
    if (!store_.contains(qc.block_id)) {
      park_qc(qc, source, out);
      return out;
    }
    if (qc.phase == Phase::Prepare) return on_prepare_qc(qc);
    if (qc.phase == Phase::Commit) return on_commit_qc(qc);
    safety_.raise_highest(qc);
    return out;
  }

  /// Returns false for a duplicate. Two certificates for different blocks in
  /// one view and phase prove more than f corruptions: flag and halt.
  bool record_certificate(const QuorumCertificate& qc, ProtocolOutput& out) {
    auto [it, inserted] = certified_.try_emplace({qc.view, qc.phase}, qc.block_id);
    if (inserted) return true;
    if (it->second != qc.block_id) {
      out.note(NoteKind::EquivocationEvidence, qc.view, qc.block_id,
               std::string(to_string(qc.phase)) + " certificates for " + it->second.hex() + " and " +
                   qc.block_id.hex());
      out.halt = true;
    }
    return false;
  }

  void handle_block(const Block& block, ProtocolOutput& out) {
    if (verify_qc(block.justify, params_.n)) safety_.raise_highest(block.justify);
    maybe_vote(block, out);
    for (const Block& child : take_orphans(block.id)) {
      if (!store_.contains(child.id)) {
        store_.insert(child);
        handle_block(child, out);
      }
    }
    for (const QuorumCertificate& qc : take_parked_qcs(block.id)) out.merge(on_qc(qc, id()));
  }

  void maybe_vote(const Block& block, ProtocolOutput& out) {
    if (params_.mutation == Mutation::AllowDoubleVote) {
      if (prepare_voted_.count(block.id)) return;
    } else if (block.view <= safety_.voted(Phase::Prepare)) {
      return;
    }
    const QuorumCertificate& lock = safety_.locked_qc;
    const bool safe = block.justify.view >= lock.view || store_.extends(block.id, lock.block_id);
    if (!safe) return;
    safety_.record_vote(Phase::Prepare, block.view);
    prepare_voted_.insert(block.id);
    Vote v = make_vote(block.id, block.view, Phase::Prepare, id());
    if (block.proposer == id()) out.merge(on_vote(v));
    else out.send(block.proposer, VoteMsg{v});
  }

  ProtocolOutput on_status(NodeId from, const StatusMsg& m) {
    ProtocolOutput out;
    if (m.sender != from) return out;
    out.merge(observe_qc(m.lock, from));
    return out;
  }

  void propose(ProtocolOutput& out) {
    const ViewNumber v = safety_.current_view;
    if (proposed_view_ >= v) return;
    proposed_view_ = v;
    Block block = make_proposal(v, params_.payload_units);
    out.note(NoteKind::Propose, v, block.id);
    out.broadcast(ProposalMsg{block});
    out.merge(on_proposal(block, id()));
  }

  EntryMode entry_mode_ = EntryMode::Responsive;
  std::map<std::pair<ViewNumber, Phase>, BlockId> certified_;
  std::set<BlockId> prepare_voted_;
  std::set<BlockId> commit_voted_;
};

}  // namespace hsl
