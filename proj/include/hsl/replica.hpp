#pragma once

// Machinery shared by both protocol state machines: block admission with
// parent fetching, certificates parked until their block arrives, and vote
// accumulation.

#include <map>
#include <set>
#include <tuple>

#include "hsl/messages.hpp"
#include "hsl/pacemaker.hpp"

namespace hsl {

/// Deliberate protocol defects used to show the checkers catch bad builds.
enum class Mutation : std::uint8_t { None, DropLockUpdate, AllowDoubleVote, TwoChainCommit };

inline const char* to_string(Mutation m) {
  switch (m) {
    case Mutation::None: return "none";
    case Mutation::DropLockUpdate: return "drop-lock-update";
    case Mutation::AllowDoubleVote: return "allow-double-vote";
    case Mutation::TwoChainCommit: return "two-chain-commit";
  }
  return "?";
}

struct NodeParams {
  NodeId id = 0;
  std::size_t n = 4;
  LeaderSchedule leaders;
  std::uint64_t payload_units = 0;
  bool aggregate = true;
  SimTime delta = 1000;  // known bound, used by the two-phase wait
  Mutation mutation = Mutation::None;
};

class ReplicaBase {
 public:
  explicit ReplicaBase(NodeParams p)
      : params_(std::move(p)), quorum_(quorum_threshold(params_.n)), store_(params_.n), safety_(params_.n) {}

  NodeId id() const { return params_.id; }
  const NodeParams& params() const { return params_; }
  const BlockStore& store() const { return store_; }
  const SafetyState& safety() const { return safety_; }
  ViewNumber current_view() const { return safety_.current_view; }
  const QuorumCertificate& key() const { return safety_.highest_qc; }
  NodeId leader_of(ViewNumber v) const { return params_.leaders(v); }

  /// Views for which votes are still buffered.
  std::set<ViewNumber> buffered_vote_views() const {
    std::set<ViewNumber> out;
    for (const auto& [k, _] : votes_) out.insert(std::get<0>(k));
    return out;
  }

  /// Byzantine collusion hook: install a block produced outside this node's
  /// own logic (a colluding equivocator's second proposal).
  void adopt_block(const Block& b) {
    if (!store_.contains(b.id) && store_.contains(b.parent)) store_.insert(b);
  }

 protected:
  using VoteKey = std::tuple<ViewNumber, Phase, BlockId>;

  void check_block_shape(const Block& b) const {
    if (!b.id_consistent()) throw ConsensusError(ErrorKind::InvalidProposal, "id does not match contents");
    if (b.id == kGenesisId) return;
    if (b.parent != b.justify.block_id)
      throw ConsensusError(ErrorKind::InvalidProposal, "parent differs from justified block");
    if (b.view <= b.justify.view) throw ConsensusError(ErrorKind::InvalidProposal, "view not above justify view");
    if (b.proposer != leader_of(b.view)) throw ConsensusError(ErrorKind::InvalidProposal, "proposer is not leader");
    if (!verify_qc(b.justify, params_.n)) throw ConsensusError(ErrorKind::InvalidQC, "justify of " + b.id.hex());
  }

  /// Inserts a well-formed block. Returns false (and requests the parent)
  /// when the parent is missing; the block is then parked.
  bool admit_block(const Block& b, ProtocolOutput& out, NodeId source) {
    check_block_shape(b);
    if (store_.contains(b.id)) return true;
    if (!store_.contains(b.parent)) {
      auto& parked = orphans_[b.parent];
      if (std::none_of(parked.begin(), parked.end(), [&](const Block& x) { return x.id == b.id; }))
        parked.push_back(b);
      request_block(b.parent, source, out);
      return false;
    }
    store_.insert(b);
    return true;
  }

  std::vector<Block> take_orphans(BlockId parent) {
    auto it = orphans_.find(parent);
    if (it == orphans_.end()) return {};
    auto out = std::move(it->second);
    orphans_.erase(it);
    return out;
  }

  void park_qc(const QuorumCertificate& qc, NodeId source, ProtocolOutput& out) {
    auto& parked = parked_qcs_[qc.block_id];
    if (std::none_of(parked.begin(), parked.end(), [&](const QuorumCertificate& x) { return x == qc; }))
      parked.push_back(qc);
    request_block(qc.block_id, source, out);
  }

  std::vector<QuorumCertificate> take_parked_qcs(BlockId block) {
    auto it = parked_qcs_.find(block);
    if (it == parked_qcs_.end()) return {};
    auto out = std::move(it->second);
    parked_qcs_.erase(it);
    return out;
  }

  void request_block(BlockId id, NodeId source, ProtocolOutput& out) {
    if (source == params_.id) return;
    if (!fetch_asked_[id].insert(source).second) return;
    out.send(source, FetchMsg{id});
  }

  void answer_fetch(NodeId from, const FetchMsg& m, ProtocolOutput& out) const {
    if (const Block* b = store_.find(m.block); b != nullptr && b->id != kGenesisId)
      out.send(from, FetchReplyMsg{*b});
  }

  /// Adds a vote; returns a certificate the first time the quorum is met.
  std::optional<QuorumCertificate> add_vote(const Vote& v) {
    if (!v.token_valid() || v.voter >= params_.n)
      throw ConsensusError(ErrorKind::BadSignatureToken, "vote from " + std::to_string(v.voter));
    VoteKey key{v.view, v.phase, v.block_id};
    if (formed_.count(key)) return std::nullopt;
    auto& bucket = votes_[key];
    bucket.emplace(v.voter, v);
    if (bucket.size() < quorum_) return std::nullopt;
    std::vector<Vote> vs;
    vs.reserve(bucket.size());
    for (const auto& [_, vote] : bucket) vs.push_back(vote);
    formed_.insert(key);
    votes_.erase(key);
    return form_qc(vs, params_.n, params_.aggregate);
  }

  void prune_votes() {
    const ViewNumber floor = safety_.current_view > 0 ? safety_.current_view - 1 : 0;
    for (auto it = votes_.begin(); it != votes_.end();) {
      if (std::get<0>(it->first) < floor) it = votes_.erase(it);
      else ++it;
    }
    for (auto it = formed_.begin(); it != formed_.end();) {
      if (std::get<0>(*it) + 8 < floor) it = formed_.erase(it);
      else ++it;
    }
  }

  void commit(BlockId target, ViewNumber view, ProtocolOutput& out) {
    CommitResult r = store_.commit_through(target);
    if (r.conflict) {
      out.note(NoteKind::SafetyViolation, view, target, "commit target conflicts with committed tip");
      return;
    }
    out.committed.insert(out.committed.end(), r.newly_committed.begin(), r.newly_committed.end());
  }

  NodeParams params_;
  std::size_t quorum_;
  BlockStore store_;
  SafetyState safety_;
  std::map<BlockId, std::vector<Block>> orphans_;
  std::map<BlockId, std::vector<QuorumCertificate>> parked_qcs_;
  std::map<BlockId, std::set<NodeId>> fetch_asked_;
  std::map<VoteKey, std::map<NodeId, Vote>> votes_;
  std::set<VoteKey> formed_;
  ViewNumber proposed_view_ = 0;
};

}  // namespace hsl
