#pragma once

// Domain types shared by the chained three-phase and the two-phase protocol:
// blocks, votes, quorum certificates, the block store and quorum arithmetic.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hsl {

using NodeId = std::uint32_t;
using ViewNumber = std::uint64_t;

enum class ErrorKind {
  MalformedClusterSize,
  InsufficientVotes,
  MixedSubjects,
  UnknownBlock,
  NotLeader,
  StaleView,
  InvalidQC,
  InvalidProposal,
  BadSignatureToken,
  ConfigInvalid,
  ParseError,
  ClockRegression,
  ForgedToken,
  IoError,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::MalformedClusterSize: return "MalformedClusterSize";
    case ErrorKind::InsufficientVotes: return "InsufficientVotes";
    case ErrorKind::MixedSubjects: return "MixedSubjects";
    case ErrorKind::UnknownBlock: return "UnknownBlock";
    case ErrorKind::NotLeader: return "NotLeader";
    case ErrorKind::StaleView: return "StaleView";
    case ErrorKind::InvalidQC: return "InvalidQC";
    case ErrorKind::InvalidProposal: return "InvalidProposal";
    case ErrorKind::BadSignatureToken: return "BadSignatureToken";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ClockRegression: return "ClockRegression";
    case ErrorKind::ForgedToken: return "ForgedToken";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

class ConsensusError : public std::runtime_error {
 public:
  ConsensusError(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// ---------------------------------------------------------------------------
// Digest

/// 64-bit structural digest (FNV-1a over little-endian words, splitmix
/// finalizer). Stable across platforms and runs.
class Hasher {
 public:
  Hasher& add(std::uint64_t word) {
    for (int i = 0; i < 8; ++i) {
      state_ ^= (word >> (8 * i)) & 0xffu;
      state_ *= 0x100000001b3ull;
    }
    return *this;
  }

  std::uint64_t finish() const {
    std::uint64_t z = state_ + 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ull;
};

struct BlockId {
  std::uint64_t value = 0;

  auto operator<=>(const BlockId&) const = default;

  // Fixed width, so lexicographic order on the hex form equals numeric order.
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
  }

  static std::optional<BlockId> from_hex(const std::string& s) {
    if (s.size() != 16) return std::nullopt;
    std::uint64_t v = 0;
    for (char c : s) {
      v <<= 4;
      if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
      else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
      else return std::nullopt;
    }
    return BlockId{v};
  }
};

struct BlockIdHash {
  std::size_t operator()(const BlockId& id) const noexcept { return static_cast<std::size_t>(id.value); }
};

// ---------------------------------------------------------------------------
// Votes, tokens and certificates

enum class Phase : std::uint8_t { Generic = 0, Prepare = 1, Commit = 2 };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::Generic: return "generic";
    case Phase::Prepare: return "prepare";
    case Phase::Commit: return "commit";
  }
  return "?";
}

inline std::uint64_t subject_digest(BlockId block, ViewNumber view, Phase phase) {
  return Hasher{}.add(0x5167).add(block.value).add(view).add(static_cast<std::uint64_t>(phase)).finish();
}

/// Abstract signature: who signed and what. Unforgeability is enforced by the
/// simulator, which refuses to carry a correct node's token that node never
/// emitted.
struct SignatureToken {
  NodeId signer = 0;
  std::uint64_t subject = 0;

  auto operator<=>(const SignatureToken&) const = default;
};

struct Vote {
  BlockId block_id;
  ViewNumber view = 0;
  Phase phase = Phase::Generic;
  NodeId voter = 0;
  SignatureToken sig;

  bool token_valid() const {
    return sig.signer == voter && sig.subject == subject_digest(block_id, view, phase);
  }
};

inline Vote make_vote(BlockId block, ViewNumber view, Phase phase, NodeId voter) {
  return Vote{block, view, phase, voter, SignatureToken{voter, subject_digest(block, view, phase)}};
}

struct QuorumCertificate {
  BlockId block_id;
  ViewNumber view = 0;
  Phase phase = Phase::Generic;
  std::vector<SignatureToken> tokens;  // sorted by signer
  std::uint64_t size_units = 1;

  std::vector<NodeId> signers() const {
    std::vector<NodeId> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(t.signer);
    return out;
  }

  bool same_subject(const QuorumCertificate& o) const {
    return block_id == o.block_id && view == o.view && phase == o.phase;
  }

  bool operator==(const QuorumCertificate& o) const {
    return same_subject(o) && tokens == o.tokens && size_units == o.size_units;
  }
};

// ---------------------------------------------------------------------------
// Quorum arithmetic

/// 2f+1 for n = 3f+1, f >= 1.
inline std::size_t quorum_threshold(std::size_t n) {
  if (n < 4 || (n - 1) % 3 != 0)
    throw ConsensusError(ErrorKind::MalformedClusterSize,
                         "n=" + std::to_string(n) + " is not of the form 3f+1 with f>=1");
  return 2 * ((n - 1) / 3) + 1;
}

inline std::size_t fault_bound(std::size_t n) { return (quorum_threshold(n) - 1) / 2; }

/// Aggregates matching votes. The certificate keeps exactly 2f+1 tokens, the
/// lowest voter ids; duplicates collapse before counting.
inline QuorumCertificate form_qc(std::span<const Vote> votes, std::size_t n, bool aggregate = true) {
  const std::size_t threshold = quorum_threshold(n);
  if (votes.empty())
    throw ConsensusError(ErrorKind::InsufficientVotes, "no votes");
  const Vote& first = votes.front();
  std::map<NodeId, SignatureToken> distinct;
  for (const Vote& v : votes) {
    if (v.block_id != first.block_id || v.view != first.view || v.phase != first.phase)
      throw ConsensusError(ErrorKind::MixedSubjects, "votes disagree on block/view/phase");
    distinct.emplace(v.voter, v.sig);
  }
  if (distinct.size() < threshold)
    throw ConsensusError(ErrorKind::InsufficientVotes,
                         std::to_string(distinct.size()) + " distinct votes, need " + std::to_string(threshold));
  QuorumCertificate qc;
  qc.block_id = first.block_id;
  qc.view = first.view;
  qc.phase = first.phase;
  for (const auto& [voter, tok] : distinct) {
    if (qc.tokens.size() == threshold) break;
    qc.tokens.push_back(tok);
  }
  qc.size_units = aggregate ? 1 : threshold;
  return qc;
}

// ---------------------------------------------------------------------------
// Blocks

struct Block {
  BlockId id;
  BlockId parent;
  ViewNumber view = 0;
  QuorumCertificate justify;
  std::uint64_t payload_units = 0;
  NodeId proposer = 0;

  static BlockId digest(BlockId parent, ViewNumber view, const QuorumCertificate& justify,
                        std::uint64_t payload_units, NodeId proposer) {
    return BlockId{Hasher{}
                       .add(0xb10c)
                       .add(parent.value)
                       .add(view)
                       .add(justify.block_id.value)
                       .add(justify.view)
                       .add(static_cast<std::uint64_t>(justify.phase))
                       .add(payload_units)
                       .add(proposer)
                       .finish()};
  }

  bool id_consistent() const { return id == digest(parent, view, justify, payload_units, proposer); }
};

inline Block make_block(BlockId parent, ViewNumber view, QuorumCertificate justify, std::uint64_t payload_units,
                        NodeId proposer) {
  Block b;
  b.parent = parent;
  b.view = view;
  b.payload_units = payload_units;
  b.proposer = proposer;
  b.justify = std::move(justify);
  b.id = Block::digest(b.parent, b.view, b.justify, b.payload_units, b.proposer);
  return b;
}

inline constexpr BlockId kGenesisId{0x6e6e6e6e6e6e6e6eull};

/// The synthetic genesis certificate, signed by every node.
inline QuorumCertificate genesis_qc(std::size_t n) {
  QuorumCertificate qc;
  qc.block_id = kGenesisId;
  qc.view = 0;
  qc.phase = Phase::Generic;
  for (NodeId i = 0; i < n; ++i) qc.tokens.push_back(SignatureToken{i, subject_digest(kGenesisId, 0, Phase::Generic)});
  qc.size_units = 1;
  return qc;
}

inline Block genesis_block(std::size_t n) {
  Block g;
  g.id = kGenesisId;
  g.parent = kGenesisId;
  g.view = 0;
  g.justify = genesis_qc(n);
  return g;
}

inline bool is_genesis(const QuorumCertificate& qc) { return qc.block_id == kGenesisId && qc.view == 0; }

/// Receiver-side check; never throws.
inline bool verify_qc(const QuorumCertificate& qc, std::size_t n) {
  std::size_t threshold = 0;
  try {
    threshold = quorum_threshold(n);
  } catch (const ConsensusError&) {
    return false;
  }
  const std::uint64_t subject = subject_digest(qc.block_id, qc.view, qc.phase);
  std::set<NodeId> seen;
  for (const auto& t : qc.tokens) {
    if (t.signer >= n || t.subject != subject || !seen.insert(t.signer).second) return false;
  }
  if (is_genesis(qc)) return seen.size() == n;
  return seen.size() == threshold;
}

/// Larger view wins; equal views fall back to the smaller block id.
inline const QuorumCertificate& highest_qc(const QuorumCertificate& a, const QuorumCertificate& b) {
  if (a.view != b.view) return a.view > b.view ? a : b;
  return b.block_id < a.block_id ? b : a;
}

// ---------------------------------------------------------------------------
// Block store

struct CommitResult {
  std::vector<BlockId> newly_committed;
  bool conflict = false;  // target does not extend the committed tip
};

class BlockStore {
 public:
  explicit BlockStore(std::size_t n) {
    Block g = genesis_block(n);
    committed_.push_back(g.id);
    committed_set_.insert(g.id);
    heights_[g.id] = 0;
    blocks_.emplace(g.id, std::move(g));
  }

  bool contains(BlockId id) const { return blocks_.count(id) != 0; }

  const Block& get(BlockId id) const {
    auto it = blocks_.find(id);
    if (it == blocks_.end()) throw ConsensusError(ErrorKind::UnknownBlock, id.hex());
    return it->second;
  }

  const Block* find(BlockId id) const {
    auto it = blocks_.find(id);
    return it == blocks_.end() ? nullptr : &it->second;
  }

  /// Returns false if already present. Parent must be stored.
  bool insert(const Block& b) {
    if (contains(b.id)) return false;
    if (!contains(b.parent)) throw ConsensusError(ErrorKind::UnknownBlock, "parent " + b.parent.hex());
    heights_[b.id] = heights_.at(b.parent) + 1;
    children_[b.parent].push_back(b.id);
    blocks_.emplace(b.id, b);
    return true;
  }

  std::uint64_t height(BlockId id) const {
    auto it = heights_.find(id);
    if (it == heights_.end()) throw ConsensusError(ErrorKind::UnknownBlock, id.hex());
    return it->second;
  }

  const std::vector<BlockId>& children(BlockId id) const {
    static const std::vector<BlockId> none;
    auto it = children_.find(id);
    return it == children_.end() ? none : it->second;
  }

  /// True iff `ancestor` lies on the parent path of `descendant` (reflexive).
  bool extends(BlockId descendant, BlockId ancestor) const {
    if (!contains(descendant)) throw ConsensusError(ErrorKind::UnknownBlock, descendant.hex());
    if (!contains(ancestor)) throw ConsensusError(ErrorKind::UnknownBlock, ancestor.hex());
    const std::uint64_t target = height(ancestor);
    BlockId cur = descendant;
    while (height(cur) > target) cur = get(cur).parent;
    return cur == ancestor;
  }

  /// Commits `id` and its uncommitted ancestors, oldest first.
  CommitResult commit_through(BlockId id) {
    CommitResult res;
    if (committed_set_.count(id)) return res;
    if (!extends(id, committed_.back())) {
      res.conflict = true;
      return res;
    }
    std::vector<BlockId> path;
    for (BlockId cur = id; !committed_set_.count(cur); cur = get(cur).parent) path.push_back(cur);
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
      committed_.push_back(*it);
      committed_set_.insert(*it);
      res.newly_committed.push_back(*it);
    }
    return res;
  }

  bool is_committed(BlockId id) const { return committed_set_.count(id) != 0; }
  const std::vector<BlockId>& committed() const { return committed_; }
  BlockId committed_tip() const { return committed_.back(); }
  std::size_t size() const { return blocks_.size(); }

 private:
  std::unordered_map<BlockId, Block, BlockIdHash> blocks_;
  std::unordered_map<BlockId, std::vector<BlockId>, BlockIdHash> children_;
  std::unordered_map<BlockId, std::uint64_t, BlockIdHash> heights_;
  std::vector<BlockId> committed_;
  std::set<BlockId> committed_set_;
};

/// Free-function form of BlockStore::extends.
inline bool extends(const BlockStore& store, BlockId descendant, BlockId ancestor) {
  return store.extends(descendant, ancestor);
}

// ---------------------------------------------------------------------------
// Per-node safety memory

struct SafetyState {
  QuorumCertificate locked_qc;
  QuorumCertificate highest_qc;  // the "key"
  std::array<ViewNumber, 3> highest_voted{0, 0, 0};
  ViewNumber current_view = 0;

  explicit SafetyState(std::size_t n) : locked_qc(genesis_qc(n)), highest_qc(genesis_qc(n)) {}

  ViewNumber voted(Phase p) const { return highest_voted[static_cast<std::size_t>(p)]; }
  void record_vote(Phase p, ViewNumber v) {
    auto& slot = highest_voted[static_cast<std::size_t>(p)];
    slot = std::max(slot, v);
  }

  /// Returns true if the key changed.
  bool raise_highest(const QuorumCertificate& qc) {
    if (qc.view > highest_qc.view || (qc.view == highest_qc.view && qc.block_id < highest_qc.block_id)) {
      highest_qc = qc;
      return true;
    }
    return false;
  }

  /// Max-view update; returns true if the lock changed.
  bool raise_lock(const QuorumCertificate& qc) {
    if (qc.view > locked_qc.view) {
      locked_qc = qc;
      return true;
    }
    return false;
  }
};

}  // namespace hsl
