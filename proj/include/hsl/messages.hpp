#pragma once

// Wire messages exchanged by replicas and the outputs a state machine hands
// back to the simulator.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hsl/core.hpp"

namespace hsl {

using SimTime = std::int64_t;

struct ProposalMsg {
  Block block;
};
struct VoteMsg {
  Vote vote;
};
/// Certificate broadcast by the two-phase leader after each phase.
struct QcMsg {
  QuorumCertificate qc;
};
/// Sent to the leader of `view` on entering it without a certificate for the
/// preceding view. Carries the sender's key and its most recent vote.
struct NewViewMsg {
  ViewNumber view = 0;
  QuorumCertificate highest_qc;
  std::optional<Vote> last_vote;
};
struct StatusRequestMsg {
  ViewNumber view = 0;
};
struct StatusMsg {
  NodeId sender = 0;
  ViewNumber view = 0;
  QuorumCertificate lock;
};
struct FetchMsg {
  BlockId block;
};
struct FetchReplyMsg {
  Block block;
};
// Pacemaker traffic.
struct SyncMsg {
  ViewNumber view = 0;
  QuorumCertificate highest_qc;
};
struct WishMsg {
  ViewNumber view = 0;
};
struct ViewCertMsg {
  ViewNumber view = 0;
};

using Payload = std::variant<ProposalMsg, VoteMsg, QcMsg, NewViewMsg, StatusRequestMsg, StatusMsg, FetchMsg,
                             FetchReplyMsg, SyncMsg, WishMsg, ViewCertMsg>;

inline const char* kind_name(const Payload& p) {
  static constexpr const char* names[] = {"proposal", "vote",  "qc",   "new-view", "status-request", "status",
                                          "fetch",    "fetch-reply", "sync", "wish",     "view-cert"};
  return names[p.index()];
}

inline bool is_pacemaker(const Payload& p) {
  return std::holds_alternative<SyncMsg>(p) || std::holds_alternative<WishMsg>(p) ||
         std::holds_alternative<ViewCertMsg>(p);
}

/// Accounting size: 1 unit per message, plus payload for proposals, plus the
/// size of any carried certificate.
inline std::uint64_t size_units(const Payload& p) {
  struct Visitor {
    std::uint64_t operator()(const ProposalMsg& m) const { return 1 + m.block.payload_units + m.block.justify.size_units; }
    std::uint64_t operator()(const VoteMsg&) const { return 1; }
    std::uint64_t operator()(const QcMsg& m) const { return 1 + m.qc.size_units; }
    std::uint64_t operator()(const NewViewMsg& m) const { return 1 + m.highest_qc.size_units; }
    std::uint64_t operator()(const StatusRequestMsg&) const { return 1; }
    std::uint64_t operator()(const StatusMsg& m) const { return 1 + m.lock.size_units; }
    std::uint64_t operator()(const FetchMsg&) const { return 1; }
    std::uint64_t operator()(const FetchReplyMsg& m) const {
      return 1 + m.block.payload_units + m.block.justify.size_units;
    }
    std::uint64_t operator()(const SyncMsg& m) const { return 1 + m.highest_qc.size_units; }
    std::uint64_t operator()(const WishMsg&) const { return 1; }
    std::uint64_t operator()(const ViewCertMsg&) const { return 2; }
  };
  return std::visit(Visitor{}, p);
}

/// Payload units that ride on the message (drives the size-dependent delay).
inline std::uint64_t payload_units_of(const Payload& p) {
  if (auto* m = std::get_if<ProposalMsg>(&p)) return m->block.payload_units;
  if (auto* m = std::get_if<FetchReplyMsg>(&p)) return m->block.payload_units;
  return 0;
}

/// The view a message pertains to, for per-view accounting.
inline ViewNumber view_of(const Payload& p) {
  struct Visitor {
    ViewNumber operator()(const ProposalMsg& m) const { return m.block.view; }
    ViewNumber operator()(const VoteMsg& m) const { return m.vote.view; }
    ViewNumber operator()(const QcMsg& m) const { return m.qc.view; }
    ViewNumber operator()(const NewViewMsg& m) const { return m.view; }
    ViewNumber operator()(const StatusRequestMsg& m) const { return m.view; }
    ViewNumber operator()(const StatusMsg& m) const { return m.view; }
    ViewNumber operator()(const FetchMsg&) const { return 0; }
    ViewNumber operator()(const FetchReplyMsg& m) const { return m.block.view; }
    ViewNumber operator()(const SyncMsg& m) const { return m.view; }
    ViewNumber operator()(const WishMsg& m) const { return m.view; }
    ViewNumber operator()(const ViewCertMsg& m) const { return m.view; }
  };
  return std::visit(Visitor{}, p);
}

struct Outgoing {
  std::optional<NodeId> to;  // nullopt: every other node
  Payload body;
};

enum class TimerKind : std::uint8_t { ViewTimeout, RelayTimeout, DeltaWait };

inline const char* to_string(TimerKind k) {
  switch (k) {
    case TimerKind::ViewTimeout: return "view-timeout";
    case TimerKind::RelayTimeout: return "relay-timeout";
    case TimerKind::DeltaWait: return "delta-wait";
  }
  return "?";
}

struct TimerRequest {
  TimerKind kind = TimerKind::ViewTimeout;
  ViewNumber view = 0;
  std::uint32_t stage = 0;
  SimTime delay = 0;
};

enum class NoteKind : std::uint8_t {
  Propose,
  Lock,
  Responsive,
  DeltaWait,
  Reject,
  EquivocationEvidence,
  SafetyViolation,
};

inline const char* to_string(NoteKind k) {
  switch (k) {
    case NoteKind::Propose: return "propose";
    case NoteKind::Lock: return "lock";
    case NoteKind::Responsive: return "responsive";
    case NoteKind::DeltaWait: return "delta-wait";
    case NoteKind::Reject: return "reject";
    case NoteKind::EquivocationEvidence: return "equivocation-evidence";
    case NoteKind::SafetyViolation: return "safety-violation";
  }
  return "?";
}

struct Note {
  NoteKind kind;
  ViewNumber view = 0;
  BlockId block;
  std::string detail;
};

/// Everything a state machine asks the simulator to do after one input.
struct ProtocolOutput {
  std::vector<Outgoing> messages;
  std::vector<BlockId> committed;
  std::optional<ViewNumber> qc_observed;  // view-advance signal for the pacemaker
  std::vector<TimerRequest> timers;
  std::vector<Note> notes;
  bool halt = false;

  void send(NodeId to, Payload body) { messages.push_back(Outgoing{to, std::move(body)}); }
  void broadcast(Payload body) { messages.push_back(Outgoing{std::nullopt, std::move(body)}); }

  void observe(ViewNumber v) { qc_observed = qc_observed ? std::max(*qc_observed, v) : v; }

  void note(NoteKind k, ViewNumber v, BlockId b = {}, std::string detail = {}) {
    notes.push_back(Note{k, v, b, std::move(detail)});
  }

  void merge(ProtocolOutput&& o) {
    for (auto& m : o.messages) messages.push_back(std::move(m));
    committed.insert(committed.end(), o.committed.begin(), o.committed.end());
    if (o.qc_observed) observe(*o.qc_observed);
    timers.insert(timers.end(), o.timers.begin(), o.timers.end());
    for (auto& n : o.notes) notes.push_back(std::move(n));
    halt = halt || o.halt;
  }
};

}  // namespace hsl
