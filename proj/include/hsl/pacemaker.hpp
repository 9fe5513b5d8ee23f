#pragma once

// View synchronization. Three interchangeable strategies decide when a node
// enters each view:
//
//   Baseline  all-to-all sync on every timeout (quadratic per failed view)
//   Epoch     views grouped into epochs of f+1; all-to-all sync only at the
//             first view of an epoch, local timeouts inside it
//   Relayer   wishes go to the next leader only, which aggregates them into a
//             view certificate; up to f+1 consecutive leaders act as fallback
//             relayers, staggered one relay timeout apart
//
// All three advance immediately when the protocol observes a certificate.

#include <map>
#include <set>
#include <variant>

#include "hsl/messages.hpp"

namespace hsl {

enum class LeaderMode : std::uint8_t { RoundRobin, SeededRandom };
enum class PacemakerKind : std::uint8_t { Baseline, Epoch, Relayer };

inline const char* to_string(PacemakerKind k) {
  switch (k) {
    case PacemakerKind::Baseline: return "baseline";
    case PacemakerKind::Epoch: return "epoch";
    case PacemakerKind::Relayer: return "relayer";
  }
  return "?";
}

inline const char* to_string(LeaderMode m) {
  return m == LeaderMode::RoundRobin ? "round-robin" : "seeded-random";
}

inline NodeId leader_of(ViewNumber view, std::size_t n, LeaderMode mode, std::uint64_t seed = 0) {
  if (mode == LeaderMode::RoundRobin) return static_cast<NodeId>(view % n);
  return static_cast<NodeId>(Hasher{}.add(0x1eade7).add(seed).add(view).finish() % n);
}

struct LeaderSchedule {
  std::size_t n = 4;
  LeaderMode mode = LeaderMode::RoundRobin;
  std::uint64_t seed = 0;

  NodeId operator()(ViewNumber v) const { return leader_of(v, n, mode, seed); }
};

struct EpochConfig {
  std::uint64_t epoch_length = 2;  // f+1 views
  SimTime base_timeout = 4000;
  std::uint32_t backoff_multiplier = 2;

  bool starts_epoch(ViewNumber v) const { return v % epoch_length == 0; }
  std::uint64_t epoch_of(ViewNumber v) const { return v / epoch_length; }
};

struct PacemakerConfig {
  PacemakerKind kind = PacemakerKind::Baseline;
  std::size_t n = 4;
  SimTime base_timeout = 4000;
  std::uint32_t backoff_multiplier = 2;
  std::uint32_t max_backoff_exponent = 10;
  SimTime relay_timeout = 4000;
};

namespace pm {
struct LocalTimeout {
  ViewNumber view;
};
struct QcObserved {
  ViewNumber view;
};
struct SyncReceived {
  NodeId sender;
  ViewNumber view;
};
struct WishReceived {
  NodeId sender;
  ViewNumber view;
};
struct CertReceived {
  ViewNumber view;
};
struct RelayTimeout {
  ViewNumber view;
  std::uint32_t stage;
};
}  // namespace pm

using PacemakerEvent =
    std::variant<pm::LocalTimeout, pm::QcObserved, pm::SyncReceived, pm::WishReceived, pm::CertReceived, pm::RelayTimeout>;

struct PacemakerDecision {
  std::optional<ViewNumber> enter_view;
  bool via_qc = false;
  std::vector<Outgoing> messages;
  std::vector<TimerRequest> timers;
};

class Pacemaker {
 public:
  Pacemaker(PacemakerConfig cfg, NodeId self, LeaderSchedule leaders)
      : cfg_(cfg), self_(self), leaders_(leaders), f_(fault_bound(cfg.n)),
        epoch_{static_cast<std::uint64_t>(f_ + 1), cfg.base_timeout, cfg.backoff_multiplier} {}

  /// Enters view 1 as if the genesis certificate had just been observed.
  PacemakerDecision start() {
    PacemakerDecision d;
    enter(d, 1, true);
    return d;
  }

  /// `key` is the node's current highest certificate, attached to sync traffic.
  PacemakerDecision on_event(const PacemakerEvent& ev, const QuorumCertificate& key) {
    PacemakerDecision d;
    key_ = &key;
    switch (cfg_.kind) {
      case PacemakerKind::Baseline: baseline_step(d, ev); break;
      case PacemakerKind::Epoch: epoch_step(d, ev); break;
      case PacemakerKind::Relayer: relayer_step(d, ev); break;
    }
    key_ = nullptr;
    return d;
  }

  ViewNumber view() const { return view_; }
  std::uint32_t consecutive_failures() const { return failures_; }
  SimTime max_timeout_armed() const { return max_timeout_; }
  const EpochConfig& epoch() const { return epoch_; }
  const PacemakerConfig& config() const { return cfg_; }

  SimTime current_timeout() const {
    SimTime t = cfg_.base_timeout;
    const std::uint32_t e = std::min(failures_, cfg_.max_backoff_exponent);
    for (std::uint32_t i = 0; i < e; ++i) t *= cfg_.backoff_multiplier;
    return t;
  }

 private:
  void enter(PacemakerDecision& d, ViewNumber v, bool via_qc) {
    if (v <= view_) return;
    view_ = v;
    if (via_qc) failures_ = 0;
    d.enter_view = v;
    d.via_qc = via_qc;
    const SimTime t = current_timeout();
    max_timeout_ = std::max(max_timeout_, t);
    d.timers.push_back(TimerRequest{TimerKind::ViewTimeout, v, 0, t});
    syncs_.erase(syncs_.begin(), syncs_.lower_bound(v + 1));
    wishes_.erase(wishes_.begin(), wishes_.lower_bound(v + 1));
  }

  void on_qc(PacemakerDecision& d, ViewNumber v) {
    if (v + 1 > view_) enter(d, v + 1, true);
  }

  // All-to-all sync with f+1 echo amplification and a 2f+1 entry threshold.
  void send_sync(PacemakerDecision& d, ViewNumber w) {
    if (!sent_sync_.insert(w).second) return;
    d.messages.push_back(Outgoing{std::nullopt, SyncMsg{w, *key_}});
    add_sync(d, self_, w);
  }

  void add_sync(PacemakerDecision& d, NodeId sender, ViewNumber w) {
    if (w <= view_) return;
    auto& s = syncs_[w];
    s.insert(sender);
    if (s.size() >= f_ + 1 && !sent_sync_.count(w)) {
      send_sync(d, w);
      return;
    }
    if (s.size() >= 2 * f_ + 1) enter(d, w, false);
  }

  void baseline_step(PacemakerDecision& d, const PacemakerEvent& ev) {
    if (auto* e = std::get_if<pm::LocalTimeout>(&ev)) {
      if (e->view != view_) return;
      ++failures_;
      send_sync(d, e->view + 1);
    } else if (auto* e = std::get_if<pm::QcObserved>(&ev)) {
      on_qc(d, e->view);
    } else if (auto* e = std::get_if<pm::SyncReceived>(&ev)) {
      add_sync(d, e->sender, e->view);
    }
  }

  void epoch_step(PacemakerDecision& d, const PacemakerEvent& ev) {
    if (auto* e = std::get_if<pm::LocalTimeout>(&ev)) {
      if (e->view != view_) return;
      ++failures_;
      const ViewNumber next = e->view + 1;
      if (epoch_.starts_epoch(next)) send_sync(d, next);
      else enter(d, next, false);
    } else if (auto* e = std::get_if<pm::QcObserved>(&ev)) {
      on_qc(d, e->view);
    } else if (auto* e = std::get_if<pm::SyncReceived>(&ev)) {
      if (epoch_.starts_epoch(e->view)) add_sync(d, e->sender, e->view);
    }
  }

  void wish_to(PacemakerDecision& d, ViewNumber w, std::uint32_t stage) {
    const NodeId relayer = leaders_(w + stage);
    if (relayer == self_) add_wish(d, self_, w);
    else d.messages.push_back(Outgoing{relayer, WishMsg{w}});
  }

  void add_wish(PacemakerDecision& d, NodeId sender, ViewNumber w) {
    if (w <= view_ || cert_sent_.count(w)) return;
    auto& s = wishes_[w];
    s.insert(sender);
    if (s.size() >= 2 * f_ + 1) {
      cert_sent_.insert(w);
      d.messages.push_back(Outgoing{std::nullopt, ViewCertMsg{w}});
      enter(d, w, false);
    }
  }

  void relayer_step(PacemakerDecision& d, const PacemakerEvent& ev) {
    if (auto* e = std::get_if<pm::LocalTimeout>(&ev)) {
      if (e->view != view_) return;
      ++failures_;
      const ViewNumber w = e->view + 1;
      wish_to(d, w, 0);
      if (f_ >= 1) d.timers.push_back(TimerRequest{TimerKind::RelayTimeout, w, 1, cfg_.relay_timeout});
    } else if (auto* e = std::get_if<pm::RelayTimeout>(&ev)) {
      if (view_ >= e->view || e->stage > f_) return;
      wish_to(d, e->view, e->stage);
      if (e->stage < f_)
        d.timers.push_back(TimerRequest{TimerKind::RelayTimeout, e->view, e->stage + 1, cfg_.relay_timeout});
    } else if (auto* e = std::get_if<pm::QcObserved>(&ev)) {
      on_qc(d, e->view);
    } else if (auto* e = std::get_if<pm::WishReceived>(&ev)) {
      add_wish(d, e->sender, e->view);
    } else if (auto* e = std::get_if<pm::CertReceived>(&ev)) {
      if (e->view > view_) enter(d, e->view, false);
    }
  }

  PacemakerConfig cfg_;
  NodeId self_;
  LeaderSchedule leaders_;
  std::size_t f_;
  EpochConfig epoch_;
  const QuorumCertificate* key_ = nullptr;

  ViewNumber view_ = 0;
  std::uint32_t failures_ = 0;
  SimTime max_timeout_ = 0;
  std::map<ViewNumber, std::set<NodeId>> syncs_;
  std::set<ViewNumber> sent_sync_;
  std::map<ViewNumber, std::set<NodeId>> wishes_;
  std::set<ViewNumber> cert_sent_;
};

}  // namespace hsl
