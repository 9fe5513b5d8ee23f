#pragma once

// Safety and liveness checkers, metrics, and report emission.

#include <cmath>
#include <iomanip>
#include <ostream>

#include "hsl/simnet.hpp"

namespace hsl {

// ---------------------------------------------------------------------------
// Safety

struct SafetyVerdict {
  bool pass = true;
  std::string reason;
  NodeId node_a = 0;
  NodeId node_b = 0;
  std::uint64_t height = 0;  // first divergent height (1-based)
};

/// Prefix check over committed logs, indexed by node.
inline SafetyVerdict check_logs(const std::map<NodeId, std::vector<BlockId>>& logs) {
  SafetyVerdict v;
  for (auto a = logs.begin(); a != logs.end(); ++a) {
    for (auto b = std::next(a); b != logs.end(); ++b) {
      const std::size_t common = std::min(a->second.size(), b->second.size());
      for (std::size_t i = 0; i < common; ++i) {
        if (a->second[i] == b->second[i]) continue;
        if (v.pass || i + 1 < v.height) {
          v.pass = false;
          v.node_a = a->first;
          v.node_b = b->first;
          v.height = i + 1;
          v.reason = "nodes " + std::to_string(a->first) + " and " + std::to_string(b->first) +
                     " diverge at height " + std::to_string(i + 1) + ": " + a->second[i].hex() + " vs " +
                     b->second[i].hex();
        }
        break;
      }
    }
  }
  return v;
}

/// FAIL on divergent logs among correct nodes, or on any conflict or
/// equivocation evidence raised by a correct node.
inline SafetyVerdict check_safety(const Trace& t) {
  std::map<NodeId, std::vector<BlockId>> logs;
  for (NodeId i = 0; i < t.config.n; ++i)
    if (t.is_correct(i)) logs[i];
  for (const auto& c : t.commits)
    if (t.is_correct(c.node)) logs[c.node].push_back(c.block);
  SafetyVerdict v = check_logs(logs);
  if (!v.pass) return v;
  for (const auto& r : t.records) {
    if (r.kind != RecordKind::Note || !t.is_correct(r.node)) continue;
    if (r.label == to_string(NoteKind::SafetyViolation) || r.label == to_string(NoteKind::EquivocationEvidence)) {
      v.pass = false;
      v.node_a = v.node_b = r.node;
      v.reason = r.label + " at node " + std::to_string(r.node) + " (t=" + std::to_string(r.time) + ")";
      return v;
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Liveness

enum class LivenessStatus : std::uint8_t { Pass, Fail, NotApplicable };

inline const char* to_string(LivenessStatus s) {
  switch (s) {
    case LivenessStatus::Pass: return "PASS";
    case LivenessStatus::Fail: return "FAIL";
    case LivenessStatus::NotApplicable: return "N/A";
  }
  return "?";
}

struct LivenessVerdict {
  LivenessStatus status = LivenessStatus::Pass;
  SimTime window = 0;       // W
  SimTime start = 0;        // GST + one synchronization period
  std::size_t windows_checked = 0;
  NodeId node = 0;          // on FAIL: the stalled node and window
  SimTime from = 0;
  SimTime to = 0;
  std::string reason;
};

/// Every correct node must commit at least once in every window of length
/// W = (f+2) x (largest armed view timeout), starting one synchronization
/// period (Δ plus that timeout) after GST.
inline LivenessVerdict check_liveness(const Trace& t) {
  LivenessVerdict v;
  const auto& cfg = t.config;
  if (cfg.delay.gst == kNever || cfg.delay.gst > cfg.stop.horizon) {
    v.status = LivenessStatus::NotApplicable;
    v.reason = "gst beyond horizon";
    return v;
  }
  const SimTime timeout = std::max(t.max_timeout, cfg.effective_base_timeout());
  v.window = static_cast<SimTime>(cfg.f + 2) * timeout;
  v.start = cfg.delay.gst + cfg.delay.delta_cap + timeout;
  std::map<NodeId, std::vector<SimTime>> times;
  for (const auto& c : t.commits)
    if (t.is_correct(c.node)) times[c.node].push_back(c.time);
  for (NodeId i = 0; i < cfg.n; ++i) {
    if (!t.is_correct(i)) continue;
    SimTime prev = v.start;
    auto stall = [&](SimTime until) {
      if (until - prev <= v.window) return false;
      v.status = LivenessStatus::Fail;
      v.node = i;
      v.from = prev;
      v.to = until;
      v.reason = "node " + std::to_string(i) + " committed nothing in [" + std::to_string(prev) + ", " +
                 std::to_string(until) + "] (W=" + std::to_string(v.window) + ")";
      return true;
    };
    for (SimTime ct : times[i]) {
      if (ct <= prev) continue;
      if (stall(ct)) return v;
      ++v.windows_checked;
      prev = ct;
    }
    if (t.end_time > prev && stall(t.end_time)) return v;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Metrics

struct MetricsReport {
  std::uint64_t decisions = 0;  // distinct blocks committed by a correct node
  std::uint64_t total_messages = 0;
  std::uint64_t total_units = 0;
  std::uint64_t protocol_messages = 0;
  std::uint64_t protocol_units = 0;
  std::uint64_t pacemaker_messages = 0;
  std::uint64_t pacemaker_units = 0;
  double messages_per_decision = 0;
  double units_per_decision = 0;
  std::uint64_t max_messages_in_view = 0;
  std::uint64_t max_units_in_view = 0;
  std::map<ViewNumber, std::uint64_t> protocol_messages_per_view;
  std::vector<std::uint64_t> node_sends;
  std::vector<std::uint64_t> node_units;
  std::vector<SimTime> latencies;  // proposal first send -> first correct commit
  double mean_latency = 0;
  SimTime max_latency = 0;
  std::uint64_t view_changes = 0;  // views some correct node entered without a certificate
  std::uint64_t timeouts = 0;
  std::uint64_t delta_waits = 0;
  std::uint64_t messages_until_first_commit = 0;
  std::optional<SimTime> first_commit_time;
  double load_balance = 0;  // max / min send units over correct nodes
};

inline MetricsReport compute_metrics(const Trace& t) {
  MetricsReport m;
  const std::size_t n = t.config.n;
  m.node_sends.assign(n, 0);
  m.node_units.assign(n, 0);

  std::map<BlockId, SimTime> first_commit;
  for (const auto& c : t.commits) {
    if (!t.is_correct(c.node)) continue;
    first_commit.try_emplace(c.block, c.time);
    if (!m.first_commit_time || c.time < *m.first_commit_time) m.first_commit_time = c.time;
  }
  m.decisions = first_commit.size();

  std::map<BlockId, SimTime> proposed;
  std::map<ViewNumber, std::uint64_t> per_view_msgs;
  std::map<ViewNumber, std::uint64_t> per_view_units;
  std::set<ViewNumber> sync_views;
  for (const auto& r : t.records) {
    switch (r.kind) {
      case RecordKind::Send:
        ++m.total_messages;
        m.total_units += r.size;
        ++m.node_sends[r.node];
        m.node_units[r.node] += r.size;
        if (r.pacemaker) {
          ++m.pacemaker_messages;
          m.pacemaker_units += r.size;
        } else {
          ++m.protocol_messages;
          m.protocol_units += r.size;
          ++m.protocol_messages_per_view[r.view];
        }
        ++per_view_msgs[r.view];
        per_view_units[r.view] += r.size;
        if (r.label == "proposal") proposed.try_emplace(r.block, r.time);
        if (m.first_commit_time && r.time <= *m.first_commit_time) ++m.messages_until_first_commit;
        break;
      case RecordKind::EnterView:
        if (r.label == "sync" && t.is_correct(r.node)) sync_views.insert(r.view);
        break;
      case RecordKind::Timeout:
        if (t.is_correct(r.node)) ++m.timeouts;
        break;
      case RecordKind::Note:
        if (r.label == to_string(NoteKind::DeltaWait)) ++m.delta_waits;
        break;
      default: break;
    }
  }
  if (!m.first_commit_time) m.messages_until_first_commit = m.total_messages;
  m.view_changes = sync_views.size();
  for (const auto& [_, c] : per_view_msgs) m.max_messages_in_view = std::max(m.max_messages_in_view, c);
  for (const auto& [_, u] : per_view_units) m.max_units_in_view = std::max(m.max_units_in_view, u);
  if (m.decisions) {
    m.messages_per_decision = static_cast<double>(m.total_messages) / static_cast<double>(m.decisions);
    m.units_per_decision = static_cast<double>(m.total_units) / static_cast<double>(m.decisions);
  }

  for (const auto& [block, at] : first_commit) {
    auto it = proposed.find(block);
    if (it == proposed.end()) continue;
    m.latencies.push_back(at - it->second);
  }
  if (!m.latencies.empty()) {
    double sum = 0;
    for (SimTime l : m.latencies) {
      sum += static_cast<double>(l);
      m.max_latency = std::max(m.max_latency, l);
    }
    m.mean_latency = sum / static_cast<double>(m.latencies.size());
  }

  std::uint64_t lo = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t hi = 0;
  for (NodeId i = 0; i < n; ++i) {
    if (!t.is_correct(i)) continue;
    lo = std::min(lo, m.node_units[i]);
    hi = std::max(hi, m.node_units[i]);
  }
  if (hi > 0) m.load_balance = lo == 0 ? std::numeric_limits<double>::infinity() : static_cast<double>(hi) / lo;
  return m;
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::ordered_json report_json(const Trace& t, const MetricsReport& m, const SafetyVerdict& s,
                                          const LivenessVerdict& l) {
  nlohmann::ordered_json j;
  j["scenario"] = t.config.name;
  j["protocol"] = to_string(t.config.protocol);
  j["pacemaker"] = to_string(t.config.pacemaker);
  j["n"] = t.config.n;
  j["seed"] = t.config.seed;
  j["end_time"] = t.end_time;
  j["halted"] = t.halted;
  j["safety"] = {{"verdict", s.pass ? "PASS" : "FAIL"}, {"reason", s.reason}};
  j["liveness"] = {{"verdict", to_string(l.status)}, {"window", l.window}, {"reason", l.reason}};
  j["decisions"] = m.decisions;
  j["messages"] = {{"total", m.total_messages},
                   {"units", m.total_units},
                   {"protocol", m.protocol_messages},
                   {"protocol_units", m.protocol_units},
                   {"pacemaker", m.pacemaker_messages},
                   {"pacemaker_units", m.pacemaker_units},
                   {"per_decision_mean", m.messages_per_decision},
                   {"units_per_decision_mean", m.units_per_decision},
                   {"max_in_view", m.max_messages_in_view},
                   {"max_units_in_view", m.max_units_in_view},
                   {"until_first_commit", m.messages_until_first_commit}};
  j["node_sends"] = m.node_sends;
  j["node_units"] = m.node_units;
  j["latency"] = {{"mean", m.mean_latency}, {"max", m.max_latency}, {"samples", m.latencies}};
  j["view_changes"] = m.view_changes;
  j["timeouts"] = m.timeouts;
  j["delta_waits"] = m.delta_waits;
  j["load_balance"] = std::isfinite(m.load_balance) ? nlohmann::ordered_json(m.load_balance) : nlohmann::ordered_json(nullptr);
  return j;
}

inline void print_table(std::ostream& os, const Trace& t, const MetricsReport& m, const SafetyVerdict& s,
                        const LivenessVerdict& l) {
  auto row = [&](const std::string& k, const std::string& v) { os << "  " << std::left << std::setw(26) << k << v << '\n'; };
  auto num = [](double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", x);
    return std::string(buf);
  };
  os << t.config.name << " (" << to_string(t.config.protocol) << ", " << to_string(t.config.pacemaker)
     << ", n=" << t.config.n << ", seed=" << t.config.seed << ")\n";
  row("safety", s.pass ? "PASS" : "FAIL: " + s.reason);
  row("liveness", std::string(to_string(l.status)) + (l.reason.empty() ? "" : ": " + l.reason));
  row("end time", std::to_string(t.end_time) + (t.halted ? " (halted: " + t.halt_reason + ")" : ""));
  row("decisions", std::to_string(m.decisions));
  row("messages (total/units)", std::to_string(m.total_messages) + " / " + std::to_string(m.total_units));
  row("protocol / pacemaker", std::to_string(m.protocol_messages) + " / " + std::to_string(m.pacemaker_messages));
  row("messages per decision", num(m.messages_per_decision));
  row("commit latency mean/max", num(m.mean_latency) + " / " + std::to_string(m.max_latency));
  row("view changes / timeouts", std::to_string(m.view_changes) + " / " + std::to_string(m.timeouts));
  row("delta waits", std::to_string(m.delta_waits));
  row("load balance", std::isfinite(m.load_balance) ? num(m.load_balance) : "inf");
}

}  // namespace hsl
