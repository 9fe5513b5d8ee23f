#pragma once

// Scenario configuration and its flat key-value text format.
//
//   # comments start with '#'
//   name          = faultless
//   n             = 4
//   f             = 1                      (defaults to (n-1)/3)
//   protocol      = hotstuff2 | hotstuff3
//   pacemaker     = baseline | epoch | relayer
//   leader        = round-robin | seeded-random
//   gst           = 0 | <time> | inf
//   delta         = 1000                   known bound
//   delta_min     = 10                     actual delay range after GST
//   delta_max     = 10
//   payload_cost  = 0                      time units per payload unit
//   pre_gst       = hold | random:<max>
//   payload_units = 0
//   byzantine     = 1:crash@0, 2:silent-leader@5, 3:equivocator
//                   strategies: crash@T, silent-leader[@V], equivocator,
//                               vote-withholder, max-delay
//   seed          = 1
//   stop          = commits:<k> | horizon:<t>
//   horizon       = <t>                    hard time cap (default 1e8)
//   aggregate     = true | false           certificate size 1 vs 2f+1
//   base_timeout  = <t>                    default 4*delta
//   relay_timeout = <t>                    default base_timeout
//   mutation      = none | drop-lock-update | allow-double-vote | two-chain-commit

#include <fstream>
#include <limits>
#include <sstream>

#include "hsl/pacemaker.hpp"
#include "hsl/replica.hpp"

namespace hsl {

inline constexpr SimTime kNever = std::numeric_limits<SimTime>::max();

inline SimTime saturating_add(SimTime a, SimTime b) {
  if (a == kNever || b == kNever) return kNever;
  if (a > kNever - b) return kNever;
  return a + b;
}

enum class ProtocolKind : std::uint8_t { HotStuff3, HotStuff2 };
enum class PreGstPolicy : std::uint8_t { AdversarialHold, RandomUpTo };
enum class StrategyKind : std::uint8_t { Crash, SilentLeader, Equivocator, VoteWithholder, MaxDelay };

inline const char* to_string(ProtocolKind p) { return p == ProtocolKind::HotStuff3 ? "hotstuff3" : "hotstuff2"; }

struct DelayModel {
  SimTime gst = 0;
  SimTime delta_cap = 1000;
  SimTime delta_min = 10;
  SimTime delta_max = 10;
  SimTime payload_cost = 0;
  PreGstPolicy pre_gst = PreGstPolicy::AdversarialHold;
  SimTime pre_gst_max = 0;
};

struct ByzantineStrategy {
  StrategyKind kind = StrategyKind::Crash;
  SimTime at_time = 0;                   // Crash
  std::optional<ViewNumber> only_view;  // SilentLeader restricted to one view

  std::string text() const {
    switch (kind) {
      case StrategyKind::Crash: return "crash@" + std::to_string(at_time);
      case StrategyKind::SilentLeader:
        return only_view ? "silent-leader@" + std::to_string(*only_view) : "silent-leader";
      case StrategyKind::Equivocator: return "equivocator";
      case StrategyKind::VoteWithholder: return "vote-withholder";
      case StrategyKind::MaxDelay: return "max-delay";
    }
    return "?";
  }
};

struct StopCondition {
  std::optional<std::uint64_t> commits;
  SimTime horizon = 100'000'000;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::size_t n = 4;
  std::size_t f = 1;
  ProtocolKind protocol = ProtocolKind::HotStuff2;
  PacemakerKind pacemaker = PacemakerKind::Baseline;
  DelayModel delay;
  LeaderMode leader_mode = LeaderMode::RoundRobin;
  std::vector<std::pair<NodeId, ByzantineStrategy>> byzantine;
  std::uint64_t payload_units = 0;
  std::uint64_t seed = 1;
  StopCondition stop;
  bool aggregate = true;
  std::optional<SimTime> base_timeout;
  std::optional<SimTime> relay_timeout;
  Mutation mutation = Mutation::None;

  SimTime effective_base_timeout() const { return base_timeout.value_or(4 * delay.delta_cap); }
  SimTime effective_relay_timeout() const { return relay_timeout.value_or(effective_base_timeout()); }

  bool is_byzantine(NodeId id) const {
    return std::any_of(byzantine.begin(), byzantine.end(), [&](const auto& b) { return b.first == id; });
  }

  /// Throws ConfigInvalid listing every offending field.
  void validate() const {
    std::vector<std::string> errs;
    if (f < 1 || n != 3 * f + 1) errs.push_back("n: n must equal 3f+1 (n=" + std::to_string(n) + ", f=" + std::to_string(f) + ")");
    if (byzantine.size() > f)
      errs.push_back("byzantine: " + std::to_string(byzantine.size()) + " corrupted nodes exceed f=" + std::to_string(f));
    std::set<NodeId> seen;
    for (const auto& [id, s] : byzantine) {
      if (id >= n) errs.push_back("byzantine: node " + std::to_string(id) + " out of range for n=" + std::to_string(n));
      if (!seen.insert(id).second) errs.push_back("byzantine: node " + std::to_string(id) + " listed twice");
    }
    if (delay.delta_min < 0 || delay.delta_min > delay.delta_max)
      errs.push_back("delta_min: must satisfy 0 <= delta_min <= delta_max");
    if (delay.delta_max > delay.delta_cap) errs.push_back("delta_max: must not exceed delta");
    if (delay.delta_cap <= 0) errs.push_back("delta: must be positive");
    if (delay.gst < 0) errs.push_back("gst: must be non-negative");
    if (delay.payload_cost < 0) errs.push_back("payload_cost: must be non-negative");
    if (stop.horizon < 0) errs.push_back("horizon: must be non-negative");
    if (effective_base_timeout() <= 0) errs.push_back("base_timeout: must be positive");
    if (!errs.empty()) {
      std::string msg;
      for (const auto& e : errs) msg += (msg.empty() ? "" : "; ") + e;
      throw ConsensusError(ErrorKind::ConfigInvalid, msg);
    }
  }

  std::string to_text() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    if (v.empty() || v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConsensusError(ErrorKind::ParseError, key + ": expected an unsigned integer, got '" + v + "'");
  }
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConsensusError(ErrorKind::ParseError, key + ": expected an integer, got '" + v + "'");
  }
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

inline ByzantineStrategy parse_strategy(const std::string& s) {
  ByzantineStrategy st;
  const auto at = s.find('@');
  const std::string kind = s.substr(0, at);
  const std::optional<std::string> arg = at == std::string::npos ? std::nullopt : std::optional(s.substr(at + 1));
  if (kind == "crash") {
    st.kind = StrategyKind::Crash;
    st.at_time = arg ? parse_int("byzantine", *arg) : 0;
  } else if (kind == "silent-leader") {
    st.kind = StrategyKind::SilentLeader;
    if (arg) st.only_view = static_cast<ViewNumber>(parse_int("byzantine", *arg));
  } else if (kind == "equivocator") {
    st.kind = StrategyKind::Equivocator;
  } else if (kind == "vote-withholder") {
    st.kind = StrategyKind::VoteWithholder;
  } else if (kind == "max-delay") {
    st.kind = StrategyKind::MaxDelay;
  } else {
    throw ConsensusError(ErrorKind::ParseError, "byzantine: unknown strategy '" + s + "'");
  }
  return st;
}

}  // namespace detail

/// Parses and validates scenario text.
inline ScenarioConfig parse_scenario_text(const std::string& text) {
  using detail::parse_int;
  ScenarioConfig c;
  bool f_given = false;
  bool stop_given = false;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConsensusError(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    auto bad = [&](const std::string& what) {
      return ConsensusError(ErrorKind::ParseError, key + ": " + what + " (line " + std::to_string(lineno) + ")");
    };
    if (key == "name") c.name = val;
    else if (key == "n") c.n = static_cast<std::size_t>(parse_int(key, val));
    else if (key == "f") { c.f = static_cast<std::size_t>(parse_int(key, val)); f_given = true; }
    else if (key == "protocol") {
      if (val == "hotstuff3") c.protocol = ProtocolKind::HotStuff3;
      else if (val == "hotstuff2") c.protocol = ProtocolKind::HotStuff2;
      else throw bad("expected hotstuff3 or hotstuff2");
    } else if (key == "pacemaker") {
      if (val == "baseline") c.pacemaker = PacemakerKind::Baseline;
      else if (val == "epoch") c.pacemaker = PacemakerKind::Epoch;
      else if (val == "relayer") c.pacemaker = PacemakerKind::Relayer;
      else throw bad("expected baseline, epoch or relayer");
    } else if (key == "leader") {
      if (val == "round-robin") c.leader_mode = LeaderMode::RoundRobin;
      else if (val == "seeded-random") c.leader_mode = LeaderMode::SeededRandom;
      else throw bad("expected round-robin or seeded-random");
    } else if (key == "gst") {
      c.delay.gst = (val == "inf") ? kNever : parse_int(key, val);
    } else if (key == "delta") c.delay.delta_cap = parse_int(key, val);
    else if (key == "delta_min") c.delay.delta_min = parse_int(key, val);
    else if (key == "delta_max") c.delay.delta_max = parse_int(key, val);
    else if (key == "payload_cost") c.delay.payload_cost = parse_int(key, val);
    else if (key == "pre_gst") {
      if (val == "hold") c.delay.pre_gst = PreGstPolicy::AdversarialHold;
      else if (val.rfind("random:", 0) == 0) {
        c.delay.pre_gst = PreGstPolicy::RandomUpTo;
        c.delay.pre_gst_max = parse_int(key, val.substr(7));
      } else throw bad("expected hold or random:<max>");
    } else if (key == "payload_units") c.payload_units = static_cast<std::uint64_t>(parse_int(key, val));
    else if (key == "seed") c.seed = detail::parse_uint(key, val);
    else if (key == "byzantine") {
      c.byzantine.clear();
      for (const auto& item : detail::split(val, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw bad("expected <node>:<strategy>, got '" + item + "'");
        const auto id = parse_int(key, detail::trim(item.substr(0, colon)));
        if (id < 0) throw bad("negative node id");
        c.byzantine.emplace_back(static_cast<NodeId>(id), detail::parse_strategy(detail::trim(item.substr(colon + 1))));
      }
    } else if (key == "stop") {
      stop_given = true;
      if (val.rfind("commits:", 0) == 0) c.stop.commits = static_cast<std::uint64_t>(parse_int(key, val.substr(8)));
      else if (val.rfind("horizon:", 0) == 0) { c.stop.commits.reset(); c.stop.horizon = parse_int(key, val.substr(8)); }
      else throw bad("expected commits:<k> or horizon:<t>");
    } else if (key == "horizon") c.stop.horizon = parse_int(key, val);
    else if (key == "aggregate") {
      if (val == "true") c.aggregate = true;
      else if (val == "false") c.aggregate = false;
      else throw bad("expected true or false");
    } else if (key == "base_timeout") c.base_timeout = parse_int(key, val);
    else if (key == "relay_timeout") c.relay_timeout = parse_int(key, val);
    else if (key == "mutation") {
      if (val == "none") c.mutation = Mutation::None;
      else if (val == "drop-lock-update") c.mutation = Mutation::DropLockUpdate;
      else if (val == "allow-double-vote") c.mutation = Mutation::AllowDoubleVote;
      else if (val == "two-chain-commit") c.mutation = Mutation::TwoChainCommit;
      else throw bad("unknown mutation");
    } else {
      throw ConsensusError(ErrorKind::ParseError, "unknown key '" + key + "' (line " + std::to_string(lineno) + ")");
    }
  }
  if (!f_given) c.f = c.n >= 1 ? (c.n - 1) / 3 : 0;
  if (!stop_given && !c.stop.commits) c.stop.commits = 10;
  c.validate();
  return c;
}

inline std::string ScenarioConfig::to_text() const {
  std::ostringstream o;
  o << "name = " << name << "\n"
    << "n = " << n << "\n"
    << "f = " << f << "\n"
    << "protocol = " << to_string(protocol) << "\n"
    << "pacemaker = " << to_string(pacemaker) << "\n"
    << "leader = " << to_string(leader_mode) << "\n"
    << "gst = " << (delay.gst == kNever ? std::string("inf") : std::to_string(delay.gst)) << "\n"
    << "delta = " << delay.delta_cap << "\n"
    << "delta_min = " << delay.delta_min << "\n"
    << "delta_max = " << delay.delta_max << "\n"
    << "payload_cost = " << delay.payload_cost << "\n"
    << "pre_gst = "
    << (delay.pre_gst == PreGstPolicy::AdversarialHold ? std::string("hold")
                                                        : "random:" + std::to_string(delay.pre_gst_max))
    << "\n"
    << "payload_units = " << payload_units << "\n";
  if (!byzantine.empty()) {
    o << "byzantine = ";
    for (std::size_t i = 0; i < byzantine.size(); ++i)
      o << (i ? ", " : "") << byzantine[i].first << ":" << byzantine[i].second.text();
    o << "\n";
  }
  o << "seed = " << seed << "\n";
  if (stop.commits) o << "stop = commits:" << *stop.commits << "\n";
  else o << "stop = horizon:" << stop.horizon << "\n";
  o << "horizon = " << stop.horizon << "\n"
    << "aggregate = " << (aggregate ? "true" : "false") << "\n";
  if (base_timeout) o << "base_timeout = " << *base_timeout << "\n";
  if (relay_timeout) o << "relay_timeout = " << *relay_timeout << "\n";
  if (mutation != Mutation::None) o << "mutation = " << hsl::to_string(mutation) << "\n";
  return o.str();
}

/// Named presets, addressable as `preset:<name>` wherever a file is expected.
inline std::optional<std::string> preset_text(const std::string& name) {
  if (name == "faultless")
    return "name = faultless\nn = 4\nprotocol = hotstuff2\npacemaker = baseline\ngst = 0\n"
           "delta = 1000\ndelta_min = 10\ndelta_max = 10\nseed = 1\nstop = commits:100\n";
  if (name == "leader-cascade")
    return "name = leader-cascade\nn = 7\nprotocol = hotstuff3\npacemaker = epoch\ngst = 0\n"
           "delta = 100\ndelta_min = 10\ndelta_max = 10\nbyzantine = 1:crash@0, 2:crash@0\nseed = 1\n"
           "stop = commits:20\n";
  if (name == "equivocation")
    return "name = equivocation\nn = 7\nprotocol = hotstuff2\npacemaker = baseline\ngst = 2000\n"
           "pre_gst = random:800\ndelta = 200\ndelta_min = 5\ndelta_max = 50\n"
           "byzantine = 1:equivocator, 4:equivocator\nseed = 1\nstop = commits:30\n";
  if (name == "late-gst")
    return "name = late-gst\nn = 4\nprotocol = hotstuff3\npacemaker = baseline\ngst = 20000\npre_gst = hold\n"
           "delta = 200\ndelta_min = 5\ndelta_max = 100\nbyzantine = 3:silent-leader\nseed = 1\nstop = commits:20\n";
  return std::nullopt;
}

/// Reads a scenario from a path, or from an embedded preset (`preset:<name>`).
inline ScenarioConfig parse_scenario(const std::string& path_or_preset) {
  if (path_or_preset.rfind("preset:", 0) == 0) {
    auto text = preset_text(path_or_preset.substr(7));
    if (!text) throw ConsensusError(ErrorKind::ParseError, "unknown preset '" + path_or_preset.substr(7) + "'");
    return parse_scenario_text(*text);
  }
  std::ifstream in(path_or_preset);
  if (!in) throw ConsensusError(ErrorKind::IoError, "cannot open " + path_or_preset);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str());
}

}  // namespace hsl
