#pragma once

// Execution trace: every simulator step appends one record; commits and
// per-node send counters are kept alongside. Serialized as JSON Lines with a
// fixed field order so replays can be byte-compared.

#include <iosfwd>
#include <sstream>

#include "json.hpp"

#include "hsl/scenario.hpp"

namespace hsl {

enum class RecordKind : std::uint8_t { Send, Deliver, Drop, EnterView, Timeout, TimerStale, Timer, Note };

inline const char* to_string(RecordKind k) {
  switch (k) {
    case RecordKind::Send: return "send";
    case RecordKind::Deliver: return "deliver";
    case RecordKind::Drop: return "drop";
    case RecordKind::EnterView: return "enter-view";
    case RecordKind::Timeout: return "timeout";
    case RecordKind::TimerStale: return "timer-stale";
    case RecordKind::Timer: return "timer";
    case RecordKind::Note: return "note";
  }
  return "?";
}

struct TraceRecord {
  std::uint64_t seq = 0;
  SimTime time = 0;
  NodeId node = 0;
  RecordKind kind = RecordKind::Send;
  std::string label;  // message kind, note kind, timer kind or entry cause
  NodeId peer = 0;
  ViewNumber view = 0;
  std::uint64_t size = 0;
  bool pacemaker = false;
  BlockId block;
  std::string text;

  std::string kind_text() const {
    return kind == RecordKind::Note ? "note:" + label : std::string(to_string(kind));
  }

  std::string detail() const {
    std::string d;
    switch (kind) {
      case RecordKind::Send: d = "to=" + std::to_string(peer) + " msg=" + label; break;
      case RecordKind::Deliver: d = "from=" + std::to_string(peer) + " msg=" + label; break;
      case RecordKind::Drop: d = "from=" + std::to_string(peer) + " msg=" + label; break;
      case RecordKind::EnterView: d = "via=" + label; break;
      case RecordKind::Timeout:
      case RecordKind::TimerStale:
      case RecordKind::Timer: d = "timer=" + label; break;
      case RecordKind::Note: break;
    }
    d += (d.empty() ? "" : " ") + std::string("view=") + std::to_string(view);
    if (block.value != 0) d += " block=" + block.hex();
    if (!text.empty()) d += " " + text;
    return d;
  }
};

struct CommitRecord {
  SimTime time = 0;
  NodeId node = 0;
  BlockId block;
  std::uint64_t height = 0;
};

struct NodeCounters {
  std::uint64_t sends = 0;
  std::uint64_t send_units = 0;
  std::uint64_t pacemaker_sends = 0;
  std::uint64_t pacemaker_units = 0;
};

struct Trace {
  ScenarioConfig config;
  std::vector<TraceRecord> records;
  std::vector<CommitRecord> commits;
  std::vector<NodeCounters> counters;
  SimTime end_time = 0;
  SimTime max_timeout = 0;  // largest view timeout armed by any correct node
  bool halted = false;
  std::string halt_reason;

  bool is_correct(NodeId id) const { return !config.is_byzantine(id); }

  /// Committed sequence of one node, oldest first (genesis excluded).
  std::vector<BlockId> commit_log(NodeId id) const {
    std::vector<BlockId> out;
    for (const auto& c : commits)
      if (c.node == id) out.push_back(c.block);
    return out;
  }
};

// ---------------------------------------------------------------------------
// JSON Lines

inline void write_jsonl(const Trace& t, std::ostream& os) {
  using nlohmann::ordered_json;
  ordered_json header;
  header["type"] = "header";
  header["scenario"] = t.config.to_text();
  os << header.dump() << '\n';
  for (const auto& r : t.records) {
    ordered_json j;
    j["type"] = "event";
    j["seq"] = r.seq;
    j["time"] = r.time;
    j["node"] = r.node;
    j["kind"] = r.kind_text();
    j["detail"] = r.detail();
    j["size"] = r.size;
    os << j.dump() << '\n';
  }
  for (const auto& c : t.commits) {
    ordered_json j;
    j["type"] = "commit";
    j["time"] = c.time;
    j["node"] = c.node;
    j["block"] = c.block.hex();
    j["height"] = c.height;
    os << j.dump() << '\n';
  }
  ordered_json end;
  end["type"] = "end";
  end["end_time"] = t.end_time;
  end["max_timeout"] = t.max_timeout;
  end["halted"] = t.halted;
  end["halt_reason"] = t.halt_reason;
  ordered_json counters = ordered_json::array();
  for (const auto& c : t.counters)
    counters.push_back({{"sends", c.sends}, {"units", c.send_units}, {"pm_sends", c.pacemaker_sends},
                        {"pm_units", c.pacemaker_units}});
  end["counters"] = counters;
  os << end.dump() << '\n';
}

inline std::string to_jsonl(const Trace& t) {
  std::ostringstream os;
  write_jsonl(t, os);
  return os.str();
}

namespace detail {

/// Inverse of TraceRecord::detail(): prefix fields, view, optional block,
/// then free text.
inline void parse_detail(TraceRecord& r, const std::string& d) {
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    const auto sp = d.find(' ', pos);
    return d.substr(pos, sp == std::string::npos ? std::string::npos : sp - pos);
  };
  auto advance = [&](const std::string& tok) { pos = std::min(d.size(), pos + tok.size() + 1); };
  auto value_of = [](const std::string& tok) { return tok.substr(tok.find('=') + 1); };
  auto number = [&](const std::string& tok) {
    try {
      return std::stoull(value_of(tok));
    } catch (const std::exception&) {
      throw ConsensusError(ErrorKind::ParseError, "bad number in detail '" + d + "'");
    }
  };
  while (pos < d.size()) {
    const std::string tok = next_token();
    if (tok.rfind("to=", 0) == 0 || tok.rfind("from=", 0) == 0) r.peer = static_cast<NodeId>(number(tok));
    else if (tok.rfind("msg=", 0) == 0 || tok.rfind("via=", 0) == 0 || tok.rfind("timer=", 0) == 0) r.label = value_of(tok);
    else if (tok.rfind("view=", 0) == 0) {
      r.view = number(tok);
      advance(tok);
      break;
    } else throw ConsensusError(ErrorKind::ParseError, "unexpected detail '" + d + "'");
    advance(tok);
  }
  if (pos < d.size() && next_token().rfind("block=", 0) == 0) {
    const std::string tok = next_token();
    auto id = BlockId::from_hex(value_of(tok));
    if (!id) throw ConsensusError(ErrorKind::ParseError, "bad block id in '" + d + "'");
    r.block = *id;
    advance(tok);
  }
  if (pos < d.size()) r.text = d.substr(pos);
  r.pacemaker = r.kind == RecordKind::Send && (r.label == "sync" || r.label == "wish" || r.label == "view-cert");
}

}  // namespace detail

/// Rebuilds a trace from JSON Lines; writing it again reproduces the input.
inline Trace parse_jsonl(std::istream& is) {
  Trace t;
  bool have_header = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConsensusError(ErrorKind::ParseError, "trace line " + std::to_string(lineno) + ": " + e.what());
    }
    const std::string type = j.value("type", "");
    try {
      if (type == "header") {
        t.config = parse_scenario_text(j.at("scenario").get<std::string>());
        have_header = true;
      } else if (type == "event") {
        TraceRecord r;
        r.seq = j.at("seq").get<std::uint64_t>();
        r.time = j.at("time").get<SimTime>();
        r.node = j.at("node").get<NodeId>();
        const std::string kind = j.at("kind").get<std::string>();
        r.size = j.at("size").get<std::uint64_t>();
        if (kind.rfind("note:", 0) == 0) {
          r.kind = RecordKind::Note;
          r.label = kind.substr(5);
        } else {
          bool found = false;
          for (auto k : {RecordKind::Send, RecordKind::Deliver, RecordKind::Drop, RecordKind::EnterView,
                         RecordKind::Timeout, RecordKind::TimerStale, RecordKind::Timer}) {
            if (kind == to_string(k)) {
              r.kind = k;
              found = true;
            }
          }
          if (!found) throw ConsensusError(ErrorKind::ParseError, "unknown record kind '" + kind + "'");
        }
        detail::parse_detail(r, j.at("detail").get<std::string>());
        t.records.push_back(std::move(r));
      } else if (type == "commit") {
        auto id = BlockId::from_hex(j.at("block").get<std::string>());
        if (!id) throw ConsensusError(ErrorKind::ParseError, "bad block id");
        t.commits.push_back(
            CommitRecord{j.at("time").get<SimTime>(), j.at("node").get<NodeId>(), *id, j.at("height").get<std::uint64_t>()});
      } else if (type == "end") {
        t.end_time = j.at("end_time").get<SimTime>();
        t.max_timeout = j.at("max_timeout").get<SimTime>();
        t.halted = j.at("halted").get<bool>();
        t.halt_reason = j.at("halt_reason").get<std::string>();
        for (const auto& c : j.at("counters"))
          t.counters.push_back(NodeCounters{c.at("sends").get<std::uint64_t>(), c.at("units").get<std::uint64_t>(),
                                            c.at("pm_sends").get<std::uint64_t>(), c.at("pm_units").get<std::uint64_t>()});
      } else {
        throw ConsensusError(ErrorKind::ParseError, "unknown record type '" + type + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConsensusError(ErrorKind::ParseError, "trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header) throw ConsensusError(ErrorKind::ParseError, "trace has no header line");
  return t;
}

}  // namespace hsl
