// hslsim: run, sweep, check and replay simulated consensus scenarios.
//
// Exit codes: 0 every check passed, 1 a safety/liveness/determinism
// violation, 2 a configuration, parse or I/O error.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "hsl/harness.hpp"

namespace fs = std::filesystem;
using namespace hsl;

namespace {

constexpr int kPass = 0;
constexpr int kViolation = 1;
constexpr int kConfigError = 2;

struct Outcome {
  Trace trace;
  MetricsReport metrics;
  SafetyVerdict safety;
  LivenessVerdict liveness;

  bool ok() const { return safety.pass && liveness.status != LivenessStatus::Fail; }
};

Outcome evaluate(Trace t) {
  Outcome o;
  o.metrics = compute_metrics(t);
  o.safety = check_safety(t);
  o.liveness = check_liveness(t);
  o.trace = std::move(t);
  return o;
}

ScenarioConfig load(const std::string& path, std::optional<std::uint64_t> seed) {
  ScenarioConfig c = parse_scenario(path);
  if (seed) c.seed = *seed;
  return c;
}

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConsensusError(ErrorKind::IoError, "cannot write " + p.string());
  out << body;
  if (!out) throw ConsensusError(ErrorKind::IoError, "short write to " + p.string());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConsensusError(ErrorKind::IoError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int cmd_run(const std::string& scenario, std::optional<std::uint64_t> seed, const std::string& out_dir,
            const std::string& format) {
  const ScenarioConfig cfg = load(scenario, seed);
  const Outcome o = evaluate(simulate(cfg));
  if (format == "jsonl") {
    fs::create_directories(out_dir);
    const std::string stem = cfg.name + "-seed" + std::to_string(cfg.seed);
    write_file(fs::path(out_dir) / (stem + ".jsonl"), to_jsonl(o.trace));
    write_file(fs::path(out_dir) / (stem + ".report.json"),
               report_json(o.trace, o.metrics, o.safety, o.liveness).dump(2) + "\n");
  }
  print_table(std::cout, o.trace, o.metrics, o.safety, o.liveness);
  return o.ok() ? kPass : kViolation;
}

/// Applies `key = value` on top of a scenario by re-parsing its text form.
ScenarioConfig with_override(const ScenarioConfig& base, const std::string& key, const std::string& value) {
  std::string text = base.to_text() + key + " = " + value + "\n";
  if (key == "n") text += "f = " + std::to_string((std::stoul(value) - 1) / 3) + "\n";
  return parse_scenario_text(text);
}

int cmd_sweep(const std::string& scenario, const std::string& vary, std::uint64_t seeds) {
  const ScenarioConfig base = parse_scenario(scenario);
  const auto eq = vary.find('=');
  if (eq == std::string::npos) throw ConsensusError(ErrorKind::ParseError, "--vary expects key=v1,v2,...");
  const std::string key = vary.substr(0, eq);
  const auto values = hsl::detail::split(vary.substr(eq + 1), ',');
  if (values.empty()) throw ConsensusError(ErrorKind::ParseError, "--vary lists no values");

  struct Row {
    std::string value;
    std::uint64_t seed;
    Outcome outcome;
  };
  std::vector<ScenarioConfig> cells;
  for (const auto& v : values) {
    ScenarioConfig c = with_override(base, key, v);
    for (std::uint64_t s = 0; s < seeds; ++s) {
      c.seed = base.seed + s;
      cells.push_back(c);
    }
  }
  std::vector<Row> rows;
  for (std::size_t i = 0; i < cells.size(); ++i)
    rows.push_back(Row{values[i / seeds], cells[i].seed, evaluate(simulate(cells[i]))});
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.outcome.trace.config.n, a.value, a.seed) < std::tie(b.outcome.trace.config.n, b.value, b.seed);
  });

  std::printf("%-12s %-8s %-7s %-9s %-10s %-12s %-14s %-12s\n", key.c_str(), "seed", "safety", "liveness",
              "decisions", "msgs/dec", "latency mean", "msgs->first");
  bool ok = true;
  for (const auto& r : rows) {
    const auto& m = r.outcome.metrics;
    std::printf("%-12s %-8llu %-7s %-9s %-10llu %-12.2f %-14.2f %-12llu\n", r.value.c_str(),
                static_cast<unsigned long long>(r.seed), r.outcome.safety.pass ? "PASS" : "FAIL",
                to_string(r.outcome.liveness.status), static_cast<unsigned long long>(m.decisions),
                m.messages_per_decision, m.mean_latency, static_cast<unsigned long long>(m.messages_until_first_commit));
    ok = ok && r.outcome.ok();
  }
  return ok ? kPass : kViolation;
}

int cmd_check(const std::string& trace_path) {
  std::ifstream in(trace_path, std::ios::binary);
  if (!in) throw ConsensusError(ErrorKind::IoError, "cannot open " + trace_path);
  const Outcome o = evaluate(parse_jsonl(in));
  print_table(std::cout, o.trace, o.metrics, o.safety, o.liveness);
  return o.ok() ? kPass : kViolation;
}

int cmd_replay(const std::string& scenario, std::uint64_t seed, const std::string& expect_path) {
  const std::string expected = read_file(expect_path);
  const std::string actual = to_jsonl(simulate(load(scenario, seed)));
  if (actual == expected) {
    std::cout << "replay identical (" << actual.size() << " bytes)\n";
    return kPass;
  }
  std::istringstream a(actual);
  std::istringstream e(expected);
  std::string la;
  std::string le;
  std::size_t line = 0;
  while (true) {
    ++line;
    const bool ga = static_cast<bool>(std::getline(a, la));
    const bool ge = static_cast<bool>(std::getline(e, le));
    if (!ga && !ge) break;
    if (ga != ge || la != le) {
      std::cout << "replay diverges at line " << line << "\n  expected: " << (ge ? le : "<eof>")
                << "\n  actual:   " << (ga ? la : "<eof>") << "\n";
      break;
    }
  }
  return kViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic simulator for chained and two-phase HotStuff"};
  app.require_subcommand(1);

  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::string format = "jsonl";
  auto* run = app.add_subcommand("run", "Simulate one scenario and report");
  run->add_option("scenario", scenario, "Scenario file or preset:<name>")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out_dir, "Directory for the trace and report");
  run->add_option("--format", format, "jsonl writes files; summary prints the table only")
      ->check(CLI::IsMember({"jsonl", "summary"}));

  std::string vary;
  std::uint64_t seeds = 1;
  auto* sweep = app.add_subcommand("sweep", "Run a grid of scenarios");
  sweep->add_option("scenario", scenario, "Scenario file or preset:<name>")->required();
  sweep->add_option("--vary", vary, "key=v1,v2,...")->required();
  sweep->add_option("--seeds", seeds, "Seeds per cell")->check(CLI::PositiveNumber);

  std::string trace_path;
  auto* check = app.add_subcommand("check", "Re-run the checkers on a stored trace");
  check->add_option("trace", trace_path, "JSON Lines trace")->required();

  std::uint64_t replay_seed = 0;
  std::string expect_path;
  auto* replay = app.add_subcommand("replay", "Re-simulate and byte-compare against a stored trace");
  replay->add_option("scenario", scenario, "Scenario file or preset:<name>")->required();
  replay->add_option("--seed", replay_seed, "Seed to replay")->required();
  replay->add_option("--expect", expect_path, "Expected trace")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kPass : kConfigError;
  }

  try {
    if (*run) return cmd_run(scenario, seed, out_dir, format);
    if (*sweep) return cmd_sweep(scenario, vary, seeds);
    if (*check) return cmd_check(trace_path);
    if (*replay) return cmd_replay(scenario, replay_seed, expect_path);
  } catch (const ConsensusError& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (e.kind() == ErrorKind::ForgedToken || e.kind() == ErrorKind::ClockRegression) return kViolation;
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}
