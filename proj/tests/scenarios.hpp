#pragma once

// Randomized scenario generation shared by the property tests and the
// acceptance runner.

#include <random>

#include "hsl/harness.hpp"

namespace hsl::testing {

struct RandomScenarioOptions {
  bool finite_gst = false;     // liveness suites need GST inside the horizon
  bool hold_before_gst = true;  // AdversarialHold; otherwise random pre-GST noise
  std::uint64_t commits = 15;
  SimTime horizon = 400'000;
};

/// Draws n, protocol, pacemaker, leaders, delays, GST and up to f corrupted
/// nodes with independently drawn strategies. The protocol alternates with
/// `index` so both are equally represented.
inline ScenarioConfig random_scenario(std::mt19937_64& rng, std::size_t index, const RandomScenarioOptions& o = {}) {
  ScenarioConfig c;
  static constexpr std::size_t sizes[] = {4, 7, 10};
  c.n = sizes[rng() % 3];
  c.f = (c.n - 1) / 3;
  c.name = "random-" + std::to_string(index);
  c.protocol = index % 2 == 0 ? ProtocolKind::HotStuff3 : ProtocolKind::HotStuff2;
  c.pacemaker = static_cast<PacemakerKind>((index / 2) % 3);
  c.leader_mode = rng() % 2 == 0 ? LeaderMode::RoundRobin : LeaderMode::SeededRandom;
  c.delay.delta_cap = 100;
  c.delay.delta_min = 1 + static_cast<SimTime>(rng() % 20);
  c.delay.delta_max = c.delay.delta_min + static_cast<SimTime>(rng() % static_cast<std::uint64_t>(100 - c.delay.delta_min + 1));
  if (o.finite_gst) c.delay.gst = static_cast<SimTime>(rng() % 3000);
  else c.delay.gst = rng() % 4 == 0 ? kNever : static_cast<SimTime>(rng() % 5000);
  if (o.hold_before_gst) {
    c.delay.pre_gst = PreGstPolicy::AdversarialHold;
  } else {
    c.delay.pre_gst = PreGstPolicy::RandomUpTo;
    c.delay.pre_gst_max = 1 + static_cast<SimTime>(rng() % 2000);
  }
  std::vector<NodeId> ids(c.n);
  for (NodeId i = 0; i < c.n; ++i) ids[i] = i;
  std::shuffle(ids.begin(), ids.end(), rng);
  const std::size_t corrupted = rng() % (c.f + 1);
  for (std::size_t b = 0; b < corrupted; ++b) {
    ByzantineStrategy s;
    s.kind = static_cast<StrategyKind>(rng() % 5);
    if (s.kind == StrategyKind::Crash) s.at_time = static_cast<SimTime>(rng() % 3000);
    if (s.kind == StrategyKind::SilentLeader && rng() % 2 == 0) s.only_view = 1 + rng() % 10;
    c.byzantine.emplace_back(ids[b], s);
  }
  c.seed = rng();
  c.stop.commits = o.commits;
  c.stop.horizon = o.horizon;
  c.validate();
  return c;
}

}  // namespace hsl::testing
