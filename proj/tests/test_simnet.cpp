#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace hsl;
using hsl::testing::count_records;

namespace {

ScenarioConfig scenario(const std::string& extra = {}) {
  return parse_scenario_text("n = 4\nprotocol = hotstuff2\ndelta = 100\ndelta_min = 10\ndelta_max = 10\n" + extra);
}

}  // namespace

TEST(Network, PostGstDrawsFromRange) {
  DelayModel m;
  m.gst = 0;
  m.delta_min = m.delta_max = 10;
  m.delta_cap = 1000;
  Network net(m, 1);
  EXPECT_EQ(net.delivery_time(0, 0), 10);
}

TEST(Network, AdversarialHoldDeliversAtGstPlusDelta) {
  DelayModel m;
  m.gst = 500;
  m.delta_cap = 100;
  m.pre_gst = PreGstPolicy::AdversarialHold;
  Network net(m, 1);
  EXPECT_EQ(net.delivery_time(0, 0), 600);
  EXPECT_EQ(net.delivery_time(499, 0), 600);
}

TEST(Network, PayloadCostIsLinear) {
  DelayModel m;
  m.gst = 0;
  m.delta_min = m.delta_max = 10;
  m.payload_cost = 1;
  Network net(m, 1);
  EXPECT_EQ(net.delivery_time(70, 50), 70 + 60);
}

TEST(Network, RandomPreGstNeverExceedsBound) {
  DelayModel m;
  m.gst = 1000;
  m.delta_cap = 100;
  m.delta_min = 1;
  m.delta_max = 50;
  m.pre_gst = PreGstPolicy::RandomUpTo;
  m.pre_gst_max = 5000;
  Network net(m, 7);
  bool below_cap = false;
  for (SimTime s = 0; s < 1000; s += 3) {
    const SimTime at = net.delivery_time(s, 0);
    EXPECT_GT(at, s);
    EXPECT_LE(at, 1100);
    below_cap = below_cap || at < 1100;
  }
  EXPECT_TRUE(below_cap);
}

TEST(Network, MaxDelayUsesLatestLegalInstant) {
  DelayModel m;
  m.gst = 300;
  m.delta_cap = 100;
  m.delta_min = m.delta_max = 5;
  m.payload_cost = 2;
  Network net(m, 1);
  EXPECT_EQ(net.delivery_time(0, 3, true), 406);
  EXPECT_EQ(net.delivery_time(500, 3, true), 606);
}

TEST(Network, InfiniteGstNeverDelivers) {
  DelayModel m;
  m.gst = kNever;
  Network net(m, 1);
  EXPECT_EQ(net.delivery_time(0, 0), kNever);
}

TEST(EventQueue, EqualTimesPopInInsertionOrder) {
  EventQueue q;
  for (NodeId i = 0; i < 5; ++i) {
    SimEvent e;
    e.time = i % 2 == 0 ? 10 : 5;
    e.node = i;
    q.push(e);
  }
  std::vector<NodeId> order;
  while (!q.empty()) order.push_back(q.pop().node);
  EXPECT_EQ(order, (std::vector<NodeId>{1, 3, 0, 2, 4}));
}

TEST(Simulation, FaultlessReachesCommitTargetEverywhere) {
  const Trace t = simulate(scenario("stop = commits:100\n"));
  for (NodeId i = 0; i < 4; ++i) EXPECT_GE(t.commit_log(i).size(), 100u);
  EXPECT_EQ(count_records(t, RecordKind::Timeout), 0u);
  EXPECT_FALSE(t.halted);
}

TEST(Simulation, SupersededTimersLeaveStaleRecords) {
  const Trace t = simulate(scenario("stop = commits:5\nbase_timeout = 200\n"));
  EXPECT_GT(count_records(t, RecordKind::TimerStale, "view-timeout"), 0u);
  EXPECT_EQ(count_records(t, RecordKind::Timeout), 0u);
}

TEST(Simulation, SameSeedSameTraceOtherSeedDiffers) {
  const std::string extra = "delta_min = 1\ndelta_max = 90\nstop = commits:20\n";
  const ScenarioConfig a = scenario(extra + "seed = 3\n");
  const ScenarioConfig b = scenario(extra + "seed = 4\n");
  EXPECT_EQ(to_jsonl(simulate(a)), to_jsonl(simulate(a)));
  EXPECT_NE(to_jsonl(simulate(a)), to_jsonl(simulate(b)));
}

TEST(Simulation, ExcessCorruptionRejected) {
  ScenarioConfig c = scenario();
  c.byzantine = {{0, ByzantineStrategy{}}, {1, ByzantineStrategy{}}};
  try {
    simulate(c);
    FAIL();
  } catch (const ConsensusError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigInvalid);
  }
}

TEST(Simulation, InfiniteGstKeepsSafety) {
  const Trace t = simulate(scenario("gst = inf\nstop = horizon:50000\n"));
  EXPECT_TRUE(t.commits.empty());
  EXPECT_TRUE(check_safety(t).pass);
  EXPECT_EQ(check_liveness(t).status, LivenessStatus::NotApplicable);
}

TEST(Strategies, EquivocatorSplitsRecipientsByIdHalves) {
  const Trace t = simulate(scenario("byzantine = 3:equivocator\nstop = commits:10\n"));
  std::map<NodeId, BlockId> got;
  for (const auto& r : t.records)
    if (r.kind == RecordKind::Send && r.node == 3 && r.label == "proposal" && r.view == 3) got[r.peer] = r.block;
  ASSERT_EQ(got.size(), 3u);
  EXPECT_EQ(got[0], got[1]);
  EXPECT_NE(got[1], got[2]);
  EXPECT_TRUE(check_safety(t).pass);
}

TEST(Strategies, SilentLeaderForcesTimeoutAndNextView) {
  const Trace t = simulate(scenario("byzantine = 1:silent-leader@1\nstop = commits:5\n"));
  for (const auto& r : t.records)
    EXPECT_FALSE(r.kind == RecordKind::Send && r.node == 1 && r.label == "proposal" && r.view == 1);
  std::set<NodeId> timed_out;
  std::set<NodeId> entered;
  for (const auto& r : t.records) {
    if (r.kind == RecordKind::Timeout && r.view == 1) timed_out.insert(r.node);
    if (r.kind == RecordKind::EnterView && r.view == 2 && r.node != 1) entered.insert(r.node);
  }
  EXPECT_EQ(timed_out, (std::set<NodeId>{0, 1, 2, 3}));
  EXPECT_EQ(entered, (std::set<NodeId>{0, 2, 3}));
  EXPECT_TRUE(check_safety(t).pass);
  EXPECT_EQ(check_liveness(t).status, LivenessStatus::Pass);
}

TEST(Strategies, CrashedNodeIsSilentAndSuitesPass) {
  const Trace t = simulate(scenario("byzantine = 1:crash@0\nstop = commits:10\n"));
  for (const auto& r : t.records) EXPECT_FALSE(r.kind == RecordKind::Send && r.node == 1);
  EXPECT_GT(count_records(t, RecordKind::Drop), 0u);
  EXPECT_TRUE(t.commit_log(1).empty());
  EXPECT_TRUE(check_safety(t).pass);
  EXPECT_EQ(check_liveness(t).status, LivenessStatus::Pass);
}

TEST(Strategies, VoteWithholderSendsNoVotes) {
  const Trace t = simulate(scenario("byzantine = 2:vote-withholder\nstop = commits:10\n"));
  for (const auto& r : t.records) EXPECT_FALSE(r.kind == RecordKind::Send && r.node == 2 && r.label == "vote");
  EXPECT_GE(t.commit_log(0).size(), 10u);
}

TEST(Strategies, MaxDelaySenderArrivesExactlyDeltaLater) {
  const Trace t = simulate(scenario("byzantine = 2:max-delay\nstop = commits:5\n"));
  std::map<NodeId, std::vector<SimTime>> sent_at;
  std::map<NodeId, std::vector<SimTime>> delivered_at;
  for (const auto& r : t.records) {
    if (r.kind == RecordKind::Send && r.node == 2) sent_at[r.peer].push_back(r.time);
    if (r.kind == RecordKind::Deliver && r.peer == 2) delivered_at[r.node].push_back(r.time);
  }
  std::size_t checked = 0;
  for (const auto& [peer, ds] : delivered_at) {
    ASSERT_LE(ds.size(), sent_at[peer].size());
    for (std::size_t k = 0; k < ds.size(); ++k, ++checked) EXPECT_EQ(ds[k], sent_at[peer][k] + 100);
  }
  EXPECT_GT(checked, 0u);
  EXPECT_TRUE(check_safety(t).pass);
}

TEST(Tokens, ForgedCorrectTokenDetected) {
  Simulation<HotStuff2Node> sim(scenario("byzantine = 3:max-delay\nstop = commits:1\n"));
  const Trace t = sim.run();
  const BlockId b1 = sim.node(0).store().committed().at(1);
  const ViewNumber v1 = sim.node(0).store().get(b1).view;
  EXPECT_NO_THROW(sim.inject(3, Outgoing{0, VoteMsg{make_vote(b1, v1, Phase::Prepare, 0)}}));
  EXPECT_NO_THROW(sim.inject(3, Outgoing{0, VoteMsg{make_vote(b1, v1, Phase::Prepare, 3)}}));
  try {
    sim.inject(3, Outgoing{1, VoteMsg{make_vote(b1, v1 + 7, Phase::Commit, 0)}});
    FAIL();
  } catch (const ConsensusError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ForgedToken);
  }
  EXPECT_FALSE(t.commits.empty());
}
