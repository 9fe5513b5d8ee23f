#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace hsl;

namespace {

Pacemaker make(PacemakerKind kind, NodeId self, std::size_t n = 4, SimTime base = 100) {
  PacemakerConfig c;
  c.kind = kind;
  c.n = n;
  c.base_timeout = base;
  c.relay_timeout = 50;
  return Pacemaker(c, self, LeaderSchedule{n, LeaderMode::RoundRobin, 0});
}

const QuorumCertificate kKey = genesis_qc(4);

template <class T>
std::vector<const T*> bodies(const PacemakerDecision& d) {
  std::vector<const T*> out;
  for (const auto& m : d.messages)
    if (auto* x = std::get_if<T>(&m.body)) out.push_back(x);
  return out;
}

/// Times out of the current view and collects syncs from the two lowest
/// other nodes, which makes 2f+1 at n=4.
PacemakerDecision fail_view(Pacemaker& pm) {
  const ViewNumber v = pm.view();
  pm.on_event(pm::LocalTimeout{v}, kKey);
  PacemakerDecision last;
  for (NodeId s : {1u, 2u}) last = pm.on_event(pm::SyncReceived{s, v + 1}, kKey);
  return last;
}

}  // namespace

TEST(Backoff, DoublesPerFailureAndCaps) {
  Pacemaker pm = make(PacemakerKind::Baseline, 0);
  const PacemakerDecision start = pm.start();
  ASSERT_EQ(start.enter_view, std::optional<ViewNumber>(1));
  EXPECT_TRUE(start.via_qc);
  EXPECT_EQ(start.timers.at(0).delay, 100);
  for (std::uint32_t k = 1; k <= 12; ++k) {
    const PacemakerDecision d = fail_view(pm);
    ASSERT_EQ(d.enter_view, std::optional<ViewNumber>(k + 1));
    const SimTime expected = 100 * (SimTime{1} << std::min<std::uint32_t>(k, 10));
    EXPECT_EQ(d.timers.at(0).delay, expected) << "after " << k << " failures";
  }
  EXPECT_EQ(pm.max_timeout_armed(), 100 * 1024);
}

TEST(Backoff, CertificateResetsFailures) {
  Pacemaker pm = make(PacemakerKind::Baseline, 0);
  pm.start();
  fail_view(pm);
  fail_view(pm);
  EXPECT_EQ(pm.consecutive_failures(), 2u);
  const PacemakerDecision d = pm.on_event(pm::QcObserved{3}, kKey);
  EXPECT_EQ(d.enter_view, std::optional<ViewNumber>(4));
  EXPECT_TRUE(d.via_qc);
  EXPECT_EQ(pm.consecutive_failures(), 0u);
  EXPECT_EQ(d.timers.at(0).delay, 100);
}

TEST(Baseline, TimeoutBroadcastsSyncAndWaitsForQuorum) {
  Pacemaker pm = make(PacemakerKind::Baseline, 0);
  pm.start();
  const PacemakerDecision d = pm.on_event(pm::LocalTimeout{1}, kKey);
  const auto syncs = bodies<SyncMsg>(d);
  ASSERT_EQ(syncs.size(), 1u);
  EXPECT_EQ(syncs[0]->view, 2u);
  EXPECT_FALSE(d.messages[0].to.has_value());
  EXPECT_FALSE(d.enter_view);
  EXPECT_FALSE(pm.on_event(pm::SyncReceived{1, 2}, kKey).enter_view);
  const PacemakerDecision third = pm.on_event(pm::SyncReceived{3, 2}, kKey);
  EXPECT_EQ(third.enter_view, std::optional<ViewNumber>(2));
  EXPECT_FALSE(third.via_qc);
}

TEST(Baseline, EchoesAfterFPlusOneSyncs) {
  Pacemaker pm = make(PacemakerKind::Baseline, 0);
  pm.start();
  EXPECT_TRUE(pm.on_event(pm::SyncReceived{1, 2}, kKey).messages.empty());
  const PacemakerDecision echo = pm.on_event(pm::SyncReceived{2, 2}, kKey);
  ASSERT_EQ(bodies<SyncMsg>(echo).size(), 1u);
  EXPECT_EQ(echo.enter_view, std::optional<ViewNumber>(2));
  EXPECT_TRUE(pm.on_event(pm::SyncReceived{3, 2}, kKey).messages.empty());
}

TEST(Baseline, StaleInputsIgnored) {
  Pacemaker pm = make(PacemakerKind::Baseline, 0);
  pm.start();
  pm.on_event(pm::QcObserved{4}, kKey);
  ASSERT_EQ(pm.view(), 5u);
  EXPECT_TRUE(pm.on_event(pm::LocalTimeout{3}, kKey).messages.empty());
  for (NodeId s : {1u, 2u, 3u}) EXPECT_FALSE(pm.on_event(pm::SyncReceived{s, 4}, kKey).enter_view);
  EXPECT_FALSE(pm.on_event(pm::QcObserved{2}, kKey).enter_view);
}

TEST(Baseline, DuplicateSyncSenderCountsOnce) {
  Pacemaker pm = make(PacemakerKind::Baseline, 0);
  pm.start();
  pm.on_event(pm::LocalTimeout{1}, kKey);
  for (int i = 0; i < 5; ++i) EXPECT_FALSE(pm.on_event(pm::SyncReceived{1, 2}, kKey).enter_view);
}

TEST(Epoch, LocalAdvanceInsideEpochSyncAtBoundary) {
  Pacemaker pm = make(PacemakerKind::Epoch, 0, 7);
  EXPECT_EQ(pm.epoch().epoch_length, 3u);
  pm.start();
  const PacemakerDecision inside = pm.on_event(pm::LocalTimeout{1}, kKey);
  EXPECT_TRUE(inside.messages.empty());
  EXPECT_EQ(inside.enter_view, std::optional<ViewNumber>(2));
  EXPECT_FALSE(inside.via_qc);
  const PacemakerDecision boundary = pm.on_event(pm::LocalTimeout{2}, kKey);
  ASSERT_EQ(bodies<SyncMsg>(boundary).size(), 1u);
  EXPECT_EQ(bodies<SyncMsg>(boundary)[0]->view, 3u);
  EXPECT_FALSE(boundary.enter_view);
  for (NodeId s : {1u, 2u, 3u}) pm.on_event(pm::SyncReceived{s, 3}, kKey);
  EXPECT_EQ(pm.view(), 2u);
  EXPECT_EQ(pm.on_event(pm::SyncReceived{4, 3}, kKey).enter_view, std::optional<ViewNumber>(3));
}

TEST(Epoch, SyncForMidEpochViewIgnored) {
  Pacemaker pm = make(PacemakerKind::Epoch, 0, 7);
  pm.start();
  for (NodeId s = 1; s < 7; ++s) {
    const PacemakerDecision d = pm.on_event(pm::SyncReceived{s, 4}, kKey);
    EXPECT_TRUE(d.messages.empty());
    EXPECT_FALSE(d.enter_view);
  }
}

TEST(Relayer, WishGoesToNextLeaderThenFallbacks) {
  Pacemaker pm = make(PacemakerKind::Relayer, 0, 7);
  pm.start();
  const PacemakerDecision d = pm.on_event(pm::LocalTimeout{1}, kKey);
  ASSERT_EQ(bodies<WishMsg>(d).size(), 1u);
  EXPECT_EQ(d.messages[0].to, std::optional<NodeId>(2));
  ASSERT_EQ(d.timers.size(), 1u);
  EXPECT_EQ(d.timers[0].kind, TimerKind::RelayTimeout);
  EXPECT_EQ(d.timers[0].stage, 1u);
  EXPECT_EQ(d.timers[0].delay, 50);

  const PacemakerDecision s1 = pm.on_event(pm::RelayTimeout{2, 1}, kKey);
  EXPECT_EQ(s1.messages.at(0).to, std::optional<NodeId>(3));
  ASSERT_EQ(s1.timers.size(), 1u);
  EXPECT_EQ(s1.timers[0].stage, 2u);
  const PacemakerDecision s2 = pm.on_event(pm::RelayTimeout{2, 2}, kKey);
  EXPECT_EQ(s2.messages.at(0).to, std::optional<NodeId>(4));
  EXPECT_TRUE(s2.timers.empty());
}

TEST(Relayer, RelayerAggregatesIntoViewCertificate) {
  Pacemaker relayer = make(PacemakerKind::Relayer, 2, 4);
  relayer.start();
  EXPECT_FALSE(relayer.on_event(pm::WishReceived{0, 2}, kKey).enter_view);
  EXPECT_FALSE(relayer.on_event(pm::WishReceived{1, 2}, kKey).enter_view);
  const PacemakerDecision d = relayer.on_event(pm::WishReceived{3, 2}, kKey);
  ASSERT_EQ(bodies<ViewCertMsg>(d).size(), 1u);
  EXPECT_FALSE(d.messages[0].to.has_value());
  EXPECT_EQ(d.enter_view, std::optional<ViewNumber>(2));
  EXPECT_TRUE(relayer.on_event(pm::WishReceived{1, 2}, kKey).messages.empty());
}

TEST(Relayer, CertificateEntersAndSilencesFallback) {
  Pacemaker pm = make(PacemakerKind::Relayer, 0, 4);
  pm.start();
  pm.on_event(pm::LocalTimeout{1}, kKey);
  const PacemakerDecision d = pm.on_event(pm::CertReceived{2}, kKey);
  EXPECT_EQ(d.enter_view, std::optional<ViewNumber>(2));
  EXPECT_TRUE(d.messages.empty());
  const PacemakerDecision late = pm.on_event(pm::RelayTimeout{2, 1}, kKey);
  EXPECT_TRUE(late.messages.empty());
  EXPECT_TRUE(late.timers.empty());
}

TEST(Leaders, RoundRobinAndSeededRandom) {
  for (ViewNumber v = 0; v < 20; ++v) EXPECT_EQ(leader_of(v, 7, LeaderMode::RoundRobin), v % 7);
  std::vector<std::size_t> hits(7, 0);
  for (ViewNumber v = 0; v < 7000; ++v) {
    const NodeId l = leader_of(v, 7, LeaderMode::SeededRandom, 42);
    ASSERT_LT(l, 7u);
    EXPECT_EQ(l, leader_of(v, 7, LeaderMode::SeededRandom, 42));
    ++hits[l];
  }
  for (std::size_t h : hits) {
    EXPECT_GT(h, 800u);
    EXPECT_LT(h, 1200u);
  }
}
