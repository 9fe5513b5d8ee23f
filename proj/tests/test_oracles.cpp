// Independent oracles: brute-force enumeration of vote patterns and quorum
// pairs, and the bounded model checker of the voting rules.

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "helpers.hpp"
#include "model_check.hpp"

using namespace hsl;

namespace {

// Every k-subset of {0..n-1} as a bitmask.
std::vector<std::uint32_t> subsets(std::size_t n, std::size_t k) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t m = 0; m < (1u << n); ++m)
    if (static_cast<std::size_t>(__builtin_popcount(m)) == k) out.push_back(m);
  return out;
}

}  // namespace

// Correct nodes 0..2 each cast at most one vote for A or B; Byzantine node 3
// votes for any subset. Every assignment is fed to a collector in every
// delivery order; the oracle count says which blocks reach 3 votes.
TEST(QuorumOracle, UniquenessPerViewOverAllVoteOrderings) {
  const Block a = make_block(kGenesisId, 1, genesis_qc(4), 0, 1);
  const Block b = make_block(kGenesisId, 1, genesis_qc(4), 1, 1);
  std::size_t executions = 0;
  for (int c0 = 0; c0 < 3; ++c0)
    for (int c1 = 0; c1 < 3; ++c1)
      for (int c2 = 0; c2 < 3; ++c2)
        for (int byz = 0; byz < 4; ++byz) {
          std::vector<Vote> votes;
          const int choice[3] = {c0, c1, c2};
          for (NodeId i = 0; i < 3; ++i) {
            if (choice[i] == 1) votes.push_back(make_vote(a.id, 1, Phase::Prepare, i));
            if (choice[i] == 2) votes.push_back(make_vote(b.id, 1, Phase::Prepare, i));
          }
          if (byz & 1) votes.push_back(make_vote(a.id, 1, Phase::Prepare, 3));
          if (byz & 2) votes.push_back(make_vote(b.id, 1, Phase::Prepare, 3));
          const auto tally = [&](BlockId id) {
            return std::count_if(votes.begin(), votes.end(), [&](const Vote& v) { return v.block_id == id; });
          };
          const bool oracle_a = tally(a.id) >= 3;
          const bool oracle_b = tally(b.id) >= 3;
          ASSERT_FALSE(oracle_a && oracle_b);

          std::vector<std::size_t> order(votes.size());
          std::iota(order.begin(), order.end(), 0);
          do {
            HotStuff2Node collector(hsl::testing::params(1));
            std::size_t qa = 0;
            std::size_t qb = 0;
            for (std::size_t k : order) {
              const ProtocolOutput out = collector.on_vote(votes[k]);
              for (const QcMsg* m : hsl::testing::sent<QcMsg>(out)) {
                ASSERT_TRUE(verify_qc(m->qc, 4));
                (m->qc.block_id == a.id ? qa : qb)++;
              }
            }
            ASSERT_EQ(qa, oracle_a ? 1u : 0u);
            ASSERT_EQ(qb, oracle_b ? 1u : 0u);
            ++executions;
          } while (std::next_permutation(order.begin(), order.end()));
        }
  EXPECT_GT(executions, 1000u);
}

// Any two 2f+1 quorums share at least f+1 nodes, so at least one correct node
// whichever f nodes are corrupted.
TEST(QuorumOracle, QuorumPairsIntersectInACorrectNode) {
  for (std::size_t n : {4u, 7u, 10u}) {
    const std::size_t f = fault_bound(n);
    const auto quorums = subsets(n, quorum_threshold(n));
    const auto faults = subsets(n, f);
    for (std::uint32_t q1 : quorums)
      for (std::uint32_t q2 : quorums) {
        const std::uint32_t both = q1 & q2;
        ASSERT_GE(static_cast<std::size_t>(__builtin_popcount(both)), f + 1);
        for (std::uint32_t bad : faults) ASSERT_NE(both & ~bad, 0u);
      }
  }
}

// Equivocation split at n=4: correct nodes {0,1} see A and {2} sees B (3 is
// the equivocator). Neither side has 3 correct votes.
TEST(QuorumOracle, EquivocationSplitCannotCertifyFromCorrectVotesAlone) {
  const std::size_t n = 4;
  const NodeId leader = 3;
  std::size_t side_a = 0;
  std::size_t side_b = 0;
  for (NodeId j = 0; j < n; ++j) {
    if (j == leader) continue;
    if (j < (n + 1) / 2) ++side_a;
    if (j >= n / 2) ++side_b;
  }
  EXPECT_LT(side_a, quorum_threshold(n));
  EXPECT_LT(side_b, quorum_threshold(n));
}

TEST(ModelCheck, ChainedRulesSafeToDepthSix) {
  mc::Options o;
  o.rules = mc::Rules::Chained;
  o.depth = 6;
  const auto r = mc::check(o);
  EXPECT_FALSE(r.violation) << r.witness;
  EXPECT_GT(r.states, 1000u);
}

TEST(ModelCheck, TwoPhaseRulesSafeToDepthSix) {
  mc::Options o;
  o.rules = mc::Rules::TwoPhase;
  o.depth = 6;
  const auto r = mc::check(o);
  EXPECT_FALSE(r.violation) << r.witness;
  EXPECT_GT(r.states, 10000u);
}

TEST(ModelCheck, FindsEachMutation) {
  struct Case {
    mc::Rules rules;
    bool drop_lock, double_vote, two_chain;
  };
  for (const Case& c : {Case{mc::Rules::Chained, true, false, false}, Case{mc::Rules::Chained, false, true, false},
                        Case{mc::Rules::Chained, false, false, true}, Case{mc::Rules::TwoPhase, true, false, false},
                        Case{mc::Rules::TwoPhase, false, true, false}}) {
    mc::Options o;
    o.rules = c.rules;
    o.depth = 6;
    o.drop_lock_update = c.drop_lock;
    o.allow_double_vote = c.double_vote;
    o.two_chain_commit = c.two_chain;
    const auto r = mc::check(o);
    EXPECT_TRUE(r.violation) << "rules=" << static_cast<int>(c.rules) << " drop=" << c.drop_lock
                             << " double=" << c.double_vote << " two-chain=" << c.two_chain;
  }
}

TEST(ModelCheck, WitnessNamesConflictingBlocks) {
  mc::Options o;
  o.rules = mc::Rules::Chained;
  o.depth = 6;
  o.two_chain_commit = true;
  const auto r = mc::check(o);
  ASSERT_TRUE(r.violation);
  EXPECT_NE(r.witness.find("conflicting commits"), std::string::npos);
}
