#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "five_edge.hpp"
#include "qgraph/finite_mdp.hpp"
#include "random_mdp.hpp"

using namespace qgraph;
using qgraph::testing::five_edge_edge;
using qgraph::testing::five_edge_rows;

namespace {

DataGraph five_edge_graph() {
  GraphConfig c;
  c.gamma = 0.99;
  DataGraph g(c);
  for (const auto& r : five_edge_rows()) g.add_transition(r.s, r.a, r.r, r.s2, r.terminal);
  return g;
}

// Three educational states: 0 terminal, 1 and 2 transient.
struct Edu {
  int from, to;
  double r;
  bool terminal;
};
constexpr Edu kEdu[] = {{1, 0, 0.0, true}, {1, 2, -1.0, false}, {2, 1, -1.0, false},
                        {2, 2, -1.0, false}};

std::vector<double> edu_state(int i) { return {double(i), 1.0}; }
std::vector<double> edu_action(int from, int to) { return {double(to - from)}; }

DataGraph edu_graph(unsigned mask, double gamma = 0.9) {
  GraphConfig c;
  c.gamma = gamma;
  DataGraph g(c);
  for (unsigned i = 0; i < 4; ++i) {
    if (!(mask & (1u << i))) continue;
    const Edu& e = kEdu[i];
    g.add_transition(edu_state(e.from), edu_action(e.from, e.to), e.r, edu_state(e.to),
                     e.terminal);
  }
  return g;
}

TransitionClass class_of(const DataGraph& g, int from, int to) {
  const auto classes = classify_transitions(g);
  const auto id = g.find_edge(state_key(edu_state(from)), action_key(edu_action(from, to)),
                              state_key(edu_state(to)));
  return classes.at(*id);
}

}  // namespace

TEST(Prune, FiveEdgeDropsDeadEnd) {
  const DataGraph g = five_edge_graph();
  const PrunedSubgraph sub = prune_loose_ends(g);
  EXPECT_EQ(sub.size(), 4u);
  EXPECT_FALSE(sub.contains(five_edge_edge(g, 0).id));
  for (int i = 1; i < 5; ++i) EXPECT_TRUE(sub.contains(five_edge_edge(g, i).id));
}

TEST(Prune, EmptyGraph) {
  const DataGraph g;
  EXPECT_EQ(prune_loose_ends(g).size(), 0u);
  EXPECT_EQ(q_iteration(prune_loose_ends(g), 0.9).size(), 0u);
}

TEST(Prune, ChainsOfLooseEndsPeelCompletely) {
  GraphConfig c;
  c.gamma = 0.9;
  DataGraph g(c);
  for (int i = 0; i < 5; ++i) {
    g.add_transition(std::vector<double>{double(i)}, std::vector<double>{1.0}, -1.0,
                     std::vector<double>{double(i + 1)}, false);
  }
  EXPECT_EQ(prune_loose_ends(g).size(), 0u);
}

TEST(QIteration, FiveEdgeValues) {
  const DataGraph g = five_edge_graph();
  const QTable q = q_iteration(prune_loose_ends(g), 0.99, 1e-10);
  EXPECT_NEAR(*q.for_edge(five_edge_edge(g, 1).id), -100.0, 1e-9);
  EXPECT_NEAR(*q.for_edge(five_edge_edge(g, 2).id), -100.0, 1e-9);
  EXPECT_NEAR(*q.for_edge(five_edge_edge(g, 3).id), -1.0, 1e-9);
  EXPECT_NEAR(*q.for_edge(five_edge_edge(g, 4).id), 0.0, 1e-9);
  EXPECT_FALSE(q.for_edge(five_edge_edge(g, 0).id).has_value());
}

TEST(QIteration, TwoCycle) {
  const DataGraph g = edu_graph(0b0110);
  const QTable q = q_iteration(prune_loose_ends(g), 0.9, 1e-10);
  ASSERT_EQ(q.size(), 2u);
  for (const auto& e : q.entries()) EXPECT_NEAR(e.q, -10.0, 1e-9);
}

TEST(QIteration, ThreeCycle) {
  GraphConfig c;
  c.gamma = 0.9;
  DataGraph g(c);
  const double rewards[] = {-1.0, 0.0, -0.5};
  for (int i = 0; i < 3; ++i) {
    g.add_transition(std::vector<double>{double(i)}, std::vector<double>{1.0}, rewards[i],
                     std::vector<double>{double((i + 1) % 3)}, false);
  }
  const QTable q = q_iteration(prune_loose_ends(g), 0.9, 1e-10);
  const double loop = (-1.0 + 0.9 * 0.0 + 0.81 * -0.5) / (1.0 - 0.729);
  EXPECT_NEAR(*q.for_edge(0), loop, 1e-9);
  // The incremental loop anchor already gives the exact value for the
  // closing edge.
  EXPECT_NEAR(*g.edge(2).lower_bound, *q.for_edge(2), 1e-9);
}

TEST(QIteration, ToleranceIsHonoured) {
  const DataGraph g = five_edge_graph();
  for (double tol : {1e-3, 1e-6, 1e-9}) {
    const QTable q = q_iteration(prune_loose_ends(g), 0.99, tol);
    EXPECT_NEAR(*q.for_edge(five_edge_edge(g, 2).id), -100.0, tol);
    EXPECT_LE(q.residual * 0.99 / 0.01, tol);
  }
}

TEST(QIteration, NonConvergenceReported) {
  const DataGraph g = five_edge_graph();
  EXPECT_THROW(q_iteration(prune_loose_ends(g), 0.99, 1e-12, 3), NonConvergence);
}

TEST(QIteration, DumpFormat) {
  const DataGraph g = edu_graph(0b0001);
  const QTable q = q_iteration(prune_loose_ends(g), 0.9);
  std::ostringstream out;
  q.dump(out);
  EXPECT_EQ(out.str(), state_key(edu_state(1)).hex() + ";" + action_key(edu_action(1, 0)).hex() +
                           ";0\n");
}

TEST(Classify, FullEducationalGraph) {
  const DataGraph g = edu_graph(0b1111);
  EXPECT_EQ(class_of(g, 1, 0), TransitionClass::DirectlyConnected);
  EXPECT_EQ(class_of(g, 1, 2), TransitionClass::Connected);
  EXPECT_EQ(class_of(g, 2, 1), TransitionClass::Connected);
  EXPECT_EQ(class_of(g, 2, 2), TransitionClass::Connected);
}

TEST(Classify, Subsets) {
  EXPECT_EQ(class_of(edu_graph(0b0010), 1, 2), TransitionClass::LooseEnd);
  EXPECT_EQ(class_of(edu_graph(0b1000), 2, 2), TransitionClass::Disconnected);
  EXPECT_EQ(class_of(edu_graph(0b0110), 1, 2), TransitionClass::Disconnected);
  EXPECT_EQ(class_of(edu_graph(0b0100), 2, 1), TransitionClass::LooseEnd);
  EXPECT_EQ(class_of(edu_graph(0b0101), 2, 1), TransitionClass::Connected);
  EXPECT_EQ(class_of(edu_graph(0b1010), 1, 2), TransitionClass::Disconnected);
}

TEST(Classify, Names) {
  EXPECT_EQ(to_string(TransitionClass::DirectlyConnected), "directly_connected");
  EXPECT_EQ(to_string(TransitionClass::Connected), "connected");
  EXPECT_EQ(to_string(TransitionClass::LooseEnd), "loose_end");
  EXPECT_EQ(to_string(TransitionClass::Disconnected), "disconnected");
}

TEST(SyncBounds, Idempotent) {
  DataGraph g = five_edge_graph();
  sync_bounds(g);
  EXPECT_EQ(sync_bounds(g), 0u);
}

TEST(SyncBounds, TightensIncrementalBounds) {
  // A one-step loop search never sees the 3-cycle, so only sync bounds it.
  GraphConfig c;
  c.gamma = 0.9;
  c.max_loop_search_depth = 1;
  DataGraph g(c);
  for (int i = 0; i < 3; ++i) {
    g.add_transition(std::vector<double>{double(i)}, std::vector<double>{1.0}, -1.0,
                     std::vector<double>{double((i + 1) % 3)}, false);
  }
  for (const Edge& e : g.edges()) EXPECT_FALSE(e.lower_bound.has_value());
  EXPECT_EQ(sync_bounds(g), 3u);
  for (const Edge& e : g.edges()) EXPECT_NEAR(*e.lower_bound, -10.0, 1e-8);
}

TEST(BruteForce, TerminalEdgeIsReward) {
  ExplicitMdp mdp;
  mdp.state_vectors = {edu_state(0), edu_state(1), edu_state(2)};
  mdp.terminal = {true, false, false};
  mdp.transitions = {{},
                     {{edu_action(1, 0), 0, 0.0}, {edu_action(1, 2), 2, -1.0}},
                     {{edu_action(2, 1), 1, -1.0}, {edu_action(2, 2), 2, -1.0}}};
  const QTable q = brute_force_q(mdp, 0.9);
  EXPECT_NEAR(*q.at(state_key(edu_state(1)), action_key(edu_action(1, 0))), 0.0, 1e-9);
  EXPECT_NEAR(*q.at(state_key(edu_state(2)), action_key(edu_action(2, 1))), -1.0, 1e-9);
  EXPECT_NEAR(*q.at(state_key(edu_state(1)), action_key(edu_action(1, 2))), -1.9, 1e-9);
  EXPECT_NEAR(*q.at(state_key(edu_state(2)), action_key(edu_action(2, 2))), -1.9, 1e-9);
}

TEST(BruteForce, ValidatesInput) {
  ExplicitMdp mdp;
  mdp.state_vectors = {{0.0}};
  mdp.terminal = {false};
  mdp.transitions = {{{{1.0}, 3, 0.0}}};
  EXPECT_THROW(brute_force_q(mdp, 0.9), InvalidInput);
  mdp.transitions = {{{{1.0}, 0, 0.0}}};
  EXPECT_THROW(brute_force_q(mdp, 1.0), InvalidInput);
}

TEST(BruteForce, FullCoverageMatchesGraphSolution) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const ExplicitMdp mdp = qgraph::testing::random_mdp(rng);
    GraphConfig c;
    c.gamma = 0.9;
    DataGraph g(c);
    qgraph::testing::insert_random_subset(mdp, g, rng, 1.0);
    const QTable truth = brute_force_q(mdp, 0.9, 1e-10);
    const QTable solved = q_iteration(prune_loose_ends(g), 0.9, 1e-10);
    for (const QEntry& e : solved.entries()) {
      EXPECT_NEAR(e.q, *truth.at(e.state, e.action), 2e-10);
    }
  }
}

TEST(LowerBoundProperty, RandomSubsetsStayBelowOptimum) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const ExplicitMdp mdp = qgraph::testing::random_mdp(rng);
    const double gamma = std::uniform_real_distribution<double>(0.5, 0.99)(rng);
    GraphConfig c;
    c.gamma = gamma;
    DataGraph g(c);
    qgraph::testing::insert_random_subset(mdp, g, rng, 0.6);
    const QTable truth = brute_force_q(mdp, gamma, 1e-10);
    for (const Edge& e : g.edges()) {
      if (e.lower_bound) { EXPECT_LE(*e.lower_bound, *truth.at(e.from, e.action) + 1e-6); }
    }
    sync_bounds(g, 1e-10);
    for (const Edge& e : g.edges()) {
      if (e.lower_bound) { EXPECT_LE(*e.lower_bound, *truth.at(e.from, e.action) + 1e-6); }
    }
  }
}
