#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "optstop/generators.hpp"
#include "optstop/verify.hpp"
#include "support/oracles.hpp"

#include <algorithm>

using namespace optstop;

namespace {

struct Running {
  FiltrationTree tree = FiltrationTree::uniform(1, {0.5, 0.5});
  BermudanGrid grid = BermudanGrid::deterministic(tree, {0, 1});

  ValueFamily payoff(double xi0) const {
    return payoff_family(tree, AdaptedProcess::from_stage_table(tree, {{xi0, xi0}, {0.0, 4.0}}),
                         grid);
  }
};

/// Worst-case (minimum over children): monotone, not strictly.
Evaluation worst_case() {
  return Evaluation(
      "worst_case",
      [](const NodeContext&, std::span<const double> c, std::span<const double>, double) {
        return *std::min_element(c.begin(), c.end());
      },
      OperatorClaims{true, false, true});
}

bool has_note(const CheckReport& report, const std::string& needle) {
  return std::any_of(report.notes.begin(), report.notes.end(),
                     [&](const std::string& n) { return n.find(needle) != std::string::npos; });
}

}  // namespace

TEST_CASE("oracle value on the running example") {
  const Running ex;
  const auto op = linear_expectation();
  const auto low = oracle_value(ex.tree, ex.grid, 0, ex.payoff(1.0), op);
  CHECK(low.value == RandomVariable{{2.0, 2.0}});
  CHECK(low.attaining.stages() == std::vector<int>{1, 1});
  CHECK(low.strategies == 2);

  const auto high = oracle_value(ex.tree, ex.grid, 0, ex.payoff(3.0), op);
  CHECK(high.value == RandomVariable{{3.0, 3.0}});
  CHECK(high.attaining.stages() == std::vector<int>{0, 0});

  const auto last = oracle_value(ex.tree, ex.grid, 1, ex.payoff(1.0), op);
  CHECK(last.value == RandomVariable{{0.0, 4.0}});
  CHECK(last.strategies == 1);
  CHECK(last.attaining.same_time(ThetaStrategy::grid_time(ex.grid, 1)));

  // a tie resolves toward the earlier-stopping strategy
  const auto tie = oracle_value(ex.tree, ex.grid, 0, ex.payoff(2.0), op);
  CHECK(tie.attaining.stages() == std::vector<int>{0, 0});

  CHECK_THROWS_AS(oracle_value(ex.tree, ex.grid, 0, ex.payoff(1.0), op, 1), CapExceeded);
}

TEST_CASE("oracle agrees with an independent brute force") {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const auto tree = random_tree(seed, 3, 2);
    if (tree.leaf_count() > 8) continue;
    Rng rng(seed);
    const auto grid = random_grid(tree, rng, 3);
    const auto process = random_process(tree, rng, -5.0, 5.0);
    std::vector<std::vector<double>> table;
    for (int t = 0; t <= tree.depth(); ++t) {
      table.push_back(sample(tree, process, StoppingTime::constant(tree, t)).values);
    }
    const auto xi = payoff_family(tree, process, grid);
    for (int k = 0; k <= grid.last_index(); ++k) {
      const auto got = oracle_value(tree, grid, k, xi, linear_expectation());
      const auto want = oracle::value(tree, grid, k, table, [&](const auto& s, const auto& eta) {
        return oracle::conditional_mean(tree, s, eta);
      });
      for (LeafId l = 0; l < tree.leaf_count(); ++l) CHECK(std::abs(got.value[l] - want[l]) <= 1e-12);
      // the attaining strategy attains everywhere at once
      const auto attained = linear_expectation().evaluate(tree, grid.theta(k), got.attaining.time(),
                                                          xi.at(got.attaining));
      for (LeafId l = 0; l < tree.leaf_count(); ++l) CHECK(std::abs(attained[l] - want[l]) <= 1e-12);
    }
  }
}

TEST_CASE("supermartingale checks") {
  const Running ex;
  const auto op = linear_expectation();
  ProblemContext context(ex.tree, ex.grid, ex.payoff(1.0), op);
  CHECK(check_supermartingale(context, context.oracle(), false).status == Status::kPass);

  const auto m = make_rho_martingale(ex.tree, op, RandomVariable{{2.0, 4.0}}, ex.grid);
  CHECK(check_supermartingale(context, m, true).status == Status::kPass);

  // ξ itself as a martingale: ρ_{θ_0,θ_1}[ξ(θ_1)] = 2 ≠ 1
  const auto report = check_supermartingale(context, context.payoff(), true);
  CHECK(report.status == Status::kFail);
  CHECK(report.worst_residual == 1.0);
  REQUIRE(report.witness.has_value());
  const auto& fields = report.witness->fields;
  CHECK(fields[0].first == "sigma");
  CHECK(fields[0].second == std::vector<double>{0, 0});
  CHECK(fields[1].first == "tau");
  CHECK(fields[1].second == std::vector<double>{1, 1});
  // as a supermartingale ξ fails too, since continuing is profitable
  CHECK(check_supermartingale(context, context.payoff(), false).status == Status::kFail);
}

TEST_CASE("minimality") {
  const Running ex;
  const auto op = linear_expectation();
  ProblemContext context(ex.tree, ex.grid, ex.payoff(1.0), op);
  const auto report = check_snell_minimality(context, 100, 7);
  CHECK(report.status == Status::kPass);

  // ξ + c gives a majorant within c of U under the linear operator
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto tree = random_tree(seed, 4, 3);
    Rng rng(seed);
    const auto grid = random_grid(tree, rng, 3);
    auto process = random_process(tree, rng, -5.0, 5.0);
    const auto u = snell_backward(tree, grid, payoff_family(tree, process, grid), op);
    for (double& v : process.node_values) v += 0.75;
    const auto raised = snell_backward(tree, grid, payoff_family(tree, process, grid), op);
    for (int k = 0; k <= grid.last_index(); ++k) {
      for (LeafId l = 0; l < tree.leaf_count(); ++l) {
        CHECK(raised[k][l] >= u[k][l]);
        CHECK(raised[k][l] - u[k][l] <= 0.75 + 1e-12);
      }
    }
  }
}

TEST_CASE("optimality on the running example") {
  const Running ex;
  const auto op = linear_expectation();
  ProblemContext context(ex.tree, ex.grid, ex.payoff(1.0), op);
  const auto report = check_optimality(context, 0, true);
  CHECK(report.status == Status::kPass);
  CHECK(has_note(report, "1 optimal strategies, 0 violate"));
}

TEST_CASE("a martingale pay-off makes every strategy optimal") {
  const auto tree = FiltrationTree::uniform(2, {0.5, 0.5});
  const auto grid = BermudanGrid::deterministic(tree, {0, 1, 2});
  const auto op = linear_expectation();
  const auto m = make_rho_martingale(tree, op, RandomVariable{{1, 2, 3, 4}}, grid);
  ProblemContext context(tree, grid, m, op);
  const auto report = check_optimality(context, 0, true);
  CHECK(report.status == Status::kPass);
  CHECK(has_note(report, "5 optimal strategies, 0 violate"));
}

TEST_CASE("non-strict operators only report converse violations") {
  // Worst-case evaluation: the up branch sets the root value, so waiting past
  // the down branch's stop at stage 1 is still optimal, but V(· ∧ τ) drops there.
  const auto tree = FiltrationTree::uniform(2, {0.5, 0.5});
  const auto grid = BermudanGrid::deterministic(tree, {0, 1, 2});
  const auto op = worst_case();
  const auto process =
      AdaptedProcess::from_stage_table(tree, {{0, 0, 0, 0}, {2, 2, 9, 9}, {1, 1, 3, 3}});
  ProblemContext context(tree, grid, payoff_family(tree, process, grid), op);
  const auto lenient = check_optimality(context, 0, false);
  CHECK(lenient.status == Status::kPass);
  CHECK(has_note(lenient, "2 optimal strategies, 1 violate"));
  CHECK(has_note(lenient, "informational"));

  const auto strict = check_optimality(context, 0, true);
  CHECK(strict.status == Status::kFail);
  CHECK(strict.witness.has_value());
}

TEST_CASE("stopped supermartingale") {
  const Running ex;
  const auto op = linear_expectation();
  ProblemContext context(ex.tree, ex.grid, ex.payoff(1.0), op);
  const auto& u = context.backward();
  const auto nu = hitting_time(ex.tree, ex.grid, 0, u, context.payoff()).strategy;
  CHECK(check_stopped_supermartingale(context, u, nu, false).status == Status::kPass);

  const auto m = make_rho_martingale(ex.tree, op, RandomVariable{{-1.0, 3.0}}, ex.grid);
  for (int k = 0; k <= 1; ++k) {
    CHECK(check_stopped_supermartingale(context, m, ThetaStrategy::grid_time(ex.grid, k), true)
              .status == Status::kPass);
  }

  const auto unmet = check_stopped_supermartingale(context, context.payoff(), nu, false);
  CHECK(unmet.status == Status::kHypothesisUnmet);
  CHECK(has_note(unmet, "k=0"));
}

TEST_CASE("value admissibility") {
  const Running ex;
  ProblemContext running(ex.tree, ex.grid, ex.payoff(1.0), linear_expectation());
  CHECK(check_value_admissibility(running, 20, 3).status == Status::kPass);

  // θ_1 = θ_2 on the up atom
  const auto tree = FiltrationTree::uniform(2, {0.5, 0.5});
  const auto grid = BermudanGrid::make(tree, {StoppingTime::constant(tree, 0),
                                              StoppingTime::make(tree, {1, 1, 1, 1}),
                                              StoppingTime::make(tree, {1, 1, 2, 2}),
                                              StoppingTime::constant(tree, 2)});
  const auto process =
      AdaptedProcess::from_stage_table(tree, {{0, 0, 0, 0}, {2, 2, -1, -1}, {5, -3, 4, 0}});
  ProblemContext context(tree, grid, payoff_family(tree, process, grid), linear_expectation());
  CHECK(check_value_admissibility(context, 50, 11).status == Status::kPass);
  const auto& v = context.oracle();
  CHECK(v[1][0] == v[2][0]);
  CHECK(v[1][1] == v[2][1]);
  CHECK(admissibility_defect(tree, grid, v) == 0.0);
}

TEST_CASE("pairwise maximization") {
  const Running ex;
  ProblemContext running(ex.tree, ex.grid, ex.payoff(1.0), linear_expectation());
  const auto plain = check_pairwise_max(running, 0);
  CHECK(plain.status == Status::kPass);
  CHECK(plain.notes.back().rfind("0 pairs", 0) == 0);

  // stopping at 1 pays on the up branch only; waiting pays on the down branch
  const auto tree = FiltrationTree::uniform(2, {0.5, 0.5});
  const auto grid = BermudanGrid::deterministic(tree, {0, 1, 2});
  const auto process =
      AdaptedProcess::from_stage_table(tree, {{0, 0, 0, 0}, {3, 3, 0, 0}, {0, 0, 2, 4}});
  ProblemContext context(tree, grid, payoff_family(tree, process, grid), linear_expectation());
  const auto mixed = check_pairwise_max(context, 1);
  CHECK(mixed.status == Status::kPass);
  REQUIRE_FALSE(mixed.notes.empty());
  CHECK(mixed.notes.back().rfind("0 ", 0) != 0);
  CHECK_THROWS_AS(check_pairwise_max(context, 0, 10), CapExceeded);
}

TEST_CASE("dpp, strict value, stopped identities and domination") {
  const Running ex;
  const auto op = linear_expectation();
  ProblemContext context(ex.tree, ex.grid, ex.payoff(3.0), op);
  CHECK(check_dpp(context).status == Status::kPass);
  CHECK(check_strict_value(context).status == Status::kPass);
  CHECK(oracle_strict_value(context, 0) == RandomVariable{{2.0, 2.0}});
  CHECK(check_stopped_identities(context, 0).status == Status::kPass);
  CHECK(check_oracle_equivalence(context).status == Status::kPass);

  CHECK(check_domination(context, RandomVariable{{4.0, 4.0}}).status == Status::kPass);
  CHECK(check_domination(context, RandomVariable{{0.0, 4.0}}).status == Status::kHypothesisUnmet);
}

TEST_CASE("battery on a small corpus") {
  const std::vector<Evaluation> ops{linear_expectation(), discount_evaluation(0.05),
                                    entropic_utility(1.0), tilted_robust_expectation(0.5, 0.1)};
  for (const auto& op : ops) {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
      const auto instance = random_instance(seed);
      for (const auto& report : run_battery(instance, op, BatteryOptions{})) {
        CAPTURE(op.name());
        CAPTURE(seed);
        CAPTURE(report.name);
        CHECK(report.passed());
      }
    }
  }
}

TEST_CASE("random instances are deterministic") {
  const auto a = random_instance(42);
  const auto b = random_instance(42);
  CHECK(a.tree.description().child_probs == b.tree.description().child_probs);
  CHECK(a.payoff.node_values == b.payoff.node_values);
  for (int k = 0; k <= a.grid.last_index(); ++k) CHECK(a.grid.theta(k) == b.grid.theta(k));
}
