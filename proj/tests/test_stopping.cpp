#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "optstop/generators.hpp"
#include "optstop/stopping.hpp"
#include "support/oracles.hpp"

#include <set>

using namespace optstop;

namespace {

const FiltrationTree& binary1() {
  static const auto tree = FiltrationTree::uniform(1, {0.5, 0.5});
  return tree;
}

const FiltrationTree& binary2() {
  static const auto tree = FiltrationTree::uniform(2, {0.5, 0.5});
  return tree;
}

std::set<std::vector<int>> stage_set(const std::vector<ThetaStrategy>& strategies) {
  std::set<std::vector<int>> out;
  for (const auto& s : strategies) out.insert(s.stages());
  return out;
}

}  // namespace

TEST_CASE("adaptedness") {
  const int stages_ok[] = {1, 1, 2, 2};
  const int stages_bad[] = {1, 2, 2, 2};
  CHECK(is_adapted(stages_ok, binary2()));
  CHECK_FALSE(is_adapted(stages_bad, binary2()));
  for (int t = 0; t <= 2; ++t) {
    const std::vector<int> constant(4, t);
    CHECK(is_adapted(constant, binary2()));
  }
  const int out_of_range[] = {3, 3, 3, 3};
  CHECK_THROWS_AS(is_adapted(out_of_range, binary2()), InvalidInput);
  CHECK_THROWS_AS(StoppingTime::make(binary2(), {1, 2, 2, 2}), InvalidInput);
}

TEST_CASE("events measurable at a stopping time") {
  const auto& tree = binary2();
  const auto zero = StoppingTime::constant(tree, 0);
  CHECK(event_in_sigma_at(tree, Event(4, true), zero));
  CHECK_FALSE(event_in_sigma_at(tree, Event{true, false, false, false}, zero));
  const auto last = StoppingTime::constant(tree, 2);
  CHECK(event_in_sigma_at(tree, Event{false, true, true, false}, last));

  // θ stops at 1 on the up atom: single up leaves are not decided there, while
  // {θ = 2} consists of singleton atoms.
  const auto theta = StoppingTime::make(tree, {1, 1, 2, 2});
  CHECK(event_in_sigma_at(tree, Event{false, false, true, false}, theta));
  CHECK(event_in_sigma_at(tree, Event{false, false, true, true}, theta));
  CHECK(event_in_sigma_at(tree, Event{true, true, true, false}, theta));
  CHECK_FALSE(event_in_sigma_at(tree, Event{true, false, false, false}, theta));

  const auto down_early = StoppingTime::make(tree, {2, 2, 1, 1});
  CHECK_FALSE(event_in_sigma_at(tree, Event{false, false, true, false}, down_early));
  CHECK(event_in_sigma_at(tree, Event{false, false, true, true}, down_early));
}

TEST_CASE("grids") {
  const auto& tree = binary2();
  const auto grid = BermudanGrid::deterministic(tree, {0, 1, 2});
  CHECK(grid.last_index() == 2);
  CHECK(grid.theta(1) == StoppingTime::constant(tree, 1));
  CHECK_THROWS_AS(BermudanGrid::deterministic(tree, {1, 2}), InvalidInput);
  CHECK_THROWS_AS(BermudanGrid::deterministic(tree, {0, 1}), InvalidInput);
  CHECK_THROWS_AS(BermudanGrid::deterministic(tree, {0, 2, 1, 2}), InvalidInput);
  CHECK_THROWS_AS(BermudanGrid::make(tree, {StoppingTime::constant(tree, 0),
                                           StoppingTime::make(tree, {2, 2, 1, 1}),
                                           StoppingTime::make(tree, {1, 1, 2, 2}),
                                           StoppingTime::constant(tree, 2)}),
                  InvalidInput);
}

TEST_CASE("enumeration counts") {
  {
    const auto grid = BermudanGrid::deterministic(binary1(), {0, 1});
    const auto all = enumerate_theta_from(binary1(), grid, 0);
    CHECK(all.size() == 2);
    CHECK(stage_set(all) == std::set<std::vector<int>>{{0, 0}, {1, 1}});
    CHECK(enumerate_theta_from(binary1(), grid, 1).size() == 1);
  }
  {
    const auto grid = BermudanGrid::deterministic(binary2(), {0, 1, 2});
    const auto all = enumerate_theta_from(binary2(), grid, 0);
    CHECK(all.size() == 5);
    CHECK(count_from(binary2(), grid, grid.theta(0)) == 5);
    CHECK(all.front().stages() == std::vector<int>{0, 0, 0, 0});
    const auto last = enumerate_theta_from(binary2(), grid, 2);
    REQUIRE(last.size() == 1);
    CHECK(last.front().stages() == std::vector<int>{2, 2, 2, 2});
    CHECK_THROWS_AS(enumerate_theta_from(binary2(), grid, 0, 4), CapExceeded);
  }
}

TEST_CASE("canonical partition") {
  const auto& tree = binary2();
  const auto grid = BermudanGrid::deterministic(tree, {0, 1, 2});
  const auto first = canonical_partition(tree, grid, ThetaStrategy::grid_time(grid, 0));
  CHECK(first[0] == Event(4, true));
  CHECK(first[1] == Event(4, false));
  CHECK(first[2] == Event(4, false));
  const auto last = canonical_partition(tree, grid, ThetaStrategy::grid_time(grid, 2));
  CHECK(last[2] == Event(4, true));

  // θ_1 = θ_2 = 1 on the up atom: stopping there lands in A_1.
  const auto theta1 = StoppingTime::make(tree, {1, 1, 1, 1});
  const auto theta2 = StoppingTime::make(tree, {1, 1, 2, 2});
  const auto coinciding =
      BermudanGrid::make(tree, {StoppingTime::constant(tree, 0), theta1, theta2,
                                StoppingTime::constant(tree, 2)});
  const auto tau = ThetaStrategy::from_stages(tree, coinciding, {1, 1, 2, 2});
  CHECK(tau.indices() == std::vector<int>{1, 1, 3, 3});
  const auto sets = canonical_partition(tree, coinciding, tau);
  CHECK(sets[1] == Event{true, true, false, false});
  // {τ = θ_2 = N} is the residual and is absorbed into A_n.
  CHECK(sets[2] == Event(4, false));
  CHECK(sets[3] == Event{false, false, true, true});
}

TEST_CASE("concatenation") {
  const auto& tree = binary1();
  const auto grid = BermudanGrid::deterministic(tree, {0, 1});
  const auto now = ThetaStrategy::grid_time(grid, 0);
  const auto later = ThetaStrategy::grid_time(grid, 1);
  CHECK(concatenate(tree, grid, now, later, Event(2, true)).same_time(now));
  CHECK(concatenate(tree, grid, now, later, Event(2, false)).same_time(later));
  CHECK_THROWS_AS(concatenate(tree, grid, now, later, Event{true, false}), InvalidInput);

  // On binary N=2 an event at stage 1 may split strategies that both wait.
  const auto grid2 = BermudanGrid::deterministic(binary2(), {0, 1, 2});
  const auto a = ThetaStrategy::from_stages(binary2(), grid2, {1, 1, 2, 2});
  const auto b = ThetaStrategy::from_stages(binary2(), grid2, {2, 2, 1, 1});
  const auto mixed = concatenate(binary2(), grid2, a, b, Event{true, true, false, false});
  CHECK(mixed.stages() == std::vector<int>{1, 1, 1, 1});
}

TEST_CASE("min and max") {
  const auto& tree = binary2();
  const auto grid = BermudanGrid::deterministic(tree, {0, 1, 2});
  const auto tau = ThetaStrategy::from_stages(tree, grid, {1, 1, 2, 2});
  const auto last = ThetaStrategy::grid_time(grid, 2);
  const auto [lo, hi] = min_max(tree, grid, tau, last);
  CHECK(lo.same_time(tau));
  CHECK(hi.same_time(last));
  CHECK(min_max(tree, grid, tau, tau).min.same_time(tau));
  CHECK(min_max(tree, grid, ThetaStrategy::grid_time(grid, 0), tau)
            .min.same_time(ThetaStrategy::grid_time(grid, 0)));
}

TEST_CASE("property: enumeration equals the brute-force strategy set") {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const auto tree = random_tree(seed, 3, 2);
    if (tree.leaf_count() > 8) continue;
    Rng rng(seed);
    const auto grid = random_grid(tree, rng, 3);
    std::size_t previous = SIZE_MAX;
    for (int k = 0; k <= grid.last_index(); ++k) {
      const auto all = enumerate_theta_from(tree, grid, k);
      const auto stages = stage_set(all);
      CHECK(stages.size() == all.size());  // duplicate-free
      CHECK(stages == oracle::strategies(tree, grid, grid.theta(k).stages()));
      CHECK(count_from(tree, grid, grid.theta(k)) == all.size());
      CHECK(all.size() <= previous);
      previous = all.size();
    }
  }
}

TEST_CASE("property: closure under concatenation, min and max") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto tree = random_tree(seed, 3, 3);
    Rng rng(seed + 100);
    const auto grid = random_grid(tree, rng, 3);
    const auto all = enumerate_theta_from(tree, grid, 0);
    for (int trial = 0; trial < 20; ++trial) {
      const auto& a = all[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(all.size()) - 1))];
      const auto& b = all[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(all.size()) - 1))];
      const auto event = random_event_at(tree, rng, pointwise_min(a.time(), b.time()));
      const auto joined = concatenate(tree, grid, a, b, event);
      const auto [lo, hi] = min_max(tree, grid, a, b);
      for (const auto* s : {&joined, &lo, &hi}) {
        CHECK(is_adapted(s->stages(), tree));
        CHECK(oracle::adapted(tree, s->stages()));
        // canonical partition reproduces the stage map
        const auto sets = canonical_partition(tree, grid, *s);
        for (LeafId l = 0; l < tree.leaf_count(); ++l) {
          int hits = 0;
          for (int k = 0; k <= grid.last_index(); ++k) {
            if (sets[static_cast<std::size_t>(k)][l]) {
              ++hits;
              CHECK(grid.theta(k)[l] == (*s)[l]);
            }
          }
          CHECK(hits == 1);
        }
      }
      for (LeafId l = 0; l < tree.leaf_count(); ++l) {
        CHECK(joined[l] == (event[l] ? a[l] : b[l]));
        CHECK(lo[l] == std::min(a[l], b[l]));
        CHECK(hi[l] == std::max(a[l], b[l]));
      }
    }
  }
}

TEST_CASE("property: sampling an adapted process is admissible") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto tree = random_tree(seed, 3, 3);
    Rng rng(seed);
    const auto grid = random_grid(tree, rng, 3);
    const auto process = random_process(tree, rng, -1.0, 1.0);
    const auto all = enumerate_theta_from(tree, grid, 0);
    for (std::size_t i = 0; i < all.size(); i += 3) {
      for (std::size_t j = 0; j < all.size(); j += 5) {
        const auto x = sample(tree, process, all[i].time());
        const auto y = sample(tree, process, all[j].time());
        CHECK(is_measurable_at(tree, x, all[i].time()));
        for (LeafId l = 0; l < tree.leaf_count(); ++l) {
          if (all[i][l] == all[j][l]) CHECK(x[l] == y[l]);
        }
      }
    }
  }
}
