#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "optstop/filtration_tree.hpp"
#include "optstop/rng.hpp"
#include "support/oracles.hpp"

#include <numeric>

using namespace optstop;

TEST_CASE("uniform binary trees carry product probabilities") {
  const auto one = FiltrationTree::uniform(1, {0.5, 0.5});
  CHECK(one.node_count() == 3);
  CHECK(one.leaf_count() == 2);
  CHECK(one.leaf_probability(0) == 0.5);
  CHECK(one.leaf_probability(1) == 0.5);

  const auto two = FiltrationTree::uniform(2, {0.5, 0.5});
  REQUIRE(two.leaf_count() == 4);
  for (LeafId leaf = 0; leaf < 4; ++leaf) CHECK(two.leaf_probability(leaf) == 0.25);
}

TEST_CASE("build rejects bad probabilities") {
  TreeDescription unnormalized{{{0.7, 0.4}, {}, {}}};
  try {
    FiltrationTree::build(unnormalized);
    FAIL("expected InvalidInput");
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find("probabilities sum to 1.1") != std::string::npos);
  }
  CHECK_THROWS_AS(FiltrationTree::build({{{1.0, 0.0}, {}, {}}}), InvalidInput);
  CHECK_THROWS_AS(FiltrationTree::build({{{1.2, -0.2}, {}, {}}}), InvalidInput);
  // leaves at different depths
  CHECK_THROWS_AS(FiltrationTree::build({{{0.5, 0.5}, {1.0}, {}, {}}}), InvalidInput);
  CHECK_THROWS_AS(FiltrationTree::build({{{0.5, 0.5}, {}}}), InvalidInput);
}

TEST_CASE("input probabilities within 1e-9 are renormalized") {
  const auto tree = FiltrationTree::build({{{0.5 + 4e-10, 0.5}, {}, {}}});
  const auto probs = tree.leaf_probabilities();
  CHECK(std::abs(std::accumulate(probs.begin(), probs.end(), 0.0) - 1.0) <= 1e-12);
  CHECK_THROWS_AS(FiltrationTree::build({{{0.5 + 1e-6, 0.5}, {}, {}}}), InvalidInput);
}

TEST_CASE("a single root is a depth-0 tree") {
  const auto tree = FiltrationTree::build({{{}}});
  CHECK(tree.depth() == 0);
  CHECK(tree.leaf_count() == 1);
  CHECK(tree.leaf_probability(0) == 1.0);
}

TEST_CASE("atoms") {
  const auto tree = FiltrationTree::uniform(2, {0.5, 0.5});
  // leaves in BFS order: uu, ud, du, dd
  CHECK(tree.atom_of(0, 1) == std::vector<LeafId>{0, 1});
  CHECK(tree.atom_of(3, 1) == std::vector<LeafId>{2, 3});
  CHECK(tree.atom_of(2, 0) == std::vector<LeafId>{0, 1, 2, 3});
  CHECK(tree.atom_of(2, 2) == std::vector<LeafId>{2});
  CHECK_THROWS_AS(tree.atom_of(0, 3), InvalidInput);
  CHECK_THROWS_AS(tree.atom_of(0, -1), InvalidInput);
  CHECK(tree.leaf_label(1) == "0.1");
}

TEST_CASE("measurability at a stage") {
  const auto one = FiltrationTree::uniform(1, {0.5, 0.5});
  CHECK_FALSE(is_measurable(one, {{2.0, 4.0}}, 0));
  CHECK(is_measurable(one, {{3.0, 3.0}}, 0));
  const auto two = FiltrationTree::uniform(2, {0.5, 0.5});
  CHECK(is_measurable(two, {{1.0, 1.0, 5.0, 5.0}}, 1));
  CHECK_FALSE(is_measurable(two, {{1.0, 2.0, 5.0, 5.0}}, 1));
}

TEST_CASE("random trees are deterministic and well formed") {
  CHECK(random_tree(7, 3, 3).description().child_probs ==
        random_tree(7, 3, 3).description().child_probs);

  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const auto tree = random_tree(seed, 4, 3);
    CHECK(tree.depth() >= 1);
    CHECK(tree.depth() <= 4);
    const auto probs = tree.leaf_probabilities();
    CHECK(std::abs(std::accumulate(probs.begin(), probs.end(), 0.0) - 1.0) <= 1e-12);
    for (NodeId id = 0; id < tree.node_count(); ++id) {
      const auto& node = tree.node(id);
      if (node.children.empty()) continue;
      CHECK(node.children.size() >= 2);
      CHECK(node.children.size() <= 3);
      for (double p : node.child_probs) CHECK(p >= 0.05 / static_cast<double>(node.children.size()));
    }
  }
}

TEST_CASE("property: atoms partition each stage and match parent links") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto tree = random_tree(seed, 4, 3);
    for (int t = 0; t <= tree.depth(); ++t) {
      std::vector<int> cover(tree.leaf_count(), 0);
      for (NodeId id : tree.stage_nodes(t)) {
        const auto& node = tree.node(id);
        CHECK(node.stage == t);
        for (LeafId l = node.leaf_begin; l < node.leaf_end; ++l) ++cover[l];
      }
      for (int c : cover) CHECK(c == 1);
      for (LeafId l = 0; l < tree.leaf_count(); ++l) {
        CHECK(tree.atom_of(l, t) == oracle::atom(tree, l, t));
      }
    }
  }
}

TEST_CASE("property: measurability is increasing in the stage") {
  Rng rng(3);
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto tree = random_tree(seed, 4, 3);
    for (int t = 0; t <= tree.depth(); ++t) {
      // constant on stage-t atoms by construction
      RandomVariable rv{std::vector<double>(tree.leaf_count())};
      for (NodeId id : tree.stage_nodes(t)) {
        const double v = rng.uniform(-1.0, 1.0);
        for (LeafId l = tree.node(id).leaf_begin; l < tree.node(id).leaf_end; ++l) rv[l] = v;
      }
      for (int s = 0; s <= tree.depth(); ++s) {
        if (s >= t) CHECK(is_measurable(tree, rv, s));
      }
    }
  }
}
