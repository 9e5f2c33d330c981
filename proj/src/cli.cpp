#include "optstop/cli.hpp"

#include "optstop/format.hpp"
#include "optstop/generators.hpp"
#include "optstop/snell.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace optstop::cli {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config reading

/// A JSON object with a fixed key set; typed reads report the offending path.
class Section {
public:
  Section(const json& node, std::string path, std::initializer_list<const char*> allowed)
      : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_ + ": expected an object");
    for (const auto& [key, value] : node_.items()) {
      (void)value;
      const bool known = std::any_of(allowed.begin(), allowed.end(),
                                     [&](const char* a) { return key == a; });
      if (!known) throw ConfigError(path_ + ": unknown key '" + key + "'");
    }
  }

  bool has(const char* key) const { return node_.contains(key); }
  std::string path(const char* key) const { return path_ + "." + key; }
  const json& raw(const char* key) const {
    if (!has(key)) throw ConfigError(path_ + ": missing key '" + key + "'");
    return node_.at(key);
  }

  template <class T>
  T require(const char* key) const {
    try {
      return raw(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path(key) + ": " + e.what());
    }
  }

  template <class T>
  T get(const char* key, T fallback) const {
    return has(key) ? require<T>(key) : fallback;
  }

private:
  const json& node_;
  std::string path_;
};

void require_positive(double value, const std::string& path) {
  if (!(value > 0.0) || !std::isfinite(value)) throw ConfigError(path + ": must be positive");
}

TreeSpec parse_tree(const json& node) {
  const auto kind = Section(node, "tree", {"kind", "depth", "probs", "child_probs", "max_depth",
                                           "max_branch"})
                        .require<std::string>("kind");
  TreeSpec spec;
  if (kind == "uniform") {
    const Section s(node, "tree", {"kind", "depth", "probs"});
    spec.kind = TreeSpec::Kind::kUniform;
    spec.depth = s.require<int>("depth");
    spec.probs = s.require<std::vector<double>>("probs");
  } else if (kind == "nodes") {
    const Section s(node, "tree", {"kind", "child_probs"});
    spec.kind = TreeSpec::Kind::kNodes;
    spec.nodes.child_probs = s.require<std::vector<std::vector<double>>>("child_probs");
  } else if (kind == "random") {
    const Section s(node, "tree", {"kind", "max_depth", "max_branch"});
    spec.kind = TreeSpec::Kind::kRandom;
    spec.max_depth = s.get("max_depth", spec.max_depth);
    spec.max_branch = s.get("max_branch", spec.max_branch);
    if (spec.max_depth < 1 || spec.max_branch < 2) {
      throw ConfigError("tree: random trees need max_depth >= 1 and max_branch >= 2");
    }
  } else {
    throw ConfigError("tree.kind: unknown kind '" + kind + "'");
  }
  return spec;
}

GridSpec parse_grid(const json& node) {
  const auto kind =
      Section(node, "grid", {"kind", "stages", "thetas", "max_n"}).require<std::string>("kind");
  GridSpec spec;
  if (kind == "stages") {
    spec.kind = GridSpec::Kind::kStages;
    spec.stages = Section(node, "grid", {"kind", "stages"}).require<std::vector<int>>("stages");
  } else if (kind == "per_leaf") {
    spec.kind = GridSpec::Kind::kPerLeaf;
    spec.per_leaf = Section(node, "grid", {"kind", "thetas"})
                        .require<std::vector<std::vector<int>>>("thetas");
  } else if (kind == "random") {
    spec.kind = GridSpec::Kind::kRandom;
    spec.max_n = Section(node, "grid", {"kind", "max_n"}).get("max_n", spec.max_n);
    if (spec.max_n < 1) throw ConfigError("grid.max_n: must be at least 1");
  } else {
    throw ConfigError("grid.kind: unknown kind '" + kind + "'");
  }
  return spec;
}

PayoffSpec parse_payoff(const json& node) {
  const auto kind = Section(node, "payoff",
                            {"kind", "values", "table", "spot", "up", "down", "strike", "low",
                             "high"})
                        .require<std::string>("kind");
  PayoffSpec spec;
  if (kind == "node_values") {
    spec.kind = PayoffSpec::Kind::kNodeValues;
    spec.node_values =
        Section(node, "payoff", {"kind", "values"}).require<std::vector<double>>("values");
  } else if (kind == "stage_table") {
    spec.kind = PayoffSpec::Kind::kStageTable;
    spec.table = Section(node, "payoff", {"kind", "table"})
                     .require<std::vector<std::vector<double>>>("table");
  } else if (kind == "call" || kind == "put") {
    const Section s(node, "payoff", {"kind", "spot", "up", "down", "strike"});
    spec.kind = kind == "call" ? PayoffSpec::Kind::kCall : PayoffSpec::Kind::kPut;
    spec.spot = s.get("spot", spec.spot);
    spec.up = s.get("up", spec.up);
    spec.down = s.get("down", spec.down);
    spec.strike = s.get("strike", spec.strike);
    require_positive(spec.spot, "payoff.spot");
    require_positive(spec.up, "payoff.up");
    require_positive(spec.down, "payoff.down");
  } else if (kind == "random") {
    const Section s(node, "payoff", {"kind", "low", "high"});
    spec.kind = PayoffSpec::Kind::kRandom;
    spec.low = s.get("low", spec.low);
    spec.high = s.get("high", spec.high);
    if (!(spec.low <= spec.high)) throw ConfigError("payoff: low must not exceed high");
  } else {
    throw ConfigError("payoff.kind: unknown kind '" + kind + "'");
  }
  return spec;
}

OperatorSpec parse_operator(const json& node, const std::string& path) {
  const auto name = Section(node, path,
                            {"name", "kind", "rate", "ambiguity", "dt", "gamma", "nodes", "tilt",
                             "penalty"})
                        .require<std::string>("name");
  OperatorSpec spec;
  spec.name = name;
  if (name == "linear") {
    Section(node, path, {"name"});
  } else if (name == "g_driver") {
    const Section s(node, path, {"name", "kind", "rate", "ambiguity", "dt"});
    spec.kind = s.require<std::string>("kind");
    spec.rate = s.get("rate", 0.0);
    spec.dt = s.get("dt", 1.0);
    require_positive(spec.dt, path + ".dt");
    if (spec.kind == "lipschitz_demo") {
      spec.ambiguity = s.get("ambiguity", 0.0);
    } else if (spec.kind == "discount") {
      if (s.has("ambiguity")) throw ConfigError(path + ": 'ambiguity' applies to lipschitz_demo");
    } else {
      throw ConfigError(path + ".kind: unknown driver '" + spec.kind + "'");
    }
  } else if (name == "entropic") {
    const Section s(node, path, {"name", "gamma"});
    const auto& gamma = s.raw("gamma");
    spec.gammas = gamma.is_array() ? s.require<std::vector<double>>("gamma")
                                   : std::vector<double>{s.require<double>("gamma")};
    if (spec.gammas.empty()) throw ConfigError(path + ".gamma: empty list");
    for (double g : spec.gammas) require_positive(g, path + ".gamma");
  } else if (name == "robust") {
    const Section s(node, path, {"name", "nodes", "tilt", "penalty"});
    if (s.has("nodes") && (s.has("tilt") || s.has("penalty"))) {
      throw ConfigError(path + ": give either 'nodes' or 'tilt'/'penalty'");
    }
    if (s.has("tilt")) {
      spec.tilt = s.require<double>("tilt");
      spec.penalty = s.get("penalty", 0.0);
    } else if (s.has("penalty")) {
      throw ConfigError(path + ": 'penalty' needs 'tilt'");
    }
    if (s.has("nodes")) {
      const auto& list = s.raw("nodes");
      if (!list.is_array()) throw ConfigError(path + ".nodes: expected an array");
      for (std::size_t i = 0; i < list.size(); ++i) {
        const auto item_path = path + ".nodes[" + std::to_string(i) + "]";
        const Section item(list[i], item_path, {"node", "candidates"});
        const auto id = item.require<NodeId>("node");
        if (spec.nodes.count(id)) throw ConfigError(item_path + ": duplicate node");
        const auto& candidates = item.raw("candidates");
        if (!candidates.is_array()) throw ConfigError(item_path + ".candidates: expected an array");
        auto& out = spec.nodes[id];
        for (std::size_t j = 0; j < candidates.size(); ++j) {
          const Section c(candidates[j], item_path + ".candidates[" + std::to_string(j) + "]",
                          {"q", "penalty"});
          out.push_back(Candidate{c.require<std::vector<double>>("q"), c.get("penalty", 0.0)});
        }
      }
    }
  } else {
    throw ConfigError(path + ".name: unknown operator '" + name + "'");
  }
  return spec;
}

AxiomSpec parse_axioms(const json& node) {
  const Section s(node, "axioms", {"samples", "max_depth", "max_branch", "tree_seeds"});
  AxiomSpec spec;
  spec.samples = s.get("samples", spec.samples);
  spec.max_depth = s.get("max_depth", spec.max_depth);
  spec.max_branch = s.get("max_branch", spec.max_branch);
  spec.tree_seeds = s.get("tree_seeds", spec.tree_seeds);
  if (spec.samples < 1 || spec.tree_seeds.empty()) {
    throw ConfigError("axioms: need samples >= 1 and at least one tree seed");
  }
  return spec;
}

SweepSpec parse_sweep(const json& node) {
  const Section s(node, "sweep", {"seeds", "first_seed", "operators", "corpus"});
  SweepSpec spec;
  spec.seeds = s.get("seeds", spec.seeds);
  spec.first_seed = s.get("first_seed", spec.first_seed);
  if (spec.seeds < 1) throw ConfigError("sweep.seeds: must be at least 1");
  const auto& ops = s.raw("operators");
  if (!ops.is_array() || ops.empty()) throw ConfigError("sweep.operators: expected a non-empty array");
  for (std::size_t i = 0; i < ops.size(); ++i) {
    spec.operators.push_back(parse_operator(ops[i], "sweep.operators[" + std::to_string(i) + "]"));
  }
  if (s.has("corpus")) {
    const Section c(s.raw("corpus"), "sweep.corpus",
                    {"max_depth", "max_branch", "max_grid", "payoff_low", "payoff_high",
                     "strategy_limit"});
    auto& corpus = spec.corpus;
    corpus.max_depth = c.get("max_depth", corpus.max_depth);
    corpus.max_branch = c.get("max_branch", corpus.max_branch);
    corpus.max_grid = c.get("max_grid", corpus.max_grid);
    corpus.payoff_low = c.get("payoff_low", corpus.payoff_low);
    corpus.payoff_high = c.get("payoff_high", corpus.payoff_high);
    corpus.strategy_limit = c.get("strategy_limit", corpus.strategy_limit);
    if (corpus.max_depth < 1 || corpus.max_branch < 2 || corpus.max_grid < 1) {
      throw ConfigError("sweep.corpus: need max_depth >= 1, max_branch >= 2, max_grid >= 1");
    }
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Instance construction

FiltrationTree build_tree(const TreeSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case TreeSpec::Kind::kUniform:
      if (spec.depth < 0 || spec.depth > 16) throw ConfigError("tree.depth: must be in [0, 16]");
      return FiltrationTree::uniform(spec.depth, spec.probs);
    case TreeSpec::Kind::kNodes:
      return FiltrationTree::build(spec.nodes);
    case TreeSpec::Kind::kRandom:
      return random_tree(Rng::derive(seed, 0), spec.max_depth, spec.max_branch);
  }
  throw ConfigError("tree: unsupported kind");
}

BermudanGrid build_grid(const GridSpec& spec, const FiltrationTree& tree, Rng& rng) {
  switch (spec.kind) {
    case GridSpec::Kind::kStages:
      return BermudanGrid::deterministic(tree, spec.stages);
    case GridSpec::Kind::kPerLeaf: {
      std::vector<StoppingTime> thetas;
      for (const auto& stages : spec.per_leaf) {
        if (stages.size() != tree.leaf_count()) {
          throw ConfigError("grid.thetas: each entry needs one stage per leaf (" +
                            std::to_string(tree.leaf_count()) + ")");
        }
        thetas.push_back(StoppingTime::make(tree, stages));
      }
      return BermudanGrid::make(tree, std::move(thetas));
    }
    case GridSpec::Kind::kRandom:
      return random_grid(tree, rng, spec.max_n);
  }
  throw ConfigError("grid: unsupported kind");
}

AdaptedProcess lattice_payoff(const PayoffSpec& spec, const FiltrationTree& tree) {
  std::vector<double> state(tree.node_count(), spec.spot);
  AdaptedProcess out{std::vector<double>(tree.node_count())};
  // Breadth-first order puts parents before children.
  for (NodeId id = 0; id < tree.node_count(); ++id) {
    const auto& children = tree.node(id).children;
    const auto m = children.size();
    for (std::size_t i = 0; i < m; ++i) {
      const double frac = m == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(m - 1);
      state[children[i]] = state[id] * spec.down * std::pow(spec.up / spec.down, frac);
    }
    out.node_values[id] = spec.kind == PayoffSpec::Kind::kCall
                              ? std::max(state[id] - spec.strike, 0.0)
                              : std::max(spec.strike - state[id], 0.0);
  }
  return out;
}

AdaptedProcess build_payoff(const PayoffSpec& spec, const FiltrationTree& tree, Rng& rng) {
  switch (spec.kind) {
    case PayoffSpec::Kind::kNodeValues:
      if (spec.node_values.size() != tree.node_count()) {
        throw ConfigError("payoff.values: expected " + std::to_string(tree.node_count()) +
                          " node values, got " + std::to_string(spec.node_values.size()));
      }
      for (double v : spec.node_values) {
        if (!std::isfinite(v)) throw ConfigError("payoff.values: non-finite value");
      }
      return AdaptedProcess{spec.node_values};
    case PayoffSpec::Kind::kStageTable:
      if (spec.table.size() != static_cast<std::size_t>(tree.depth()) + 1) {
        throw ConfigError("payoff.table: expected " + std::to_string(tree.depth() + 1) + " rows");
      }
      for (const auto& row : spec.table) {
        if (row.size() != tree.leaf_count()) {
          throw ConfigError("payoff.table: each row needs " + std::to_string(tree.leaf_count()) +
                            " leaf values");
        }
      }
      return AdaptedProcess::from_stage_table(tree, spec.table);
    case PayoffSpec::Kind::kCall:
    case PayoffSpec::Kind::kPut:
      return lattice_payoff(spec, tree);
    case PayoffSpec::Kind::kRandom:
      return random_process(tree, rng, spec.low, spec.high);
  }
  throw ConfigError("payoff: unsupported kind");
}

Instance build_instance(const ExperimentConfig& config) {
  if (!config.tree || !config.grid || !config.payoff || !config.op) {
    throw ConfigError("this command needs 'tree', 'grid', 'payoff' and 'operator'");
  }
  try {
    auto tree = build_tree(*config.tree, config.seed);
    Rng rng(Rng::derive(config.seed, 1));
    auto grid = build_grid(*config.grid, tree, rng);
    auto payoff = build_payoff(*config.payoff, tree, rng);
    return Instance{config.seed, std::move(tree), std::move(grid), std::move(payoff)};
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------
// Report assembly

std::string hex(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, value >>= 4) out[static_cast<std::size_t>(i)] = digits[value & 0xf];
  return out;
}

json number(double value) { return round_output(value); }

json numbers(const std::vector<double>& values) {
  json out = json::array();
  for (double v : values) out.push_back(number(v));
  return out;
}

/// One row per (grid index, atom of F_{θ_k}).
json family_table(const FiltrationTree& tree, const BermudanGrid& grid, const ValueFamily& family) {
  json rows = json::array();
  for (int k = 0; k <= grid.last_index(); ++k) {
    const auto& theta = grid.theta(k);
    std::optional<NodeId> previous;
    for (LeafId leaf = 0; leaf < tree.leaf_count(); ++leaf) {
      const auto atom = tree.ancestor(leaf, theta[leaf]);
      if (previous == atom) continue;
      previous = atom;
      rows.push_back({{"grid_index", k}, {"atom_id", atom}, {"value", number(family[k][leaf])}});
    }
  }
  return rows;
}

json witness_json(const std::optional<Witness>& witness) {
  if (!witness) return nullptr;
  json fields = json::array();
  for (const auto& [name, values] : witness->fields) {
    fields.push_back({{"name", name}, {"values", numbers(values)}});
  }
  return {{"description", witness->description}, {"fields", fields}};
}

json check_json(const CheckReport& report) {
  return {{"name", report.name},
          {"status", std::string(to_string(report.status))},
          {"residual", number(report.worst_residual)},
          {"witness", witness_json(report.witness)},
          {"notes", report.notes}};
}

json axiom_witness_json(const std::optional<AxiomWitness>& w) {
  if (!w) return nullptr;
  return {{"tree_seed", w->tree_seed},
          {"s", w->s},
          {"tau", w->tau},
          {"eta", numbers(w->eta)},
          {"lhs", numbers(w->lhs)},
          {"rhs", numbers(w->rhs)},
          {"leaf", w->leaf},
          {"gap", number(w->gap)},
          {"note", w->note}};
}

json axiom_json(const AxiomReport& report) {
  json properties = json::array();
  for (const auto& p : report.properties) {
    properties.push_back({{"id", p.id},
                          {"name", p.name},
                          {"claimed", p.claimed},
                          {"status", std::string(to_string(p.status))},
                          {"trials", p.trials},
                          {"worst_gap", number(p.worst_gap)},
                          {"witness", axiom_witness_json(p.witness)}});
  }
  return {{"operator", report.op_name}, {"passed", report.passed()}, {"properties", properties}};
}

json operator_json(const Evaluation& op) {
  const auto& c = op.claims();
  return {{"name", op.name()},
          {"claims",
           {{"monotone", c.monotone},
            {"strictly_monotone", c.strictly_monotone},
            {"preserves_constants", c.preserves_constants}}}};
}

json instance_json(const Instance& instance) {
  json thetas = json::array();
  for (int k = 0; k <= instance.grid.last_index(); ++k) thetas.push_back(instance.grid.theta(k).stages());
  return {{"digest", hex(instance_digest(instance.tree, instance.grid, instance.payoff))},
          {"depth", instance.tree.depth()},
          {"nodes", instance.tree.node_count()},
          {"leaves", instance.tree.leaf_count()},
          {"grid", thetas}};
}

const std::vector<std::string>& default_verify_checks() {
  static const std::vector<std::string> checks{
      "oracle_equivalence", "dpp",         "strict_value",          "supermartingale",
      "stopped_identities", "minimality",  "optimality",            "stopped_supermartingale",
      "value_admissibility"};
  return checks;
}

CheckReport run_check(const std::string& name, ProblemContext& context,
                      const ExperimentConfig& config) {
  const int n = context.grid().last_index();
  auto per_k = [&](auto&& check) {
    CheckReport report;
    report.name = name;
    for (int k = 0; k < n; ++k) report.absorb(check(k));
    return report;
  };
  if (name == "oracle_equivalence") return check_oracle_equivalence(context);
  if (name == "dpp") return check_dpp(context);
  if (name == "strict_value") return check_strict_value(context);
  if (name == "supermartingale") {
    auto report = check_supermartingale(context, context.oracle(), false);
    report.name = name;
    return report;
  }
  if (name == "martingale") {
    // The pay-off family itself as a candidate (Θ,ρ)-martingale.
    auto report = check_supermartingale(context, context.payoff(), true);
    report.name = name;
    return report;
  }
  if (name == "stopped_identities") {
    return per_k([&](int k) { return check_stopped_identities(context, k); });
  }
  if (name == "minimality") {
    return check_snell_minimality(context, config.minimality_trials, config.seed);
  }
  if (name == "optimality") {
    const bool strict = context.op().claims().strictly_monotone;
    return per_k([&](int k) { return check_optimality(context, k, strict); });
  }
  if (name == "stopped_supermartingale") {
    const auto nu =
        hitting_time(context.tree(), context.grid(), 0, context.backward(), context.payoff(),
                     context.tol());
    return check_stopped_supermartingale(context, context.backward(), nu.strategy, false);
  }
  if (name == "value_admissibility") return check_value_admissibility(context, 100, config.seed);
  if (name == "pairwise_max") {
    return per_k([&](int k) { return check_pairwise_max(context, k, config.pair_cap); });
  }
  throw ConfigError("unknown check '" + name + "'");
}

RunReport run_instance(Command command, const ExperimentConfig& config) {
  const auto instance = build_instance(config);
  Evaluation op = [&] {
    try {
      return config.op->build(config.seed);
    } catch (const InvalidInput& e) {
      throw ConfigError(e.what());
    }
  }();
  const auto& tree = instance.tree;
  const auto& grid = instance.grid;

  RunReport report;
  auto& body = report.body;
  body["command"] = to_string(command);
  body["seed"] = config.seed;
  body["tolerance"] = config.tolerance;
  body["cap"] = config.cap;
  body["instance"] = instance_json(instance);
  body["operator"] = operator_json(op);

  try {
    ProblemContext context(tree, grid, payoff_family(tree, instance.payoff, grid), op, config.cap,
                           config.tolerance);
    std::vector<std::string> warnings;
    const auto& u = context.backward();
    snell_backward(tree, grid, context.payoff(), op, &warnings);
    body["warnings"] = warnings;
    body["U"] = family_table(tree, grid, u);

    json nu = json::array();
    for (int k = 0; k <= grid.last_index(); ++k) {
      const auto h = hitting_time(tree, grid, k, u, context.payoff(), config.tolerance);
      nu.push_back({{"grid_index", k}, {"stages", h.strategy.stages()}, {"borderline", h.borderline}});
    }
    body["nu"] = nu;
    body["strategy_count"] = count_from(tree, grid, grid.theta(0));

    if (command == Command::kOracle) {
      body["V"] = family_table(tree, grid, context.oracle());
      body["attaining"] = context.oracle_at(0).attaining.stages();
    }

    std::vector<std::string> checks = config.checks;
    if (checks.empty()) {
      if (command == Command::kVerify) checks = default_verify_checks();
      if (command == Command::kOracle) checks = {"oracle_equivalence"};
    }
    json results = json::array();
    bool ok = true;
    for (const auto& name : checks) {
      const auto check = run_check(name, context, config);
      ok = ok && check.passed();
      results.push_back(check_json(check));
    }
    body["checks"] = results;
    body["status"] = ok ? "pass" : "fail";
    report.exit_code = ok ? kExitPass : kExitFail;
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  return report;
}

RunReport run_axioms(const ExperimentConfig& config) {
  if (!config.op) throw ConfigError("the axioms command needs 'operator'");
  AxiomConfig axioms;
  axioms.tree_seeds = config.axioms.tree_seeds;
  axioms.max_depth = config.axioms.max_depth;
  axioms.max_branch = config.axioms.max_branch;
  axioms.samples = config.axioms.samples;
  axioms.seed = config.seed;
  axioms.tolerance = config.tolerance;
  const auto op = config.op->build(config.seed);
  const auto result = check_axioms(op, axioms);

  RunReport report;
  report.body = {{"command", to_string(Command::kAxioms)},
                 {"seed", config.seed},
                 {"tolerance", config.tolerance},
                 {"operator", operator_json(op)},
                 {"axioms", axiom_json(result)},
                 {"status", result.passed() ? "pass" : "fail"}};
  report.exit_code = result.passed() ? kExitPass : kExitFail;
  return report;
}

std::string operator_label(const OperatorSpec& spec) {
  if (spec.name == "entropic" && spec.gammas.size() > 1) {
    std::string label = "entropic(gamma=";
    for (std::size_t i = 0; i < spec.gammas.size(); ++i) {
      label += (i ? "|" : "") + format_number(spec.gammas[i]);
    }
    return label + ")";
  }
  return spec.build(0).name();
}

struct SweepOutcome {
  bool capped = false;
  std::vector<CheckReport> checks;
};

RunReport run_sweep(const ExperimentConfig& config, const RunOptions& options) {
  if (!config.sweep) throw ConfigError("the sweep command needs 'sweep'");
  const auto& sweep = *config.sweep;
  const auto seeds = static_cast<std::size_t>(sweep.seeds);
  const auto jobs = sweep.operators.size() * seeds;

  BatteryOptions battery;
  battery.cap = config.cap;
  battery.tol = config.tolerance;
  battery.minimality_trials = config.minimality_trials;
  battery.seed = config.seed;

  // Operators are built up front so that bad parameters surface before work starts.
  for (const auto& spec : sweep.operators) {
    try {
      spec.build(sweep.first_seed);
    } catch (const InvalidInput& e) {
      throw ConfigError(e.what());
    }
  }

  std::vector<SweepOutcome> outcomes(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job = next++; job < jobs; job = next++) {
      const auto& spec = sweep.operators[job / seeds];
      const auto seed = sweep.first_seed + job % seeds;
      const auto instance = random_instance(seed, sweep.corpus);
      try {
        outcomes[job].checks = run_battery(instance, spec.build(seed), battery);
      } catch (const CapExceeded&) {
        outcomes[job].capped = true;
      }
    }
  };
  const int threads = std::max(1, options.threads);
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  constexpr std::size_t kMaxListedFailures = 50;
  json per_operator = json::array();
  bool any_fail = false;
  bool any_cap = false;
  for (std::size_t o = 0; o < sweep.operators.size(); ++o) {
    std::vector<std::string> order;
    std::map<std::string, std::map<std::string, std::uint64_t>> counts;
    std::map<std::string, double> worst;
    json failures = json::array();
    std::uint64_t capped = 0;
    std::uint64_t failed_instances = 0;
    for (std::size_t s = 0; s < seeds; ++s) {
      const auto& outcome = outcomes[o * seeds + s];
      const auto seed = sweep.first_seed + s;
      if (outcome.capped) {
        ++capped;
        continue;
      }
      bool instance_ok = true;
      for (const auto& check : outcome.checks) {
        if (!counts.count(check.name)) order.push_back(check.name);
        ++counts[check.name][std::string(to_string(check.status))];
        worst[check.name] = std::max(worst[check.name], check.worst_residual);
        if (!check.passed()) {
          instance_ok = false;
          if (failures.size() < kMaxListedFailures) {
            failures.push_back({{"seed", seed},
                                {"check", check.name},
                                {"status", std::string(to_string(check.status))},
                                {"residual", number(check.worst_residual)}});
          }
        }
      }
      if (!instance_ok) ++failed_instances;
    }
    json checks = json::array();
    for (const auto& name : order) {
      json row = {{"name", name}, {"worst_residual", number(worst[name])}};
      for (auto status : {Status::kPass, Status::kFail, Status::kDegenerate,
                          Status::kHypothesisUnmet}) {
        const std::string key(to_string(status));
        row[key] = counts[name].count(key) ? counts[name][key] : 0;
      }
      checks.push_back(row);
    }
    any_fail = any_fail || failed_instances > 0;
    any_cap = any_cap || capped > 0;
    per_operator.push_back({{"operator", operator_label(sweep.operators[o])},
                            {"instances", seeds},
                            {"passed_instances", seeds - capped - failed_instances},
                            {"failed_instances", failed_instances},
                            {"cap_exceeded", capped},
                            {"checks", checks},
                            {"failures", failures}});
  }

  RunReport report;
  report.body = {{"command", to_string(Command::kSweep)},
                 {"seed", config.seed},
                 {"tolerance", config.tolerance},
                 {"cap", config.cap},
                 {"first_seed", sweep.first_seed},
                 {"seeds", sweep.seeds},
                 {"operators", per_operator},
                 {"status", any_fail ? "fail" : any_cap ? "cap_exceeded" : "pass"}};
  report.exit_code = any_fail ? kExitFail : any_cap ? kExitCap : kExitPass;
  return report;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string csv_number(const json& value) {
  return value.is_number_float() ? format_number(value.get<double>()) : value.dump();
}

}  // namespace

// ---------------------------------------------------------------------------

Command parse_command(const std::string& name) {
  if (name == "solve") return Command::kSolve;
  if (name == "oracle") return Command::kOracle;
  if (name == "verify") return Command::kVerify;
  if (name == "axioms") return Command::kAxioms;
  if (name == "sweep") return Command::kSweep;
  throw ConfigError("unknown command '" + name + "'");
}

std::string to_string(Command command) {
  switch (command) {
    case Command::kSolve: return "solve";
    case Command::kOracle: return "oracle";
    case Command::kVerify: return "verify";
    case Command::kAxioms: return "axioms";
    case Command::kSweep: return "sweep";
  }
  return "unknown";
}

Evaluation OperatorSpec::build(std::uint64_t seed) const {
  if (name == "linear") return linear_expectation();
  if (name == "g_driver") {
    return kind == "discount" ? discount_evaluation(rate, dt)
                              : lipschitz_demo_evaluation(rate, ambiguity, dt);
  }
  if (name == "entropic") return entropic_utility(gammas[seed % gammas.size()]);
  if (name == "robust") {
    return tilt ? tilted_robust_expectation(*tilt, penalty) : robust_expectation(nodes);
  }
  throw ConfigError("unknown operator '" + name + "'");
}

const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> checks{
      "oracle_equivalence", "dpp",          "strict_value",
      "supermartingale",    "martingale",   "stopped_identities",
      "minimality",         "optimality",   "stopped_supermartingale",
      "value_admissibility", "pairwise_max"};
  return checks;
}

ExperimentConfig parse_config(const json& document) {
  const Section root(document, "config",
                     {"$schema", "description", "tree", "grid", "payoff", "operator", "checks",
                      "tolerance", "seed", "cap", "minimality_trials", "pair_cap", "axioms",
                      "sweep"});
  ExperimentConfig config;
  if (root.has("tree")) config.tree = parse_tree(root.raw("tree"));
  if (root.has("grid")) config.grid = parse_grid(root.raw("grid"));
  if (root.has("payoff")) config.payoff = parse_payoff(root.raw("payoff"));
  if (root.has("operator")) config.op = parse_operator(root.raw("operator"), "operator");
  if (root.has("axioms")) config.axioms = parse_axioms(root.raw("axioms"));
  if (root.has("sweep")) config.sweep = parse_sweep(root.raw("sweep"));

  config.checks = root.get("checks", config.checks);
  std::set<std::string> seen;
  for (const auto& name : config.checks) {
    const auto& known = known_checks();
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      throw ConfigError("checks: unknown check '" + name + "'");
    }
    if (!seen.insert(name).second) throw ConfigError("checks: '" + name + "' listed twice");
  }
  config.tolerance = root.get("tolerance", config.tolerance);
  config.seed = root.get("seed", config.seed);
  config.cap = root.get("cap", config.cap);
  config.minimality_trials = root.get("minimality_trials", config.minimality_trials);
  config.pair_cap = root.get("pair_cap", config.pair_cap);
  if (!(config.tolerance >= 0.0) || !std::isfinite(config.tolerance)) {
    throw ConfigError("tolerance: must be a finite non-negative number");
  }
  if (config.cap == 0) throw ConfigError("cap: must be positive");
  if (config.minimality_trials < 0) throw ConfigError("minimality_trials: must be non-negative");
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json document;
  try {
    document = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(document);
}

void apply(ExperimentConfig& config, const Overrides& overrides) {
  if (overrides.seed) config.seed = *overrides.seed;
  if (overrides.tolerance) {
    if (!(*overrides.tolerance >= 0.0)) throw ConfigError("--tol: must be non-negative");
    config.tolerance = *overrides.tolerance;
  }
  if (overrides.cap) {
    if (*overrides.cap == 0) throw ConfigError("--cap: must be positive");
    config.cap = *overrides.cap;
  }
}

std::string RunReport::text(bool include_timing) const {
  json out = body;
  if (include_timing) out["timing"] = {{"seconds", seconds}};
  return out.dump(2) + "\n";
}

RunReport run(Command command, const ExperimentConfig& config, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  switch (command) {
    case Command::kSolve:
    case Command::kOracle:
    case Command::kVerify:
      report = run_instance(command, config);
      break;
    case Command::kAxioms:
      report = run_axioms(config);
      break;
    case Command::kSweep:
      report = run_sweep(config, options);
      break;
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

int run_to_report(Command command, const std::filesystem::path& config_path,
                  const Overrides& overrides, const RunOptions& options, RunReport& report) {
  auto error = [&](int code, const std::string& kind, const std::string& message) {
    report = RunReport{};
    report.body = {{"command", to_string(command)},
                   {"status", kind},
                   {"error", message}};
    report.exit_code = code;
    return code;
  };
  try {
    auto config = load_config(config_path);
    apply(config, overrides);
    report = run(command, config, options);
    return report.exit_code;
  } catch (const ConfigError& e) {
    return error(kExitConfig, "config_error", e.what());
  } catch (const InvalidInput& e) {
    return error(kExitConfig, "config_error", e.what());
  } catch (const CapExceeded& e) {
    return error(kExitCap, "cap_exceeded", e.what());
  }
}

std::vector<std::filesystem::path> export_tables(const RunReport& report, ExportFormat format,
                                                 const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  std::vector<std::filesystem::path> written;
  const auto& body = report.body;
  if (format == ExportFormat::kText) {
    const auto path = directory / "report.json";
    write_file(path, report.text(false));
    written.push_back(path);
    return written;
  }
  for (const char* name : {"U", "V"}) {
    if (!body.contains(name)) continue;
    std::ostringstream out;
    out << "grid_index,atom_id,value\n";
    for (const auto& row : body[name]) {
      out << row["grid_index"].get<int>() << ',' << row["atom_id"].get<std::uint64_t>() << ','
          << csv_number(row["value"]) << '\n';
    }
    const auto path = directory / (std::string(name) + ".csv");
    write_file(path, out.str());
    written.push_back(path);
  }
  if (body.contains("nu") && !body["nu"].empty()) {
    std::ostringstream out;
    out << "leaf_id,stage\n";
    const auto& stages = body["nu"][0]["stages"];
    for (std::size_t leaf = 0; leaf < stages.size(); ++leaf) {
      out << leaf << ',' << stages[leaf].get<int>() << '\n';
    }
    const auto path = directory / "nu.csv";
    write_file(path, out.str());
    written.push_back(path);
  }
  if (body.contains("checks")) {
    std::ostringstream out;
    out << "check,status,residual\n";
    for (const auto& check : body["checks"]) {
      out << check["name"].get<std::string>() << ',' << check["status"].get<std::string>() << ','
          << csv_number(check["residual"]) << '\n';
    }
    const auto path = directory / "residuals.csv";
    write_file(path, out.str());
    written.push_back(path);
  }
  return written;
}

std::uint64_t instance_digest(const FiltrationTree& tree, const BermudanGrid& grid,
                              const AdaptedProcess& payoff) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  auto bytes = [&](const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      hash ^= p[i];
      hash *= 0x100000001b3ULL;
    }
  };
  auto integer = [&](std::int64_t v) { bytes(&v, sizeof v); };
  auto reals = [&](const std::vector<double>& values) {
    integer(static_cast<std::int64_t>(values.size()));
    for (double v : values) bytes(&v, sizeof v);
  };
  integer(tree.depth());
  for (const auto& probs : tree.description().child_probs) reals(probs);
  integer(grid.last_index());
  for (int k = 0; k <= grid.last_index(); ++k) {
    for (int s : grid.theta(k).stages()) integer(s);
  }
  reals(payoff.node_values);
  return hash;
}

}  // namespace optstop::cli
