#include "optstop/evaluations.hpp"

#include "optstop/format.hpp"
#include "optstop/generators.hpp"
#include "optstop/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace optstop {

Evaluation::Evaluation(std::string name, OneStepGenerator generator, OperatorClaims claims,
                       double dt)
    : name_(std::move(name)), generator_(std::move(generator)), claims_(claims), dt_(dt) {
  if (!generator_) throw InvalidInput("evaluation needs a generator");
  if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw InvalidInput("step size must be positive");
}

double Evaluation::step(const NodeContext& context, std::span<const double> child_values,
                        std::span<const double> child_probs) const {
  const double y = generator_(context, child_values, child_probs, dt_);
  if (!std::isfinite(y)) {
    throw InvalidInput(name_ + ": non-finite generator output at node " +
                       std::to_string(context.node));
  }
  return y;
}

std::vector<double> Evaluation::sweep(const FiltrationTree& tree, const StoppingTime& tau,
                                      const RandomVariable& eta) const {
  if (!is_measurable_at(tree, eta, tau)) {
    throw InvalidInput(name_ + ": reward is not measurable at the terminal stopping time");
  }
  std::vector<double> y(tree.node_count(), 0.0);
  std::vector<double> child_values;
  for (int t = tree.depth(); t >= 0; --t) {
    for (NodeId id : tree.stage_nodes(t)) {
      const Node& node = tree.node(id);
      if (tau[node.leaf_begin] <= t) {
        y[id] = eta[node.leaf_begin];
        continue;
      }
      child_values.clear();
      for (NodeId child : node.children) child_values.push_back(y[child]);
      y[id] = step({id, t}, child_values, node.child_probs);
    }
  }
  return y;
}

RandomVariable read_at(const FiltrationTree& tree, std::span<const double> node_values,
                       const StoppingTime& s) {
  RandomVariable out{std::vector<double>(tree.leaf_count())};
  for (LeafId leaf = 0; leaf < tree.leaf_count(); ++leaf) {
    out[leaf] = node_values[tree.ancestor(leaf, s[leaf])];
  }
  return out;
}

RandomVariable Evaluation::evaluate(const FiltrationTree& tree, const StoppingTime& s,
                                    const StoppingTime& tau, const RandomVariable& eta) const {
  return read_at(tree, sweep(tree, tau, eta), s);
}

namespace {

double weighted_mean(std::span<const double> values, std::span<const double> probs) {
  double mean = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) mean += probs[i] * values[i];
  return mean;
}

}  // namespace

Evaluation linear_expectation() {
  return Evaluation(
      "linear",
      [](const NodeContext&, std::span<const double> c, std::span<const double> p, double) {
        return weighted_mean(c, p);
      },
      OperatorClaims{});
}

double z_norm(std::span<const double> z, std::span<const double> probs) {
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) sum += probs[i] * z[i] * z[i];
  return std::sqrt(sum);
}

Evaluation g_driver_evaluation(std::string name, Driver driver, double dt, OperatorClaims claims) {
  if (!driver) throw InvalidInput("g-evaluation needs a driver");
  return Evaluation(
      std::move(name),
      [driver = std::move(driver)](const NodeContext& context, std::span<const double> c,
                                   std::span<const double> p, double step) {
        const double mean = weighted_mean(c, p);
        std::vector<double> z(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) z[i] = c[i] - mean;
        return mean + step * driver(context.stage, mean, z, p);
      },
      claims, dt);
}

Evaluation discount_evaluation(double rate, double dt) {
  if (!std::isfinite(rate)) throw InvalidInput("discount rate must be finite");
  const bool strict = rate * dt < 1.0;
  return g_driver_evaluation(
      "g_discount",
      [rate](int, double y, std::span<const double>, std::span<const double>) {
        return -rate * y;
      },
      dt, OperatorClaims{rate * dt <= 1.0, strict, rate == 0.0});
}

Evaluation lipschitz_demo_evaluation(double rate, double ambiguity, double dt) {
  if (!std::isfinite(rate) || !(ambiguity >= 0.0)) {
    throw InvalidInput("lipschitz demo needs a finite rate and non-negative ambiguity");
  }
  return g_driver_evaluation(
      "g_lipschitz_demo",
      [rate, ambiguity](int, double y, std::span<const double> z, std::span<const double> p) {
        return -rate * y - ambiguity * z_norm(z, p);
      },
      dt, OperatorClaims{false, false, rate == 0.0});
}

Evaluation entropic_utility(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidInput("entropic gamma must be > 0");
  return Evaluation(
      "entropic(" + format_number(gamma) + ")",
      [gamma](const NodeContext&, std::span<const double> c, std::span<const double> p,
              double) {
        // Shift by the smallest child so every exponent is ≤ 0.
        const double low = *std::min_element(c.begin(), c.end());
        double sum = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) sum += p[i] * std::exp(-gamma * (c[i] - low));
        return low - std::log(sum) / gamma;
      },
      OperatorClaims{});
}

namespace {

std::vector<Candidate> validated(std::vector<Candidate> candidates, NodeId node) {
  if (candidates.empty()) {
    throw InvalidInput("robust expectation: empty candidate list at node " + std::to_string(node));
  }
  for (auto& candidate : candidates) {
    if (candidate.q.empty()) throw InvalidInput("robust expectation: empty candidate vector");
    for (double q : candidate.q) {
      if (!std::isfinite(q) || q <= 0.0) {
        throw InvalidInput("robust expectation: candidate at node " + std::to_string(node) +
                           " has a non-positive entry " + format_number(q));
      }
    }
    const double sum = std::accumulate(candidate.q.begin(), candidate.q.end(), 0.0);
    if (std::abs(sum - 1.0) > kInputProbabilityTol) {
      throw InvalidInput("robust expectation: candidate at node " + std::to_string(node) +
                         " sums to " + format_number(sum) + " ≠ 1");
    }
    for (double& q : candidate.q) q /= sum;
    if (!std::isfinite(candidate.penalty) || candidate.penalty < 0.0) {
      throw InvalidInput("robust expectation: penalties must be finite and non-negative");
    }
  }
  return candidates;
}

bool matches_reference(const Candidate& candidate, std::span<const double> reference) {
  if (candidate.q.size() != reference.size()) return false;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    if (std::abs(candidate.q[i] - reference[i]) > kInputProbabilityTol) return false;
  }
  return true;
}

double min_affine(std::span<const Candidate> candidates, std::span<const double> c) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& candidate : candidates) {
    best = std::min(best, weighted_mean(c, candidate.q) + candidate.penalty);
  }
  return best;
}

}  // namespace

Evaluation robust_expectation(AmbiguitySpec ambiguity) {
  for (auto& [node, candidates] : ambiguity) candidates = validated(std::move(candidates), node);
  return Evaluation(
      "robust",
      [ambiguity = std::move(ambiguity)](const NodeContext& context, std::span<const double> c,
                                         std::span<const double> p, double) {
        const auto it = ambiguity.find(context.node);
        if (it == ambiguity.end()) return weighted_mean(c, p);
        const auto& candidates = it->second;
        bool has_reference = false;
        for (const auto& candidate : candidates) {
          if (candidate.q.size() != c.size()) {
            throw InvalidInput("robust expectation: candidate at node " +
                               std::to_string(context.node) + " has " +
                               std::to_string(candidate.q.size()) + " entries for " +
                               std::to_string(c.size()) + " children");
          }
          has_reference = has_reference || (candidate.penalty == 0.0 && matches_reference(candidate, p));
        }
        if (!has_reference) {
          throw InvalidInput("robust expectation: node " + std::to_string(context.node) +
                             " does not list its reference vector with zero penalty");
        }
        return min_affine(candidates, c);
      },
      OperatorClaims{});
}

Evaluation tilted_robust_expectation(double tilt, double penalty) {
  if (!std::isfinite(tilt) || !std::isfinite(penalty) || penalty < 0.0) {
    throw InvalidInput("tilted robust expectation needs finite tilt and non-negative penalty");
  }
  return Evaluation(
      "robust_tilt(" + format_number(tilt) + "," + format_number(penalty) + ")",
      [tilt, penalty](const NodeContext&, std::span<const double> c, std::span<const double> p,
                      double) {
        const std::size_t m = c.size();
        double best = weighted_mean(c, p);
        if (m < 2) return best;
        std::vector<double> q(m);
        double sum = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          q[i] = p[i] * std::exp(tilt * static_cast<double>(i) / static_cast<double>(m - 1));
          sum += q[i];
        }
        double tilted = 0.0;
        for (std::size_t i = 0; i < m; ++i) tilted += (q[i] / sum) * c[i];
        return std::min(best, tilted + penalty);
      },
      OperatorClaims{});
}

ValueFamily make_rho_martingale(const FiltrationTree& tree, const Evaluation& op,
                                const RandomVariable& eta, const BermudanGrid& grid) {
  const auto horizon = StoppingTime::constant(tree, tree.depth());
  AdaptedProcess martingale{op.sweep(tree, horizon, eta)};
  return ValueFamily::from_process(tree, grid, martingale);
}

// ---------------------------------------------------------------------------
// Axiom harness

bool AxiomReport::passed() const {
  return std::all_of(properties.begin(), properties.end(), [](const PropertyResult& p) {
    return !p.claimed || is_success(p.status);
  });
}

const PropertyResult* AxiomReport::find(std::string_view id) const {
  for (const auto& p : properties) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

namespace {

constexpr double kHarnessLow = -2.0;
constexpr double kHarnessHigh = 2.0;

class PropertyTracker {
public:
  PropertyTracker(std::string id, std::string name, bool claimed, double tol)
      : tol_(tol) {
    result_.id = std::move(id);
    result_.name = std::move(name);
    result_.claimed = claimed;
  }

  /// Records |lhs − rhs| on `mask` (all leaves when empty); `one_sided` only
  /// penalizes lhs > rhs.
  void compare(std::uint64_t tree_seed, const StoppingTime& s, const StoppingTime& tau,
               const RandomVariable& eta, const RandomVariable& lhs, const RandomVariable& rhs,
               const Event& mask = {}, bool one_sided = false, std::string note = {}) {
    ++result_.trials;
    for (LeafId leaf = 0; leaf < lhs.size(); ++leaf) {
      if (!mask.empty() && !mask[leaf]) continue;
      const double gap = one_sided ? lhs[leaf] - rhs[leaf] : std::abs(lhs[leaf] - rhs[leaf]);
      if (gap > result_.worst_gap) result_.worst_gap = gap;
      if (gap > tol_ && !result_.witness) {
        result_.witness = AxiomWitness{tree_seed, s.stages(), tau.stages(), eta.values,
                                       lhs.values, rhs.values, leaf, gap, note};
      }
    }
  }

  void require_increase(std::uint64_t tree_seed, const StoppingTime& s, const StoppingTime& tau,
                        const RandomVariable& eta, const RandomVariable& lower,
                        const RandomVariable& upper, LeafId leaf, double threshold) {
    ++result_.trials;
    const double increase = upper[leaf] - lower[leaf];
    const double shortfall = threshold - increase;
    if (shortfall > result_.worst_gap) result_.worst_gap = shortfall;
    if (increase < threshold && !result_.witness) {
      result_.witness = AxiomWitness{tree_seed,    s.stages(),    tau.stages(),
                                     eta.values,   lower.values,  upper.values,
                                     leaf,         shortfall,     "increase below strictness threshold"};
    }
  }

  PropertyResult finish(Status success = Status::kPass) {
    result_.status = result_.witness ? Status::kFail : success;
    return std::move(result_);
  }

private:
  double tol_;
  PropertyResult result_;
};

RandomVariable plus(const RandomVariable& a, const RandomVariable& b, double scale = 1.0) {
  RandomVariable out = a;
  for (LeafId leaf = 0; leaf < out.size(); ++leaf) out[leaf] += scale * b[leaf];
  return out;
}

Event equal_set(const StoppingTime& a, const StoppingTime& b) {
  Event event(a.size());
  for (LeafId leaf = 0; leaf < a.size(); ++leaf) event[leaf] = a[leaf] == b[leaf];
  return event;
}

}  // namespace

AxiomReport check_axioms(const Evaluation& op, const AxiomConfig& config) {
  if (config.samples < 1) throw InvalidInput("axiom harness needs at least one sample");
  if (config.tree_seeds.empty()) throw InvalidInput("axiom harness needs a tree corpus");

  std::vector<FiltrationTree> trees;
  trees.reserve(config.tree_seeds.size());
  for (auto seed : config.tree_seeds) {
    trees.push_back(random_tree(seed, config.max_depth, config.max_branch));
  }

  const double tol = config.tolerance;
  const auto& claims = op.claims();
  PropertyTracker admissibility("ii", "admissibility", true, tol);
  PropertyTracker knowledge("iii", "knowledge preservation", true, tol);
  PropertyTracker monotone("iv", "monotonicity", claims.monotone, tol);
  PropertyTracker consistency("v", "consistency", true, tol);
  PropertyTracker zero_one("vi", "generalized zero-one law", true, tol);
  PropertyTracker fatou("vii", "monotone Fatou (stabilized form, degenerate on finite Omega)",
                        claims.monotone, tol);
  PropertyTracker strict("strict", "strict monotonicity", claims.strictly_monotone, tol);

  for (int sample = 0; sample < config.samples; ++sample) {
    const std::size_t which = static_cast<std::size_t>(sample) % trees.size();
    const FiltrationTree& tree = trees[which];
    const std::uint64_t tree_seed = config.tree_seeds[which];
    Rng rng(Rng::derive(config.seed, static_cast<std::uint64_t>(sample)));
    const auto draw = [&](const StoppingTime& tau) {
      return random_measurable(tree, rng, tau, kHarnessLow, kHarnessHigh);
    };

    {  // (ii) ρ_{S,τ}[η] = ρ_{S',τ}[η] on {S = S'}
      const auto s = random_stopping_time(tree, rng);
      const auto s2 = random_stopping_time(tree, rng);
      const auto tau = random_stopping_time(tree, rng);
      const auto eta = draw(tau);
      const auto y = op.sweep(tree, tau, eta);
      admissibility.compare(tree_seed, s, tau, eta, read_at(tree, y, s), read_at(tree, y, s2),
                            equal_set(s, s2));
    }
    {  // (iii) ρ_{τ,S}[η] = η for η ∈ F_S, τ ≥ S
      const auto s = random_stopping_time(tree, rng);
      const auto tau = random_stopping_time(tree, rng, s);
      const auto eta = draw(s);
      knowledge.compare(tree_seed, tau, s, eta, op.evaluate(tree, tau, s, eta), eta);
      // Strong form ρ_{S,τ}[η] = η for η ∈ F_S; for generated operators this
      // is constant preservation of the step.
      if (claims.preserves_constants) {
        knowledge.compare(tree_seed, s, tau, eta, op.evaluate(tree, s, tau, eta), eta, {}, false,
                          "F_S-known value changed by the evaluation");
      }
    }
    {  // (iv) η1 ≤ η2 ⇒ ρ[η1] ≤ ρ[η2]
      const auto s = random_stopping_time(tree, rng);
      const auto tau = random_stopping_time(tree, rng);
      const auto eta = draw(tau);
      const auto bump = random_measurable(tree, rng, tau, 0.0, 1.0);
      const auto higher = plus(eta, bump);
      monotone.compare(tree_seed, s, tau, eta, op.evaluate(tree, s, tau, eta),
                       op.evaluate(tree, s, tau, higher), {}, true);
    }
    {  // (v) ρ_{S,θ}[ρ_{θ,τ}[η]] = ρ_{S,τ}[η] for S ≤ θ ≤ τ
      const auto s = random_stopping_time(tree, rng);
      const auto theta = random_stopping_time(tree, rng, s);
      const auto tau = random_stopping_time(tree, rng, theta);
      const auto eta = draw(tau);
      const auto inner = op.evaluate(tree, theta, tau, eta);
      consistency.compare(tree_seed, s, tau, eta, op.evaluate(tree, s, theta, inner),
                          op.evaluate(tree, s, tau, eta));
    }
    {  // (vi) 1_A ρ_{S,τ}[ξ(τ)] = 1_A ρ_{S,τ'}[ξ(τ')] when τ = τ' on A ∈ F_S
      const auto s = random_stopping_time(tree, rng);
      const auto tau = random_stopping_time(tree, rng, s);
      const auto other = random_stopping_time(tree, rng, s);
      const auto event = random_event_at(tree, rng, s);
      std::vector<int> mixed(tree.leaf_count());
      for (LeafId leaf = 0; leaf < mixed.size(); ++leaf) {
        mixed[leaf] = event[leaf] ? tau[leaf] : other[leaf];
      }
      const auto tau2 = StoppingTime::make(tree, std::move(mixed));
      const auto payoff = random_process(tree, rng, kHarnessLow, kHarnessHigh);
      const auto xi = optstop::sample(tree, payoff, tau);
      zero_one.compare(tree_seed, s, tau, xi, op.evaluate(tree, s, tau, xi),
                       op.evaluate(tree, s, tau2, optstop::sample(tree, payoff, tau2)), event);
    }
    {  // (vii) η_m = η − (3 − m)⁺ d increases to η and is stationary from m = 3
      const auto s = random_stopping_time(tree, rng);
      const auto tau = random_stopping_time(tree, rng);
      const auto eta = draw(tau);
      const auto d = random_measurable(tree, rng, tau, 0.0, 1.0);
      const auto limit = op.evaluate(tree, s, tau, eta);
      for (int m = 0; m <= 5; ++m) {
        const auto eta_m = plus(eta, d, -static_cast<double>(std::max(0, 3 - m)));
        const auto value = op.evaluate(tree, s, tau, eta_m);
        // Monotone approach from below, then equality once stationary.
        fatou.compare(tree_seed, s, tau, eta_m, value, limit, {}, m < 3,
                      m < 3 ? "approximation exceeds the limit" : "stationary value differs");
      }
    }
    {  // strict: raising η on one τ-atom strictly raises the evaluation there
      const auto s = random_stopping_time(tree, rng);
      const auto tau = random_stopping_time(tree, rng);
      const auto eta = draw(tau);
      const LeafId leaf = static_cast<LeafId>(
          rng.uniform_int(0, static_cast<int>(tree.leaf_count()) - 1));
      const Node& atom = tree.node(tree.ancestor(leaf, tau[leaf]));
      auto raised = eta;
      const double delta = rng.uniform(0.5, 1.0);
      for (LeafId l = atom.leaf_begin; l < atom.leaf_end; ++l) raised[l] += delta;
      const auto lower = op.evaluate(tree, s, tau, eta);
      const auto upper = op.evaluate(tree, s, tau, raised);
      strict.require_increase(tree_seed, s, tau, eta, lower, upper, leaf,
                              config.strict_threshold);
    }
  }

  AxiomReport report;
  report.op_name = op.name();
  report.properties.push_back(admissibility.finish());
  report.properties.push_back(knowledge.finish());
  report.properties.push_back(monotone.finish());
  report.properties.push_back(consistency.finish());
  report.properties.push_back(zero_one.finish());
  report.properties.push_back(fatou.finish(Status::kDegenerate));
  report.properties.push_back(strict.finish());
  return report;
}

}  // namespace optstop
