#pragma once

#include "optstop/filtration_tree.hpp"
#include "optstop/status.hpp"
#include "optstop/stopping.hpp"
#include "optstop/value_family.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace optstop {

struct NodeContext {
  NodeId node = 0;
  int stage = 0;
};

/// One backward step: the value at a node from its children's values.
using OneStepGenerator = std::function<double(const NodeContext& context,
                                              std::span<const double> child_values,
                                              std::span<const double> child_probs, double dt)>;

/// Properties an operator declares; the axiom harness tests each declared one.
struct OperatorClaims {
  bool monotone = true;
  bool strictly_monotone = true;
  /// ρ_{S,τ}[c] = c for deterministic c.
  bool preserves_constants = true;
};

/// A non-linear evaluation ρ_{S,τ} generated by a node-local step and a
/// backward sweep frozen at τ. Admissibility, knowledge preservation,
/// consistency and the zero-one law hold by construction; monotonicity holds
/// iff the step is monotone.
class Evaluation {
public:
  Evaluation(std::string name, OneStepGenerator generator, OperatorClaims claims, double dt = 1.0);

  const std::string& name() const { return name_; }
  const OperatorClaims& claims() const { return claims_; }
  double dt() const { return dt_; }

  /// Generator output; throws InvalidInput if it is not finite.
  double step(const NodeContext& context, std::span<const double> child_values,
              std::span<const double> child_probs) const;

  /// Node values Y with Y = η on atoms where τ ≤ stage and the generator
  /// elsewhere. Throws if η is not F_τ-measurable.
  std::vector<double> sweep(const FiltrationTree& tree, const StoppingTime& tau,
                            const RandomVariable& eta) const;

  /// ρ_{S,τ}[η]; equals η on {S ≥ τ}.
  RandomVariable evaluate(const FiltrationTree& tree, const StoppingTime& s,
                          const StoppingTime& tau, const RandomVariable& eta) const;

private:
  std::string name_;
  OneStepGenerator generator_;
  OperatorClaims claims_;
  double dt_;
};

/// ω ↦ Y(stage-S(ω) ancestor of ω).
RandomVariable read_at(const FiltrationTree& tree, std::span<const double> node_values,
                       const StoppingTime& s);

Evaluation linear_expectation();

/// Driver g(t, y, z, p) of the one-step scheme y = ȳ + Δt·g(t, ȳ, z), where ȳ
/// is the conditional mean and z_i = c_i − ȳ the centered child deviations.
/// Drivers needing |z| should use the p-weighted L² norm (see z_norm).
using Driver = std::function<double(int stage, double y, std::span<const double> z,
                                    std::span<const double> probs)>;

double z_norm(std::span<const double> z, std::span<const double> probs);

Evaluation g_driver_evaluation(std::string name, Driver driver, double dt, OperatorClaims claims);

/// g(t, y, z) = −rate·y. Strictly monotone while rate·Δt < 1.
Evaluation discount_evaluation(double rate, double dt = 1.0);

/// g(t, y, z) = −rate·y − ambiguity·‖z‖. Lipschitz and concave but not
/// monotone in general; makes no monotonicity claim.
Evaluation lipschitz_demo_evaluation(double rate, double ambiguity, double dt = 1.0);

/// y = −γ⁻¹ ln Σ p_i exp(−γ c_i).
Evaluation entropic_utility(double gamma);

/// A candidate transition vector with its penalty.
struct Candidate {
  std::vector<double> q;
  double penalty = 0.0;
};

/// Per-node candidate lists; nodes absent from the map use the reference
/// transition vector alone. Every list must contain the node's reference vector
/// with penalty 0 (checked when the node is evaluated).
using AmbiguitySpec = std::map<NodeId, std::vector<Candidate>>;

/// y = min_q (Σ q_i c_i + penalty(q)).
Evaluation robust_expectation(AmbiguitySpec ambiguity);

/// At every node: the reference vector p (penalty 0) and its exponential tilt
/// q_i ∝ p_i·exp(tilt·i/(m−1)) toward later children (penalty `penalty`).
Evaluation tilted_robust_expectation(double tilt, double penalty);

/// M(τ) = ρ_{τ,θ_n}[η] on the grid times. Throws unless η is F_N-measurable.
ValueFamily make_rho_martingale(const FiltrationTree& tree, const Evaluation& op,
                                const RandomVariable& eta, const BermudanGrid& grid);

// ---------------------------------------------------------------------------
// Axiom harness

struct AxiomWitness {
  std::uint64_t tree_seed = 0;
  std::vector<int> s;
  std::vector<int> tau;
  std::vector<double> eta;
  std::vector<double> lhs;
  std::vector<double> rhs;
  LeafId leaf = 0;
  double gap = 0.0;
  std::string note;
};

struct PropertyResult {
  std::string id;
  std::string name;
  /// Unclaimed properties are still sampled but never fail the report.
  bool claimed = true;
  Status status = Status::kPass;
  std::size_t trials = 0;
  double worst_gap = 0.0;
  std::optional<AxiomWitness> witness;
};

struct AxiomReport {
  std::string op_name;
  std::vector<PropertyResult> properties;

  bool passed() const;
  const PropertyResult* find(std::string_view id) const;
};

struct AxiomConfig {
  std::vector<std::uint64_t> tree_seeds{1, 2, 3, 4, 5};
  int max_depth = 3;
  int max_branch = 3;
  int samples = 200;
  std::uint64_t seed = 1;
  double tolerance = 1e-9;
  double strict_threshold = 1e-12;
};

/// Randomized check of admissibility (ii), knowledge preservation (iii),
/// monotonicity (iv), consistency (v), the generalized zero-one law (vi), the
/// stabilized Fatou identity (vii) and strict monotonicity.
AxiomReport check_axioms(const Evaluation& op, const AxiomConfig& config);

}  // namespace optstop
