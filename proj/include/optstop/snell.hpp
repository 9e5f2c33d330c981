#pragma once

#include "optstop/evaluations.hpp"
#include "optstop/filtration_tree.hpp"
#include "optstop/stopping.hpp"
#include "optstop/value_family.hpp"

#include <string>
#include <vector>

namespace optstop {

/// Default absolute tolerance for equality of random variables.
inline constexpr double kEqualityTol = 1e-9;

/// ξ(θ_k) = process sampled at θ_k.
ValueFamily payoff_family(const FiltrationTree& tree, const AdaptedProcess& process,
                          const BermudanGrid& grid);

/// U(θ_n) = ξ(θ_n); U(θ_k) = max(ξ(θ_k), ρ_{θ_k,θ_{k+1}}[U(θ_{k+1})]).
/// Non-monotone operators are accepted; a note is appended to `warnings`.
ValueFamily snell_backward(const FiltrationTree& tree, const BermudanGrid& grid,
                           const ValueFamily& payoff, const Evaluation& op,
                           std::vector<std::string>* warnings = nullptr);

/// V⁺(θ_k) = ρ_{θ_k,θ_{k+1}}[V(θ_{k+1})], for k < n.
RandomVariable strict_value(const FiltrationTree& tree, const BermudanGrid& grid, int k,
                            const ValueFamily& value, const Evaluation& op);

/// max_k,ω |φ(θ_k) − ξ(θ_k) ∨ ρ_{θ_k,θ_{k+1}}[φ(θ_{k+1})]| together with
/// |φ(θ_n) − ξ(θ_n)|.
double dpp_residual(const FiltrationTree& tree, const BermudanGrid& grid,
                    const ValueFamily& payoff, const ValueFamily& family, const Evaluation& op);

struct HittingTime {
  ThetaStrategy strategy;
  /// Smallest |U − ξ| that was judged unequal; gaps in (tol, 10·tol] flag
  /// a decision sensitive to the tolerance.
  double closest_miss;
  bool borderline;
};

/// ν_k(ω) = θ_l(ω) for the smallest l ≥ k with |U(θ_l) − ξ(θ_l)| ≤ tol.
HittingTime hitting_time(const FiltrationTree& tree, const BermudanGrid& grid, int k,
                         const ValueFamily& value, const ValueFamily& payoff,
                         double tol = kEqualityTol);

}  // namespace optstop
