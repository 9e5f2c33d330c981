#pragma once

#include "optstop/filtration_tree.hpp"
#include "optstop/stopping.hpp"

#include <vector>

namespace optstop {

/// An admissible family stored at the grid times, φ(θ_0), …, φ(θ_n), and
/// extended to any strategy by φ(τ) = Σ φ(θ_k) 1_{A_k}.
class ValueFamily {
public:
  ValueFamily() = default;
  explicit ValueFamily(std::vector<RandomVariable> at_grid) : at_grid_(std::move(at_grid)) {}

  static ValueFamily from_process(const FiltrationTree& tree, const BermudanGrid& grid,
                                  const AdaptedProcess& process);

  int last_index() const { return static_cast<int>(at_grid_.size()) - 1; }
  const RandomVariable& operator[](int k) const { return at_grid_.at(static_cast<std::size_t>(k)); }
  RandomVariable& operator[](int k) { return at_grid_.at(static_cast<std::size_t>(k)); }
  const std::vector<RandomVariable>& values() const { return at_grid_; }

  /// φ(τ)(ω) = φ(θ_{k(ω)})(ω) using the strategy's index map.
  RandomVariable at(const ThetaStrategy& tau) const;

private:
  std::vector<RandomVariable> at_grid_;
};

/// Largest violation of the family invariants: φ(θ_k) F_{θ_k}-measurable and
/// φ(θ_k) = φ(θ_{k+1}) on {θ_k = θ_{k+1}}. Returns 0 for an admissible family
/// and +inf when a measurability condition fails.
double admissibility_defect(const FiltrationTree& tree, const BermudanGrid& grid,
                            const ValueFamily& family);

}  // namespace optstop
