#pragma once

#include "optstop/filtration_tree.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace optstop {

/// Leaf-indexed indicator of a set of scenarios.
using Event = std::vector<bool>;

/// Raised when an exhaustive enumeration would exceed its configured cap.
class CapExceeded : public std::runtime_error {
public:
  CapExceeded(std::uint64_t count, std::uint64_t cap);
  std::uint64_t count() const { return count_; }
  std::uint64_t cap() const { return cap_; }

private:
  std::uint64_t count_;
  std::uint64_t cap_;
};

inline constexpr std::uint64_t kDefaultStrategyCap = 1'000'000;

/// True iff {stage <= t} is a union of stage-t atoms for every t.
bool is_adapted(std::span<const int> stages, const FiltrationTree& tree);

/// Leaf-indexed stage map satisfying the adaptedness condition.
class StoppingTime {
public:
  static StoppingTime make(const FiltrationTree& tree, std::vector<int> stages);
  static StoppingTime constant(const FiltrationTree& tree, int t);

  const std::vector<int>& stages() const { return stages_; }
  int operator[](LeafId leaf) const { return stages_[leaf]; }
  std::size_t size() const { return stages_.size(); }
  bool operator==(const StoppingTime&) const = default;

private:
  friend StoppingTime pointwise_min(const StoppingTime&, const StoppingTime&);
  friend StoppingTime pointwise_max(const StoppingTime&, const StoppingTime&);
  explicit StoppingTime(std::vector<int> stages) : stages_(std::move(stages)) {}
  std::vector<int> stages_;
};

bool pointwise_le(const StoppingTime& a, const StoppingTime& b);
StoppingTime pointwise_min(const StoppingTime& a, const StoppingTime& b);
StoppingTime pointwise_max(const StoppingTime& a, const StoppingTime& b);

/// A ∈ F_θ: for every t, A ∩ {θ = t} is a union of stage-t atoms.
bool event_in_sigma_at(const FiltrationTree& tree, const Event& event, const StoppingTime& theta);

/// F_τ-measurability: constant on the stage-τ(ω) atom of every scenario ω.
bool is_measurable_at(const FiltrationTree& tree, const RandomVariable& rv,
                      const StoppingTime& tau);

/// Non-decreasing sequence θ_0 ≡ 0 ≤ θ_1 ≤ … ≤ θ_n ≡ N of stopping times.
class BermudanGrid {
public:
  static BermudanGrid make(const FiltrationTree& tree, std::vector<StoppingTime> thetas);
  /// Deterministic grid; stages must start at 0, end at N and be non-decreasing.
  static BermudanGrid deterministic(const FiltrationTree& tree, const std::vector<int>& stages);

  /// n, the index of the last grid time.
  int last_index() const { return static_cast<int>(thetas_.size()) - 1; }
  const StoppingTime& theta(int k) const { return thetas_.at(static_cast<std::size_t>(k)); }
  const std::vector<StoppingTime>& thetas() const { return thetas_; }

private:
  explicit BermudanGrid(std::vector<StoppingTime> thetas) : thetas_(std::move(thetas)) {}
  std::vector<StoppingTime> thetas_;
};

/// A Bermudan stopping strategy τ(ω) = θ_{k(ω)}(ω). Stores the grid-index map
/// alongside the induced stopping time; distinct index maps may induce the same
/// stage map where grid times coincide.
class ThetaStrategy {
public:
  static ThetaStrategy from_indices(const FiltrationTree& tree, const BermudanGrid& grid,
                                    std::vector<int> indices);
  /// Canonical (lowest-index) decomposition of a stage map; throws if the map
  /// is not adapted or leaves the grid.
  static ThetaStrategy from_stages(const FiltrationTree& tree, const BermudanGrid& grid,
                                   std::vector<int> stages);
  /// τ ≡ θ_k.
  static ThetaStrategy grid_time(const BermudanGrid& grid, int k);

  const std::vector<int>& indices() const { return indices_; }
  const StoppingTime& time() const { return time_; }
  const std::vector<int>& stages() const { return time_.stages(); }
  int operator[](LeafId leaf) const { return time_[leaf]; }

  /// Equality of induced stage maps.
  bool same_time(const ThetaStrategy& other) const { return time_ == other.time_; }

private:
  ThetaStrategy(std::vector<int> indices, StoppingTime time)
      : indices_(std::move(indices)), time_(std::move(time)) {}
  std::vector<int> indices_;
  StoppingTime time_;
};

/// A_0 = {τ = θ_0}; A_{k+1} = {τ = θ_{k+1} < N} minus the earlier sets; the
/// residual is absorbed into A_n. Throws if some A_k ∉ F_{θ_k}.
std::vector<Event> canonical_partition(const FiltrationTree& tree, const BermudanGrid& grid,
                                       const ThetaStrategy& tau);

/// |{τ ∈ Θ : τ ≥ lower}|, saturating at UINT64_MAX.
std::uint64_t count_from(const FiltrationTree& tree, const BermudanGrid& grid,
                         const StoppingTime& lower);

/// Every strategy τ ∈ Θ with τ ≥ lower. Order: at each node the "stop here"
/// branch precedes continuation, and children vary last-fastest.
std::vector<ThetaStrategy> enumerate_from(const FiltrationTree& tree, const BermudanGrid& grid,
                                          const StoppingTime& lower,
                                          std::uint64_t cap = kDefaultStrategyCap);

/// Θ_{θ_k}.
std::vector<ThetaStrategy> enumerate_theta_from(const FiltrationTree& tree,
                                                const BermudanGrid& grid, int k,
                                                std::uint64_t cap = kDefaultStrategyCap);

/// τ on A, τ′ on A^c. Requires A ∈ F_{τ∧τ′}.
ThetaStrategy concatenate(const FiltrationTree& tree, const BermudanGrid& grid,
                          const ThetaStrategy& tau, const ThetaStrategy& other,
                          const Event& event);

struct StrategyPair {
  ThetaStrategy min;
  ThetaStrategy max;
};
StrategyPair min_max(const FiltrationTree& tree, const BermudanGrid& grid,
                     const ThetaStrategy& tau, const ThetaStrategy& other);

/// An adapted process stored once per node: the value at a stage-t node is
/// φ_t on that atom.
struct AdaptedProcess {
  std::vector<double> node_values;

  /// From a (stage × leaf) table; throws if some row is not measurable.
  static AdaptedProcess from_stage_table(const FiltrationTree& tree,
                                         const std::vector<std::vector<double>>& table);
  static AdaptedProcess constant(const FiltrationTree& tree, double c) {
    return {std::vector<double>(tree.node_count(), c)};
  }
};

/// φ(τ)(ω) = φ_{τ(ω)}(ω).
RandomVariable sample(const FiltrationTree& tree, const AdaptedProcess& process,
                      const StoppingTime& tau);

}  // namespace optstop
