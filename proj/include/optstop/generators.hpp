#pragma once

#include "optstop/filtration_tree.hpp"
#include "optstop/rng.hpp"
#include "optstop/stopping.hpp"

namespace optstop {

// Random objects for property checks. Every draw is adapted by construction:
// decisions at a node use only that node's stage.

/// Stops on each reachable atom at or after `lower` with probability `stop_prob`.
StoppingTime random_stopping_time(const FiltrationTree& tree, Rng& rng,
                                  const StoppingTime& lower, double stop_prob = 0.4);
StoppingTime random_stopping_time(const FiltrationTree& tree, Rng& rng, double stop_prob = 0.4);

AdaptedProcess random_process(const FiltrationTree& tree, Rng& rng, double lo, double hi);

/// Uniform values constant on stage-τ(ω) atoms.
RandomVariable random_measurable(const FiltrationTree& tree, Rng& rng, const StoppingTime& tau,
                                 double lo, double hi);

/// A ∈ F_S.
Event random_event_at(const FiltrationTree& tree, Rng& rng, const StoppingTime& s);

/// n uniform in [1, max_n]; intermediate θ_j random stopping times ≥ θ_{j-1}.
BermudanGrid random_grid(const FiltrationTree& tree, Rng& rng, int max_n);

}  // namespace optstop
