#pragma once

#include <cstdint>
#include <stdexcept>

#include "taskforge/exec.hpp"

namespace taskforge {

// feasibility floor: a task is kept when its estimated success mass
// over the policy parameter box exceeds this
inline constexpr double kDeltaMin = 0.1;

struct MuEstimate {
    double mu_hat = 0.0;        // successes / samples
    double ci_half_width = 0.0; // Wilson 95% half-width
    int successes = 0;
    int samples = 0;
    bool feasible = false;      // mu_hat > delta_min, strictly
    double gap = 0.0;           // max(0, delta_min - mu_hat)
};

// Monte Carlo success fraction of the parameter box: `samples` uniform
// draws, one deterministic rollout each.
MuEstimate estimate_mu(const Task& task, int samples, std::uint64_t seed,
                       const ExecutionConfig& config = {},
                       double delta_min = kDeltaMin);

struct GridTooLarge : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Exhaustive sweep: points_per_dim lattice points per parameter,
// endpoints included. Throws GridTooLarge past 1e6 rollouts.
double brute_force_mu(const Task& task, int points_per_dim,
                      const ExecutionConfig& config = {});

// Wilson score interval half-width at 95% confidence
double wilson_half_width(int successes, int samples);

// distance left to the feasibility floor
double feasibility_gap(double mu_hat, double delta_min = kDeltaMin);

Json mu_estimate_to_json(const MuEstimate& m);
MuEstimate mu_estimate_from_json(const Json& j);

} // namespace taskforge
