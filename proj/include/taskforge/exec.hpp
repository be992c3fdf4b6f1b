#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "taskforge/task.hpp"
#include "taskforge/trace.hpp"

namespace taskforge {

struct ExecutionConfig {
    // slack an item needs inside a cavity before an insertion seats
    double insertion_clearance = 0.01;
};

Json execution_config_to_json(const ExecutionConfig& c);
ExecutionConfig execution_config_from_json(const Json& j);

struct PlanResult {
    bool found = false;
    std::vector<Vec2> waypoints; // lattice points, start cell first
    int cost = 0;                // 5 per cardinal move, 7 per diagonal
};

// Grid search over the world lattice. A cell is blocked when a disk of
// robot radius + inflation does not fit there; the start cell is exempt
// so a robot parked against clutter can still leave. Entities in
// `exclude` are transparent (the held item travels with the base).
PlanResult plan_path(const SceneGraph& scene, Vec2 start, Vec2 goal,
                     double inflation_r, const std::set<std::string>& exclude = {});

// Deterministic rollout of task.policy under parameters `theta`.
// Records one step per lattice move / manipulation, checkpoints at
// every primitive boundary, and milestone satisfaction times. The
// outcome is SUCCESS exactly when the recorded trace satisfies the
// instruction; otherwise the earliest divergence is reported.
ExecutionTrace execute(const Task& task, const ParamVector& theta,
                       const ExecutionConfig& config, std::uint64_t seed);

// Resume an earlier rollout of the same task shape from one of its
// checkpoints. Steps recorded before the checkpoint are kept verbatim
// as the prefix of the returned trace (the diverged suffix is dropped),
// so evaluation still sees one continuous episode; `from` may carry a
// repaired scene. Primitives before from.primitive_index never run again.
ExecutionTrace execute_from(const Task& task, const ParamVector& theta,
                            const ExecutionConfig& config, std::uint64_t seed,
                            const ExecutionTrace& prior, const Checkpoint& from);

struct SolveResult {
    bool success = false;
    ExecutionTrace best_trace; // first satisfying rollout, else the best scored
    ParamVector theta;
    int rollouts = 0; // rollouts consumed, nominal included
    // the nominal rollout's divergence; empty only when nominal succeeded
    std::optional<DivergenceReport> representative;
};

// Screened restart search over the parameter box: the nominal centre
// first, then search_budget - 1 batches of sampled candidates. Batch
// size is max(1, round(progress weight)); every batch member is rolled
// out and scored, and the search stops at the first rollout whose trace
// satisfies the instruction.
SolveResult solve(const Task& task, const ExecutionConfig& config,
                  std::uint64_t seed);

// shaping score of a finished rollout under the policy weights
double shaping_score(const Task& task, const ExecutionTrace& trace);

} // namespace taskforge
