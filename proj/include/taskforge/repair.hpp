#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "taskforge/audit.hpp"
#include "taskforge/catalog.hpp"
#include "taskforge/exec.hpp"
#include "taskforge/task.hpp"

namespace taskforge {

enum class RepairStatus { VALID, BUDGET_EXCEEDED, MAX_ITER_EXCEEDED, NO_CANDIDATE };

std::string to_string(RepairStatus s);

// Candidate ops for one audit diagnostic, in preference order. May be
// empty when no admissible repair exists.
std::vector<RepairOp> synthesize_static_repair(const Task& task, const Diagnostic& d,
                                               const AssetCatalog& catalog);

struct StaticLoopResult {
    Task task;                // input task plus any applied repairs
    StaticAuditReport report; // audit of the returned task
    RepairStatus status = RepairStatus::VALID;
    int iterations = 0;       // audit/repair rounds consumed
};

// Audit, synthesize, apply, repeat: per round every diagnostic proposes
// candidates, the pool is ordered by (cost, diagnostic order, subject),
// and the first candidate that does not lower the static validity score
// is applied. Stops when the audit is clean (VALID), the next applicable
// candidate would overrun the ledger budget (BUDGET_EXCEEDED), no
// candidate is applicable (NO_CANDIDATE), or max_iter rounds pass
// (MAX_ITER_EXCEEDED).
StaticLoopResult run_static_loop(const Task& task, const AssetCatalog& catalog,
                                 int max_iter = 8);

// Candidate ops for one divergence, in preference order.
std::vector<RepairOp> synthesize_dynamic_repair(const Task& task,
                                                const DivergenceReport& divergence,
                                                const AssetCatalog& catalog);

struct DynamicRound {
    int primitive_index = -1;
    DivergenceClass cls = DivergenceClass::COLLISION_DEADLOCK;
    RepairOp op;
};

struct DynamicLoopResult {
    Task task;            // input task plus any applied repairs
    ExecutionTrace trace; // the satisfying trace when status == VALID
    RepairStatus status = RepairStatus::VALID;
    int rounds = 0;       // repairs applied in total
    std::vector<DynamicRound> round_log; // one entry per applied repair
};

// Rollout under nominal parameters with checkpoint rollback: on
// divergence at primitive k, one repair is applied and execution resumes
// from k's checkpoint (a robot reset restarts from scratch instead).
// Repeated divergences at the same primitive with the same class cycle
// through the candidate list; a primitive diverging more than max_rounds
// times fails the loop. Primitives before k are never re-executed except
// after a robot reset.
DynamicLoopResult run_dynamic_loop(const Task& task, const AssetCatalog& catalog,
                                   const ExecutionConfig& config, std::uint64_t seed,
                                   int max_rounds = 5);

} // namespace taskforge
