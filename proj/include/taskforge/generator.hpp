#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>

#include "taskforge/audit.hpp"
#include "taskforge/catalog.hpp"
#include "taskforge/exec.hpp"
#include "taskforge/task.hpp"

namespace taskforge {

struct GenerationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NotClean : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CannotInject : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One scripted task: template family, catalog assets, collision-free
// millimetre-quantized poses, instruction text, and a policy whose
// parameter boxes are derived from the placed geometry.
Task sample_task(const AssetCatalog& catalog, std::uint64_t seed);

// sample_task redrawn (salted) until the static audit is clean and the
// nominal rollout satisfies the instruction.
Task sample_clean_task(const AssetCatalog& catalog, std::uint64_t seed);

// Installs one defect into a clean task and re-verifies that the result
// misbehaves in exactly the intended way: static defects must be the
// only diagnostic family reported, dynamic defects must leave the audit
// clean and steer the nominal-first search into the matching divergence;
// every defect must sink the parameter search. Throws NotClean when the
// input fails the clean precondition (bypass with skip_clean_check for
// already-defective inputs) and CannotInject when this task cannot host
// the defect.
Task inject_defect(const Task& task, DefectCode code, const AssetCatalog& catalog,
                   bool skip_clean_check = false);

struct GeneratedTask {
    Task task;
    std::optional<DefectCode> injected;
};

// One batch slot: a clean task, or a clean task carrying `want`. Bases
// incompatible with the wanted defect are redrawn under fresh salts.
GeneratedTask sample_batch_task(const AssetCatalog& catalog, std::uint64_t seed,
                                std::optional<DefectCode> want);

} // namespace taskforge
