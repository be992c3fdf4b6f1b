#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "taskforge/audit.hpp"
#include "taskforge/catalog.hpp"
#include "taskforge/exec.hpp"
#include "taskforge/feasibility.hpp"
#include "taskforge/metrics.hpp"
#include "taskforge/task.hpp"

namespace taskforge {

// Closed-loop batch settings. `ablation` picks how much of the loop
// runs: "vanilla" measures the audit but never gates or repairs,
// "static_only" gates on the audited scene and stops after one
// parameter search, "full" adds the rollout-repair loop.
struct PipelineConfig {
    std::string ablation = "full";
    int tasks = 50;
    std::uint64_t seed = 0;
    int workers = 1;
    double clean_fraction = 0.3; // expected share of tasks with no planted defect
    std::optional<DefectCode> forced_defect; // plant this code in every defective slot
    int budget = 8;              // semantic repair budget per task
    int max_static_iterations = 8;
    int max_dynamic_rounds = 5;
    double delta_min = kDeltaMin;
    int mu_samples = 0; // > 0 attaches Monte Carlo feasibility estimates per task
    ExecutionConfig exec;
};

// Deterministic per-task defect plan: clean with probability
// clean_fraction, otherwise a uniformly drawn code (or the forced one).
std::optional<DefectCode> plan_defect(std::uint64_t task_seed, const PipelineConfig& config);

struct TaskOutcome {
    Task final_task; // input task plus whatever repairs were applied
    PipelineRecord record;
    // filled only when config.mu_samples > 0; both estimates share one
    // sample seed so they are comparable draw for draw
    std::optional<MuEstimate> mu_initial;
    std::optional<MuEstimate> mu_final;
};

// One task end to end under the configured ablation. Never throws for
// in-task failures; those land in record.status.
TaskOutcome process_task(const Task& task, std::optional<DefectCode> injected,
                         const AssetCatalog& catalog, const PipelineConfig& config,
                         int task_index);

// Generate (with the planned defect) and process slot `task_index`.
// Generation failures come back as a failure-bearing record.
PipelineRecord run_pipeline_task(const AssetCatalog& catalog, const PipelineConfig& config,
                                 int task_index);

struct BatchResult {
    std::vector<PipelineRecord> records; // ordered by task_index
    BatchMetrics metrics;
};

// All task slots, optionally across worker threads. Output is ordered
// by task index and byte-identical for any worker count.
BatchResult run_batch(const AssetCatalog& catalog, const PipelineConfig& config);

std::string records_to_jsonl(const std::vector<PipelineRecord>& records);
std::string metrics_to_csv(const BatchMetrics& m);
std::string batch_report_md(const PipelineConfig& config, const BatchMetrics& m);

} // namespace taskforge
