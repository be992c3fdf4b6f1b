#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "taskforge/audit.hpp"

namespace taskforge {

// One task's journey through a batch run: what was planted, what the
// audit saw, how repair went, and whether execution finally satisfied
// the instruction.
struct PipelineRecord {
    int task_index = -1;
    std::uint64_t seed = 0;
    std::string ablation; // vanilla | static_only | full
    std::string instruction;
    std::optional<DefectCode> injected;
    std::vector<DefectCode> detected; // audit codes, plus the failure
                                      // diagnosis when the search sank

    bool static_valid_initial = false;
    bool static_attempted = false; // static repair loop engaged
    bool static_pass_final = false;
    double mu_static_initial = 0.0;
    double mu_static_final = 0.0;

    bool exec_attempted = false;
    bool exec_pass = false;
    bool feasible = false; // static_pass_final && exec_pass

    bool search_attempted = false;    // dynamic rounds on exhausted horizons
    bool primitive_attempted = false; // dynamic rounds on primitive faults

    int static_iterations = 0;
    int dynamic_rounds = 0;
    int repair_cost = 0;
    int repair_budget = 0;
    int rollouts = 0;
    std::string status; // terminal repair/search status label
};

Json pipeline_record_to_json(const PipelineRecord& r);
PipelineRecord pipeline_record_from_json(const Json& j);

struct StageStats {
    int attempted = 0;
    int succeeded = 0;
    double rate() const {
        return attempted > 0 ? static_cast<double>(succeeded) / attempted : 0.0;
    }
};

struct DetectionStats {
    int tp = 0;
    int fp = 0;
    int fn = 0;
    double precision() const {
        return tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    }
    double recall() const {
        return tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    }
    double f1() const {
        const double p = precision(), r = recall();
        return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    }
};

struct BatchMetrics {
    int total = 0;
    int static_pass = 0;
    int feasible = 0;
    double svr = 0.0; // static_pass / total
    double evr = 0.0; // feasible / static_pass
    double ftr = 0.0; // feasible / total; always svr * evr by construction

    StageStats rsr_ante;      // static repair loop
    StageStats rsr_search;    // horizon / search retuning rounds
    StageStats rsr_primitive; // primitive-fault rounds

    DetectionStats detection;
    std::map<DefectCategory, DetectionStats> detection_by_category;

    double mean_repair_cost = 0.0;       // over tasks that repaired anything
    double mean_static_iterations = 0.0; // over tasks that engaged the loop
    double mean_rollouts = 0.0;
};

BatchMetrics compute_metrics(const std::vector<PipelineRecord>& records);

struct CorpusTooSmall : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mean 4-gram self-similarity of a corpus: each sentence scored against
// all others as references (geometric mean of clipped n-gram precisions
// with a brevity penalty). 1.0 means the corpus collapsed to one
// sentence; low values mean high diversity. Throws CorpusTooSmall
// below two sentences.
double self_bleu4(const std::vector<std::string>& corpus);

} // namespace taskforge
