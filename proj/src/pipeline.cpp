#include "taskforge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <utility>

#include "taskforge/generator.hpp"
#include "taskforge/json_io.hpp"
#include "taskforge/repair.hpp"
#include "taskforge/rng.hpp"

namespace taskforge {

namespace {

constexpr std::uint64_t kDefectPlanSalt = 0xDEF;
constexpr std::uint64_t kSolveSalt = 0x50;
constexpr std::uint64_t kDynamicSalt = 0x51;
constexpr std::uint64_t kMuSalt = 0xA11;

const DefectCode kAllCodes[] = {
    DefectCode::DS1_AFFORDANCE_MISMATCH, DefectCode::DS2_MISSING_ASSET,
    DefectCode::DS3_PRECONDITION_CONFLICT, DefectCode::DG1_OUT_OF_REACH,
    DefectCode::DG2_INTERPENETRATION, DefectCode::DG3_MORPHOLOGICAL_MISMATCH,
    DefectCode::DD1_OVER_MASS, DefectCode::DD2_TIGHT_TOLERANCE,
    DefectCode::DD3_BLOCKED_CORRIDOR, DefectCode::DD4_SHORT_HORIZON,
};

void require_known_ablation(const std::string& a) {
    if (a != "vanilla" && a != "static_only" && a != "full")
        throw std::invalid_argument("unknown ablation: " + a);
}

std::string status_label(const char* stage, RepairStatus s) {
    std::string tail = to_string(s);
    std::transform(tail.begin(), tail.end(), tail.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return std::string(stage) + "_" + tail;
}

void note_code(PipelineRecord& r, DefectCode code) {
    if (std::find(r.detected.begin(), r.detected.end(), code) == r.detected.end())
        r.detected.push_back(code);
}

void note_audit(PipelineRecord& r, const StaticAuditReport& report) {
    for (const Diagnostic& d : report.diagnostics) note_code(r, d.code);
}

// What a terminal rollout failure says about the task itself. Precondition
// divergences point at the policy sequence, not a planted defect.
std::optional<DefectCode> divergence_code(DivergenceClass cls) {
    switch (cls) {
        case DivergenceClass::GRASP_TORQUE: return DefectCode::DD1_OVER_MASS;
        case DivergenceClass::INSERTION_TOLERANCE: return DefectCode::DD2_TIGHT_TOLERANCE;
        case DivergenceClass::COLLISION_DEADLOCK: return DefectCode::DD3_BLOCKED_CORRIDOR;
        case DivergenceClass::PLANNER_NO_PATH: return DefectCode::DD3_BLOCKED_CORRIDOR;
        case DivergenceClass::HORIZON_EXHAUSTED: return DefectCode::DD4_SHORT_HORIZON;
        case DivergenceClass::PRECONDITION_ALREADY_MET: return std::nullopt;
    }
    throw std::logic_error("bad DivergenceClass");
}

} // namespace

std::optional<DefectCode> plan_defect(std::uint64_t task_seed, const PipelineConfig& config) {
    Rng rng(derive_seed(task_seed, kDefectPlanSalt));
    if (rng.uniform01() < config.clean_fraction) return std::nullopt;
    if (config.forced_defect) return config.forced_defect;
    return kAllCodes[rng.uniform_int(10)];
}

TaskOutcome process_task(const Task& input, std::optional<DefectCode> injected,
                         const AssetCatalog& catalog, const PipelineConfig& config,
                         int task_index) {
    require_known_ablation(config.ablation);

    TaskOutcome out;
    PipelineRecord& r = out.record;
    r.task_index = task_index;
    r.seed = input.seed;
    r.ablation = config.ablation;
    r.instruction = input.instruction.text;
    r.injected = injected;
    r.repair_budget = config.budget;

    Task task = input;
    task.ledger.budget = config.budget;

    const std::uint64_t mu_seed = derive_seed(task.seed, kMuSalt);
    if (config.mu_samples > 0)
        out.mu_initial = estimate_mu(task, config.mu_samples, mu_seed, config.exec,
                                     config.delta_min);

    const StaticAuditReport initial = check_static(task);
    r.static_valid_initial = initial.valid;
    r.mu_static_initial = static_validity_score(initial);
    note_audit(r, initial);

    bool gate = true; // vanilla rolls out regardless of the audit verdict
    if (config.ablation == "vanilla") {
        r.static_pass_final = initial.valid;
        r.mu_static_final = r.mu_static_initial;
    } else if (initial.valid) {
        r.static_pass_final = true;
        r.mu_static_final = r.mu_static_initial;
    } else {
        r.static_attempted = true;
        StaticLoopResult sl = run_static_loop(task, catalog, config.max_static_iterations);
        task = std::move(sl.task);
        r.static_iterations = sl.iterations;
        r.static_pass_final = sl.status == RepairStatus::VALID;
        r.mu_static_final = static_validity_score(sl.report);
        r.repair_cost = task.ledger.semantic_cost;
        if (!r.static_pass_final) {
            r.status = status_label("static", sl.status);
            gate = false;
        }
    }

    std::optional<DivergenceReport> sank;
    if (gate) {
        r.exec_attempted = true;
        SolveResult sr = solve(task, config.exec, derive_seed(task.seed, kSolveSalt));
        r.rollouts += sr.rollouts;
        bool pass = sr.success;
        if (!pass) sank = sr.representative;

        if (!pass && config.ablation == "full") {
            DynamicLoopResult dl = run_dynamic_loop(task, catalog, config.exec,
                                                    derive_seed(task.seed, kDynamicSalt),
                                                    config.max_dynamic_rounds);
            r.dynamic_rounds = dl.rounds;
            for (const DynamicRound& round : dl.round_log) {
                if (round.cls == DivergenceClass::HORIZON_EXHAUSTED)
                    r.search_attempted = true;
                else
                    r.primitive_attempted = true;
            }
            task = std::move(dl.task);
            r.repair_cost = task.ledger.semantic_cost;
            pass = dl.status == RepairStatus::VALID;
            if (!pass) r.status = status_label("dynamic", dl.status);
        } else if (!pass) {
            r.status = "exec_failed";
        }
        r.exec_pass = pass;
    }

    r.feasible = r.static_pass_final && r.exec_pass;
    if (r.feasible) {
        r.status = "ok";
    } else if (r.status.empty()) {
        // vanilla with an invalid scene whose rollout still satisfied the goal
        r.status = "static_invalid";
    }
    if (r.exec_attempted && !r.exec_pass && sank) {
        if (auto code = divergence_code(sank->cls)) note_code(r, *code);
    }

    if (config.mu_samples > 0)
        out.mu_final = estimate_mu(task, config.mu_samples, mu_seed, config.exec,
                                   config.delta_min);
    out.final_task = std::move(task);
    return out;
}

PipelineRecord run_pipeline_task(const AssetCatalog& catalog, const PipelineConfig& config,
                                 int task_index) {
    require_known_ablation(config.ablation);
    const std::uint64_t task_seed = config.seed ^ static_cast<std::uint64_t>(task_index);
    try {
        const std::optional<DefectCode> want = plan_defect(task_seed, config);
        GeneratedTask g = sample_batch_task(catalog, task_seed, want);
        return process_task(g.task, g.injected, catalog, config, task_index).record;
    } catch (const std::invalid_argument&) {
        throw; // configuration bugs should not masquerade as task failures
    } catch (const std::exception& e) {
        PipelineRecord r;
        r.task_index = task_index;
        r.seed = task_seed;
        r.ablation = config.ablation;
        r.repair_budget = config.budget;
        r.status = std::string("generation_failed: ") + e.what();
        return r;
    }
}

BatchResult run_batch(const AssetCatalog& catalog, const PipelineConfig& config) {
    require_known_ablation(config.ablation);
    if (config.tasks < 0) throw std::invalid_argument("tasks must be >= 0");

    BatchResult out;
    out.records.resize(static_cast<std::size_t>(config.tasks));
    const int workers = std::max(1, std::min(config.workers, std::max(1, config.tasks)));

    if (workers == 1) {
        for (int i = 0; i < config.tasks; ++i)
            out.records[static_cast<std::size_t>(i)] = run_pipeline_task(catalog, config, i);
    } else {
        std::atomic<int> next{0};
        std::exception_ptr failure;
        std::atomic<bool> failed{false};
        auto work = [&]() {
            try {
                for (;;) {
                    const int i = next.fetch_add(1);
                    if (i >= config.tasks || failed.load()) break;
                    out.records[static_cast<std::size_t>(i)] =
                        run_pipeline_task(catalog, config, i);
                }
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    out.metrics = compute_metrics(out.records);
    return out;
}

std::string records_to_jsonl(const std::vector<PipelineRecord>& records) {
    std::ostringstream out;
    for (const PipelineRecord& r : records)
        out << dump_canonical(pipeline_record_to_json(r), /*indent=*/-1) << "\n";
    return out.str();
}

namespace {

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string pct1(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f%%", v * 100.0);
    return buf;
}

void csv_row(std::ostringstream& out, const std::string& key, const std::string& value) {
    out << key << "," << value << "\n";
}

} // namespace

std::string metrics_to_csv(const BatchMetrics& m) {
    std::ostringstream out;
    out << "metric,value\n";
    csv_row(out, "total", std::to_string(m.total));
    csv_row(out, "static_pass", std::to_string(m.static_pass));
    csv_row(out, "feasible", std::to_string(m.feasible));
    csv_row(out, "svr", fixed6(m.svr));
    csv_row(out, "evr", fixed6(m.evr));
    csv_row(out, "ftr", fixed6(m.ftr));
    csv_row(out, "rsr_ante_attempted", std::to_string(m.rsr_ante.attempted));
    csv_row(out, "rsr_ante_succeeded", std::to_string(m.rsr_ante.succeeded));
    csv_row(out, "rsr_ante_rate", fixed6(m.rsr_ante.rate()));
    csv_row(out, "rsr_search_attempted", std::to_string(m.rsr_search.attempted));
    csv_row(out, "rsr_search_succeeded", std::to_string(m.rsr_search.succeeded));
    csv_row(out, "rsr_search_rate", fixed6(m.rsr_search.rate()));
    csv_row(out, "rsr_primitive_attempted", std::to_string(m.rsr_primitive.attempted));
    csv_row(out, "rsr_primitive_succeeded", std::to_string(m.rsr_primitive.succeeded));
    csv_row(out, "rsr_primitive_rate", fixed6(m.rsr_primitive.rate()));
    csv_row(out, "detection_tp", std::to_string(m.detection.tp));
    csv_row(out, "detection_fp", std::to_string(m.detection.fp));
    csv_row(out, "detection_fn", std::to_string(m.detection.fn));
    csv_row(out, "detection_precision", fixed6(m.detection.precision()));
    csv_row(out, "detection_recall", fixed6(m.detection.recall()));
    csv_row(out, "detection_f1", fixed6(m.detection.f1()));
    for (const auto& [cat, stats] : m.detection_by_category) {
        std::string key = "detection_" + to_string(cat);
        std::transform(key.begin(), key.end(), key.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        csv_row(out, key + "_precision", fixed6(stats.precision()));
        csv_row(out, key + "_recall", fixed6(stats.recall()));
        csv_row(out, key + "_f1", fixed6(stats.f1()));
    }
    csv_row(out, "mean_repair_cost", fixed6(m.mean_repair_cost));
    csv_row(out, "mean_static_iterations", fixed6(m.mean_static_iterations));
    csv_row(out, "mean_rollouts", fixed6(m.mean_rollouts));
    return out.str();
}

std::string batch_report_md(const PipelineConfig& config, const BatchMetrics& m) {
    std::ostringstream out;
    out << "# batch report\n\n";
    out << "| setting | value |\n|---|---|\n";
    out << "| ablation | " << config.ablation << " |\n";
    out << "| tasks | " << config.tasks << " |\n";
    out << "| seed | " << config.seed << " |\n";
    out << "| clean fraction | " << format_double(config.clean_fraction) << " |\n";
    if (config.forced_defect)
        out << "| forced defect | " << to_string(*config.forced_defect) << " |\n";
    out << "| repair budget | " << config.budget << " |\n";
    out << "| delta_min | " << format_double(config.delta_min) << " |\n\n";

    out << "## headline rates\n\n";
    out << "| metric | value |\n|---|---|\n";
    out << "| static validity rate (SVR) | " << pct1(m.svr) << " |\n";
    out << "| execution validity rate (EVR) | " << pct1(m.evr) << " |\n";
    out << "| feasible task rate (FTR) | " << pct1(m.ftr) << " |\n";
    out << "| tasks | " << m.total << " |\n";
    out << "| static pass | " << m.static_pass << " |\n";
    out << "| feasible | " << m.feasible << " |\n\n";

    out << "## repair success by stage\n\n";
    out << "| stage | attempted | succeeded | rate |\n|---|---|---|---|\n";
    out << "| scene audit repairs | " << m.rsr_ante.attempted << " | " << m.rsr_ante.succeeded
        << " | " << pct1(m.rsr_ante.rate()) << " |\n";
    out << "| search retuning | " << m.rsr_search.attempted << " | " << m.rsr_search.succeeded
        << " | " << pct1(m.rsr_search.rate()) << " |\n";
    out << "| primitive recovery | " << m.rsr_primitive.attempted << " | "
        << m.rsr_primitive.succeeded << " | " << pct1(m.rsr_primitive.rate()) << " |\n\n";

    out << "## defect detection\n\n";
    out << "| scope | tp | fp | fn | precision | recall | f1 |\n|---|---|---|---|---|---|---|\n";
    auto detection_row = [&](const std::string& label, const DetectionStats& d) {
        out << "| " << label << " | " << d.tp << " | " << d.fp << " | " << d.fn << " | "
            << fixed6(d.precision()) << " | " << fixed6(d.recall()) << " | " << fixed6(d.f1())
            << " |\n";
    };
    detection_row("overall", m.detection);
    for (const auto& [cat, stats] : m.detection_by_category) {
        std::string label = to_string(cat);
        std::transform(label.begin(), label.end(), label.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        detection_row(label, stats);
    }
    out << "\n";

    out << "## averages\n\n";
    out << "| metric | value |\n|---|---|\n";
    out << "| mean repair cost (repaired tasks) | " << fixed6(m.mean_repair_cost) << " |\n";
    out << "| mean audit-loop iterations (engaged tasks) | " << fixed6(m.mean_static_iterations)
        << " |\n";
    out << "| mean rollouts per task | " << fixed6(m.mean_rollouts) << " |\n\n";

    out << "## reference targets\n\n";
    out << "Directional reference points for this pipeline family at full\n";
    out << "deployment scale (richer asset base, learned policies); this\n";
    out << "desk-scale build is expected to land in the same ordering, not\n";
    out << "on the same numbers.\n\n";
    out << "| configuration | SVR | EVR | FTR |\n|---|---|---|---|\n";
    out << "| no audit, no repair | 41.5% | 30.4% | 12.6% |\n";
    out << "| full audit and repair | 97.5% | 94.5% | 92.1% |\n\n";
    out << "Instruction diversity reference: corpus self-similarity 0.276\n";
    out << "(lower is more diverse).\n";
    return out.str();
}

} // namespace taskforge
