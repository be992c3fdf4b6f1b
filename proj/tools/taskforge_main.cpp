#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "taskforge/audit.hpp"
#include "taskforge/bundled.hpp"
#include "taskforge/catalog.hpp"
#include "taskforge/descent.hpp"
#include "taskforge/exec.hpp"
#include "taskforge/feasibility.hpp"
#include "taskforge/generator.hpp"
#include "taskforge/json_io.hpp"
#include "taskforge/metrics.hpp"
#include "taskforge/pipeline.hpp"
#include "taskforge/repair.hpp"
#include "taskforge/task.hpp"

namespace tf = taskforge;

namespace {

tf::AssetCatalog load_catalog(const std::string& path) {
    if (path.empty()) return tf::builtin_catalog();
    return tf::catalog_from_json(tf::load_json_file(path));
}

tf::Task load_task(const std::string& path) {
    return tf::task_from_json(tf::load_json_file(path));
}

// empty path means stdout
void emit(const std::string& path, const std::string& content) {
    if (path.empty())
        std::cout << content;
    else
        tf::write_text_file(path, content);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw tf::IOFailure("cannot create directory " + dir + ": " + ec.message());
}

std::string iso_utc(std::chrono::system_clock::time_point tp) {
    const std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::optional<tf::DefectCode> parse_defect(const std::string& s) {
    if (s.empty() || s == "none") return std::nullopt;
    return tf::defect_code_from_string(s);
}

constexpr const char* kDefectHelp =
    "defect code to plant (D-S1 D-S2 D-S3 D-G1 D-G2 D-G3 D-D1 D-D2 D-D3 D-D4, or none)";

struct CommonOpts {
    std::string catalog_path;
    std::uint64_t seed = 0;
    std::string out;
};

void add_common(CLI::App* sub, CommonOpts& o) {
    sub->add_option("--catalog", o.catalog_path, "catalog json path (builtin when omitted)")
        ->envname("TASKFORGE_CATALOG");
    sub->add_option("--seed", o.seed, "master seed")->envname("TASKFORGE_SEED");
    sub->add_option("--out", o.out, "output path (stdout when omitted)")
        ->envname("TASKFORGE_OUT");
}

int cmd_generate(const CommonOpts& o, const std::string& defect, bool raw) {
    const tf::AssetCatalog catalog = load_catalog(o.catalog_path);
    tf::Task task;
    std::optional<tf::DefectCode> injected;
    if (raw) {
        task = tf::sample_task(catalog, o.seed);
    } else {
        tf::GeneratedTask g = tf::sample_batch_task(catalog, o.seed, parse_defect(defect));
        task = std::move(g.task);
        injected = g.injected;
    }
    tf::Json j = tf::task_to_json(task);
    j["injected"] = injected ? tf::Json(tf::to_string(*injected)) : tf::Json(nullptr);
    emit(o.out, tf::dump_canonical(j) + "\n");
    return 0;
}

int cmd_audit(const CommonOpts& o, const std::string& task_path) {
    const tf::AssetCatalog catalog = load_catalog(o.catalog_path);
    const tf::Task task =
        task_path.empty() ? tf::sample_task(catalog, o.seed) : load_task(task_path);
    const tf::StaticAuditReport report = tf::check_static(task);
    emit(o.out, tf::dump_canonical(tf::audit_report_to_json(report)) + "\n");
    return 0;
}

int cmd_repair(const CommonOpts& o, const std::string& task_path, int budget, int max_iter,
               const std::string& task_out) {
    const tf::AssetCatalog catalog = load_catalog(o.catalog_path);
    tf::Task task = load_task(task_path);
    task.ledger.budget = budget;
    const tf::StaticLoopResult res = tf::run_static_loop(task, catalog, max_iter);
    tf::Json j;
    j["status"] = tf::to_string(res.status);
    j["iterations"] = res.iterations;
    j["semantic_cost"] = res.task.ledger.semantic_cost;
    j["report"] = tf::audit_report_to_json(res.report);
    emit(o.out, tf::dump_canonical(j) + "\n");
    if (!task_out.empty())
        tf::write_text_file(task_out, tf::dump_canonical(tf::task_to_json(res.task)) + "\n");
    return 0;
}

int cmd_execute(const CommonOpts& o, const std::string& task_path,
                const std::string& trace_out) {
    const tf::AssetCatalog catalog = load_catalog(o.catalog_path);
    (void)catalog; // execution needs no catalog; loaded to validate the flag early
    const tf::Task task = load_task(task_path);
    const tf::ExecutionConfig exec{};
    const tf::SolveResult res = tf::solve(task, exec, o.seed);
    tf::Json j;
    j["success"] = res.success;
    j["rollouts"] = res.rollouts;
    j["steps_used"] = res.best_trace.steps_used;
    j["theta"] = res.theta;
    if (res.representative) {
        j["divergence"] = tf::to_string(res.representative->cls);
        j["divergence_detail"] = res.representative->detail;
    } else {
        j["divergence"] = nullptr;
    }
    emit(o.out, tf::dump_canonical(j) + "\n");
    if (!trace_out.empty()) tf::write_text_file(trace_out, tf::trace_to_jsonl(res.best_trace));
    return 0;
}

int cmd_pipeline(const CommonOpts& o, tf::PipelineConfig cfg, const std::string& defect) {
    const tf::AssetCatalog catalog = load_catalog(o.catalog_path);
    cfg.seed = o.seed;
    cfg.tasks = 1;
    std::optional<tf::DefectCode> want =
        defect.empty() ? tf::plan_defect(o.seed, cfg) : parse_defect(defect);
    const tf::GeneratedTask g = tf::sample_batch_task(catalog, o.seed, want);
    const tf::TaskOutcome outcome = tf::process_task(g.task, g.injected, catalog, cfg, 0);

    tf::Json j;
    j["record"] = tf::pipeline_record_to_json(outcome.record);
    j["mu_initial"] =
        outcome.mu_initial ? tf::mu_estimate_to_json(*outcome.mu_initial) : tf::Json(nullptr);
    j["mu_final"] =
        outcome.mu_final ? tf::mu_estimate_to_json(*outcome.mu_final) : tf::Json(nullptr);
    j["final_task"] = tf::task_to_json(outcome.final_task);
    emit(o.out, tf::dump_canonical(j) + "\n");
    return 0;
}

int cmd_eval(const CommonOpts& o, tf::PipelineConfig cfg, const std::string& out_dir) {
    const tf::AssetCatalog catalog = load_catalog(o.catalog_path);
    cfg.seed = o.seed;
    ensure_dir(out_dir);

    const auto t0 = std::chrono::system_clock::now();
    const tf::BatchResult res = tf::run_batch(catalog, cfg);
    const auto t1 = std::chrono::system_clock::now();

    tf::write_text_file(out_dir + "/records.jsonl", tf::records_to_jsonl(res.records));
    tf::write_text_file(out_dir + "/metrics.csv", tf::metrics_to_csv(res.metrics));
    tf::write_text_file(out_dir + "/report.md", tf::batch_report_md(cfg, res.metrics));

    // the one file that carries wall-clock state; everything above is
    // a pure function of (catalog, config)
    std::ostringstream log;
    log << "started " << iso_utc(t0) << "\n"
        << "finished " << iso_utc(t1) << "\n"
        << "elapsed_ms "
        << std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count() << "\n"
        << "workers " << cfg.workers << "\n";
    tf::write_text_file(out_dir + "/run.log", log.str());

    std::cout << "tasks " << res.metrics.total << "  svr " << res.metrics.svr << "  evr "
              << res.metrics.evr << "  ftr " << res.metrics.ftr << "\n";
    return 0;
}

int cmd_converge(const CommonOpts& o) {
    tf::Json runs = tf::Json::array();
    int rc = 0;

    auto record = [&](const char* label, const tf::SmoothPotential& p,
                      const std::vector<double>& x0, double eta, int max_iter) {
        const tf::DescentResult r = tf::run_descent(p, tf::exact_oracle(p), x0, eta, max_iter);
        tf::Json j;
        j["potential"] = label;
        j["eta"] = eta;
        j["admissible"] = r.admissible;
        j["rho"] = r.rho;
        j["certified"] = r.certified;
        j["iterations"] = r.iterations;
        try {
            j["estimated_rate"] = tf::estimate_rate(r.gaps);
        } catch (const tf::InsufficientIterations&) {
            j["estimated_rate"] = nullptr; // converged too fast to fit a slope
        }
        runs.push_back(j);
        if (r.admissible && !r.certified) rc = 2;
    };

    const tf::SmoothPotential quad = tf::quadratic_potential({2.0});
    record("quadratic", quad, {1.5}, 1.0 / 2.0, 50);   // one-step optimum
    record("quadratic", quad, {1.5}, 1.0 / 4.0, 200);  // certified rho = 3/4
    record("quadratic", quad, {1.5}, 3.0 / 2.0, 50);   // inadmissible, uncertified

    const tf::SmoothPotential sine = tf::pl_sine_potential();
    record("pl_sine", sine, {2.0}, 1.0 / 16.0, 4000);
    const tf::MeasuredConstants mc = tf::measure_constants(sine, -3.0, 3.0, 2001);

    tf::Json j;
    j["runs"] = runs;
    j["pl_sine_measured"] = {{"smoothness", mc.smoothness}, {"pl_modulus", mc.pl_modulus}};
    j["pl_sine_certified"] = {{"smoothness", sine.smoothness}, {"pl_modulus", sine.pl_modulus}};
    emit(o.out, tf::dump_canonical(j) + "\n");
    return rc;
}

int cmd_diversity(const CommonOpts& o, int n_tasks, bool keep_corpus) {
    const tf::AssetCatalog catalog = load_catalog(o.catalog_path);
    const std::vector<std::string> corpus = tf::diversity_corpus(catalog, n_tasks, o.seed);
    const double score = tf::self_bleu4(corpus);
    tf::Json j;
    j["n"] = static_cast<int>(corpus.size());
    j["self_bleu4"] = score;
    if (keep_corpus) j["corpus"] = corpus;
    emit(o.out, tf::dump_canonical(j) + "\n");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"task generation with scene auditing, repair, and rollout feasibility"};
    app.require_subcommand(1);
    int rc = 0;

    CommonOpts gen_o;
    std::string gen_defect;
    bool gen_raw = false;
    auto* gen = app.add_subcommand("generate", "sample a task, optionally planting a defect");
    add_common(gen, gen_o);
    gen->add_option("--defect", gen_defect, kDefectHelp);
    gen->add_flag("--raw", gen_raw, "skip the clean-sample gate");
    gen->callback([&] { rc = cmd_generate(gen_o, gen_defect, gen_raw); });

    CommonOpts audit_o;
    std::string audit_task;
    auto* audit = app.add_subcommand("audit", "run the static scene audit");
    add_common(audit, audit_o);
    audit->add_option("--task", audit_task, "task json path (generated from --seed if absent)");
    audit->callback([&] { rc = cmd_audit(audit_o, audit_task); });

    CommonOpts rep_o;
    std::string rep_task, rep_task_out;
    int rep_budget = 8, rep_max_iter = 8;
    auto* rep = app.add_subcommand("repair", "run the static audit-repair loop on a task");
    add_common(rep, rep_o);
    rep->add_option("--task", rep_task, "task json path")->required();
    rep->add_option("--budget", rep_budget, "semantic repair budget")
        ->envname("TASKFORGE_BUDGET");
    rep->add_option("--max-iter", rep_max_iter, "audit-repair round cap");
    rep->add_option("--task-out", rep_task_out, "write the repaired task here");
    rep->callback([&] { rc = cmd_repair(rep_o, rep_task, rep_budget, rep_max_iter, rep_task_out); });

    CommonOpts exe_o;
    std::string exe_task, exe_trace;
    auto* exe = app.add_subcommand("execute", "parameter-search rollouts on a task");
    add_common(exe, exe_o);
    exe->add_option("--task", exe_task, "task json path")->required();
    exe->add_option("--trace-out", exe_trace, "write the best trace as jsonl");
    exe->callback([&] { rc = cmd_execute(exe_o, exe_task, exe_trace); });

    CommonOpts pipe_o;
    tf::PipelineConfig pipe_cfg;
    pipe_cfg.mu_samples = 256;
    std::string pipe_defect;
    double pipe_mix = 0.7;
    auto* pipe = app.add_subcommand("pipeline",
                                    "one task end to end, with feasibility estimates");
    add_common(pipe, pipe_o);
    pipe->add_option("--ablation", pipe_cfg.ablation, "vanilla | static_only | full")
        ->envname("TASKFORGE_ABLATION");
    pipe->add_option("--defect", pipe_defect, kDefectHelp);
    pipe->add_option("--defect-mix", pipe_mix, "fraction of seeds that draw a defect")
        ->envname("TASKFORGE_DEFECT_MIX");
    pipe->add_option("--budget", pipe_cfg.budget, "semantic repair budget")
        ->envname("TASKFORGE_BUDGET");
    pipe->add_option("--mu-samples", pipe_cfg.mu_samples, "Monte Carlo feasibility samples")
        ->envname("TASKFORGE_MU_SAMPLES");
    pipe->add_option("--delta-min", pipe_cfg.delta_min, "feasibility threshold on mu")
        ->envname("TASKFORGE_DELTA_MIN");
    pipe->callback([&] {
        pipe_cfg.clean_fraction = 1.0 - pipe_mix;
        rc = cmd_pipeline(pipe_o, pipe_cfg, pipe_defect);
    });

    CommonOpts eval_o;
    tf::PipelineConfig eval_cfg;
    double eval_mix = 0.7;
    std::string eval_forced;
    auto* eval = app.add_subcommand("eval", "batch run with metrics and a report");
    add_common(eval, eval_o);
    eval->add_option("--n-tasks", eval_cfg.tasks, "batch size")->envname("TASKFORGE_N_TASKS");
    eval->add_option("--ablation", eval_cfg.ablation, "vanilla | static_only | full")
        ->envname("TASKFORGE_ABLATION");
    eval->add_option("--workers", eval_cfg.workers, "worker threads")
        ->envname("TASKFORGE_WORKERS");
    eval->add_option("--defect-mix", eval_mix, "fraction of seeds that draw a defect")
        ->envname("TASKFORGE_DEFECT_MIX");
    eval->add_option("--defect", eval_forced, kDefectHelp);
    eval->add_option("--budget", eval_cfg.budget, "semantic repair budget")
        ->envname("TASKFORGE_BUDGET");
    eval->add_option("--mu-samples", eval_cfg.mu_samples,
                     "per-task Monte Carlo feasibility samples (0 = skip)")
        ->envname("TASKFORGE_MU_SAMPLES");
    eval->add_option("--delta-min", eval_cfg.delta_min, "feasibility threshold on mu")
        ->envname("TASKFORGE_DELTA_MIN");
    eval->get_option("--out")->required();
    eval->callback([&] {
        eval_cfg.clean_fraction = 1.0 - eval_mix;
        eval_cfg.forced_defect = parse_defect(eval_forced);
        rc = cmd_eval(eval_o, eval_cfg, eval_o.out);
    });

    CommonOpts conv_o;
    auto* conv = app.add_subcommand("converge", "descent contraction certificates");
    add_common(conv, conv_o);
    conv->callback([&] { rc = cmd_converge(conv_o); });

    CommonOpts div_o;
    int div_n = tf::kDiversityCorpusSize;
    bool div_corpus = false;
    auto* div = app.add_subcommand("diversity", "instruction corpus self-similarity");
    add_common(div, div_o);
    div->add_option("--n-tasks", div_n, "corpus size")->envname("TASKFORGE_N_TASKS");
    div->add_flag("--corpus", div_corpus, "include the sampled instructions in the output");
    div->callback([&] { rc = cmd_diversity(div_o, div_n, div_corpus); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const tf::IOFailure& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 1;
    } catch (const tf::Json::parse_error& e) {
        std::cerr << "bad input: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return rc;
}
