#include "taskforge/feasibility.hpp"

#include <algorithm>
#include <cmath>

#include "taskforge/rng.hpp"

namespace taskforge {

namespace {

constexpr double kZ95 = 1.959964;

ParamVector draw_theta(const PolicySpec& policy, Rng& rng) {
    ParamVector theta;
    theta.reserve(policy.param_dimension());
    for (const auto& prim : policy.primitives)
        for (const auto& p : prim.params) theta.push_back(rng.uniform(p.lo, p.hi));
    return theta;
}

} // namespace

double wilson_half_width(int successes, int samples) {
    if (samples <= 0) return 0.0;
    const double n = samples;
    const double p = static_cast<double>(successes) / n;
    const double z2 = kZ95 * kZ95;
    return kZ95 * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) /
           (1.0 + z2 / n);
}

double feasibility_gap(double mu_hat, double delta_min) {
    return std::max(0.0, delta_min - mu_hat);
}

MuEstimate estimate_mu(const Task& task, int samples, std::uint64_t seed,
                       const ExecutionConfig& config, double delta_min) {
    MuEstimate out;
    out.samples = std::max(0, samples);
    Rng rng(derive_seed(seed, 0xE57));
    for (int i = 0; i < out.samples; ++i) {
        ParamVector theta = draw_theta(task.policy, rng);
        ExecutionTrace trace = execute(task, theta, config, seed);
        if (trace.outcome == TraceOutcome::SUCCESS) ++out.successes;
    }
    out.mu_hat =
        out.samples > 0 ? static_cast<double>(out.successes) / out.samples : 0.0;
    out.ci_half_width = wilson_half_width(out.successes, out.samples);
    out.feasible = out.mu_hat > delta_min;
    out.gap = feasibility_gap(out.mu_hat, delta_min);
    return out;
}

double brute_force_mu(const Task& task, int points_per_dim,
                      const ExecutionConfig& config) {
    if (points_per_dim < 2)
        throw std::invalid_argument("points_per_dim must be at least 2");
    const int dim = task.policy.param_dimension();
    if (dim == 0) {
        ExecutionTrace trace = execute(task, {}, config, task.seed);
        return trace.outcome == TraceOutcome::SUCCESS ? 1.0 : 0.0;
    }
    double total_d = 1.0;
    for (int i = 0; i < dim; ++i) total_d *= points_per_dim;
    if (total_d > 1e6)
        throw GridTooLarge("sweep would take " + format_double(total_d) +
                           " rollouts");
    const long long total = static_cast<long long>(total_d);

    std::vector<ParamDef> defs;
    defs.reserve(dim);
    for (const auto& prim : task.policy.primitives)
        for (const auto& p : prim.params) defs.push_back(p);

    long long hits = 0;
    ParamVector theta(dim);
    for (long long idx = 0; idx < total; ++idx) {
        long long rest = idx;
        for (int d = 0; d < dim; ++d) {
            const long long g = rest % points_per_dim;
            rest /= points_per_dim;
            theta[d] = defs[d].lo + (defs[d].hi - defs[d].lo) *
                                        static_cast<double>(g) /
                                        (points_per_dim - 1);
        }
        ExecutionTrace trace = execute(task, theta, config, task.seed);
        if (trace.outcome == TraceOutcome::SUCCESS) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

Json mu_estimate_to_json(const MuEstimate& m) {
    return Json{{"mu_hat", m.mu_hat},         {"ci_half_width", m.ci_half_width},
                {"successes", m.successes},   {"samples", m.samples},
                {"feasible", m.feasible},     {"gap", m.gap}};
}

MuEstimate mu_estimate_from_json(const Json& j) {
    MuEstimate m;
    m.mu_hat = j.at("mu_hat").get<double>();
    m.ci_half_width = j.at("ci_half_width").get<double>();
    m.successes = j.at("successes").get<int>();
    m.samples = j.at("samples").get<int>();
    m.feasible = j.at("feasible").get<bool>();
    m.gap = j.at("gap").get<double>();
    return m;
}

} // namespace taskforge
