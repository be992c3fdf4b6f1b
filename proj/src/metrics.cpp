#include "taskforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace taskforge {

Json pipeline_record_to_json(const PipelineRecord& r) {
    Json j;
    j["task_index"] = r.task_index;
    j["seed"] = r.seed;
    j["ablation"] = r.ablation;
    j["instruction"] = r.instruction;
    j["injected"] = r.injected ? Json(to_string(*r.injected)) : Json(nullptr);
    Json det = Json::array();
    for (DefectCode c : r.detected) det.push_back(to_string(c));
    j["detected"] = det;
    j["static_valid_initial"] = r.static_valid_initial;
    j["static_attempted"] = r.static_attempted;
    j["static_pass_final"] = r.static_pass_final;
    j["mu_static_initial"] = r.mu_static_initial;
    j["mu_static_final"] = r.mu_static_final;
    j["exec_attempted"] = r.exec_attempted;
    j["exec_pass"] = r.exec_pass;
    j["feasible"] = r.feasible;
    j["search_attempted"] = r.search_attempted;
    j["primitive_attempted"] = r.primitive_attempted;
    j["static_iterations"] = r.static_iterations;
    j["dynamic_rounds"] = r.dynamic_rounds;
    j["repair_cost"] = r.repair_cost;
    j["repair_budget"] = r.repair_budget;
    j["rollouts"] = r.rollouts;
    j["status"] = r.status;
    return j;
}

PipelineRecord pipeline_record_from_json(const Json& j) {
    PipelineRecord r;
    r.task_index = j.at("task_index").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.ablation = j.at("ablation").get<std::string>();
    r.instruction = j.at("instruction").get<std::string>();
    if (!j.at("injected").is_null())
        r.injected = defect_code_from_string(j.at("injected").get<std::string>());
    for (const auto& d : j.at("detected"))
        r.detected.push_back(defect_code_from_string(d.get<std::string>()));
    r.static_valid_initial = j.at("static_valid_initial").get<bool>();
    r.static_attempted = j.at("static_attempted").get<bool>();
    r.static_pass_final = j.at("static_pass_final").get<bool>();
    r.mu_static_initial = j.at("mu_static_initial").get<double>();
    r.mu_static_final = j.at("mu_static_final").get<double>();
    r.exec_attempted = j.at("exec_attempted").get<bool>();
    r.exec_pass = j.at("exec_pass").get<bool>();
    r.feasible = j.at("feasible").get<bool>();
    r.search_attempted = j.at("search_attempted").get<bool>();
    r.primitive_attempted = j.at("primitive_attempted").get<bool>();
    r.static_iterations = j.at("static_iterations").get<int>();
    r.dynamic_rounds = j.at("dynamic_rounds").get<int>();
    r.repair_cost = j.at("repair_cost").get<int>();
    r.repair_budget = j.at("repair_budget").get<int>();
    r.rollouts = j.at("rollouts").get<int>();
    r.status = j.at("status").get<std::string>();
    return r;
}

BatchMetrics compute_metrics(const std::vector<PipelineRecord>& records) {
    BatchMetrics m;
    m.total = static_cast<int>(records.size());

    int cost_n = 0, iter_n = 0;
    double cost_sum = 0.0, iter_sum = 0.0, roll_sum = 0.0;

    for (const auto& r : records) {
        if (r.static_pass_final) ++m.static_pass;
        if (r.feasible) ++m.feasible;

        if (r.static_attempted) {
            ++m.rsr_ante.attempted;
            if (r.feasible) ++m.rsr_ante.succeeded;
        }
        if (r.search_attempted) {
            ++m.rsr_search.attempted;
            if (r.feasible) ++m.rsr_search.succeeded;
        }
        if (r.primitive_attempted) {
            ++m.rsr_primitive.attempted;
            if (r.feasible) ++m.rsr_primitive.succeeded;
        }

        // exact-code detection accounting; spurious codes count once each
        std::vector<DefectCode> unique = r.detected;
        std::sort(unique.begin(), unique.end());
        unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
        bool hit = false;
        for (DefectCode d : unique) {
            if (r.injected && d == *r.injected) {
                hit = true;
                continue;
            }
            ++m.detection.fp;
            ++m.detection_by_category[category_of(d)].fp;
        }
        if (r.injected) {
            DefectCategory cat = category_of(*r.injected);
            if (hit) {
                ++m.detection.tp;
                ++m.detection_by_category[cat].tp;
            } else {
                ++m.detection.fn;
                ++m.detection_by_category[cat].fn;
            }
        }

        if (r.repair_cost > 0) {
            ++cost_n;
            cost_sum += r.repair_cost;
        }
        if (r.static_attempted) {
            ++iter_n;
            iter_sum += r.static_iterations;
        }
        roll_sum += r.rollouts;
    }

    if (m.total > 0) {
        m.svr = static_cast<double>(m.static_pass) / m.total;
        m.ftr = static_cast<double>(m.feasible) / m.total;
    }
    if (m.static_pass > 0)
        m.evr = static_cast<double>(m.feasible) / m.static_pass;
    if (cost_n > 0) m.mean_repair_cost = cost_sum / cost_n;
    if (iter_n > 0) m.mean_static_iterations = iter_sum / iter_n;
    if (m.total > 0) m.mean_rollouts = roll_sum / m.total;
    return m;
}

namespace {

// maximum n-gram count across the corpus with the runner-up, so any
// sentence can clip against "all references except itself" in O(1)
struct GramTally {
    int best = 0;
    int best_holders = 0;
    int second = 0;

    void offer(int count) {
        if (count > best) {
            second = best;
            best = count;
            best_holders = 1;
        } else if (count == best) {
            ++best_holders;
        } else if (count > second) {
            second = count;
        }
    }
    int clip_for(int own_count) const {
        if (own_count == best && best_holders == 1) return second;
        return best;
    }
};

std::string join_gram(const std::vector<std::string>& toks, std::size_t at,
                      int n) {
    std::string g = toks[at];
    for (int k = 1; k < n; ++k) {
        g.push_back('\x1f');
        g += toks[at + k];
    }
    return g;
}

} // namespace

double self_bleu4(const std::vector<std::string>& corpus) {
    if (corpus.size() < 2)
        throw CorpusTooSmall("self similarity needs at least 2 sentences");

    std::vector<std::vector<std::string>> toks;
    toks.reserve(corpus.size());
    for (const auto& s : corpus) toks.push_back(tokenize_lower(s));

    // per-sentence n-gram counts and the corpus-wide tallies, per order
    std::vector<std::vector<std::unordered_map<std::string, int>>> counts(
        4, std::vector<std::unordered_map<std::string, int>>(corpus.size()));
    std::vector<std::unordered_map<std::string, GramTally>> tallies(4);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        for (int n = 1; n <= 4; ++n) {
            auto& mine = counts[n - 1][i];
            if (toks[i].size() >= static_cast<std::size_t>(n))
                for (std::size_t at = 0; at + n <= toks[i].size(); ++at)
                    ++mine[join_gram(toks[i], at, n)];
            for (const auto& [g, c] : mine) tallies[n - 1][g].offer(c);
        }
    }

    std::vector<double> scores;
    scores.reserve(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const int c = static_cast<int>(toks[i].size());
        if (c == 0) {
            scores.push_back(0.0);
            continue;
        }
        int r = -1;
        for (std::size_t j = 0; j < corpus.size(); ++j) {
            if (j == i) continue;
            const int len = static_cast<int>(toks[j].size());
            if (r < 0 || std::abs(len - c) < std::abs(r - c) ||
                (std::abs(len - c) == std::abs(r - c) && len < r))
                r = len;
        }
        double log_p = 0.0;
        for (int n = 1; n <= 4; ++n) {
            const int t = std::max(0, c - n + 1);
            int matched = 0;
            for (const auto& [g, cnt] : counts[n - 1][i])
                matched += std::min(cnt, tallies[n - 1].at(g).clip_for(cnt));
            const double p = matched > 0
                                 ? static_cast<double>(matched) / t
                                 : 1.0 / (t + 1);
            log_p += 0.25 * std::log(p);
        }
        const double bp = c > r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / c);
        scores.push_back(bp * std::exp(log_p));
    }

    // order-independent accumulation
    std::sort(scores.begin(), scores.end());
    double sum = 0.0;
    for (double s : scores) sum += s;
    return sum / static_cast<double>(scores.size());
}

} // namespace taskforge
