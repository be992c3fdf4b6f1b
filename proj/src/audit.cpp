#include "taskforge/audit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace taskforge {

std::string to_string(DefectCategory c) {
    switch (c) {
        case DefectCategory::SEMANTIC: return "SEMANTIC";
        case DefectCategory::GEOMETRIC: return "GEOMETRIC";
        case DefectCategory::DYNAMIC: return "DYNAMIC";
    }
    throw std::logic_error("bad DefectCategory");
}

DefectCategory defect_category_from_string(const std::string& s) {
    if (s == "SEMANTIC") return DefectCategory::SEMANTIC;
    if (s == "GEOMETRIC") return DefectCategory::GEOMETRIC;
    if (s == "DYNAMIC") return DefectCategory::DYNAMIC;
    throw std::invalid_argument("unknown defect category: " + s);
}

std::string to_string(DefectCode c) {
    switch (c) {
        case DefectCode::DS1_AFFORDANCE_MISMATCH: return "D-S1";
        case DefectCode::DS2_MISSING_ASSET: return "D-S2";
        case DefectCode::DS3_PRECONDITION_CONFLICT: return "D-S3";
        case DefectCode::DG1_OUT_OF_REACH: return "D-G1";
        case DefectCode::DG2_INTERPENETRATION: return "D-G2";
        case DefectCode::DG3_MORPHOLOGICAL_MISMATCH: return "D-G3";
        case DefectCode::DD1_OVER_MASS: return "D-D1";
        case DefectCode::DD2_TIGHT_TOLERANCE: return "D-D2";
        case DefectCode::DD3_BLOCKED_CORRIDOR: return "D-D3";
        case DefectCode::DD4_SHORT_HORIZON: return "D-D4";
    }
    throw std::logic_error("bad DefectCode");
}

DefectCode defect_code_from_string(const std::string& s) {
    static const std::map<std::string, DefectCode> table = {
        {"D-S1", DefectCode::DS1_AFFORDANCE_MISMATCH},
        {"D-S2", DefectCode::DS2_MISSING_ASSET},
        {"D-S3", DefectCode::DS3_PRECONDITION_CONFLICT},
        {"D-G1", DefectCode::DG1_OUT_OF_REACH},
        {"D-G2", DefectCode::DG2_INTERPENETRATION},
        {"D-G3", DefectCode::DG3_MORPHOLOGICAL_MISMATCH},
        {"D-D1", DefectCode::DD1_OVER_MASS},
        {"D-D2", DefectCode::DD2_TIGHT_TOLERANCE},
        {"D-D3", DefectCode::DD3_BLOCKED_CORRIDOR},
        {"D-D4", DefectCode::DD4_SHORT_HORIZON},
    };
    auto it = table.find(s);
    if (it == table.end()) throw std::invalid_argument("unknown defect code: " + s);
    return it->second;
}

DefectCategory category_of(DefectCode c) {
    switch (c) {
        case DefectCode::DS1_AFFORDANCE_MISMATCH:
        case DefectCode::DS2_MISSING_ASSET:
        case DefectCode::DS3_PRECONDITION_CONFLICT: return DefectCategory::SEMANTIC;
        case DefectCode::DG1_OUT_OF_REACH:
        case DefectCode::DG2_INTERPENETRATION:
        case DefectCode::DG3_MORPHOLOGICAL_MISMATCH: return DefectCategory::GEOMETRIC;
        default: return DefectCategory::DYNAMIC;
    }
}

bool is_static_code(DefectCode c) {
    return category_of(c) != DefectCategory::DYNAMIC;
}

bool StaticAuditReport::check_passed(const std::string& name) const {
    for (const auto& c : checks_run) {
        if (c.name == name) return c.passed;
    }
    return false;
}

namespace {

Diagnostic make_diag(DefectCode code, std::vector<std::string> subjects,
                     std::string detail) {
    Diagnostic d;
    d.code = code;
    d.category = category_of(code);
    d.subjects = std::move(subjects);
    d.detail = std::move(detail);
    d.severity = Severity::REPAIRABLE;
    return d;
}

// True when the penetration between a and b is benign: a support
// carrying an item whose centre sits on it, or a container holding an
// item whose centre sits in its cavity.
bool allowed_overlap(const Entity& a, const Entity& b) {
    auto carries = [](const Entity& holder, const Entity& rider) {
        if (holder.has(Affordance::SUPPORT) &&
            holder.outer_footprint().contains(rider.pose.position())) {
            return true;
        }
        if (holder.has(Affordance::CONTAINER) && holder.inner_shape &&
            holder.inner_footprint().contains(rider.pose.position())) {
            return true;
        }
        return false;
    };
    return carries(a, b) || carries(b, a);
}

// check (i): every referenced entity admits a collision-free base pose
// within reach
void check_reachability(const Task& task, std::vector<Diagnostic>& out) {
    for (const auto& id : referenced_ids(task)) {
        if (!task.scene.has(id)) continue; // missing ids belong to check (ii)
        if (!query_reach(task.scene, id).reachable) {
            out.push_back(make_diag(DefectCode::DG1_OUT_OF_REACH, {id},
                                    "no admissible base pose within reach of " + id));
        }
    }
}

// check (ii): referenced ids resolve and instruction verbs match the
// affordances of their subjects
void check_affordances(const Task& task, std::vector<Diagnostic>& out) {
    for (const auto& id : referenced_ids(task)) {
        if (!task.scene.has(id)) {
            out.push_back(make_diag(DefectCode::DS2_MISSING_ASSET, {id},
                                    "referenced entity is absent: " + id));
        }
    }
    for (const auto& req : affordance_requirements(task.instruction)) {
        if (!task.scene.has(req.entity)) continue; // already a D-S2
        const Entity& e = task.scene.get(req.entity);
        bool ok = false;
        std::string wanted;
        for (const auto& option : req.options) {
            bool all = true;
            std::string names;
            for (Affordance a : option) {
                if (!names.empty()) names += "+";
                names += to_string(a);
                if (!e.has(a)) all = false;
            }
            if (!wanted.empty()) wanted += "|";
            wanted += names;
            if (all) ok = true;
        }
        if (!ok) {
            out.push_back(make_diag(
                DefectCode::DS1_AFFORDANCE_MISMATCH, {req.entity},
                "verb '" + req.verb + "' needs " + wanted + " on " + req.entity));
        }
    }
}

// check (iii): no disallowed interpenetration and no joint milestone
// already satisfied before anything has moved
void check_plausibility(const Task& task, std::vector<Diagnostic>& out) {
    const auto& ents = task.scene.entities;
    for (auto ia = ents.begin(); ia != ents.end(); ++ia) {
        for (auto ib = std::next(ia); ib != ents.end(); ++ib) {
            double depth = ia->second.overlap_with(ib->second);
            if (depth > kInterpenetrationTol &&
                !allowed_overlap(ia->second, ib->second)) {
                std::ostringstream detail;
                detail << ia->first << " penetrates " << ib->first << " by "
                       << format_double(depth) << " m";
                out.push_back(make_diag(DefectCode::DG2_INTERPENETRATION,
                                        {ia->first, ib->first}, detail.str()));
            }
        }
    }
    for (const auto& m : task.instruction.milestones) {
        if (m.kind != PredicateKind::JOINT_AT) continue;
        if (!task.scene.has(m.entity)) continue;
        const Entity& e = task.scene.get(m.entity);
        if (m.joint < 0 || m.joint >= static_cast<int>(e.joints.size())) continue;
        if (std::abs(e.joints[m.joint].value - m.target) <= m.tol) {
            out.push_back(make_diag(DefectCode::DS3_PRECONDITION_CONFLICT, {m.entity},
                                    "joint goal on " + m.entity +
                                        " already satisfied in the initial state"));
        }
    }
}

// check (iv): every containment goal is geometrically possible at some
// orientation (zero clearance; the executor's insertion clearance is
// deliberately stricter)
void check_morphology(const Task& task, std::vector<Diagnostic>& out) {
    for (const auto& m : task.instruction.milestones) {
        if (m.kind != PredicateKind::INSIDE) continue;
        if (!task.scene.has(m.entity) || !task.scene.has(m.item)) continue;
        const Entity& container = task.scene.get(m.entity);
        if (!container.inner_shape) continue; // affordance check owns this case
        if (!query_containment(task.scene, m.entity, m.item, 0.0)) {
            out.push_back(make_diag(DefectCode::DG3_MORPHOLOGICAL_MISMATCH,
                                    {m.entity, m.item},
                                    m.item + " cannot fit inside " + m.entity +
                                        " at any orientation"));
        }
    }
}

} // namespace

StaticAuditReport check_static(const Task& task) {
    StaticAuditReport report;
    struct Check {
        const char* name;
        void (*run)(const Task&, std::vector<Diagnostic>&);
    };
    static constexpr Check checks[] = {
        {"reachability", check_reachability},
        {"affordance_matching", check_affordances},
        {"physical_plausibility", check_plausibility},
        {"morphological_compatibility", check_morphology},
    };
    for (const auto& c : checks) {
        std::vector<Diagnostic> found;
        c.run(task, found);
        report.checks_run.push_back({c.name, found.empty()});
        for (auto& d : found) report.diagnostics.push_back(std::move(d));
    }
    report.valid = report.diagnostics.empty();
    return report;
}

double static_validity_score(const StaticAuditReport& report) {
    int passed = 0;
    for (const auto& c : report.checks_run) {
        if (c.passed) ++passed;
    }
    return static_cast<double>(passed) / static_cast<double>(report.checks_run.size());
}

Json audit_report_to_json(const StaticAuditReport& report) {
    Json diags = Json::array();
    for (const auto& d : report.diagnostics) {
        diags.push_back({{"code", to_string(d.code)},
                         {"category", to_string(d.category)},
                         {"subjects", d.subjects},
                         {"detail", d.detail},
                         {"severity", d.severity == Severity::FATAL ? "FATAL"
                                                                    : "REPAIRABLE"}});
    }
    Json checks = Json::array();
    for (const auto& c : report.checks_run) {
        checks.push_back({{"name", c.name}, {"passed", c.passed}});
    }
    return {{"diagnostics", diags},
            {"valid", report.valid},
            {"checks_run", checks},
            {"mu_static", static_validity_score(report)}};
}

StaticAuditReport audit_report_from_json(const Json& j) {
    StaticAuditReport report;
    for (const auto& dj : j.at("diagnostics")) {
        Diagnostic d;
        d.code = defect_code_from_string(dj.at("code").get<std::string>());
        d.category = defect_category_from_string(dj.at("category").get<std::string>());
        d.subjects = dj.at("subjects").get<std::vector<std::string>>();
        d.detail = dj.at("detail").get<std::string>();
        d.severity = dj.at("severity").get<std::string>() == "FATAL"
                         ? Severity::FATAL
                         : Severity::REPAIRABLE;
        report.diagnostics.push_back(std::move(d));
    }
    for (const auto& cj : j.at("checks_run")) {
        report.checks_run.push_back(
            {cj.at("name").get<std::string>(), cj.at("passed").get<bool>()});
    }
    report.valid = j.at("valid").get<bool>();
    return report;
}

} // namespace taskforge
