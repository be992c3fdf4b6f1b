#pragma once

#include <string>
#include <vector>

#include "taskforge/task.hpp"

namespace taskforge {

enum class DefectCategory { SEMANTIC, GEOMETRIC, DYNAMIC };

std::string to_string(DefectCategory c);
DefectCategory defect_category_from_string(const std::string& s);

// Defect / diagnostic codes. The D-D* codes never appear in static
// audit reports; they exist for injection ground truth and for the
// divergence-to-code mapping used by the metrics module.
enum class DefectCode {
    DS1_AFFORDANCE_MISMATCH,
    DS2_MISSING_ASSET,
    DS3_PRECONDITION_CONFLICT,
    DG1_OUT_OF_REACH,
    DG2_INTERPENETRATION,
    DG3_MORPHOLOGICAL_MISMATCH,
    DD1_OVER_MASS,
    DD2_TIGHT_TOLERANCE,
    DD3_BLOCKED_CORRIDOR,
    DD4_SHORT_HORIZON,
};

std::string to_string(DefectCode c);
DefectCode defect_code_from_string(const std::string& s);
DefectCategory category_of(DefectCode c);
bool is_static_code(DefectCode c);

enum class Severity { FATAL, REPAIRABLE };

struct Diagnostic {
    DefectCode code = DefectCode::DS1_AFFORDANCE_MISMATCH;
    DefectCategory category = DefectCategory::SEMANTIC;
    std::vector<std::string> subjects; // entity ids; for D-S2 the missing id
    std::string detail;
    Severity severity = Severity::REPAIRABLE;
};

struct CheckResult {
    std::string name;
    bool passed = true;
};

struct StaticAuditReport {
    std::vector<Diagnostic> diagnostics;
    bool valid = false;
    std::vector<CheckResult> checks_run; // always exactly four

    bool check_passed(const std::string& name) const;
};

// Runs the four static consistency checks, in order: reachability,
// affordance_matching, physical_plausibility, morphological_compatibility.
// All four always run; diagnostics are listed in check order.
StaticAuditReport check_static(const Task& task);

// fraction of the four checks that passed
double static_validity_score(const StaticAuditReport& report);

Json audit_report_to_json(const StaticAuditReport& report);
StaticAuditReport audit_report_from_json(const Json& j);

} // namespace taskforge
