#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "taskforge/catalog.hpp"
#include "taskforge/repair_op.hpp"
#include "taskforge/scene.hpp"
#include "taskforge/trace.hpp"

namespace taskforge {

enum class PredicateKind { ON, INSIDE, JOINT_AT, HOLDING, AT_REGION };

std::string to_string(PredicateKind k);

struct GoalPredicate {
    PredicateKind kind = PredicateKind::ON;
    std::string item;   // subject for ON / INSIDE / HOLDING / AT_REGION
    std::string entity; // ON: support, INSIDE: container, JOINT_AT: owner
    int joint = 0;      // JOINT_AT
    double target = 0.0;
    double tol = 0.0;   // JOINT_AT, must be > 0
    Rect region;        // AT_REGION

    static GoalPredicate on(std::string item, std::string support);
    static GoalPredicate inside(std::string item, std::string container);
    static GoalPredicate joint_at(std::string entity, int joint, double target,
                                  double tol);
    static GoalPredicate holding(std::string item);
    static GoalPredicate at_region(std::string item, Rect region);
};

struct Instruction {
    std::string text;
    std::vector<GoalPredicate> milestones; // ordered
};

enum class PrimitiveKind { NAVIGATE, GRASP, PLACE, INSERT, ARTICULATE };

std::string to_string(PrimitiveKind k);
PrimitiveKind primitive_from_string(const std::string& s);

struct ParamDef {
    std::string name;
    double lo = 0.0;
    double hi = 1.0; // lo < hi
};

struct PrimitiveSpec {
    PrimitiveKind kind = PrimitiveKind::NAVIGATE;
    std::map<std::string, std::string> targets; // role -> entity id
    int joint = 0;                              // ARTICULATE only
    std::vector<ParamDef> params;               // declaration order = theta layout
};

struct PolicySpec {
    std::vector<PrimitiveSpec> primitives;
    int horizon = 600;
    int search_budget = 8;
    std::map<std::string, double> shaping_weights; // distance / clearance / progress
    double inflation_r = 0.10;
    double impedance_scale = 1.0; // torque multiplier, capped at 2x
    Vec2 grasp_offset;            // approach-anchor shift from ADJUST_GRASP
    std::set<int> skipped;        // primitive indices bypassed by SKIP_SUBSTEP

    int param_dimension() const;
};

std::map<std::string, double> default_shaping_weights();

using ParamVector = std::vector<double>;

// box centres, the canonical rollout parameters
ParamVector nominal_params(const PolicySpec& policy);
bool params_in_box(const PolicySpec& policy, const ParamVector& theta);

struct RepairLedger {
    std::vector<RepairOp> ops;
    int semantic_cost = 0; // always the sum of op costs
    int budget = 8;

    void add(const RepairOp& op) {
        ops.push_back(op);
        semantic_cost += op.cost();
    }
};

struct Task {
    Instruction instruction;
    SceneGraph scene;
    PolicySpec policy;
    std::uint64_t seed = 0;
    RepairLedger ledger;
};

struct DanglingReference : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct LedgerMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// every entity id referenced by milestones or primitive targets
std::set<std::string> referenced_ids(const Task& task);

// throws DanglingReference when a referenced id is absent; tasks with
// missing assets stay representable so the auditor can flag them
void validate_references(const Task& task);

// lowercase tokens split on non-alphanumerics
std::vector<std::string> tokenize_lower(const std::string& text);

// Affordance requirements implied by the instruction verbs. Each
// requirement is satisfied if the entity carries every affordance of
// at least one option set.
struct AffordanceRequirement {
    std::string entity;
    std::vector<std::set<Affordance>> options;
    std::string verb;
};
std::vector<AffordanceRequirement> affordance_requirements(const Instruction& ins);

// single-state predicate check; throws DanglingReference on missing ids
bool milestone_holds(const SceneGraph& scene, const std::string& held,
                     const GoalPredicate& p);

// TRUE iff every milestone is satisfied in order during the trace,
// joint milestones transition rather than hold from step 0, and the
// verb/affordance requirements hold. Throws DanglingReference.
bool eval_goal(const ExecutionTrace& trace, const Instruction& instruction);

// Milestone first-satisfaction times for a trace (index aligned with
// the instruction); shared by eval_goal and the executor.
std::vector<std::optional<int>> milestone_satisfaction_times(
    const ExecutionTrace& trace, const Instruction& instruction);

// Applies one repair op in place: scene ops mutate the scene graph
// against the template embedded in the op, solver ops retune the policy.
void apply_repair_op(Task& task, const RepairOp& op);

// Replays `ledger` on `original` (scene ops through apply_mutation
// against templates embedded in the ops, solver ops onto the policy)
// and appends the ops to the replayed ledger.
Task replay_ledger(const Task& original, const RepairLedger& ledger);

// Total semantic cost of the ledger after verifying that replaying it
// on `original` reproduces `repaired` byte-for-byte. Throws
// LedgerMismatch otherwise.
int semantic_distance(const Task& original, const Task& repaired,
                      const RepairLedger& ledger);

Json instruction_to_json(const Instruction& ins);
Instruction instruction_from_json(const Json& j);
Json policy_to_json(const PolicySpec& p);
PolicySpec policy_from_json(const Json& j);
Json ledger_to_json(const RepairLedger& l);
RepairLedger ledger_from_json(const Json& j);
Json task_to_json(const Task& t);
Task task_from_json(const Json& j);

inline std::string task_to_string(const Task& t) {
    return dump_canonical(task_to_json(t));
}

} // namespace taskforge
