#include "taskforge/task.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "taskforge/catalog.hpp"

namespace taskforge {

std::string to_string(PredicateKind k) {
    switch (k) {
        case PredicateKind::ON: return "on";
        case PredicateKind::INSIDE: return "inside";
        case PredicateKind::JOINT_AT: return "joint_at";
        case PredicateKind::HOLDING: return "holding";
        case PredicateKind::AT_REGION: return "at_region";
    }
    throw std::logic_error("bad PredicateKind");
}

static PredicateKind predicate_kind_from_string(const std::string& s) {
    if (s == "on") return PredicateKind::ON;
    if (s == "inside") return PredicateKind::INSIDE;
    if (s == "joint_at") return PredicateKind::JOINT_AT;
    if (s == "holding") return PredicateKind::HOLDING;
    if (s == "at_region") return PredicateKind::AT_REGION;
    throw std::invalid_argument("unknown predicate kind: " + s);
}

GoalPredicate GoalPredicate::on(std::string item, std::string support) {
    GoalPredicate p;
    p.kind = PredicateKind::ON;
    p.item = std::move(item);
    p.entity = std::move(support);
    return p;
}

GoalPredicate GoalPredicate::inside(std::string item, std::string container) {
    GoalPredicate p;
    p.kind = PredicateKind::INSIDE;
    p.item = std::move(item);
    p.entity = std::move(container);
    return p;
}

GoalPredicate GoalPredicate::joint_at(std::string entity, int joint, double target,
                                      double tol) {
    GoalPredicate p;
    p.kind = PredicateKind::JOINT_AT;
    p.entity = std::move(entity);
    p.joint = joint;
    p.target = target;
    p.tol = tol;
    return p;
}

GoalPredicate GoalPredicate::holding(std::string item) {
    GoalPredicate p;
    p.kind = PredicateKind::HOLDING;
    p.item = std::move(item);
    return p;
}

GoalPredicate GoalPredicate::at_region(std::string item, Rect region) {
    GoalPredicate p;
    p.kind = PredicateKind::AT_REGION;
    p.item = std::move(item);
    p.region = region;
    return p;
}

std::string to_string(PrimitiveKind k) {
    switch (k) {
        case PrimitiveKind::NAVIGATE: return "navigate";
        case PrimitiveKind::GRASP: return "grasp";
        case PrimitiveKind::PLACE: return "place";
        case PrimitiveKind::INSERT: return "insert";
        case PrimitiveKind::ARTICULATE: return "articulate";
    }
    throw std::logic_error("bad PrimitiveKind");
}

PrimitiveKind primitive_from_string(const std::string& s) {
    if (s == "navigate") return PrimitiveKind::NAVIGATE;
    if (s == "grasp") return PrimitiveKind::GRASP;
    if (s == "place") return PrimitiveKind::PLACE;
    if (s == "insert") return PrimitiveKind::INSERT;
    if (s == "articulate") return PrimitiveKind::ARTICULATE;
    throw std::invalid_argument("unknown primitive kind: " + s);
}

int PolicySpec::param_dimension() const {
    int n = 0;
    for (const auto& p : primitives) n += static_cast<int>(p.params.size());
    return n;
}

std::map<std::string, double> default_shaping_weights() {
    return {{"distance", 0.0}, {"clearance", 0.0}, {"progress", 1.0}};
}

ParamVector nominal_params(const PolicySpec& policy) {
    ParamVector theta;
    theta.reserve(policy.param_dimension());
    for (const auto& prim : policy.primitives) {
        for (const auto& p : prim.params) theta.push_back(0.5 * (p.lo + p.hi));
    }
    return theta;
}

bool params_in_box(const PolicySpec& policy, const ParamVector& theta) {
    if (static_cast<int>(theta.size()) != policy.param_dimension()) return false;
    std::size_t i = 0;
    for (const auto& prim : policy.primitives) {
        for (const auto& p : prim.params) {
            double v = theta[i++];
            if (v < p.lo || v > p.hi) return false;
        }
    }
    return true;
}

std::set<std::string> referenced_ids(const Task& task) {
    std::set<std::string> ids;
    for (const auto& m : task.instruction.milestones) {
        if (!m.item.empty()) ids.insert(m.item);
        if (!m.entity.empty()) ids.insert(m.entity);
    }
    for (const auto& prim : task.policy.primitives) {
        for (const auto& [role, id] : prim.targets) ids.insert(id);
    }
    return ids;
}

void validate_references(const Task& task) {
    for (const auto& id : referenced_ids(task)) {
        if (!task.scene.has(id)) {
            throw DanglingReference("task references missing entity: " + id);
        }
    }
}

std::vector<std::string> tokenize_lower(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

namespace {

const std::set<std::string>& heat_verbs() {
    static const std::set<std::string> v{"heat", "warm", "cook", "reheat", "bake"};
    return v;
}
const std::set<std::string>& insert_verbs() {
    static const std::set<std::string> v{"insert", "put", "place", "stock",
                                         "store", "stash", "load", "drop"};
    return v;
}
const std::set<std::string>& articulate_verbs() {
    static const std::set<std::string> v{"open", "slide", "pull", "swing"};
    return v;
}
const std::set<std::string>& pick_verbs() {
    static const std::set<std::string> v{"pick", "grab", "take",  "fetch", "carry",
                                         "bring", "move", "lift", "set",   "collect"};
    return v;
}

bool has_any(const std::set<std::string>& verbs,
             const std::vector<std::string>& tokens) {
    for (const auto& t : tokens) {
        if (verbs.count(t) > 0) return true;
    }
    return false;
}

} // namespace

std::vector<AffordanceRequirement> affordance_requirements(const Instruction& ins) {
    std::vector<AffordanceRequirement> reqs;
    auto tokens = tokenize_lower(ins.text);
    bool heats = has_any(heat_verbs(), tokens);
    bool inserts = has_any(insert_verbs(), tokens);
    bool articulates = has_any(articulate_verbs(), tokens);
    bool picks = has_any(pick_verbs(), tokens);

    for (const auto& m : ins.milestones) {
        if (m.kind == PredicateKind::INSIDE) {
            if (heats) {
                reqs.push_back({m.entity,
                                {{Affordance::HEAT_SOURCE, Affordance::CONTAINER}},
                                "heat"});
            }
            if (inserts) {
                reqs.push_back({m.entity, {{Affordance::CONTAINER}}, "insert"});
            }
        }
        if (m.kind == PredicateKind::JOINT_AT && articulates) {
            reqs.push_back(
                {m.entity, {{Affordance::OPENABLE}, {Affordance::SLIDABLE}}, "open"});
        }
        bool manipulates = m.kind == PredicateKind::ON ||
                           m.kind == PredicateKind::INSIDE ||
                           m.kind == PredicateKind::HOLDING ||
                           m.kind == PredicateKind::AT_REGION;
        if (manipulates && (picks || heats || inserts)) {
            reqs.push_back({m.item, {{Affordance::GRASPABLE}}, "pick"});
        }
    }
    return reqs;
}

namespace {

bool point_in_posed_shape(const Shape& s, const Pose2& pose, double scale, Vec2 p) {
    double dx = p.x - pose.x;
    double dy = p.y - pose.y;
    double c = std::cos(pose.theta);
    double sn = std::sin(pose.theta);
    double lx = c * dx + sn * dy;
    double ly = -sn * dx + c * dy;
    if (std::holds_alternative<Box>(s)) {
        const Box& b = std::get<Box>(s);
        return std::abs(lx) <= b.half_w * scale && std::abs(ly) <= b.half_h * scale;
    }
    return std::hypot(lx, ly) <= std::get<Disk>(s).radius * scale;
}

const Entity& require_entity(const SceneGraph& scene, const std::string& id) {
    auto it = scene.entities.find(id);
    if (it == scene.entities.end()) {
        throw DanglingReference("milestone references missing entity: " + id);
    }
    return it->second;
}

bool predicate_satisfied(const SceneGraph& scene, const std::string& held,
                         const GoalPredicate& p) {
    switch (p.kind) {
        case PredicateKind::ON: {
            const Entity& item = require_entity(scene, p.item);
            const Entity& support = require_entity(scene, p.entity);
            if (held == p.item) return false;
            return point_in_posed_shape(support.shape, support.pose, support.scale,
                                        item.pose.position());
        }
        case PredicateKind::INSIDE: {
            const Entity& item = require_entity(scene, p.item);
            const Entity& container = require_entity(scene, p.entity);
            if (held == p.item) return false;
            if (!container.inner_shape) return false;
            return point_in_posed_shape(*container.inner_shape, container.pose,
                                        container.scale, item.pose.position());
        }
        case PredicateKind::JOINT_AT: {
            const Entity& e = require_entity(scene, p.entity);
            if (p.joint < 0 || p.joint >= static_cast<int>(e.joints.size())) {
                throw DanglingReference("milestone references missing joint on " +
                                        p.entity);
            }
            return std::abs(e.joints[p.joint].value - p.target) <= p.tol;
        }
        case PredicateKind::HOLDING: {
            require_entity(scene, p.item);
            return held == p.item;
        }
        case PredicateKind::AT_REGION: {
            const Entity& item = require_entity(scene, p.item);
            if (held == p.item) return false;
            return p.region.contains(item.pose.position());
        }
    }
    throw std::logic_error("bad PredicateKind");
}

} // namespace

bool milestone_holds(const SceneGraph& scene, const std::string& held,
                     const GoalPredicate& p) {
    return predicate_satisfied(scene, held, p);
}

std::vector<std::optional<int>> milestone_satisfaction_times(
    const ExecutionTrace& trace, const Instruction& instruction) {
    SceneGraph scene = trace.initial_scene;
    std::string held;
    std::vector<std::optional<int>> times(instruction.milestones.size());

    auto sweep = [&](int t) {
        for (std::size_t i = 0; i < instruction.milestones.size(); ++i) {
            if (!times[i] &&
                predicate_satisfied(scene, held, instruction.milestones[i])) {
                times[i] = t;
            }
        }
    };

    sweep(0);
    for (const auto& rec : trace.steps) {
        for (const auto& u : rec.updates) {
            auto it = scene.entities.find(u.id);
            if (it == scene.entities.end()) {
                throw DanglingReference("trace updates missing entity: " + u.id);
            }
            if (u.pose) it->second.pose = *u.pose;
            if (u.joint) {
                auto& joints = it->second.joints;
                int idx = u.joint->first;
                if (idx < 0 || idx >= static_cast<int>(joints.size())) {
                    throw DanglingReference("trace updates missing joint on " + u.id);
                }
                joints[idx].value = u.joint->second;
            }
        }
        scene.robot.base_pose = rec.robot_pose;
        held = rec.held;
        sweep(rec.step);
    }
    return times;
}

bool eval_goal(const ExecutionTrace& trace, const Instruction& instruction) {
    if (instruction.milestones.empty()) return false;

    auto times = milestone_satisfaction_times(trace, instruction);
    for (const auto& t : times) {
        if (!t) return false;
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (*times[i] < *times[i - 1]) return false;
    }
    // Joint milestones assert a change, not a state: a joint already at
    // its target when the rollout starts does not satisfy the instruction.
    for (std::size_t i = 0; i < instruction.milestones.size(); ++i) {
        if (instruction.milestones[i].kind == PredicateKind::JOINT_AT &&
            *times[i] == 0) {
            return false;
        }
    }
    for (const auto& req : affordance_requirements(instruction)) {
        const Entity& e = require_entity(trace.initial_scene, req.entity);
        bool ok = false;
        for (const auto& option : req.options) {
            bool all = true;
            for (Affordance a : option) {
                if (!e.has(a)) {
                    all = false;
                    break;
                }
            }
            if (all) {
                ok = true;
                break;
            }
        }
        if (!ok) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// repair ops

std::string to_string(RepairOpKind k) {
    switch (k) {
        case RepairOpKind::SWAP_ASSET: return "swap_asset";
        case RepairOpKind::SPAWN_ASSET: return "spawn_asset";
        case RepairOpKind::REMOVE_ASSET: return "remove_asset";
        case RepairOpKind::SET_JOINT: return "set_joint";
        case RepairOpKind::TRANSFORM_POSE: return "transform_pose";
        case RepairOpKind::RESCALE: return "rescale";
        case RepairOpKind::REPLAN_PATH: return "replan_path";
        case RepairOpKind::ADJUST_GRASP: return "adjust_grasp";
        case RepairOpKind::TUNE_IMPEDANCE: return "tune_impedance";
        case RepairOpKind::SET_HORIZON: return "set_horizon";
        case RepairOpKind::SET_SEARCH_WEIGHTS: return "set_search_weights";
        case RepairOpKind::SKIP_SUBSTEP: return "skip_substep";
        case RepairOpKind::RESET_ROBOT: return "reset_robot";
    }
    throw std::logic_error("bad RepairOpKind");
}

RepairOpKind repair_op_kind_from_string(const std::string& s) {
    static const std::map<std::string, RepairOpKind> table = {
        {"swap_asset", RepairOpKind::SWAP_ASSET},
        {"spawn_asset", RepairOpKind::SPAWN_ASSET},
        {"remove_asset", RepairOpKind::REMOVE_ASSET},
        {"set_joint", RepairOpKind::SET_JOINT},
        {"transform_pose", RepairOpKind::TRANSFORM_POSE},
        {"rescale", RepairOpKind::RESCALE},
        {"replan_path", RepairOpKind::REPLAN_PATH},
        {"adjust_grasp", RepairOpKind::ADJUST_GRASP},
        {"tune_impedance", RepairOpKind::TUNE_IMPEDANCE},
        {"set_horizon", RepairOpKind::SET_HORIZON},
        {"set_search_weights", RepairOpKind::SET_SEARCH_WEIGHTS},
        {"skip_substep", RepairOpKind::SKIP_SUBSTEP},
        {"reset_robot", RepairOpKind::RESET_ROBOT},
    };
    auto it = table.find(s);
    if (it == table.end()) throw std::invalid_argument("unknown repair op: " + s);
    return it->second;
}

Json repair_op_to_json(const RepairOp& op) {
    Json j;
    j["kind"] = to_string(op.kind);
    if (!op.target.empty()) j["target"] = op.target;
    if (!op.query.empty()) j["query"] = op.query;
    if (!op.resolved.is_null()) j["resolved"] = op.resolved;
    switch (op.kind) {
        case RepairOpKind::SPAWN_ASSET:
        case RepairOpKind::TRANSFORM_POSE:
        case RepairOpKind::ADJUST_GRASP: j["pose"] = pose_to_json(op.pose); break;
        default: break;
    }
    if (op.kind == RepairOpKind::SET_JOINT || op.kind == RepairOpKind::SKIP_SUBSTEP) {
        j["index"] = op.index;
    }
    switch (op.kind) {
        case RepairOpKind::SET_JOINT:
        case RepairOpKind::RESCALE:
        case RepairOpKind::REPLAN_PATH:
        case RepairOpKind::TUNE_IMPEDANCE:
        case RepairOpKind::SET_HORIZON: j["value"] = op.value; break;
        default: break;
    }
    if (op.kind == RepairOpKind::SET_SEARCH_WEIGHTS) j["weights"] = op.weights;
    return j;
}

RepairOp repair_op_from_json(const Json& j) {
    RepairOp op;
    op.kind = repair_op_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("target")) op.target = j.at("target").get<std::string>();
    if (j.contains("query")) op.query = j.at("query").get<std::string>();
    if (j.contains("resolved")) op.resolved = j.at("resolved");
    if (j.contains("pose")) op.pose = pose_from_json(j.at("pose"));
    if (j.contains("index")) op.index = j.at("index").get<int>();
    if (j.contains("value")) op.value = j.at("value").get<double>();
    if (j.contains("weights")) {
        op.weights = j.at("weights").get<std::map<std::string, double>>();
    }
    return op;
}

// ---------------------------------------------------------------------------
// ledger replay

namespace {

// Scene ops embed the template they resolved to, so replay builds a
// one-asset catalog and resolution cannot diverge from the original.
AssetCatalog mini_catalog(const RepairOp& op) {
    AssetCatalog c;
    if (!op.resolved.is_null()) {
        EntityTemplate t = entity_template_from_json(op.resolved);
        c.assets[t.asset] = std::move(t);
    }
    return c;
}

} // namespace

void apply_repair_op(Task& task, const RepairOp& op) {
    switch (op.kind) {
        case RepairOpKind::SWAP_ASSET:
            task.scene = apply_mutation(task.scene, SwapAsset{op.target, op.query},
                                        mini_catalog(op));
            return;
        case RepairOpKind::SPAWN_ASSET:
            task.scene = apply_mutation(task.scene, SpawnAsset{op.query, op.pose},
                                        mini_catalog(op));
            return;
        case RepairOpKind::REMOVE_ASSET:
            task.scene = apply_mutation(task.scene, RemoveAsset{op.target},
                                        mini_catalog(op));
            return;
        case RepairOpKind::SET_JOINT:
            task.scene = apply_mutation(
                task.scene, SetJoint{op.target, op.index, op.value}, mini_catalog(op));
            return;
        case RepairOpKind::TRANSFORM_POSE:
            task.scene = apply_mutation(task.scene, TransformPose{op.target, op.pose},
                                        mini_catalog(op));
            return;
        case RepairOpKind::RESCALE:
            task.scene = apply_mutation(task.scene, Rescale{op.target, op.value},
                                        mini_catalog(op));
            return;
        case RepairOpKind::REPLAN_PATH:
            task.policy.inflation_r *= op.value;
            return;
        case RepairOpKind::ADJUST_GRASP:
            task.policy.grasp_offset = task.policy.grasp_offset + op.pose.position();
            return;
        case RepairOpKind::TUNE_IMPEDANCE:
            task.policy.impedance_scale *= op.value;
            return;
        case RepairOpKind::SET_HORIZON:
            task.policy.horizon = std::max(
                1, static_cast<int>(std::llround(task.policy.horizon * op.value)));
            return;
        case RepairOpKind::SET_SEARCH_WEIGHTS:
            task.policy.shaping_weights = op.weights;
            return;
        case RepairOpKind::SKIP_SUBSTEP:
            if (op.index < 0 ||
                op.index >= static_cast<int>(task.policy.primitives.size())) {
                throw LedgerMismatch("skip_substep index out of range");
            }
            task.policy.skipped.insert(op.index);
            return;
        case RepairOpKind::RESET_ROBOT:
            // execution-state directive; leaves the task itself unchanged
            return;
    }
    throw std::logic_error("bad RepairOpKind");
}

Task replay_ledger(const Task& original, const RepairLedger& ledger) {
    Task out = original;
    for (const auto& op : ledger.ops) {
        apply_repair_op(out, op);
        out.ledger.add(op);
    }
    return out;
}

int semantic_distance(const Task& original, const Task& repaired,
                      const RepairLedger& ledger) {
    Task replayed = replay_ledger(original, ledger);
    if (task_to_string(replayed) != task_to_string(repaired)) {
        throw LedgerMismatch("ledger replay does not reproduce the repaired task");
    }
    int total = 0;
    for (const auto& op : ledger.ops) total += op.cost();
    return total;
}

// ---------------------------------------------------------------------------
// JSON round-trips

namespace {

Json rect_to_json(const Rect& r) {
    return Json::array({r.min_x, r.min_y, r.max_x, r.max_y});
}

Rect rect_from_json(const Json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
            j.at(3).get<double>()};
}

Json predicate_to_json(const GoalPredicate& p) {
    Json j;
    j["kind"] = to_string(p.kind);
    switch (p.kind) {
        case PredicateKind::ON:
        case PredicateKind::INSIDE:
            j["item"] = p.item;
            j["entity"] = p.entity;
            break;
        case PredicateKind::JOINT_AT:
            j["entity"] = p.entity;
            j["joint"] = p.joint;
            j["target"] = p.target;
            j["tol"] = p.tol;
            break;
        case PredicateKind::HOLDING: j["item"] = p.item; break;
        case PredicateKind::AT_REGION:
            j["item"] = p.item;
            j["region"] = rect_to_json(p.region);
            break;
    }
    return j;
}

GoalPredicate predicate_from_json(const Json& j) {
    GoalPredicate p;
    p.kind = predicate_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("item")) p.item = j.at("item").get<std::string>();
    if (j.contains("entity")) p.entity = j.at("entity").get<std::string>();
    if (j.contains("joint")) p.joint = j.at("joint").get<int>();
    if (j.contains("target")) p.target = j.at("target").get<double>();
    if (j.contains("tol")) p.tol = j.at("tol").get<double>();
    if (j.contains("region")) p.region = rect_from_json(j.at("region"));
    return p;
}

} // namespace

Json instruction_to_json(const Instruction& ins) {
    Json milestones = Json::array();
    for (const auto& m : ins.milestones) milestones.push_back(predicate_to_json(m));
    return {{"text", ins.text}, {"milestones", milestones}};
}

Instruction instruction_from_json(const Json& j) {
    Instruction ins;
    ins.text = j.at("text").get<std::string>();
    for (const auto& m : j.at("milestones")) {
        ins.milestones.push_back(predicate_from_json(m));
    }
    return ins;
}

Json policy_to_json(const PolicySpec& p) {
    Json prims = Json::array();
    for (const auto& prim : p.primitives) {
        Json pj;
        pj["kind"] = to_string(prim.kind);
        Json targets;
        for (const auto& [role, id] : prim.targets) targets[role] = id;
        pj["targets"] = targets.is_null() ? Json::object() : targets;
        if (prim.kind == PrimitiveKind::ARTICULATE) pj["joint"] = prim.joint;
        Json params = Json::array();
        for (const auto& def : prim.params) {
            params.push_back({{"name", def.name}, {"lo", def.lo}, {"hi", def.hi}});
        }
        pj["params"] = params;
        prims.push_back(pj);
    }
    Json j;
    j["primitives"] = prims;
    j["horizon"] = p.horizon;
    j["search_budget"] = p.search_budget;
    j["shaping_weights"] = p.shaping_weights;
    j["inflation_r"] = p.inflation_r;
    j["impedance_scale"] = p.impedance_scale;
    j["grasp_offset"] = Json::array({p.grasp_offset.x, p.grasp_offset.y});
    j["skipped"] = p.skipped; // sorted by construction
    return j;
}

PolicySpec policy_from_json(const Json& j) {
    PolicySpec p;
    for (const auto& pj : j.at("primitives")) {
        PrimitiveSpec prim;
        prim.kind = primitive_from_string(pj.at("kind").get<std::string>());
        for (auto it = pj.at("targets").begin(); it != pj.at("targets").end(); ++it) {
            prim.targets[it.key()] = it.value().get<std::string>();
        }
        if (pj.contains("joint")) prim.joint = pj.at("joint").get<int>();
        for (const auto& dj : pj.at("params")) {
            prim.params.push_back({dj.at("name").get<std::string>(),
                                   dj.at("lo").get<double>(),
                                   dj.at("hi").get<double>()});
        }
        p.primitives.push_back(std::move(prim));
    }
    p.horizon = j.at("horizon").get<int>();
    p.search_budget = j.at("search_budget").get<int>();
    p.shaping_weights = j.at("shaping_weights").get<std::map<std::string, double>>();
    p.inflation_r = j.at("inflation_r").get<double>();
    p.impedance_scale = j.at("impedance_scale").get<double>();
    p.grasp_offset = {j.at("grasp_offset").at(0).get<double>(),
                      j.at("grasp_offset").at(1).get<double>()};
    for (const auto& s : j.at("skipped")) p.skipped.insert(s.get<int>());
    return p;
}

Json ledger_to_json(const RepairLedger& l) {
    Json ops = Json::array();
    for (const auto& op : l.ops) ops.push_back(repair_op_to_json(op));
    return {{"ops", ops}, {"semantic_cost", l.semantic_cost}, {"budget", l.budget}};
}

RepairLedger ledger_from_json(const Json& j) {
    RepairLedger l;
    l.budget = j.at("budget").get<int>();
    for (const auto& oj : j.at("ops")) l.ops.push_back(repair_op_from_json(oj));
    l.semantic_cost = j.at("semantic_cost").get<int>();
    int check = 0;
    for (const auto& op : l.ops) check += op.cost();
    if (check != l.semantic_cost) {
        throw LedgerMismatch("ledger cost does not match its ops");
    }
    return l;
}

Json task_to_json(const Task& t) {
    Json j;
    j["schema_version"] = 1;
    j["instruction"] = instruction_to_json(t.instruction);
    j["scene"] = scene_to_json(t.scene);
    j["policy"] = policy_to_json(t.policy);
    j["seed"] = t.seed;
    j["ledger"] = ledger_to_json(t.ledger);
    return j;
}

Task task_from_json(const Json& j) {
    Task t;
    t.instruction = instruction_from_json(j.at("instruction"));
    t.scene = scene_from_json(j.at("scene"));
    t.policy = policy_from_json(j.at("policy"));
    t.seed = j.at("seed").get<std::uint64_t>();
    t.ledger = ledger_from_json(j.at("ledger"));
    return t;
}

// ---------------------------------------------------------------------------
// trace serialization

std::string to_string(DivergenceClass c) {
    switch (c) {
        case DivergenceClass::COLLISION_DEADLOCK: return "COLLISION_DEADLOCK";
        case DivergenceClass::GRASP_TORQUE: return "GRASP_TORQUE";
        case DivergenceClass::INSERTION_TOLERANCE: return "INSERTION_TOLERANCE";
        case DivergenceClass::HORIZON_EXHAUSTED: return "HORIZON_EXHAUSTED";
        case DivergenceClass::PRECONDITION_ALREADY_MET:
            return "PRECONDITION_ALREADY_MET";
        case DivergenceClass::PLANNER_NO_PATH: return "PLANNER_NO_PATH";
    }
    throw std::logic_error("bad DivergenceClass");
}

DivergenceClass divergence_from_string(const std::string& s) {
    static const std::map<std::string, DivergenceClass> table = {
        {"COLLISION_DEADLOCK", DivergenceClass::COLLISION_DEADLOCK},
        {"GRASP_TORQUE", DivergenceClass::GRASP_TORQUE},
        {"INSERTION_TOLERANCE", DivergenceClass::INSERTION_TOLERANCE},
        {"HORIZON_EXHAUSTED", DivergenceClass::HORIZON_EXHAUSTED},
        {"PRECONDITION_ALREADY_MET", DivergenceClass::PRECONDITION_ALREADY_MET},
        {"PLANNER_NO_PATH", DivergenceClass::PLANNER_NO_PATH},
    };
    auto it = table.find(s);
    if (it == table.end()) {
        throw std::invalid_argument("unknown divergence class: " + s);
    }
    return it->second;
}

std::string to_string(TraceEvent e) {
    switch (e) {
        case TraceEvent::MOVE: return "move";
        case TraceEvent::GRASP: return "grasp";
        case TraceEvent::PLACE: return "place";
        case TraceEvent::INSERT: return "insert";
        case TraceEvent::ARTICULATE: return "articulate";
        case TraceEvent::SKIP: return "skip";
    }
    throw std::logic_error("bad TraceEvent");
}

TraceEvent trace_event_from_string(const std::string& s) {
    if (s == "move") return TraceEvent::MOVE;
    if (s == "grasp") return TraceEvent::GRASP;
    if (s == "place") return TraceEvent::PLACE;
    if (s == "insert") return TraceEvent::INSERT;
    if (s == "articulate") return TraceEvent::ARTICULATE;
    if (s == "skip") return TraceEvent::SKIP;
    throw std::invalid_argument("unknown trace event: " + s);
}

namespace {

Json times_to_json(const std::vector<std::optional<int>>& times) {
    Json arr = Json::array();
    for (const auto& t : times) {
        if (t) {
            arr.push_back(*t);
        } else {
            arr.push_back(nullptr);
        }
    }
    return arr;
}

std::vector<std::optional<int>> times_from_json(const Json& j) {
    std::vector<std::optional<int>> times;
    for (const auto& v : j) {
        if (v.is_null()) {
            times.push_back(std::nullopt);
        } else {
            times.push_back(v.get<int>());
        }
    }
    return times;
}

Json divergence_to_json(const DivergenceReport& d) {
    return {{"class", to_string(d.cls)},
            {"primitive", d.primitive_index},
            {"step", d.step},
            {"detail", d.detail}};
}

DivergenceReport divergence_from_json(const Json& j) {
    DivergenceReport d;
    d.cls = divergence_from_string(j.at("class").get<std::string>());
    d.primitive_index = j.at("primitive").get<int>();
    d.step = j.at("step").get<int>();
    d.detail = j.at("detail").get<std::string>();
    return d;
}

} // namespace

std::string trace_to_jsonl(const ExecutionTrace& t) {
    std::ostringstream out;
    Json header;
    header["record"] = "header";
    header["scene"] = scene_to_json(t.initial_scene);
    header["theta"] = t.theta;
    header["seed"] = t.seed;
    header["config"] = t.config_echo.is_null() ? Json::object() : t.config_echo;
    out << dump_canonical(header, /*indent=*/-1) << "\n";

    for (const auto& rec : t.steps) {
        Json j;
        j["record"] = "step";
        j["step"] = rec.step;
        j["primitive"] = rec.primitive_index;
        j["event"] = to_string(rec.event);
        j["robot"] = pose_to_json(rec.robot_pose);
        j["held"] = rec.held;
        Json updates = Json::array();
        for (const auto& u : rec.updates) {
            Json uj;
            uj["id"] = u.id;
            if (u.pose) uj["pose"] = pose_to_json(*u.pose);
            if (u.joint) uj["joint"] = Json::array({u.joint->first, u.joint->second});
            updates.push_back(uj);
        }
        j["updates"] = updates;
        out << dump_canonical(j, -1) << "\n";
    }

    for (const auto& cp : t.checkpoints) {
        Json j;
        j["record"] = "checkpoint";
        j["primitive"] = cp.primitive_index;
        j["scene"] = scene_to_json(cp.scene);
        j["held"] = cp.held;
        j["steps_used"] = cp.steps_used;
        j["milestone_times"] = times_to_json(cp.milestone_times);
        out << dump_canonical(j, -1) << "\n";
    }

    Json footer;
    footer["record"] = "outcome";
    footer["outcome"] = t.outcome == TraceOutcome::SUCCESS ? "success" : "diverged";
    if (t.divergence) footer["divergence"] = divergence_to_json(*t.divergence);
    footer["milestone_times"] = times_to_json(t.milestone_times);
    footer["steps_used"] = t.steps_used;
    out << dump_canonical(footer, -1) << "\n";
    return out.str();
}

ExecutionTrace trace_from_jsonl(const std::string& text) {
    ExecutionTrace t;
    std::istringstream in(text);
    std::string line;
    bool saw_header = false;
    bool saw_outcome = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Json j = parse_json(line);
        std::string record = j.at("record").get<std::string>();
        if (record == "header") {
            t.initial_scene = scene_from_json(j.at("scene"));
            t.theta = j.at("theta").get<std::vector<double>>();
            t.seed = j.at("seed").get<std::uint64_t>();
            t.config_echo = j.at("config");
            saw_header = true;
        } else if (record == "step") {
            StepRecord rec;
            rec.step = j.at("step").get<int>();
            rec.primitive_index = j.at("primitive").get<int>();
            rec.event = trace_event_from_string(j.at("event").get<std::string>());
            rec.robot_pose = pose_from_json(j.at("robot"));
            rec.held = j.at("held").get<std::string>();
            for (const auto& uj : j.at("updates")) {
                EntityUpdate u;
                u.id = uj.at("id").get<std::string>();
                if (uj.contains("pose")) u.pose = pose_from_json(uj.at("pose"));
                if (uj.contains("joint")) {
                    u.joint = std::make_pair(uj.at("joint").at(0).get<int>(),
                                             uj.at("joint").at(1).get<double>());
                }
                rec.updates.push_back(std::move(u));
            }
            t.steps.push_back(std::move(rec));
        } else if (record == "checkpoint") {
            Checkpoint cp;
            cp.primitive_index = j.at("primitive").get<int>();
            cp.scene = scene_from_json(j.at("scene"));
            cp.held = j.at("held").get<std::string>();
            cp.steps_used = j.at("steps_used").get<int>();
            cp.milestone_times = times_from_json(j.at("milestone_times"));
            t.checkpoints.push_back(std::move(cp));
        } else if (record == "outcome") {
            t.outcome = j.at("outcome").get<std::string>() == "success"
                            ? TraceOutcome::SUCCESS
                            : TraceOutcome::DIVERGED;
            if (j.contains("divergence")) {
                t.divergence = divergence_from_json(j.at("divergence"));
            }
            t.milestone_times = times_from_json(j.at("milestone_times"));
            t.steps_used = j.at("steps_used").get<int>();
            saw_outcome = true;
        } else {
            throw std::invalid_argument("unknown trace record: " + record);
        }
    }
    if (!saw_header || !saw_outcome) {
        throw std::invalid_argument("trace stream missing header or outcome record");
    }
    return t;
}

} // namespace taskforge
