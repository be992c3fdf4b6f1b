#include "taskforge/generator.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "taskforge/rng.hpp"

namespace taskforge {

namespace {

// entity placement window; keeps everything clear of the robot start
// at (1, 1) and of the world walls
constexpr double kPlaceLo = 1.8;
constexpr double kPlaceHi = 5.2;
// pairwise surface gap between placed entities
constexpr double kEntityGap = 0.5;
constexpr Vec2 kRobotStart{1.0, 1.0};

double quant_mm(double v) { return std::round(v * 1000.0) / 1000.0; }

std::string pick(Rng& rng, const std::vector<std::string>& options) {
    return options[rng.uniform_int(options.size())];
}

// "{a}" style slot substitution
std::string fill(std::string pattern,
                 const std::vector<std::pair<std::string, std::string>>& slots) {
    for (const auto& [key, value] : slots) {
        std::string needle = "{" + key + "}";
        for (std::string::size_type at = pattern.find(needle);
             at != std::string::npos; at = pattern.find(needle)) {
            pattern.replace(at, needle.size(), value);
        }
    }
    return pattern;
}

struct SceneBuilder {
    Rng& rng;
    const AssetCatalog& catalog;
    SceneGraph scene;

    SceneBuilder(Rng& r, const AssetCatalog& c) : rng(r), catalog(c) {
        scene.robot.base_pose = {kRobotStart.x, kRobotStart.y, 0.0};
    }

    // one instance per asset root, so the entity id is the asset name
    const Entity& place(const std::string& asset) {
        const EntityTemplate& t = catalog.asset(asset);
        for (int attempt = 0; attempt < 100; ++attempt) {
            Pose2 pose{quant_mm(rng.uniform(kPlaceLo, kPlaceHi)),
                       quant_mm(rng.uniform(kPlaceLo, kPlaceHi)), 0.0};
            bool clear = true;
            for (const auto& [id, e] : scene.entities) {
                if (signed_overlap(t.shape, pose, 1.0, e.shape, e.pose, e.scale) >
                    -kEntityGap) {
                    clear = false;
                    break;
                }
            }
            if (!clear) continue;
            scene.entities.emplace(asset, make_entity(t, asset, pose));
            return scene.entities.at(asset);
        }
        throw GenerationFailure("no collision-free placement for " + asset);
    }
};

// navigation standoff box: close enough to act, far enough that the
// snapped goal disk clears the target footprint
ParamDef approach_dist_def(const Entity& target, const RobotModel& robot,
                           double inflation_r) {
    double ext =
        std::max(extent_x(target.shape), extent_y(target.shape)) * target.scale;
    double lo = ext + robot.base_radius + inflation_r + 0.06;
    double hi = robot.reach - 0.10;
    return {"approach_dist", lo, hi};
}

PrimitiveSpec navigate_to(const Entity& e, const RobotModel& robot,
                          double inflation_r) {
    PrimitiveSpec p;
    p.kind = PrimitiveKind::NAVIGATE;
    p.targets["target"] = e.id;
    p.params = {approach_dist_def(e, robot, inflation_r),
                {"approach_angle", -kPi, kPi}};
    return p;
}

PrimitiveSpec grasp(const Entity& e) {
    PrimitiveSpec p;
    p.kind = PrimitiveKind::GRASP;
    p.targets["target"] = e.id;
    p.params = {{"approach_angle", -kPi, kPi}};
    return p;
}

PrimitiveSpec place_on(const Entity& support) {
    PrimitiveSpec p;
    p.kind = PrimitiveKind::PLACE;
    p.targets["target"] = support.id;
    double span = 0.4 *
                  std::min(extent_x(support.shape), extent_y(support.shape)) *
                  support.scale;
    p.params = {{"offset_x", -span, span}, {"offset_y", -span, span}};
    return p;
}

PrimitiveSpec insert_into(const Entity& container) {
    PrimitiveSpec p;
    p.kind = PrimitiveKind::INSERT;
    p.targets["target"] = container.id;
    return p;
}

PrimitiveSpec articulate(const Entity& e, int joint) {
    PrimitiveSpec p;
    p.kind = PrimitiveKind::ARTICULATE;
    p.targets["target"] = e.id;
    p.joint = joint;
    double span = e.joints.at(joint).hi - e.joints.at(joint).lo;
    p.params = {{"stroke", 0.0, 2.0 * span}};
    return p;
}

const TaskTemplate* find_template(const AssetCatalog& catalog,
                                  const std::string& name) {
    for (const auto& t : catalog.templates)
        if (t.name == name) return &t;
    return nullptr;
}

using Slots = std::vector<std::pair<std::string, std::string>>;

Task build_heat_food(Rng& rng, const AssetCatalog& catalog, const TaskTemplate& t) {
    std::string app = pick(rng, t.slots.at("appliance"));
    std::string food = pick(rng, t.slots.at("food"));
    SceneBuilder b(rng, catalog);
    b.place(app);
    b.place(food);

    Task task;
    task.scene = std::move(b.scene);
    const Entity& e_app = task.scene.get(app);
    const Entity& e_food = task.scene.get(food);
    std::string verb =
        pick(rng, {"heat", "warm", "cook", "reheat", "bake"});
    std::string pattern = pick(rng, {"{v} the {food} in the {app}",
                                     "{v} the {food} inside the {app}",
                                     "please {v} the {food} in the {app}",
                                     "{v} up the {food} in the {app}"});
    task.instruction.text =
        fill(pattern, Slots{{"v", verb}, {"food", food}, {"app", app}});
    task.instruction.milestones = {GoalPredicate::holding(food),
                                   GoalPredicate::inside(food, app)};
    const RobotModel& r = task.scene.robot;
    double infl = task.policy.inflation_r;
    task.policy.primitives = {navigate_to(e_food, r, infl), grasp(e_food),
                              navigate_to(e_app, r, infl), insert_into(e_app)};
    return task;
}

Task build_insert_item(Rng& rng, const AssetCatalog& catalog,
                       const TaskTemplate& t) {
    std::string cont = pick(rng, t.slots.at("container"));
    std::string item = pick(rng, t.slots.at("item"));
    SceneBuilder b(rng, catalog);
    b.place(cont);
    b.place(item);

    Task task;
    task.scene = std::move(b.scene);
    const Entity& e_cont = task.scene.get(cont);
    const Entity& e_item = task.scene.get(item);
    std::string verb = pick(rng, {"insert", "put", "place", "stock", "store",
                                  "stash", "load", "drop"});
    std::string pattern = pick(rng, {"{v} the {item} in the {cont}",
                                     "{v} the {item} into the {cont}",
                                     "please {v} the {item} in the {cont}",
                                     "{v} the {item} inside the {cont}"});
    task.instruction.text =
        fill(pattern, Slots{{"v", verb}, {"item", item}, {"cont", cont}});
    task.instruction.milestones = {GoalPredicate::holding(item),
                                   GoalPredicate::inside(item, cont)};
    const RobotModel& r = task.scene.robot;
    double infl = task.policy.inflation_r;
    task.policy.primitives = {navigate_to(e_item, r, infl), grasp(e_item),
                              navigate_to(e_cont, r, infl), insert_into(e_cont)};
    return task;
}

Task build_articulate_one(Rng& rng, const AssetCatalog& catalog,
                          const std::string& asset, double tol,
                          const std::vector<std::string>& verbs,
                          const std::vector<std::string>& patterns) {
    SceneBuilder b(rng, catalog);
    b.place(asset);

    Task task;
    task.scene = std::move(b.scene);
    const Entity& e = task.scene.get(asset);
    std::string verb = pick(rng, verbs);
    task.instruction.text = fill(pick(rng, patterns), Slots{{"v", verb}, {"e", asset}});
    const JointSpec& j = task.scene.get(asset).joints.at(0);
    task.instruction.milestones = {GoalPredicate::joint_at(asset, 0, j.hi, tol)};
    const RobotModel& r = task.scene.robot;
    double infl = task.policy.inflation_r;
    task.policy.primitives = {navigate_to(e, r, infl), articulate(e, 0)};
    return task;
}

Task build_pick_place(Rng& rng, const AssetCatalog& catalog,
                      const TaskTemplate& t) {
    std::string item = pick(rng, t.slots.at("item"));
    std::string surf = pick(rng, t.slots.at("surface"));
    SceneBuilder b(rng, catalog);
    b.place(surf);
    b.place(item);

    Task task;
    task.scene = std::move(b.scene);
    const Entity& e_surf = task.scene.get(surf);
    const Entity& e_item = task.scene.get(item);
    std::string verb = pick(rng, {"pick", "grab", "take", "fetch", "carry",
                                  "bring", "move", "lift", "set", "collect"});
    std::string pattern = pick(rng, {"{v} the {item} onto the {surf}",
                                     "{v} the {item} to the {surf}",
                                     "please {v} the {item} onto the {surf}",
                                     "{v} the {item} over to the {surf}"});
    task.instruction.text =
        fill(pattern, Slots{{"v", verb}, {"item", item}, {"surf", surf}});
    task.instruction.milestones = {GoalPredicate::holding(item),
                                   GoalPredicate::on(item, surf)};
    const RobotModel& r = task.scene.robot;
    double infl = task.policy.inflation_r;
    task.policy.primitives = {navigate_to(e_item, r, infl), grasp(e_item),
                              navigate_to(e_surf, r, infl), place_on(e_surf)};
    return task;
}

Task build_stock_drawer(Rng& rng, const AssetCatalog& catalog,
                        const TaskTemplate& t) {
    std::string drawer = pick(rng, t.slots.at("drawer"));
    std::string item = pick(rng, t.slots.at("item"));
    SceneBuilder b(rng, catalog);
    b.place(drawer);
    b.place(item);

    Task task;
    task.scene = std::move(b.scene);
    const Entity& e_drawer = task.scene.get(drawer);
    const Entity& e_item = task.scene.get(item);
    std::string av = pick(rng, {"open", "slide", "pull"});
    std::string iv = pick(rng, {"stock", "store", "load", "stash"});
    std::string pattern =
        pick(rng, {"{av} the drawer and {iv} the {item} inside",
                   "{av} the drawer then {iv} the {item} in it",
                   "please {av} the drawer and {iv} the {item} inside"});
    task.instruction.text =
        fill(pattern, Slots{{"av", av}, {"iv", iv}, {"item", item}});
    // drawer goal sits below the joint limit so a full nominal stroke,
    // clamped at the limit, still lands inside the tolerance band
    task.instruction.milestones = {GoalPredicate::joint_at(drawer, 0, 0.35, 0.1),
                                   GoalPredicate::inside(item, drawer)};
    const RobotModel& r = task.scene.robot;
    double infl = task.policy.inflation_r;
    task.policy.primitives = {navigate_to(e_drawer, r, infl),
                              articulate(e_drawer, 0),
                              navigate_to(e_item, r, infl),
                              grasp(e_item),
                              navigate_to(e_drawer, r, infl),
                              insert_into(e_drawer)};
    return task;
}

} // namespace

Task sample_task(const AssetCatalog& catalog, std::uint64_t seed) {
    static const std::vector<std::string> kKnown = {
        "heat_food",   "insert_item", "open_door",
        "slide_window", "pick_place",  "stock_drawer"};
    std::vector<const TaskTemplate*> available;
    for (const auto& name : kKnown)
        if (const TaskTemplate* t = find_template(catalog, name))
            available.push_back(t);
    if (available.empty())
        throw GenerationFailure("catalog declares no known task templates");

    Rng rng(seed);
    const TaskTemplate& t = *available[rng.uniform_int(available.size())];

    Task task;
    if (t.name == "heat_food") {
        task = build_heat_food(rng, catalog, t);
    } else if (t.name == "insert_item") {
        task = build_insert_item(rng, catalog, t);
    } else if (t.name == "open_door") {
        task = build_articulate_one(
            rng, catalog, t.slots.at("door").front(), 0.15,
            {"open", "swing", "pull"},
            {"{v} the {e}", "please {v} the {e}", "{v} the {e} wide"});
    } else if (t.name == "slide_window") {
        task = build_articulate_one(
            rng, catalog, t.slots.at("panel").front(), 0.08,
            {"slide", "open", "pull"},
            {"{v} the {e}", "please {v} the {e}", "{v} the {e} along its track"});
    } else if (t.name == "pick_place") {
        task = build_pick_place(rng, catalog, t);
    } else {
        task = build_stock_drawer(rng, catalog, t);
    }
    task.seed = seed;
    return task;
}

Task sample_clean_task(const AssetCatalog& catalog, std::uint64_t seed) {
    for (std::uint64_t salt = 0; salt < 64; ++salt) {
        Task t;
        try {
            t = sample_task(catalog, salt == 0 ? seed : derive_seed(seed, salt));
        } catch (const GenerationFailure&) {
            continue;
        }
        if (!check_static(t).valid) continue;
        ExecutionTrace nominal =
            execute(t, nominal_params(t.policy), ExecutionConfig{}, t.seed);
        if (nominal.outcome != TraceOutcome::SUCCESS) continue;
        return t;
    }
    throw GenerationFailure("no clean draw within the redraw budget");
}

namespace {

const GoalPredicate* first_milestone(const Task& t, PredicateKind kind) {
    for (const auto& m : t.instruction.milestones)
        if (m.kind == kind) return &m;
    return nullptr;
}

const PrimitiveSpec* first_primitive(const Task& t, PrimitiveKind kind) {
    for (const auto& p : t.policy.primitives)
        if (p.kind == kind) return &p;
    return nullptr;
}

std::string free_id(const SceneGraph& scene, const std::string& base) {
    if (!scene.has(base)) return base;
    for (int n = 2;; ++n) {
        std::string candidate = base + "_" + std::to_string(n);
        if (!scene.has(candidate)) return candidate;
    }
}

void add_wall_piece(SceneGraph& scene, const AssetCatalog& catalog, Box shape,
                    Vec2 at, bool check_clear) {
    Entity e = make_entity(catalog.asset("wall"), free_id(scene, "wall"),
                           {at.x, at.y, 0.0});
    e.shape = shape;
    if (check_clear) {
        for (const auto& [id, other] : scene.entities) {
            if (asset_root(id) == "wall") continue; // ring pieces meet edge-on
            if (e.overlap_with(other) > 0.0)
                throw CannotInject("barrier lands on " + id);
        }
    }
    scene.entities.emplace(e.id, std::move(e));
}

// square ring of wall pieces around `at`: outer half-width 0.90, cavity
// half-width 0.30, every free cell outside it is farther than the reach
void build_reach_ring(SceneGraph& scene, const AssetCatalog& catalog, Vec2 at) {
    add_wall_piece(scene, catalog, Box{0.90, 0.30}, {at.x, at.y + 0.60}, true);
    add_wall_piece(scene, catalog, Box{0.90, 0.30}, {at.x, at.y - 0.60}, true);
    add_wall_piece(scene, catalog, Box{0.30, 0.30}, {at.x - 0.60, at.y}, true);
    add_wall_piece(scene, catalog, Box{0.30, 0.30}, {at.x + 0.60, at.y}, true);
}

DivergenceClass expected_divergence(DefectCode code) {
    switch (code) {
    case DefectCode::DD1_OVER_MASS: return DivergenceClass::GRASP_TORQUE;
    case DefectCode::DD2_TIGHT_TOLERANCE: return DivergenceClass::INSERTION_TOLERANCE;
    case DefectCode::DD3_BLOCKED_CORRIDOR: return DivergenceClass::PLANNER_NO_PATH;
    default: return DivergenceClass::HORIZON_EXHAUSTED;
    }
}

// the defect must be load-bearing: the audit sees exactly the intended
// static family, dynamic defects stay invisible to the audit and sink
// the parameter search with the matching divergence
void verify_injection(const Task& out, DefectCode code) {
    StaticAuditReport report = check_static(out);
    if (is_static_code(code)) {
        if (report.diagnostics.empty())
            throw CannotInject("audit missed the defect");
        for (const auto& d : report.diagnostics)
            if (d.code != code) throw CannotInject("collateral diagnostic");
        SolveResult sr = solve(out, ExecutionConfig{}, out.seed);
        if (sr.success) throw CannotInject("defect is not load-bearing");
    } else {
        if (!report.valid)
            throw CannotInject("defect leaked into the static audit");
        SolveResult sr = solve(out, ExecutionConfig{}, out.seed);
        if (sr.success || !sr.representative)
            throw CannotInject("defect is not load-bearing");
        if (sr.representative->cls != expected_divergence(code))
            throw CannotInject("wrong failure mode");
    }
}

} // namespace

Task inject_defect(const Task& task, DefectCode code, const AssetCatalog& catalog,
                   bool skip_clean_check) {
    if (!skip_clean_check) {
        if (!check_static(task).valid)
            throw NotClean("base task fails the static audit");
        ExecutionTrace nominal =
            execute(task, nominal_params(task.policy), ExecutionConfig{}, task.seed);
        if (nominal.outcome != TraceOutcome::SUCCESS)
            throw NotClean("base task fails its nominal rollout");
    }

    Task out = task;
    switch (code) {
    case DefectCode::DS1_AFFORDANCE_MISMATCH: {
        const GoalPredicate* inside = first_milestone(out, PredicateKind::INSIDE);
        if (!inside) throw CannotInject("no insertion goal to corrupt");
        const Entity& cont = out.scene.get(inside->entity);
        if (cont.has(Affordance::OPENABLE) || cont.has(Affordance::SLIDABLE))
            throw CannotInject("jointed container");
        std::string swap_to = cont.has(Affordance::HEAT_SOURCE) ? "fridge" : "crate";
        out.scene = apply_mutation(out.scene, SwapAsset{inside->entity, swap_to},
                                   catalog);
        break;
    }
    case DefectCode::DS2_MISSING_ASSET: {
        const GoalPredicate* holding = first_milestone(out, PredicateKind::HOLDING);
        if (!holding) throw CannotInject("no graspable reference to drop");
        out.scene = apply_mutation(out.scene, RemoveAsset{holding->item}, catalog);
        break;
    }
    case DefectCode::DS3_PRECONDITION_CONFLICT: {
        const GoalPredicate* jm = first_milestone(out, PredicateKind::JOINT_AT);
        if (!jm) throw CannotInject("no joint goal to presatisfy");
        out.scene = apply_mutation(
            out.scene, SetJoint{jm->entity, jm->joint, jm->target}, catalog);
        break;
    }
    case DefectCode::DG1_OUT_OF_REACH: {
        const std::string& tid =
            out.policy.primitives.front().targets.at("target");
        Vec2 at = out.scene.get(tid).pose.position();
        if (at.x < 0.95 || at.x > 5.05 || at.y < 0.95 || at.y > 5.05)
            throw CannotInject("ring would cross the world edge");
        if (norm(at - kRobotStart) < 1.9)
            throw CannotInject("ring would trap the robot start");
        build_reach_ring(out.scene, catalog, at);
        break;
    }
    case DefectCode::DG2_INTERPENETRATION: {
        const PrimitiveSpec* g = first_primitive(out, PrimitiveKind::GRASP);
        if (!g) throw CannotInject("nothing gets grasped");
        const Entity& target = out.scene.get(g->targets.at("target"));
        out.scene =
            apply_mutation(out.scene, SpawnAsset{"crate", target.pose}, catalog);
        break;
    }
    case DefectCode::DG3_MORPHOLOGICAL_MISMATCH: {
        const GoalPredicate* inside = first_milestone(out, PredicateKind::INSIDE);
        if (!inside) throw CannotInject("no insertion goal to corrupt");
        out.scene =
            apply_mutation(out.scene, Rescale{inside->entity, 0.40}, catalog);
        break;
    }
    case DefectCode::DD1_OVER_MASS: {
        const PrimitiveSpec* g = first_primitive(out, PrimitiveKind::GRASP);
        if (!g) throw CannotInject("nothing gets grasped");
        Entity& e = out.scene.get(g->targets.at("target"));
        e.mass = 1.2 * out.scene.robot.torque_limit / e.scale;
        out.scene.validate();
        break;
    }
    case DefectCode::DD2_TIGHT_TOLERANCE: {
        const GoalPredicate* inside = first_milestone(out, PredicateKind::INSIDE);
        if (!inside) throw CannotInject("no insertion goal to corrupt");
        const Entity& cont = out.scene.get(inside->entity);
        if (!cont.inner_shape) throw CannotInject("target has no cavity");
        Entity& item = out.scene.get(inside->item);
        double iw = extent_x(*cont.inner_shape) * cont.scale;
        double ih = extent_y(*cont.inner_shape) * cont.scale;
        double ax = extent_x(item.shape) * item.scale;
        double ay = extent_y(item.shape) * item.scale;
        // grow the item until the best-case slack falls inside (0, clearance)
        double f0 = std::min(iw / ax, ih / ay);
        double f90 = std::min(iw / ay, ih / ax);
        double inner_b, item_b;
        if (f0 >= f90) {
            inner_b = (iw / ax <= ih / ay) ? iw : ih;
            item_b = (iw / ax <= ih / ay) ? ax : ay;
        } else {
            inner_b = (iw / ay <= ih / ax) ? iw : ih;
            item_b = (iw / ay <= ih / ax) ? ay : ax;
        }
        double factor = (inner_b - 0.005) / item_b;
        if (factor <= 1.0) throw CannotInject("item already snug");
        const EntityTemplate& tpl = catalog.asset(asset_root(item.id));
        double cumulative = item.scale * factor;
        if (cumulative > tpl.scale_hi || cumulative < tpl.scale_lo)
            throw CannotInject("needed scale is out of bounds");
        item.scale = cumulative;
        out.scene.validate();
        break;
    }
    case DefectCode::DD3_BLOCKED_CORRIDOR: {
        // full-width barrier south of the placement window with one gap
        // too narrow for the default planner dilation
        add_wall_piece(out.scene, catalog, Box{0.14, 0.08}, {0.14, 1.3}, true);
        add_wall_piece(out.scene, catalog, Box{2.63, 0.08}, {3.37, 1.3}, true);
        break;
    }
    case DefectCode::DD4_SHORT_HORIZON: {
        ExecutionTrace nominal =
            execute(out, nominal_params(out.policy), ExecutionConfig{}, out.seed);
        if (nominal.outcome != TraceOutcome::SUCCESS)
            throw CannotInject("no nominal baseline to shorten");
        out.policy.horizon = std::max(2, nominal.steps_used / 3);
        break;
    }
    }

    verify_injection(out, code);
    return out;
}

GeneratedTask sample_batch_task(const AssetCatalog& catalog, std::uint64_t seed,
                                std::optional<DefectCode> want) {
    if (!want) return {sample_clean_task(catalog, seed), std::nullopt};
    for (std::uint64_t salt = 0; salt < 128; ++salt) {
        Task base = sample_clean_task(catalog, derive_seed(seed, 0x1000 + salt));
        try {
            // the clean sampler just verified the precondition
            return {inject_defect(base, *want, catalog, true), want};
        } catch (const CannotInject&) {
        }
    }
    throw GenerationFailure("defect never injectable: " + to_string(*want));
}

} // namespace taskforge
