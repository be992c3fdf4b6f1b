#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "taskforge/generator.hpp"
#include "taskforge/repair.hpp"

using namespace taskforge;

namespace {

Entity basic(const std::string& id, Shape s, Pose2 p) {
    Entity e;
    e.id = id;
    e.shape = s;
    e.pose = p;
    e.mass = 1.0;
    return e;
}

// edge-meeting sealed enclosure; see the audit suite for the geometry
void sealed_alcove(SceneGraph& scene, Vec2 c, double cavity, double t) {
    const double span = cavity + t;
    scene.entities["wall_n"] =
        basic("wall_n", Box{cavity + 2 * t, t}, {c.x, c.y + span, 0});
    scene.entities["wall_s"] =
        basic("wall_s", Box{cavity + 2 * t, t}, {c.x, c.y - span, 0});
    scene.entities["wall_e"] = basic("wall_e", Box{t, cavity}, {c.x + span, c.y, 0});
    scene.entities["wall_w"] = basic("wall_w", Box{t, cavity}, {c.x - span, c.y, 0});
}

struct CodeCount {
    int ds1 = 0, budget_hits = 0;
};

} // namespace

TEST_CASE("a clean task passes through the static loop untouched") {
    const AssetCatalog& cat = builtin_catalog();
    const Task task = sample_clean_task(cat, 4);
    const StaticLoopResult r = run_static_loop(task, cat);
    CHECK(r.status == RepairStatus::VALID);
    CHECK(r.iterations == 0);
    CHECK(r.report.valid);
    CHECK(r.task.ledger.ops.empty());
    CHECK(task_to_string(r.task) == task_to_string(task));
}

TEST_CASE("undersized containers are grown by a hundredth-rounded factor") {
    // item half extent 0.3 m against a 0.2 m cavity: the snugness margin
    // asks for 0.315 / 0.2 = 1.575, rounded up to 1.58
    SceneGraph scene;
    scene.robot.base_pose = {1.0, 1.0, 0.0};
    Entity tub = basic("tub", Box{0.4, 0.4}, {2.5, 2.5, 0});
    tub.inner_shape = Box{0.2, 0.2};
    tub.affordances = {Affordance::CONTAINER};
    scene.entities["tub"] = tub;
    Entity block = basic("block", Box{0.3, 0.3}, {4.5, 2.5, 0});
    block.affordances = {Affordance::GRASPABLE};
    scene.entities["block"] = block;
    scene.validate();
    Task task;
    task.scene = scene;
    task.instruction.text = "the block goes in the tub";
    task.instruction.milestones = {GoalPredicate::inside("block", "tub")};

    const StaticAuditReport report = check_static(task);
    REQUIRE(report.diagnostics.size() == 1);
    REQUIRE(report.diagnostics[0].code == DefectCode::DG3_MORPHOLOGICAL_MISMATCH);

    const auto ops = synthesize_static_repair(task, report.diagnostics[0],
                                              builtin_catalog());
    REQUIRE_FALSE(ops.empty());
    CHECK(ops[0].kind == RepairOpKind::RESCALE);
    CHECK(ops[0].target == "tub");
    CHECK(ops[0].value == doctest::Approx(1.58).epsilon(1e-12));
    CHECK(ops[0].cost() == 1);

    // applying the loop clears the defect within budget 1
    Task budgeted = task;
    budgeted.ledger.budget = 1;
    const StaticLoopResult r = run_static_loop(budgeted, builtin_catalog());
    CHECK(r.status == RepairStatus::VALID);
    CHECK(r.iterations == 1);
    CHECK(r.task.ledger.semantic_cost == 1);
    CHECK(check_static(r.task).valid);
}

TEST_CASE("every injected static defect is repaired within budget") {
    const AssetCatalog& cat = builtin_catalog();
    const DefectCode statics[] = {
        DefectCode::DS1_AFFORDANCE_MISMATCH, DefectCode::DS2_MISSING_ASSET,
        DefectCode::DS3_PRECONDITION_CONFLICT, DefectCode::DG1_OUT_OF_REACH,
        DefectCode::DG2_INTERPENETRATION, DefectCode::DG3_MORPHOLOGICAL_MISMATCH};
    for (DefectCode code : statics) {
        for (std::uint64_t seed : {100ULL, 200ULL, 300ULL}) {
            const GeneratedTask g = sample_batch_task(cat, seed, code);
            REQUIRE(g.injected == code);
            const StaticLoopResult r = run_static_loop(g.task, cat);
            CHECK(r.status == RepairStatus::VALID);
            CHECK(r.report.valid);
            CHECK(r.iterations >= 1);
            CHECK(r.task.ledger.semantic_cost <= r.task.ledger.budget);
            // the ledger replays onto the defective input byte for byte
            const int dist = semantic_distance(g.task, r.task, r.task.ledger);
            CHECK(dist == r.task.ledger.semantic_cost);
        }
    }
}

TEST_CASE("affordance mismatches resolve by swapping in a capable asset") {
    const AssetCatalog& cat = builtin_catalog();
    const GeneratedTask g =
        sample_batch_task(cat, 17, DefectCode::DS1_AFFORDANCE_MISMATCH);
    const StaticAuditReport report = check_static(g.task);
    REQUIRE_FALSE(report.diagnostics.empty());
    const Diagnostic& d = report.diagnostics[0];
    REQUIRE(d.code == DefectCode::DS1_AFFORDANCE_MISMATCH);
    const auto ops = synthesize_static_repair(g.task, d, cat);
    REQUIRE_FALSE(ops.empty());
    CHECK(ops[0].kind == RepairOpKind::SWAP_ASSET);
    CHECK(ops[0].target == d.subjects[0]);
    CHECK(ops[0].query.rfind("affordance:", 0) == 0);
    CHECK(ops[0].cost() == 3);
    // the swapped-in template is embedded for catalog-free replay
    CHECK_FALSE(ops[0].resolved.is_null());
}

TEST_CASE("the loop aborts rather than overrun the ledger budget") {
    // two defects, cheapest total cost 4 (swap 3 + transform 1): with
    // budget 3 the swap lands and the next candidate must be refused
    const AssetCatalog& cat = builtin_catalog();
    SceneGraph scene;
    scene.robot.base_pose = {1.0, 1.0, 0.0};
    Entity coolbox = basic("coolbox", Box{0.25, 0.25}, {2.0, 2.0, 0});
    coolbox.inner_shape = Box{0.2, 0.2};
    coolbox.affordances = {Affordance::CONTAINER};
    scene.entities["coolbox"] = coolbox;
    Entity soup = basic("soup", Disk{0.06}, {4.0, 2.0, 0});
    soup.affordances = {Affordance::GRASPABLE};
    scene.entities["soup"] = soup;
    sealed_alcove(scene, {4.0, 2.0}, 0.12, 0.45);
    scene.validate();
    Task task;
    task.scene = scene;
    task.instruction.text = "heat the soup";
    task.instruction.milestones = {GoalPredicate::inside("soup", "coolbox")};
    task.ledger.budget = 3;

    const StaticAuditReport before = check_static(task);
    REQUIRE(before.diagnostics.size() == 2); // D-S1 and D-G1

    const StaticLoopResult r = run_static_loop(task, cat);
    CHECK(r.status == RepairStatus::BUDGET_EXCEEDED);
    CHECK_FALSE(r.report.valid);
    CHECK(r.task.ledger.semantic_cost <= 3);
    // a budget of 8 clears both defects
    Task roomy = task;
    roomy.ledger.budget = 8;
    const StaticLoopResult ok = run_static_loop(roomy, cat);
    CHECK(ok.status == RepairStatus::VALID);
    CHECK(ok.task.ledger.semantic_cost <= 8);
}

TEST_CASE("irreplaceable missing assets leave no candidate") {
    SceneGraph scene;
    scene.robot.base_pose = {1.0, 1.0, 0.0};
    Entity crate = basic("crate", Box{0.2, 0.2}, {3.0, 3.0, 0});
    crate.affordances = {Affordance::SUPPORT};
    scene.entities["crate"] = crate;
    scene.validate();
    Task task;
    task.scene = scene;
    task.instruction.text = "stack the phantom on the crate";
    task.instruction.milestones = {GoalPredicate::on("phantom", "crate")};
    const StaticLoopResult r = run_static_loop(task, builtin_catalog());
    CHECK(r.status == RepairStatus::NO_CANDIDATE);
    CHECK_FALSE(r.report.valid);
    CHECK(r.task.ledger.ops.empty());
}

TEST_CASE("dynamic candidates match the divergence class") {
    const AssetCatalog& cat = builtin_catalog();
    Task task = sample_clean_task(cat, 3);

    DivergenceReport deadlock{DivergenceClass::COLLISION_DEADLOCK, 0, 5, ""};
    auto ops = synthesize_dynamic_repair(task, deadlock, cat);
    REQUIRE(ops.size() == 2);
    CHECK(ops[0].kind == RepairOpKind::REPLAN_PATH);
    CHECK(ops[0].value == doctest::Approx(0.5));
    CHECK(ops[1].kind == RepairOpKind::RESET_ROBOT);
    CHECK(ops[0].cost() == 0);
    CHECK(ops[1].cost() == 0);

    DivergenceReport nopath{DivergenceClass::PLANNER_NO_PATH, 0, 1, ""};
    ops = synthesize_dynamic_repair(task, nopath, cat);
    REQUIRE(ops.size() == 1);
    CHECK(ops[0].kind == RepairOpKind::REPLAN_PATH);

    // impedance has headroom: stiffen the grip first
    DivergenceReport torque{DivergenceClass::GRASP_TORQUE, 1, 9, ""};
    ops = synthesize_dynamic_repair(task, torque, cat);
    REQUIRE_FALSE(ops.empty());
    CHECK(ops[0].kind == RepairOpKind::TUNE_IMPEDANCE);
    CHECK(ops[0].value == doctest::Approx(1.5));
    // at the cap the remedy shifts to shrinking the payload
    Task stiff = task;
    stiff.policy.impedance_scale = 1.9;
    ops = synthesize_dynamic_repair(stiff, torque, cat);
    for (const auto& op : ops) CHECK(op.kind != RepairOpKind::TUNE_IMPEDANCE);

    DivergenceReport slow{DivergenceClass::HORIZON_EXHAUSTED, 0, 599, ""};
    ops = synthesize_dynamic_repair(task, slow, cat);
    REQUIRE_FALSE(ops.empty());
    CHECK(ops[0].kind == RepairOpKind::SET_HORIZON);
    CHECK(ops[0].value > 1.0);

    DivergenceReport met{DivergenceClass::PRECONDITION_ALREADY_MET, 2, 30, ""};
    ops = synthesize_dynamic_repair(task, met, cat);
    REQUIRE_FALSE(ops.empty());
    CHECK(ops[0].kind == RepairOpKind::SKIP_SUBSTEP);
    CHECK(ops[0].index == 2);
}

TEST_CASE("blocked corridors are replanned at half inflation in one round") {
    const AssetCatalog& cat = builtin_catalog();
    const GeneratedTask g =
        sample_batch_task(cat, 11, DefectCode::DD3_BLOCKED_CORRIDOR);
    REQUIRE(g.injected == DefectCode::DD3_BLOCKED_CORRIDOR);
    const DynamicLoopResult r = run_dynamic_loop(g.task, cat, {}, 77);
    CHECK(r.status == RepairStatus::VALID);
    CHECK(r.trace.outcome == TraceOutcome::SUCCESS);
    REQUIRE_FALSE(r.round_log.empty());
    CHECK(r.round_log[0].op.kind == RepairOpKind::REPLAN_PATH);
    // solver retunes are free: the ledger spends nothing
    CHECK(r.task.ledger.semantic_cost == 0);
    CHECK(r.task.policy.inflation_r < g.task.policy.inflation_r);
}

TEST_CASE("over-heavy grasps recover by impedance tuning") {
    const AssetCatalog& cat = builtin_catalog();
    const GeneratedTask g = sample_batch_task(cat, 21, DefectCode::DD1_OVER_MASS);
    const DynamicLoopResult r = run_dynamic_loop(g.task, cat, {}, 0);
    CHECK(r.status == RepairStatus::VALID);
    REQUIRE_FALSE(r.round_log.empty());
    CHECK(r.round_log[0].cls == DivergenceClass::GRASP_TORQUE);
    bool tuned = false;
    for (const auto& round : r.round_log) {
        if (round.op.kind == RepairOpKind::TUNE_IMPEDANCE) tuned = true;
    }
    CHECK(tuned);
    CHECK(r.task.policy.impedance_scale > g.task.policy.impedance_scale);
}

TEST_CASE("tight insertions recover by rescaling geometry") {
    const AssetCatalog& cat = builtin_catalog();
    const GeneratedTask g =
        sample_batch_task(cat, 31, DefectCode::DD2_TIGHT_TOLERANCE);
    const DynamicLoopResult r = run_dynamic_loop(g.task, cat, {}, 0);
    CHECK(r.status == RepairStatus::VALID);
    REQUIRE_FALSE(r.round_log.empty());
    CHECK(r.round_log[0].cls == DivergenceClass::INSERTION_TOLERANCE);
    bool rescaled = false;
    for (const auto& round : r.round_log) {
        if (round.op.kind == RepairOpKind::RESCALE) rescaled = true;
    }
    CHECK(rescaled);
    CHECK(r.task.ledger.semantic_cost >= 1);
    CHECK(eval_goal(r.trace, r.task.instruction));
}

TEST_CASE("short horizons recover by extension") {
    const AssetCatalog& cat = builtin_catalog();
    const GeneratedTask g =
        sample_batch_task(cat, 41, DefectCode::DD4_SHORT_HORIZON);
    const DynamicLoopResult r = run_dynamic_loop(g.task, cat, {}, 0);
    CHECK(r.status == RepairStatus::VALID);
    REQUIRE_FALSE(r.round_log.empty());
    CHECK(r.round_log[0].cls == DivergenceClass::HORIZON_EXHAUSTED);
    CHECK(r.task.policy.horizon > g.task.policy.horizon);
    CHECK(r.task.ledger.semantic_cost == 0);
}

TEST_CASE("met preconditions recover by skipping the substep") {
    const AssetCatalog& cat = builtin_catalog();
    for (std::uint64_t seed = 0;; ++seed) {
        REQUIRE(seed < 200);
        Task task = sample_clean_task(cat, seed);
        bool has_art = false;
        PrimitiveSpec art;
        for (const auto& p : task.policy.primitives) {
            if (p.kind == PrimitiveKind::ARTICULATE) {
                has_art = true;
                art = p;
            }
        }
        if (!has_art) continue;
        task.policy.primitives.push_back(art); // opening twice cannot work
        const DynamicLoopResult r = run_dynamic_loop(task, cat, {}, 0);
        CHECK(r.status == RepairStatus::VALID);
        REQUIRE_FALSE(r.round_log.empty());
        CHECK(r.round_log[0].cls == DivergenceClass::PRECONDITION_ALREADY_MET);
        CHECK(r.round_log[0].op.kind == RepairOpKind::SKIP_SUBSTEP);
        const int dup = static_cast<int>(task.policy.primitives.size()) - 1;
        CHECK(r.task.policy.skipped.count(dup) == 1);
        CHECK(r.task.ledger.semantic_cost == 0);
        break;
    }
}

TEST_CASE("impossible insertions fail after max rounds, never falsely succeed") {
    const AssetCatalog& cat = builtin_catalog();
    // find an insertion task, then pinch its container cavity so far
    // that no admissible item rescale can ever seat the piece
    for (std::uint64_t seed = 0;; ++seed) {
        REQUIRE(seed < 300);
        GeneratedTask g;
        try {
            g = sample_batch_task(cat, seed, std::nullopt);
        } catch (const GenerationFailure&) {
            continue;
        }
        std::string container, item;
        for (const auto& m : g.task.instruction.milestones) {
            if (m.kind == PredicateKind::INSIDE) {
                container = m.entity;
                item = m.item;
            }
        }
        if (container.empty()) continue;
        Task task = g.task;
        Entity& c = task.scene.get(container);
        c.inner_shape = Box{0.012, 0.012};
        task.scene.validate();
        // even at the item's lowest admissible scale nothing fits
        const Entity& it = task.scene.get(item);
        const auto& tpl = cat.asset(asset_root(item));
        const double min_ext =
            std::min(extent_x(it.shape), extent_y(it.shape)) * tpl.scale_lo;
        REQUIRE(min_ext + ExecutionConfig{}.insertion_clearance > 0.012);

        const DynamicLoopResult r = run_dynamic_loop(task, cat, {}, 0, 5);
        CHECK(r.status != RepairStatus::VALID);
        CHECK(r.trace.outcome == TraceOutcome::DIVERGED);
        break;
    }
}

TEST_CASE("rollback resumes from the diverged primitive, not from scratch") {
    const AssetCatalog& cat = builtin_catalog();
    const GeneratedTask g =
        sample_batch_task(cat, 51, DefectCode::DD2_TIGHT_TOLERANCE);
    const ExecutionTrace nominal =
        execute(g.task, nominal_params(g.task.policy), {}, 0);
    REQUIRE(nominal.outcome == TraceOutcome::DIVERGED);
    const int bad_prim = nominal.divergence->primitive_index;
    int prefix_steps = 0;
    for (const Checkpoint& ck : nominal.checkpoints) {
        if (ck.primitive_index <= bad_prim) prefix_steps = ck.steps_used;
    }
    const DynamicLoopResult r = run_dynamic_loop(g.task, cat, {}, 0);
    REQUIRE(r.status == RepairStatus::VALID);
    REQUIRE(static_cast<int>(r.trace.steps.size()) >= prefix_steps);
    // everything before the repaired primitive is the original motion
    for (int k = 0; k < prefix_steps; ++k) {
        CHECK(r.trace.steps[k].robot_pose.x == nominal.steps[k].robot_pose.x);
        CHECK(r.trace.steps[k].robot_pose.y == nominal.steps[k].robot_pose.y);
        CHECK(r.trace.steps[k].event == nominal.steps[k].event);
    }
}
