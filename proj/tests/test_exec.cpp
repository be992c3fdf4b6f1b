#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <queue>

#include "taskforge/exec.hpp"
#include "taskforge/generator.hpp"
#include "taskforge/rng.hpp"

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

// cardinal flood fill over the same lattice and dilation the planner
// uses; the planner's diagonal moves need both adjacent cardinals free,
// so cardinal connectivity decides reachability exactly
bool flood_reachable(const SceneGraph& scene, Vec2 start, Vec2 goal,
                     double inflation_r) {
    const Rect& wb = scene.world_bounds;
    const int nx = static_cast<int>(std::floor(wb.width() / kGridRes)) + 1;
    const int ny = static_cast<int>(std::floor(wb.height() / kGridRes)) + 1;
    const double radius = scene.robot.base_radius + inflation_r;
    auto cx = [&](double x) {
        return std::clamp(static_cast<int>(std::lround((x - wb.min_x) / kGridRes)), 0,
                          nx - 1);
    };
    auto cy = [&](double y) {
        return std::clamp(static_cast<int>(std::lround((y - wb.min_y) / kGridRes)), 0,
                          ny - 1);
    };
    const int sx = cx(start.x), sy = cy(start.y);
    const int gx = cx(goal.x), gy = cy(goal.y);
    auto free_cell = [&](int ix, int iy) {
        return disk_free(scene, {wb.min_x + ix * kGridRes, wb.min_y + iy * kGridRes},
                         radius);
    };
    if (!free_cell(gx, gy)) return false;
    if (sx == gx && sy == gy) return true;
    std::vector<char> seen(static_cast<size_t>(nx) * ny, 0);
    std::queue<std::pair<int, int>> q;
    q.push({sx, sy});
    seen[static_cast<size_t>(sx) * ny + sy] = 1;
    while (!q.empty()) {
        auto [x, y] = q.front();
        q.pop();
        if (x == gx && y == gy) return true;
        const int dirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
        for (const auto& d : dirs) {
            const int x2 = x + d[0], y2 = y + d[1];
            if (x2 < 0 || y2 < 0 || x2 >= nx || y2 >= ny) continue;
            char& s = seen[static_cast<size_t>(x2) * ny + y2];
            if (s || !free_cell(x2, y2)) continue;
            s = 1;
            q.push({x2, y2});
        }
    }
    return false;
}

SceneGraph cluttered_scene(Rng& rng, int n_obstacles) {
    SceneGraph scene;
    scene.robot.base_pose = {0.5, 0.5, 0.0};
    for (int k = 0; k < n_obstacles; ++k) {
        const std::string id = "ob" + std::to_string(k);
        scene.entities[id] =
            basic(id, Box{rng.uniform(0.1, 0.5), rng.uniform(0.1, 0.5)},
                  {rng.uniform(1.0, 5.0), rng.uniform(1.0, 5.0), 0});
    }
    return scene;
}

} // namespace

TEST_CASE("straight path across an empty room") {
    SceneGraph scene;
    scene.robot.base_pose = {1.0, 1.0, 0.0};
    const PlanResult r = plan_path(scene, {1.0, 1.0}, {4.0, 1.0}, 0.10);
    REQUIRE(r.found);
    // three metres on a 5 cm lattice: sixty cardinal steps
    CHECK(r.waypoints.size() == 61);
    CHECK(r.cost == 300);
    for (std::size_t k = 0; k < r.waypoints.size(); ++k) {
        CHECK(r.waypoints[k].x == doctest::Approx(1.0 + 0.05 * k).epsilon(1e-12));
        CHECK(r.waypoints[k].y == doctest::Approx(1.0));
    }
}

TEST_CASE("trivial and blocked goals") {
    SceneGraph scene;
    scene.robot.base_pose = {1.0, 1.0, 0.0};
    const PlanResult same = plan_path(scene, {1.0, 1.0}, {1.01, 1.0}, 0.10);
    REQUIRE(same.found);
    CHECK(same.cost == 0);
    CHECK(same.waypoints.size() == 1);
    // a goal cell inside an obstacle fails immediately
    scene.entities["rock"] = basic("rock", Disk{0.3}, {4.0, 1.0, 0});
    CHECK_FALSE(plan_path(scene, {1.0, 1.0}, {4.0, 1.0}, 0.10).found);
}

TEST_CASE("narrow doorway passes only at low inflation") {
    // a full-width wall split by a 0.40 m doorway at x = 2.0; the only
    // south-north route runs through the gap
    SceneGraph scene;
    scene.robot.base_pose = {1.0, 1.0, 0.0};
    scene.entities["wall_a"] = basic("wall_a", Box{0.9, 0.3}, {0.9, 3.0, 0});
    scene.entities["wall_b"] = basic("wall_b", Box{1.9, 0.3}, {4.1, 3.0, 0});
    scene.validate();
    // dilation 0.15 + 0.10 = 0.25 exceeds the 0.20 half width
    CHECK_FALSE(plan_path(scene, {1.0, 1.0}, {5.0, 5.0}, 0.10).found);
    // dilation 0.19 squeezes through
    const PlanResult r = plan_path(scene, {1.0, 1.0}, {5.0, 5.0}, 0.04);
    REQUIRE(r.found);
    bool crossed = false;
    for (const Vec2& w : r.waypoints) {
        if (std::fabs(w.x - 2.0) < 0.026 && std::fabs(w.y - 3.0) < 0.35)
            crossed = true;
        CHECK(disk_free(scene, w, scene.robot.base_radius + 0.04));
    }
    CHECK(crossed);
}

TEST_CASE("planner agrees with cardinal flood fill") {
    Rng rng(404);
    int found_count = 0;
    for (int trial = 0; trial < 60; ++trial) {
        SceneGraph scene = cluttered_scene(rng, 7);
        const Vec2 start{0.5, 0.5};
        const Vec2 goal{rng.uniform(4.5, 5.5), rng.uniform(4.5, 5.5)};
        const double inflation = 0.10;
        const PlanResult r = plan_path(scene, start, goal, inflation);
        CHECK(r.found == flood_reachable(scene, start, goal, inflation));
        if (!r.found) continue;
        ++found_count;
        // every waypoint is free at the planning dilation (start exempt)
        for (std::size_t k = 1; k < r.waypoints.size(); ++k) {
            CHECK(disk_free(scene, r.waypoints[k],
                            scene.robot.base_radius + inflation));
        }
        // consecutive waypoints are lattice neighbours; cost adds up
        int cost = 0;
        for (std::size_t k = 1; k < r.waypoints.size(); ++k) {
            const double dx = std::fabs(r.waypoints[k].x - r.waypoints[k - 1].x);
            const double dy = std::fabs(r.waypoints[k].y - r.waypoints[k - 1].y);
            CHECK(dx < kGridRes + 1e-9);
            CHECK(dy < kGridRes + 1e-9);
            CHECK(dx + dy > 1e-9);
            cost += (dx > 1e-9 && dy > 1e-9) ? 7 : 5;
        }
        CHECK(cost == r.cost);
    }
    CHECK(found_count > 10); // the sweep saw both outcomes
}

TEST_CASE("nominal rollouts on clean tasks succeed and replay bitwise") {
    const AssetCatalog& cat = builtin_catalog();
    for (std::uint64_t seed : {1ULL, 6ULL, 9ULL}) {
        const Task task = sample_clean_task(cat, seed);
        const ParamVector nominal = nominal_params(task.policy);
        const ExecutionTrace a = execute(task, nominal, {}, 7);
        CHECK(a.outcome == TraceOutcome::SUCCESS);
        CHECK_FALSE(a.divergence.has_value());
        CHECK(eval_goal(a, task.instruction));
        CHECK(a.steps_used <= task.policy.horizon);
        REQUIRE_FALSE(a.steps.empty());
        CHECK(a.steps.back().step == a.steps_used);
        for (const auto& t : a.milestone_times) CHECK(t.has_value());
        const ExecutionTrace b = execute(task, nominal, {}, 7);
        CHECK(trace_to_jsonl(a) == trace_to_jsonl(b));
        const ExecutionTrace back = trace_from_jsonl(trace_to_jsonl(a));
        CHECK(trace_to_jsonl(back) == trace_to_jsonl(a));
    }
}

TEST_CASE("over-heavy payloads sink the grasp") {
    const AssetCatalog& cat = builtin_catalog();
    const GeneratedTask g = sample_batch_task(cat, 42, DefectCode::DD1_OVER_MASS);
    REQUIRE(g.injected == DefectCode::DD1_OVER_MASS);
    const ExecutionTrace t = execute(g.task, nominal_params(g.task.policy), {}, 0);
    CHECK(t.outcome == TraceOutcome::DIVERGED);
    REQUIRE(t.divergence.has_value());
    CHECK(t.divergence->cls == DivergenceClass::GRASP_TORQUE);
    CHECK(t.divergence->primitive_index >= 0);
}

TEST_CASE("tight cavities sink the insertion") {
    const AssetCatalog& cat = builtin_catalog();
    const GeneratedTask g =
        sample_batch_task(cat, 42, DefectCode::DD2_TIGHT_TOLERANCE);
    REQUIRE(g.injected == DefectCode::DD2_TIGHT_TOLERANCE);
    const ExecutionTrace t = execute(g.task, nominal_params(g.task.policy), {}, 0);
    CHECK(t.outcome == TraceOutcome::DIVERGED);
    REQUIRE(t.divergence.has_value());
    CHECK(t.divergence->cls == DivergenceClass::INSERTION_TOLERANCE);
}

TEST_CASE("articulating an already-open joint diverges as met precondition") {
    const AssetCatalog& cat = builtin_catalog();
    // find an articulation task and duplicate its articulate primitive
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
        task.policy.primitives.push_back(art);
        const ExecutionTrace t = execute(task, nominal_params(task.policy), {}, 0);
        CHECK(t.outcome == TraceOutcome::DIVERGED);
        REQUIRE(t.divergence.has_value());
        CHECK(t.divergence->cls == DivergenceClass::PRECONDITION_ALREADY_MET);
        CHECK(t.divergence->primitive_index ==
              static_cast<int>(task.policy.primitives.size()) - 1);
        break;
    }
}

TEST_CASE("starved horizons diverge as exhausted") {
    const AssetCatalog& cat = builtin_catalog();
    Task task = sample_clean_task(cat, 2);
    const ExecutionTrace full = execute(task, nominal_params(task.policy), {}, 0);
    REQUIRE(full.outcome == TraceOutcome::SUCCESS);
    Task starved = task;
    starved.policy.horizon = full.steps_used / 2;
    const ExecutionTrace t = execute(starved, nominal_params(task.policy), {}, 0);
    CHECK(t.outcome == TraceOutcome::DIVERGED);
    REQUIRE(t.divergence.has_value());
    CHECK(t.divergence->cls == DivergenceClass::HORIZON_EXHAUSTED);
    CHECK(t.steps_used <= starved.policy.horizon);
}

TEST_CASE("success is monotone in horizon") {
    const AssetCatalog& cat = builtin_catalog();
    for (std::uint64_t seed : {3ULL, 4ULL, 5ULL, 8ULL}) {
        const Task task = sample_clean_task(cat, seed);
        const ParamVector nominal = nominal_params(task.policy);
        const ExecutionTrace base = execute(task, nominal, {}, 0);
        REQUIRE(base.outcome == TraceOutcome::SUCCESS);
        // exactly enough steps still succeeds, and the motion is identical
        Task tight = task;
        tight.policy.horizon = base.steps_used;
        const ExecutionTrace t = execute(tight, nominal, {}, 0);
        CHECK(t.outcome == TraceOutcome::SUCCESS);
        CHECK(t.steps_used == base.steps_used);
        // a doubled horizon changes nothing about the trajectory
        Task loose = task;
        loose.policy.horizon = task.policy.horizon * 2;
        const ExecutionTrace l = execute(loose, nominal, {}, 0);
        CHECK(l.outcome == TraceOutcome::SUCCESS);
        REQUIRE(l.steps.size() == base.steps.size());
        for (std::size_t k = 0; k < l.steps.size(); ++k) {
            CHECK(l.steps[k].robot_pose.x == base.steps[k].robot_pose.x);
            CHECK(l.steps[k].robot_pose.y == base.steps[k].robot_pose.y);
            CHECK(l.steps[k].event == base.steps[k].event);
        }
    }
}

TEST_CASE("checkpoint resume reproduces the rollout bitwise") {
    const AssetCatalog& cat = builtin_catalog();
    Rng rng(1234);
    int resumed = 0;
    for (int trial = 0; trial < 25; ++trial) {
        const std::uint64_t seed = rng.next_u64() % 5000;
        Task task;
        try {
            task = sample_task(cat, seed);
        } catch (const GenerationFailure&) {
            continue;
        }
        const ParamVector nominal = nominal_params(task.policy);
        const ExecutionTrace full = execute(task, nominal, {}, seed);
        const std::string want = trace_to_jsonl(full);
        for (const Checkpoint& ck : full.checkpoints) {
            const ExecutionTrace again =
                execute_from(task, nominal, {}, seed, full, ck);
            CHECK(trace_to_jsonl(again) == want);
            ++resumed;
        }
    }
    CHECK(resumed > 40);
}

TEST_CASE("checkpoints snapshot resumable state") {
    const AssetCatalog& cat = builtin_catalog();
    const Task task = sample_clean_task(cat, 1);
    const ExecutionTrace t = execute(task, nominal_params(task.policy), {}, 0);
    REQUIRE_FALSE(t.checkpoints.empty());
    int last_index = -1;
    int last_steps = -1;
    for (const Checkpoint& ck : t.checkpoints) {
        CHECK(ck.primitive_index > last_index); // strictly advancing
        CHECK(ck.steps_used >= last_steps);
        CHECK(ck.steps_used <= t.steps_used);
        CHECK(ck.milestone_times.size() == task.instruction.milestones.size());
        last_index = ck.primitive_index;
        last_steps = ck.steps_used;
    }
}

TEST_CASE("solve stops at the first satisfying rollout") {
    const AssetCatalog& cat = builtin_catalog();
    const Task task = sample_clean_task(cat, 10);
    const SolveResult r = solve(task, {}, 99);
    CHECK(r.success);
    CHECK(r.rollouts == 1); // the nominal centre already satisfies
    CHECK_FALSE(r.representative.has_value());
    CHECK(r.theta == nominal_params(task.policy));
    CHECK(eval_goal(r.best_trace, task.instruction));
}

TEST_CASE("solve reports the nominal divergence when the search sinks") {
    const AssetCatalog& cat = builtin_catalog();
    const GeneratedTask g =
        sample_batch_task(cat, 7, DefectCode::DD2_TIGHT_TOLERANCE);
    const SolveResult r = solve(g.task, {}, 5);
    CHECK_FALSE(r.success);
    CHECK(r.rollouts > 1); // nominal plus sampled batches
    REQUIRE(r.representative.has_value());
    CHECK(r.representative->cls == DivergenceClass::INSERTION_TOLERANCE);
    // deterministic under the same seed
    const SolveResult r2 = solve(g.task, {}, 5);
    CHECK(r2.rollouts == r.rollouts);
    CHECK(r2.theta == r.theta);
}

TEST_CASE("execution config echo and round trip") {
    ExecutionConfig c;
    c.insertion_clearance = 0.02;
    const ExecutionConfig back = execution_config_from_json(execution_config_to_json(c));
    CHECK(back.insertion_clearance == doctest::Approx(0.02));
    const AssetCatalog& cat = builtin_catalog();
    const Task task = sample_clean_task(cat, 1);
    const ExecutionTrace t = execute(task, nominal_params(task.policy), c, 3);
    CHECK(execution_config_from_json(t.config_echo).insertion_clearance ==
          doctest::Approx(0.02));
}
