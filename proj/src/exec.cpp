#include "taskforge/exec.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <sstream>
#include <tuple>

#include "taskforge/rng.hpp"

namespace taskforge {

Json execution_config_to_json(const ExecutionConfig& c) {
    return {{"insertion_clearance", c.insertion_clearance}};
}

ExecutionConfig execution_config_from_json(const Json& j) {
    ExecutionConfig c;
    c.insertion_clearance = j.at("insertion_clearance").get<double>();
    return c;
}

namespace {

// internal control-flow signal; always caught inside run_rollout
struct DivergeSignal {
    DivergenceClass cls;
    std::string detail;
};

struct GridIndex {
    const Rect* wb = nullptr;
    int nx = 0, ny = 0;

    explicit GridIndex(const Rect& bounds) : wb(&bounds) {
        nx = static_cast<int>(std::floor(bounds.width() / kGridRes)) + 1;
        ny = static_cast<int>(std::floor(bounds.height() / kGridRes)) + 1;
    }
    int clamp_x(double x) const {
        int i = static_cast<int>(std::lround((x - wb->min_x) / kGridRes));
        return std::clamp(i, 0, nx - 1);
    }
    int clamp_y(double y) const {
        int i = static_cast<int>(std::lround((y - wb->min_y) / kGridRes));
        return std::clamp(i, 0, ny - 1);
    }
    Vec2 at(int ix, int iy) const {
        return {wb->min_x + ix * kGridRes, wb->min_y + iy * kGridRes};
    }
};

} // namespace

PlanResult plan_path(const SceneGraph& scene, Vec2 start, Vec2 goal,
                     double inflation_r, const std::set<std::string>& exclude) {
    const GridIndex grid(scene.world_bounds);
    const double radius = scene.robot.base_radius + inflation_r;
    const int sx = grid.clamp_x(start.x), sy = grid.clamp_y(start.y);
    const int gx = grid.clamp_x(goal.x), gy = grid.clamp_y(goal.y);

    std::vector<signed char> memo(static_cast<size_t>(grid.nx) * grid.ny, -1);
    auto cell_free = [&](int ix, int iy) {
        if (ix < 0 || iy < 0 || ix >= grid.nx || iy >= grid.ny) return false;
        signed char& m = memo[static_cast<size_t>(ix) * grid.ny + iy];
        if (m < 0) m = disk_free(scene, grid.at(ix, iy), radius, exclude) ? 1 : 0;
        return m == 1;
    };
    // the start cell is exempt: a robot parked against clutter may leave
    auto passable = [&](int ix, int iy) {
        return (ix == sx && iy == sy) || cell_free(ix, iy);
    };

    if (sx == gx && sy == gy) return {true, {grid.at(sx, sy)}, 0};
    if (!cell_free(gx, gy)) return {false, {}, 0};

    auto h = [&](int ix, int iy) {
        int dx = std::abs(ix - gx), dy = std::abs(iy - gy);
        return 5 * std::max(dx, dy) + 2 * std::min(dx, dy);
    };

    const int inf = std::numeric_limits<int>::max();
    std::vector<int> gscore(memo.size(), inf);
    std::vector<int> parent(memo.size(), -1);
    auto idx = [&](int ix, int iy) { return ix * grid.ny + iy; };

    // (f, x, y): ties resolve by cell coordinates so plans are stable
    using Node = std::tuple<int, int, int>;
    std::priority_queue<Node, std::vector<Node>, std::greater<Node>> open;
    gscore[static_cast<size_t>(idx(sx, sy))] = 0;
    open.emplace(h(sx, sy), sx, sy);

    static constexpr int moves[8][3] = {
        {-1, 0, 5}, {0, -1, 5}, {0, 1, 5}, {1, 0, 5},
        {-1, -1, 7}, {-1, 1, 7}, {1, -1, 7}, {1, 1, 7},
    };

    while (!open.empty()) {
        auto [f, x, y] = open.top();
        open.pop();
        const int g = gscore[static_cast<size_t>(idx(x, y))];
        if (f - h(x, y) > g) continue; // stale entry
        if (x == gx && y == gy) {
            std::vector<Vec2> path;
            int cur = idx(x, y);
            while (cur >= 0) {
                path.push_back(grid.at(cur / grid.ny, cur % grid.ny));
                cur = parent[static_cast<size_t>(cur)];
            }
            std::reverse(path.begin(), path.end());
            return {true, std::move(path), g};
        }
        for (const auto& mv : moves) {
            const int nx2 = x + mv[0], ny2 = y + mv[1];
            if (!passable(nx2, ny2)) continue;
            // no squeezing through touching corners
            if (mv[0] != 0 && mv[1] != 0 &&
                !(passable(x + mv[0], y) && passable(x, y + mv[1]))) {
                continue;
            }
            const int ng = g + mv[2];
            int& slot = gscore[static_cast<size_t>(idx(nx2, ny2))];
            if (ng < slot) {
                slot = ng;
                parent[static_cast<size_t>(idx(nx2, ny2))] = idx(x, y);
                open.emplace(ng + h(nx2, ny2), nx2, ny2);
            }
        }
    }
    return {false, {}, 0};
}

namespace {

struct RolloutState {
    SceneGraph scene;
    std::string held;
    int steps_used = 0;
    std::vector<std::optional<int>> times;
    std::vector<StepRecord> steps;
    std::vector<Checkpoint> checkpoints;
};

bool milestone_ids_present(const SceneGraph& scene, const GoalPredicate& m) {
    if (!m.item.empty() && !scene.has(m.item)) return false;
    if (!m.entity.empty() && !scene.has(m.entity)) return false;
    return true;
}

void sweep_milestones(RolloutState& st, const Instruction& ins, int t) {
    for (size_t i = 0; i < ins.milestones.size(); ++i) {
        if (st.times[i]) continue;
        const GoalPredicate& m = ins.milestones[i];
        if (!milestone_ids_present(st.scene, m)) continue;
        if (milestone_holds(st.scene, st.held, m)) st.times[i] = t;
    }
}

void commit_step(RolloutState& st, const Instruction& ins, int horizon, int prim,
                 TraceEvent ev, std::vector<EntityUpdate> updates) {
    if (st.steps_used >= horizon) {
        throw DivergeSignal{DivergenceClass::HORIZON_EXHAUSTED,
                            "step budget exhausted"};
    }
    ++st.steps_used;
    StepRecord rec;
    rec.step = st.steps_used;
    rec.primitive_index = prim;
    rec.event = ev;
    rec.robot_pose = st.scene.robot.base_pose;
    rec.held = st.held;
    rec.updates = std::move(updates);
    st.steps.push_back(std::move(rec));
    sweep_milestones(st, ins, st.steps_used);
}

const Entity& resolve_target(const RolloutState& st, const PrimitiveSpec& p) {
    auto it = p.targets.find("target");
    if (it == p.targets.end() || !st.scene.has(it->second)) {
        const std::string id = it == p.targets.end() ? "<unset>" : it->second;
        throw DivergeSignal{DivergenceClass::COLLISION_DEADLOCK,
                            "missing reference: " + id};
    }
    return st.scene.get(it->second);
}

void require_in_reach(const RolloutState& st, const Entity& target,
                      const std::string& what) {
    const Vec2 base = st.scene.robot.base_pose.position();
    if (norm(target.pose.position() - base) > st.scene.robot.reach + 1e-9) {
        throw DivergeSignal{DivergenceClass::COLLISION_DEADLOCK,
                            what + " out of reach: " + target.id};
    }
}

void run_navigate(RolloutState& st, const Task& task, int prim, const double* th) {
    const PrimitiveSpec& p = task.policy.primitives[static_cast<size_t>(prim)];
    const Entity& target = resolve_target(st, p);
    const double d = th[0], phi = th[1];
    const Vec2 tpos = target.pose.position();
    const Vec2 want{tpos.x + d * std::cos(phi), tpos.y + d * std::sin(phi)};

    const GridIndex grid(st.scene.world_bounds);
    const Vec2 goal = grid.at(grid.clamp_x(want.x), grid.clamp_y(want.y));

    std::set<std::string> excl;
    if (!st.held.empty()) excl.insert(st.held);
    const double radius = st.scene.robot.base_radius + task.policy.inflation_r;
    RobotModel& robot = st.scene.robot;
    const Vec2 base = robot.base_pose.position();

    const bool already_there = grid.clamp_x(base.x) == grid.clamp_x(goal.x) &&
                               grid.clamp_y(base.y) == grid.clamp_y(goal.y);
    if (!already_there && !disk_free(st.scene, goal, radius, excl)) {
        throw DivergeSignal{DivergenceClass::COLLISION_DEADLOCK,
                            "navigation goal in collision near " + target.id};
    }
    PlanResult plan = plan_path(st.scene, base, goal, task.policy.inflation_r, excl);
    if (!plan.found) {
        throw DivergeSignal{DivergenceClass::PLANNER_NO_PATH,
                            "no route toward " + target.id};
    }
    for (size_t i = 1; i < plan.waypoints.size(); ++i) {
        const Vec2 prev = robot.base_pose.position();
        const Vec2 next = plan.waypoints[i];
        robot.base_pose.x = next.x;
        robot.base_pose.y = next.y;
        robot.base_pose.theta = wrap_angle(std::atan2(next.y - prev.y, next.x - prev.x));
        std::vector<EntityUpdate> updates;
        if (!st.held.empty()) {
            Entity& carried = st.scene.get(st.held);
            carried.pose.x = next.x;
            carried.pose.y = next.y;
            updates.push_back({st.held, carried.pose, std::nullopt});
        }
        commit_step(st, task.instruction, task.policy.horizon, prim,
                    TraceEvent::MOVE, std::move(updates));
    }
    const Vec2 here = robot.base_pose.position();
    robot.base_pose.theta = wrap_angle(std::atan2(tpos.y - here.y, tpos.x - here.x));
}

void run_grasp(RolloutState& st, const Task& task, int prim, const double* th) {
    const PrimitiveSpec& p = task.policy.primitives[static_cast<size_t>(prim)];
    const Entity& target = resolve_target(st, p);
    if (!st.held.empty()) {
        throw DivergeSignal{DivergenceClass::COLLISION_DEADLOCK,
                            "gripper occupied before grasping " + target.id};
    }
    require_in_reach(st, target, "grasp target");

    const double eff_mass = target.mass * target.scale;
    const double limit = st.scene.robot.torque_limit * task.policy.impedance_scale;
    if (eff_mass > limit + 1e-9) {
        std::ostringstream msg;
        msg << target.id << " needs " << format_double(eff_mass)
            << " against limit " << format_double(limit);
        throw DivergeSignal{DivergenceClass::GRASP_TORQUE, msg.str()};
    }

    const double phi = th[0];
    const Vec2 base = st.scene.robot.base_pose.position();
    const Vec2 tpos = target.pose.position();
    const double dist = norm(tpos - base);
    const Vec2 anchor{tpos.x + dist * std::cos(phi) + task.policy.grasp_offset.x,
                      tpos.y + dist * std::sin(phi) + task.policy.grasp_offset.y};
    for (const auto& [id, e] : st.scene.entities) {
        if (id == target.id || id == st.held) continue;
        if (segment_intersects(e.shape, e.pose, e.scale, anchor, tpos, 0.01)) {
            throw DivergeSignal{DivergenceClass::COLLISION_DEADLOCK,
                                "grasp approach to " + target.id + " occluded by " + id};
        }
    }

    st.held = target.id;
    Entity& grabbed = st.scene.get(target.id);
    grabbed.pose.x = base.x;
    grabbed.pose.y = base.y;
    commit_step(st, task.instruction, task.policy.horizon, prim, TraceEvent::GRASP,
                {{grabbed.id, grabbed.pose, std::nullopt}});
}

void run_place(RolloutState& st, const Task& task, int prim, const double* th) {
    const PrimitiveSpec& p = task.policy.primitives[static_cast<size_t>(prim)];
    const Entity& support = resolve_target(st, p);
    if (st.held.empty()) {
        throw DivergeSignal{DivergenceClass::COLLISION_DEADLOCK,
                            "empty gripper at placement on " + support.id};
    }
    require_in_reach(st, support, "placement support");

    Entity& item = st.scene.get(st.held);
    item.pose.x = support.pose.x + th[0];
    item.pose.y = support.pose.y + th[1];
    item.pose.theta = 0.0;
    const std::string placed = st.held;
    st.held.clear();
    commit_step(st, task.instruction, task.policy.horizon, prim, TraceEvent::PLACE,
                {{placed, item.pose, std::nullopt}});
}

void run_insert(RolloutState& st, const Task& task, int prim,
                const ExecutionConfig& config) {
    const PrimitiveSpec& p = task.policy.primitives[static_cast<size_t>(prim)];
    const Entity& container = resolve_target(st, p);
    if (st.held.empty()) {
        throw DivergeSignal{DivergenceClass::COLLISION_DEADLOCK,
                            "empty gripper at insertion into " + container.id};
    }
    require_in_reach(st, container, "insertion container");

    if ((container.has(Affordance::OPENABLE) || container.has(Affordance::SLIDABLE)) &&
        !container.joints.empty()) {
        const JointSpec& j = container.joints.front();
        const double frac = (j.value - j.lo) / (j.hi - j.lo);
        if (frac < 0.5) {
            throw DivergeSignal{DivergenceClass::COLLISION_DEADLOCK,
                                "container closed: " + container.id};
        }
    }
    if (!container.inner_shape) {
        throw DivergeSignal{DivergenceClass::INSERTION_TOLERANCE,
                            container.id + " has no cavity"};
    }
    if (!query_containment(st.scene, container.id, st.held,
                           config.insertion_clearance)) {
        throw DivergeSignal{DivergenceClass::INSERTION_TOLERANCE,
                            st.held + " cannot seat inside " + container.id};
    }

    Entity& item = st.scene.get(st.held);
    item.pose.x = container.pose.x;
    item.pose.y = container.pose.y;
    item.pose.theta = 0.0;
    const std::string inserted = st.held;
    st.held.clear();
    commit_step(st, task.instruction, task.policy.horizon, prim, TraceEvent::INSERT,
                {{inserted, item.pose, std::nullopt}});
}

void run_articulate(RolloutState& st, const Task& task, int prim, const double* th) {
    const PrimitiveSpec& p = task.policy.primitives[static_cast<size_t>(prim)];
    const Entity& target = resolve_target(st, p);
    require_in_reach(st, target, "articulation target");

    if (p.joint < 0 || p.joint >= static_cast<int>(target.joints.size())) {
        throw DivergeSignal{DivergenceClass::COLLISION_DEADLOCK,
                            "missing joint on " + target.id};
    }
    Entity& e = st.scene.get(target.id);
    JointSpec& j = e.joints[static_cast<size_t>(p.joint)];
    for (const auto& m : task.instruction.milestones) {
        if (m.kind == PredicateKind::JOINT_AT && m.entity == target.id &&
            m.joint == p.joint && std::abs(j.value - m.target) <= m.tol) {
            throw DivergeSignal{DivergenceClass::PRECONDITION_ALREADY_MET,
                                target.id + " joint already at its goal"};
        }
    }
    j.value = std::clamp(j.value + th[0], j.lo, j.hi);
    commit_step(st, task.instruction, task.policy.horizon, prim,
                TraceEvent::ARTICULATE,
                {{e.id, std::nullopt, std::make_pair(p.joint, j.value)}});
}

ExecutionTrace run_rollout(const Task& task, const ParamVector& theta,
                           const ExecutionConfig& config, std::uint64_t seed,
                           const ExecutionTrace* prior, const Checkpoint* from) {
    const PolicySpec& pol = task.policy;
    if (static_cast<int>(theta.size()) != pol.param_dimension()) {
        throw std::invalid_argument("theta size does not match the parameter layout");
    }
    if (!params_in_box(pol, theta)) {
        throw std::invalid_argument("theta outside the parameter box");
    }

    ExecutionTrace out;
    out.initial_scene = prior ? prior->initial_scene : task.scene;
    out.theta = theta;
    out.seed = seed;
    out.config_echo = execution_config_to_json(config);

    RolloutState st;
    int start_prim = 0;
    if (from) {
        st.scene = from->scene;
        st.held = from->held;
        st.steps_used = from->steps_used;
        start_prim = from->primitive_index;
        for (const auto& rec : prior->steps) {
            if (rec.step <= from->steps_used) st.steps.push_back(rec);
        }
        for (const auto& c : prior->checkpoints) {
            if (c.primitive_index < start_prim) st.checkpoints.push_back(c);
        }
        // prefix history is immutable; its satisfaction times are replayed,
        // then the (possibly repaired) resume state is swept once more
        ExecutionTrace prefix;
        prefix.initial_scene = prior->initial_scene;
        prefix.steps = st.steps;
        st.times = milestone_satisfaction_times(prefix, task.instruction);
        sweep_milestones(st, task.instruction, st.steps_used);
    } else {
        st.scene = task.scene;
        st.steps_used = 0;
        st.times.assign(task.instruction.milestones.size(), std::nullopt);
        sweep_milestones(st, task.instruction, 0);
    }

    // theta layout: primitive parameter blocks in declaration order
    std::vector<size_t> offset(pol.primitives.size() + 1, 0);
    for (size_t i = 0; i < pol.primitives.size(); ++i) {
        offset[i + 1] = offset[i] + pol.primitives[i].params.size();
    }

    const int n = static_cast<int>(pol.primitives.size());
    try {
        for (int k = start_prim; k < n; ++k) {
            Checkpoint cp;
            cp.primitive_index = k;
            cp.scene = st.scene;
            cp.held = st.held;
            cp.steps_used = st.steps_used;
            cp.milestone_times = st.times;
            st.checkpoints.push_back(std::move(cp));

            if (pol.skipped.count(k)) {
                commit_step(st, task.instruction, pol.horizon, k, TraceEvent::SKIP, {});
                continue;
            }
            const double* th = theta.data() + offset[static_cast<size_t>(k)];
            switch (pol.primitives[static_cast<size_t>(k)].kind) {
                case PrimitiveKind::NAVIGATE: run_navigate(st, task, k, th); break;
                case PrimitiveKind::GRASP: run_grasp(st, task, k, th); break;
                case PrimitiveKind::PLACE: run_place(st, task, k, th); break;
                case PrimitiveKind::INSERT: run_insert(st, task, k, config); break;
                case PrimitiveKind::ARTICULATE: run_articulate(st, task, k, th); break;
            }
        }

        out.steps = st.steps;
        out.checkpoints = st.checkpoints;
        out.milestone_times = st.times;
        out.steps_used = st.steps_used;

        bool satisfied = false;
        try {
            satisfied = eval_goal(out, task.instruction);
        } catch (const DanglingReference&) {
            satisfied = false;
        }
        if (satisfied) {
            out.outcome = TraceOutcome::SUCCESS;
        } else {
            out.outcome = TraceOutcome::DIVERGED;
            DivergenceReport rep;
            rep.cls = DivergenceClass::HORIZON_EXHAUSTED;
            rep.primitive_index = n > 0 ? n - 1 : 0;
            rep.step = st.steps_used;
            rep.detail = "milestones unmet at rollout end";
            out.divergence = rep;
        }
    } catch (const DivergeSignal& sig) {
        out.steps = st.steps;
        out.checkpoints = st.checkpoints;
        out.milestone_times = st.times;
        out.steps_used = st.steps_used;
        out.outcome = TraceOutcome::DIVERGED;
        DivergenceReport rep;
        rep.cls = sig.cls;
        rep.primitive_index =
            st.checkpoints.empty() ? start_prim
                                   : st.checkpoints.back().primitive_index;
        rep.step = st.steps_used;
        rep.detail = sig.detail;
        out.divergence = rep;
    }
    return out;
}

// walks the trace states: visit(scene, held, t) at t = 0 and after each step
void for_each_state(
    const ExecutionTrace& trace,
    const std::function<void(const SceneGraph&, const std::string&, int)>& visit) {
    SceneGraph scene = trace.initial_scene;
    std::string held;
    visit(scene, held, 0);
    for (const auto& rec : trace.steps) {
        for (const auto& u : rec.updates) {
            auto it = scene.entities.find(u.id);
            if (it == scene.entities.end()) continue;
            if (u.pose) it->second.pose = *u.pose;
            if (u.joint) {
                auto& joints = it->second.joints;
                if (u.joint->first >= 0 &&
                    u.joint->first < static_cast<int>(joints.size())) {
                    joints[static_cast<size_t>(u.joint->first)].value =
                        u.joint->second;
                }
            }
        }
        scene.robot.base_pose = rec.robot_pose;
        held = rec.held;
        visit(scene, held, rec.step);
    }
}

double weight_of(const PolicySpec& pol, const std::string& name) {
    auto it = pol.shaping_weights.find(name);
    return it == pol.shaping_weights.end() ? 0.0 : it->second;
}

} // namespace

ExecutionTrace execute(const Task& task, const ParamVector& theta,
                       const ExecutionConfig& config, std::uint64_t seed) {
    return run_rollout(task, theta, config, seed, nullptr, nullptr);
}

ExecutionTrace execute_from(const Task& task, const ParamVector& theta,
                            const ExecutionConfig& config, std::uint64_t seed,
                            const ExecutionTrace& prior, const Checkpoint& from) {
    return run_rollout(task, theta, config, seed, &prior, &from);
}

double shaping_score(const Task& task, const ExecutionTrace& trace) {
    const double w_progress = weight_of(task.policy, "progress");
    const double w_distance = weight_of(task.policy, "distance");
    const double w_clearance = weight_of(task.policy, "clearance");

    int progress = 0;
    int first_unmet = -1;
    for (size_t i = 0; i < trace.milestone_times.size(); ++i) {
        if (trace.milestone_times[i]) {
            ++progress;
        } else if (first_unmet < 0) {
            first_unmet = static_cast<int>(i);
        }
    }
    double score = w_progress * progress;

    if (w_distance != 0.0 && first_unmet >= 0 &&
        first_unmet < static_cast<int>(task.instruction.milestones.size())) {
        const GoalPredicate& m =
            task.instruction.milestones[static_cast<size_t>(first_unmet)];
        const std::string& id = m.item.empty() ? m.entity : m.item;
        SceneGraph final_scene = trace.initial_scene;
        std::string held;
        for_each_state(trace, [&](const SceneGraph& s, const std::string& h, int) {
            final_scene = s;
            held = h;
        });
        if (final_scene.has(id)) {
            const Vec2 base = final_scene.robot.base_pose.position();
            score -= w_distance * norm(final_scene.get(id).pose.position() - base);
        }
    }

    if (w_clearance != 0.0) {
        double min_clear = std::numeric_limits<double>::infinity();
        for_each_state(trace, [&](const SceneGraph& s, const std::string& held, int) {
            const Shape probe = Disk{s.robot.base_radius};
            for (const auto& [id, e] : s.entities) {
                if (id == held) continue;
                const double sep =
                    -signed_overlap(probe, s.robot.base_pose, 1.0, e.shape, e.pose,
                                    e.scale);
                min_clear = std::min(min_clear, sep);
            }
        });
        if (std::isfinite(min_clear)) score += w_clearance * min_clear;
    }
    return score;
}

SolveResult solve(const Task& task, const ExecutionConfig& config,
                  std::uint64_t seed) {
    SolveResult res;
    const ParamVector nominal = nominal_params(task.policy);
    ExecutionTrace t0 = execute(task, nominal, config, seed);
    res.rollouts = 1;
    res.representative = t0.divergence;
    res.theta = nominal;
    if (t0.outcome == TraceOutcome::SUCCESS) {
        res.success = true;
        res.best_trace = std::move(t0);
        return res;
    }
    double best_score = shaping_score(task, t0);
    res.best_trace = std::move(t0);

    Rng rng(derive_seed(seed, 1));
    const int batch_size =
        std::max(1, static_cast<int>(std::lround(weight_of(task.policy, "progress"))));
    const int budget = std::max(1, task.policy.search_budget);

    for (int batch = 1; batch < budget; ++batch) {
        for (int j = 0; j < batch_size; ++j) {
            ParamVector theta;
            theta.reserve(static_cast<size_t>(task.policy.param_dimension()));
            for (const auto& prim : task.policy.primitives) {
                for (const auto& def : prim.params) {
                    theta.push_back(rng.uniform(def.lo, def.hi));
                }
            }
            ExecutionTrace t = execute(task, theta, config, seed);
            ++res.rollouts;
            if (t.outcome == TraceOutcome::SUCCESS) {
                res.success = true;
                res.best_trace = std::move(t);
                res.theta = std::move(theta);
                return res;
            }
            const double s = shaping_score(task, t);
            if (s > best_score) {
                best_score = s;
                res.best_trace = std::move(t);
                res.theta = std::move(theta);
            }
        }
    }
    return res;
}

} // namespace taskforge
