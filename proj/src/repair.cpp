#include "taskforge/repair.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

namespace taskforge {

std::string to_string(RepairStatus s) {
    switch (s) {
        case RepairStatus::VALID: return "VALID";
        case RepairStatus::BUDGET_EXCEEDED: return "BUDGET_EXCEEDED";
        case RepairStatus::MAX_ITER_EXCEEDED: return "MAX_ITER_EXCEEDED";
        case RepairStatus::NO_CANDIDATE: return "NO_CANDIDATE";
    }
    throw std::logic_error("bad RepairStatus");
}

namespace {

// conservative two-decimal rounding: growth factors round up, shrink
// factors round down, so a rounded repair still clears its constraint
double ceil2(double v) { return std::ceil(v * 100.0) / 100.0; }
double floor2(double v) { return std::floor(v * 100.0) / 100.0; }

std::pair<double, double> scale_bounds_for(const AssetCatalog& catalog,
                                           const std::string& id) {
    const std::string root = asset_root(id);
    if (catalog.has_asset(root)) {
        const EntityTemplate& t = catalog.asset(root);
        return {t.scale_lo, t.scale_hi};
    }
    return {kMinScale, kMaxScale};
}

Json resolved_template(const AssetCatalog& catalog, const std::string& id) {
    const std::string root = asset_root(id);
    if (!catalog.has_asset(root)) return Json();
    return entity_template_to_json(catalog.asset(root));
}

bool footprint_in_bounds(const Rect& fp, const Rect& wb) {
    return fp.min_x >= wb.min_x && fp.min_y >= wb.min_y && fp.max_x <= wb.max_x &&
           fp.max_y <= wb.max_y;
}

bool placement_clear(const SceneGraph& scene, const Shape& shape, const Pose2& pose,
                     double scale, const std::string& ignore_id) {
    if (!footprint_in_bounds(footprint(shape, pose, scale), scene.world_bounds)) {
        return false;
    }
    for (const auto& [id, e] : scene.entities) {
        if (id == ignore_id) continue;
        if (signed_overlap(shape, pose, scale, e.shape, e.pose, e.scale) > 0.0) {
            return false;
        }
    }
    return true;
}

void synth_swap(const Task& task, const Diagnostic& d, const AssetCatalog& catalog,
                std::vector<RepairOp>& out) {
    const std::string& entity = d.subjects.at(0);
    if (!task.scene.has(entity)) return;
    const Entity& e = task.scene.get(entity);
    std::set<std::string> seen;
    for (const auto& req : affordance_requirements(task.instruction)) {
        if (req.entity != entity) continue;
        bool satisfied = false;
        for (const auto& option : req.options) {
            bool all = true;
            for (Affordance a : option) {
                if (!e.has(a)) all = false;
            }
            if (all) satisfied = true;
        }
        if (satisfied) continue;
        for (const auto& option : req.options) {
            std::vector<std::string> names;
            for (Affordance a : option) names.push_back(to_string(a));
            std::sort(names.begin(), names.end());
            std::string query = "affordance:";
            for (size_t i = 0; i < names.size(); ++i) {
                if (i > 0) query += "+";
                query += names[i];
            }
            if (!seen.insert(query).second) continue;
            try {
                const EntityTemplate& tpl = catalog.resolve(query);
                RepairOp op;
                op.kind = RepairOpKind::SWAP_ASSET;
                op.target = entity;
                op.query = query;
                op.resolved = entity_template_to_json(tpl);
                out.push_back(std::move(op));
            } catch (const UnknownAssetQuery&) {
            }
        }
    }
}

void synth_spawn(const Task& task, const Diagnostic& d, const AssetCatalog& catalog,
                 std::vector<RepairOp>& out) {
    const std::string& missing = d.subjects.at(0);
    const std::string root = asset_root(missing);
    if (!catalog.has_asset(root)) return;
    const EntityTemplate& tpl = catalog.asset(root);

    const Vec2 base = task.scene.robot.base_pose.position();
    const Rect& wb = task.scene.world_bounds;
    const double lo = 0.35;
    const double hi = task.scene.robot.reach - 0.1;

    // nearest admissible lattice cell, ties broken by coordinates
    struct Cell {
        double dist;
        double x, y;
    };
    std::vector<Cell> cells;
    const int nx = static_cast<int>(std::floor(wb.width() / kGridRes)) + 1;
    const int ny = static_cast<int>(std::floor(wb.height() / kGridRes)) + 1;
    for (int ix = 0; ix < nx; ++ix) {
        for (int iy = 0; iy < ny; ++iy) {
            const double x = wb.min_x + ix * kGridRes;
            const double y = wb.min_y + iy * kGridRes;
            const double dist = norm(Vec2{x, y} - base);
            if (dist < lo || dist > hi) continue;
            cells.push_back({dist, x, y});
        }
    }
    std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
        return std::tie(a.dist, a.x, a.y) < std::tie(b.dist, b.x, b.y);
    });
    for (const auto& c : cells) {
        const Pose2 pose{c.x, c.y, 0.0};
        if (!placement_clear(task.scene, tpl.shape, pose, 1.0, "")) continue;
        RepairOp op;
        op.kind = RepairOpKind::SPAWN_ASSET;
        op.query = root;
        op.resolved = entity_template_to_json(tpl);
        op.pose = pose;
        out.push_back(std::move(op));
        return;
    }
}

void synth_set_joint(const Task& task, const Diagnostic& d,
                     const AssetCatalog& catalog, std::vector<RepairOp>& out) {
    const std::string& entity = d.subjects.at(0);
    if (!task.scene.has(entity)) return;
    const Entity& e = task.scene.get(entity);
    for (const auto& m : task.instruction.milestones) {
        if (m.kind != PredicateKind::JOINT_AT || m.entity != entity) continue;
        if (m.joint < 0 || m.joint >= static_cast<int>(e.joints.size())) continue;
        const JointSpec& j = e.joints[static_cast<size_t>(m.joint)];
        if (std::abs(j.value - m.target) > m.tol) continue; // not the offender
        const double far =
            std::abs(j.lo - m.target) >= std::abs(j.hi - m.target) ? j.lo : j.hi;
        if (std::abs(far - m.target) <= m.tol) continue; // nowhere to retreat
        RepairOp op;
        op.kind = RepairOpKind::SET_JOINT;
        op.target = entity;
        op.index = m.joint;
        op.value = far;
        op.resolved = resolved_template(catalog, entity);
        out.push_back(std::move(op));
        return;
    }
}

// step the entity along `dir` in quarter-metre rungs until it sits
// clear, in bounds, and (when required) reachable again
// the NAVIGATE primitive that walks to `id`, if the policy has one
const PrimitiveSpec* navigate_to(const Task& task, const std::string& id) {
    for (const PrimitiveSpec& p : task.policy.primitives) {
        if (p.kind != PrimitiveKind::NAVIGATE) continue;
        const auto it = p.targets.find("target");
        if (it != p.targets.end() && it->second == id && !p.params.empty()) return &p;
    }
    return nullptr;
}

// The audit's reach oracle is local: a free standing disk can sit in a
// pocket the planner never enters. A reposition only helps execution
// when the nominal approach pose (box centre, the first probe of both
// the search and the rollout-repair loop) is free at the planner's
// dilation and walkable from the robot base; without a NAVIGATE
// primitive, any free cell in the default approach band will do.
// Cardinal BFS matches planner connectivity exactly: its diagonal
// moves require both adjacent cardinals free.
bool approach_connected(const Task& task, const SceneGraph& scene, const std::string& id) {
    const Rect& wb = scene.world_bounds;
    const Vec2 t = scene.get(id).pose.position();
    const double dilation = scene.robot.base_radius + task.policy.inflation_r;

    const int nx = static_cast<int>(std::floor(wb.width() / kGridRes)) + 1;
    const int ny = static_cast<int>(std::floor(wb.height() / kGridRes)) + 1;
    const auto cell_at = [&](int ix, int iy) {
        return Vec2{wb.min_x + ix * kGridRes, wb.min_y + iy * kGridRes};
    };
    const auto snap_x = [&](double v) {
        return std::clamp(static_cast<int>(std::lround((v - wb.min_x) / kGridRes)), 0, nx - 1);
    };
    const auto snap_y = [&](double v) {
        return std::clamp(static_cast<int>(std::lround((v - wb.min_y) / kGridRes)), 0, ny - 1);
    };

    int goal_x = -1, goal_y = -1;
    double band_lo = 0.2, band_hi = scene.robot.reach;
    if (const PrimitiveSpec* nav = navigate_to(task, id)) {
        const double d = 0.5 * (nav->params[0].lo + nav->params[0].hi);
        const double phi =
            nav->params.size() > 1 ? 0.5 * (nav->params[1].lo + nav->params[1].hi) : 0.0;
        goal_x = snap_x(t.x + d * std::cos(phi));
        goal_y = snap_y(t.y + d * std::sin(phi));
    }

    std::vector<char> free_cell(static_cast<std::size_t>(nx * ny), 0);
    for (int ix = 0; ix < nx; ++ix)
        for (int iy = 0; iy < ny; ++iy)
            free_cell[static_cast<std::size_t>(ix * ny + iy)] =
                disk_free(scene, cell_at(ix, iy), dilation) ? 1 : 0;

    const Vec2 base = scene.robot.base_pose.position();
    const int sx = snap_x(base.x), sy = snap_y(base.y);
    std::vector<char> seen(static_cast<std::size_t>(nx * ny), 0);
    std::vector<std::pair<int, int>> queue{{sx, sy}};
    seen[static_cast<std::size_t>(sx * ny + sy)] = 1; // start cell exempt, like the planner
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const auto [cx, cy] = queue[head];
        if (free_cell[static_cast<std::size_t>(cx * ny + cy)]) {
            if (goal_x >= 0) {
                if (cx == goal_x && cy == goal_y) return true;
            } else {
                const double d = norm(cell_at(cx, cy) - t);
                if (d >= band_lo && d <= band_hi) return true;
            }
        }
        const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
        for (int n = 0; n < 4; ++n) {
            const int mx = cx + dx[n], my = cy + dy[n];
            if (mx < 0 || my < 0 || mx >= nx || my >= ny) continue;
            const std::size_t at = static_cast<std::size_t>(mx * ny + my);
            if (seen[at] || !free_cell[at]) continue;
            seen[at] = 1;
            queue.emplace_back(mx, my);
        }
    }
    return false;
}

std::optional<Pose2> ladder_delta(const Task& task, const std::string& id, Vec2 dir,
                                  bool need_reach) {
    const Entity& e = task.scene.get(id);
    const double len = norm(dir);
    const Vec2 u = len > 1e-12 ? (1.0 / len) * dir : Vec2{1.0, 0.0};
    for (int k = 1; k <= 40; ++k) {
        const Vec2 delta{0.25 * k * u.x, 0.25 * k * u.y};
        Pose2 pose = e.pose;
        pose.x += delta.x;
        pose.y += delta.y;
        if (!placement_clear(task.scene, e.shape, pose, e.scale, id)) continue;
        if (need_reach) {
            SceneGraph trial = task.scene;
            trial.get(id).pose = pose;
            if (!query_reach(trial, id).reachable) continue;
            if (!approach_connected(task, trial, id)) continue;
        }
        return Pose2{delta.x, delta.y, 0.0};
    }
    return std::nullopt;
}

void synth_reach_transform(const Task& task, const Diagnostic& d,
                           std::vector<RepairOp>& out) {
    const std::string& id = d.subjects.at(0);
    if (!task.scene.has(id)) return;
    const Vec2 base = task.scene.robot.base_pose.position();
    const Vec2 toward = base - task.scene.get(id).pose.position();
    if (auto delta = ladder_delta(task, id, toward, true)) {
        RepairOp op;
        op.kind = RepairOpKind::TRANSFORM_POSE;
        op.target = id;
        op.pose = *delta;
        out.push_back(std::move(op));
    }
}

void synth_unblock(const Task& task, const Diagnostic& d, std::vector<RepairOp>& out) {
    const std::string& a = d.subjects.at(0);
    const std::string& b = d.subjects.at(1);
    const std::set<std::string> refs = referenced_ids(task);
    const std::string blocker = refs.count(a) == 0 ? a : (refs.count(b) == 0 ? b : a);
    const std::string other = blocker == a ? b : a;
    if (!task.scene.has(blocker)) return;

    if (task.scene.has(other)) {
        Vec2 away = task.scene.get(blocker).pose.position() -
                    task.scene.get(other).pose.position();
        if (norm(away) < 1e-12) {
            // coincident pair: retreat away from the robot so the moved
            // blocker also clears the nominal approach ray
            away = task.scene.get(blocker).pose.position() -
                   task.scene.robot.base_pose.position();
        }
        if (auto delta = ladder_delta(task, blocker, away, false)) {
            RepairOp op;
            op.kind = RepairOpKind::TRANSFORM_POSE;
            op.target = blocker;
            op.pose = *delta;
            out.push_back(std::move(op));
        }
    }
    RepairOp rem;
    rem.kind = RepairOpKind::REMOVE_ASSET;
    rem.target = blocker;
    out.push_back(std::move(rem));
}

void synth_grow_container(const Task& task, const Diagnostic& d,
                          const AssetCatalog& catalog, std::vector<RepairOp>& out) {
    const std::string& container_id = d.subjects.at(0);
    const std::string& item_id = d.subjects.at(1);
    if (!task.scene.has(container_id) || !task.scene.has(item_id)) return;
    const Entity& container = task.scene.get(container_id);
    const Entity& item = task.scene.get(item_id);
    if (!container.inner_shape) return;

    const double clearance = ExecutionConfig{}.insertion_clearance;
    const double iw = extent_x(*container.inner_shape) * container.scale;
    const double ih = extent_y(*container.inner_shape) * container.scale;
    const double ax = extent_x(item.shape) * item.scale;
    const double ay = extent_y(item.shape) * item.scale;
    auto needed = [&](double ext) { return std::max(ext * 1.05, ext + clearance); };
    const double f0 = std::max(needed(ax) / iw, needed(ay) / ih);
    const double f90 = std::max(needed(ay) / iw, needed(ax) / ih);
    const double factor = ceil2(std::min(f0, f90));
    if (!(factor > 1.0)) return; // already fits; not a size problem

    const auto [lo, hi] = scale_bounds_for(catalog, container_id);
    if (container.scale * factor > hi || container.scale * factor < lo) return;

    RepairOp op;
    op.kind = RepairOpKind::RESCALE;
    op.target = container_id;
    op.value = factor;
    op.resolved = resolved_template(catalog, container_id);
    out.push_back(std::move(op));
}

} // namespace

std::vector<RepairOp> synthesize_static_repair(const Task& task, const Diagnostic& d,
                                               const AssetCatalog& catalog) {
    std::vector<RepairOp> out;
    switch (d.code) {
        case DefectCode::DS1_AFFORDANCE_MISMATCH: synth_swap(task, d, catalog, out); break;
        case DefectCode::DS2_MISSING_ASSET: synth_spawn(task, d, catalog, out); break;
        case DefectCode::DS3_PRECONDITION_CONFLICT:
            synth_set_joint(task, d, catalog, out);
            break;
        case DefectCode::DG1_OUT_OF_REACH: synth_reach_transform(task, d, out); break;
        case DefectCode::DG2_INTERPENETRATION: synth_unblock(task, d, out); break;
        case DefectCode::DG3_MORPHOLOGICAL_MISMATCH:
            synth_grow_container(task, d, catalog, out);
            break;
        default: break; // dynamic codes have no static remedy
    }
    return out;
}

StaticLoopResult run_static_loop(const Task& task, const AssetCatalog& catalog,
                                 int max_iter) {
    StaticLoopResult res;
    res.task = task;
    int applied = 0;
    while (true) {
        res.report = check_static(res.task);
        res.iterations = applied;
        if (res.report.valid) {
            res.status = RepairStatus::VALID;
            return res;
        }
        if (applied >= max_iter) {
            res.status = RepairStatus::MAX_ITER_EXCEEDED;
            return res;
        }

        struct Candidate {
            RepairOp op;
            int diag_index;
            std::string subject;
        };
        std::vector<Candidate> pool;
        for (size_t i = 0; i < res.report.diagnostics.size(); ++i) {
            const Diagnostic& d = res.report.diagnostics[i];
            for (auto& op : synthesize_static_repair(res.task, d, catalog)) {
                pool.push_back({std::move(op), static_cast<int>(i),
                                d.subjects.empty() ? "" : d.subjects.front()});
            }
        }
        if (pool.empty()) {
            res.status = RepairStatus::NO_CANDIDATE;
            return res;
        }
        std::stable_sort(pool.begin(), pool.end(),
                         [](const Candidate& a, const Candidate& b) {
                             return std::make_tuple(a.op.cost(), a.diag_index,
                                                    std::cref(a.subject)) <
                                    std::make_tuple(b.op.cost(), b.diag_index,
                                                    std::cref(b.subject));
                         });

        const double score_now = static_validity_score(res.report);
        bool stepped = false;
        for (const auto& cand : pool) {
            Task trial = res.task;
            try {
                apply_repair_op(trial, cand.op);
            } catch (const std::runtime_error&) {
                continue; // inadmissible against scene invariants
            }
            if (static_validity_score(check_static(trial)) < score_now) continue;
            if (res.task.ledger.semantic_cost + cand.op.cost() >
                res.task.ledger.budget) {
                res.status = RepairStatus::BUDGET_EXCEEDED;
                return res;
            }
            res.task = std::move(trial);
            res.task.ledger.add(cand.op);
            ++applied;
            stepped = true;
            break;
        }
        if (!stepped) {
            res.status = RepairStatus::NO_CANDIDATE;
            return res;
        }
    }
}

namespace {

std::string primitive_target(const Task& task, int primitive_index) {
    if (primitive_index < 0 ||
        primitive_index >= static_cast<int>(task.policy.primitives.size())) {
        return "";
    }
    const auto& targets =
        task.policy.primitives[static_cast<size_t>(primitive_index)].targets;
    auto it = targets.find("target");
    return it == targets.end() ? "" : it->second;
}

// the item a failed insertion was carrying: the milestone item headed
// for this container, else the target of the last grasp before it
std::string inserted_item(const Task& task, int primitive_index,
                          const std::string& container) {
    for (const auto& m : task.instruction.milestones) {
        if (m.kind == PredicateKind::INSIDE && m.entity == container) return m.item;
    }
    for (int k = primitive_index - 1; k >= 0; --k) {
        if (task.policy.primitives[static_cast<size_t>(k)].kind ==
            PrimitiveKind::GRASP) {
            return primitive_target(task, k);
        }
    }
    return "";
}

} // namespace

std::vector<RepairOp> synthesize_dynamic_repair(const Task& task,
                                                const DivergenceReport& divergence,
                                                const AssetCatalog& catalog) {
    std::vector<RepairOp> out;
    switch (divergence.cls) {
        case DivergenceClass::COLLISION_DEADLOCK: {
            RepairOp replan;
            replan.kind = RepairOpKind::REPLAN_PATH;
            replan.value = 0.5;
            out.push_back(std::move(replan));
            RepairOp reset;
            reset.kind = RepairOpKind::RESET_ROBOT;
            out.push_back(std::move(reset));
            break;
        }
        case DivergenceClass::PLANNER_NO_PATH: {
            RepairOp replan;
            replan.kind = RepairOpKind::REPLAN_PATH;
            replan.value = 0.5;
            out.push_back(std::move(replan));
            break;
        }
        case DivergenceClass::GRASP_TORQUE: {
            if (task.policy.impedance_scale * 1.5 <= 2.0 + 1e-9) {
                RepairOp tune;
                tune.kind = RepairOpKind::TUNE_IMPEDANCE;
                tune.value = 1.5;
                out.push_back(std::move(tune));
                break;
            }
            const std::string item = primitive_target(task, divergence.primitive_index);
            if (item.empty() || !task.scene.has(item)) break;
            const auto [lo, hi] = scale_bounds_for(catalog, item);
            const double cur = task.scene.get(item).scale;
            if (cur * 0.8 < lo || cur * 0.8 > hi) break;
            RepairOp shrink;
            shrink.kind = RepairOpKind::RESCALE;
            shrink.target = item;
            shrink.value = 0.8;
            shrink.resolved = resolved_template(catalog, item);
            out.push_back(std::move(shrink));
            break;
        }
        case DivergenceClass::INSERTION_TOLERANCE: {
            const std::string container =
                primitive_target(task, divergence.primitive_index);
            if (container.empty() || !task.scene.has(container)) break;
            const Entity& c = task.scene.get(container);
            if (!c.inner_shape) break; // nothing to seat into
            const std::string item_id =
                inserted_item(task, divergence.primitive_index, container);
            if (item_id.empty() || !task.scene.has(item_id)) break;
            const Entity& item = task.scene.get(item_id);

            const double clearance = ExecutionConfig{}.insertion_clearance;
            const double iw = extent_x(*c.inner_shape) * c.scale;
            const double ih = extent_y(*c.inner_shape) * c.scale;
            const double ax = extent_x(item.shape) * item.scale;
            const double ay = extent_y(item.shape) * item.scale;
            const double f0 =
                std::min((iw - clearance) / ax, (ih - clearance) / ay);
            const double f90 =
                std::min((iw - clearance) / ay, (ih - clearance) / ax);
            double factor = floor2(std::max(f0, f90));
            if (factor >= 1.0) break; // not a size problem
            const auto [lo, hi] = scale_bounds_for(catalog, item_id);
            factor = std::max(factor, lo / item.scale);
            if (factor <= 0.0 || item.scale * factor > hi) break;
            RepairOp shrink;
            shrink.kind = RepairOpKind::RESCALE;
            shrink.target = item_id;
            shrink.value = factor;
            shrink.resolved = resolved_template(catalog, item_id);
            out.push_back(std::move(shrink));
            break;
        }
        case DivergenceClass::HORIZON_EXHAUSTED: {
            RepairOp grow;
            grow.kind = RepairOpKind::SET_HORIZON;
            grow.value = 2.0;
            out.push_back(std::move(grow));
            RepairOp weights;
            weights.kind = RepairOpKind::SET_SEARCH_WEIGHTS;
            weights.weights = task.policy.shaping_weights;
            weights.weights["progress"] =
                (weights.weights.count("progress") ? weights.weights["progress"]
                                                   : 0.0) *
                2.0;
            out.push_back(std::move(weights));
            break;
        }
        case DivergenceClass::PRECONDITION_ALREADY_MET: {
            RepairOp skip;
            skip.kind = RepairOpKind::SKIP_SUBSTEP;
            skip.index = divergence.primitive_index;
            out.push_back(std::move(skip));
            break;
        }
    }
    return out;
}

DynamicLoopResult run_dynamic_loop(const Task& task, const AssetCatalog& catalog,
                                   const ExecutionConfig& config, std::uint64_t seed,
                                   int max_rounds) {
    DynamicLoopResult res;
    res.task = task;
    const ParamVector theta = nominal_params(task.policy);
    res.trace = execute(res.task, theta, config, seed);

    std::map<int, int> rounds_at;
    int last_primitive = -1;
    DivergenceClass last_cls = DivergenceClass::COLLISION_DEADLOCK;
    int streak = 0;

    while (res.trace.outcome != TraceOutcome::SUCCESS) {
        const DivergenceReport div = *res.trace.divergence;
        const int k = div.primitive_index;
        if (rounds_at[k] >= max_rounds) {
            res.status = RepairStatus::MAX_ITER_EXCEEDED;
            return res;
        }
        if (k == last_primitive && div.cls == last_cls) {
            ++streak;
        } else {
            streak = 1;
            last_primitive = k;
            last_cls = div.cls;
        }

        // candidates are re-derived from the current task every round;
        // a persistent failure walks down the list instead of retrying
        // the same remedy forever
        const std::vector<RepairOp> cands =
            synthesize_dynamic_repair(res.task, div, catalog);
        if (cands.empty()) {
            res.status = RepairStatus::NO_CANDIDATE;
            return res;
        }
        std::optional<RepairOp> chosen;
        const size_t start = (static_cast<size_t>(streak) - 1) % cands.size();
        for (size_t tries = 0; tries < cands.size(); ++tries) {
            const RepairOp& op = cands[(start + tries) % cands.size()];
            if (op.kind == RepairOpKind::RESET_ROBOT) {
                chosen = op; // moves the resume point, not the task
                break;
            }
            Task trial = res.task;
            try {
                apply_repair_op(trial, op);
            } catch (const std::runtime_error&) {
                continue;
            }
            if (task_to_string(trial) != task_to_string(res.task)) {
                chosen = op;
                break;
            }
        }
        if (!chosen) {
            res.status = RepairStatus::NO_CANDIDATE;
            return res;
        }
        if (res.task.ledger.semantic_cost + chosen->cost() > res.task.ledger.budget) {
            res.status = RepairStatus::BUDGET_EXCEEDED;
            return res;
        }

        apply_repair_op(res.task, *chosen);
        res.task.ledger.add(*chosen);
        ++rounds_at[k];
        ++res.rounds;
        res.round_log.push_back({k, div.cls, *chosen});

        if (chosen->kind == RepairOpKind::RESET_ROBOT) {
            res.trace = execute(res.task, theta, config, seed);
            continue;
        }
        const Checkpoint* anchor = nullptr;
        for (auto it = res.trace.checkpoints.rbegin();
             it != res.trace.checkpoints.rend(); ++it) {
            if (it->primitive_index == k) {
                anchor = &*it;
                break;
            }
        }
        if (!anchor) { // divergence before any primitive ran; start over
            res.trace = execute(res.task, theta, config, seed);
            continue;
        }
        Checkpoint resume = *anchor;
        if (chosen->is_scene_op()) {
            // the world edit lands in the mid-episode state as well
            Task patch = res.task;
            patch.scene = resume.scene;
            apply_repair_op(patch, *chosen);
            resume.scene = std::move(patch.scene);
        }
        res.trace = execute_from(res.task, theta, config, seed, res.trace, resume);
    }
    res.status = RepairStatus::VALID;
    return res;
}

} // namespace taskforge
