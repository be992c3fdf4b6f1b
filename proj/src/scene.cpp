#include "taskforge/scene.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "taskforge/catalog.hpp"

namespace taskforge {

std::string to_string(Affordance a) {
    switch (a) {
    case Affordance::GRASPABLE: return "GRASPABLE";
    case Affordance::CONTAINER: return "CONTAINER";
    case Affordance::HEAT_SOURCE: return "HEAT_SOURCE";
    case Affordance::SUPPORT: return "SUPPORT";
    case Affordance::OPENABLE: return "OPENABLE";
    case Affordance::SLIDABLE: return "SLIDABLE";
    }
    throw std::runtime_error("bad affordance enum");
}

Affordance affordance_from_string(const std::string& s) {
    if (s == "GRASPABLE") return Affordance::GRASPABLE;
    if (s == "CONTAINER") return Affordance::CONTAINER;
    if (s == "HEAT_SOURCE") return Affordance::HEAT_SOURCE;
    if (s == "SUPPORT") return Affordance::SUPPORT;
    if (s == "OPENABLE") return Affordance::OPENABLE;
    if (s == "SLIDABLE") return Affordance::SLIDABLE;
    throw std::runtime_error("bad affordance name: " + s);
}

Rect Entity::inner_footprint() const {
    if (!inner_shape) throw NotAContainer(id);
    return footprint(*inner_shape, pose, scale);
}

const Entity& SceneGraph::get(const std::string& id) const {
    auto it = entities.find(id);
    if (it == entities.end()) throw UnknownEntity(id);
    return it->second;
}

Entity& SceneGraph::get(const std::string& id) {
    auto it = entities.find(id);
    if (it == entities.end()) throw UnknownEntity(id);
    return it->second;
}

void SceneGraph::validate() const {
    if (world_bounds.width() <= 0.0 || world_bounds.height() <= 0.0) {
        throw OutOfWorldBounds("degenerate world bounds");
    }
    if (!world_bounds.contains(robot.base_pose.position())) {
        throw OutOfWorldBounds("robot base outside world bounds");
    }
    if (robot.base_radius <= 0.0 || robot.reach <= 0.0 || robot.torque_limit <= 0.0) {
        throw std::runtime_error("robot parameters must be positive");
    }
    for (const auto& [id, e] : entities) {
        if (id != e.id) throw std::runtime_error("entity key/id mismatch: " + id);
        if (id.empty()) throw std::runtime_error("empty entity id");
        if (!world_bounds.contains(e.pose.position())) {
            throw OutOfWorldBounds("entity pose outside world bounds: " + id);
        }
        if (e.scale <= 0.0) throw ScaleOutOfBounds("non-positive scale: " + id);
        if (e.mass < 0.0) throw std::runtime_error("negative mass: " + id);
        if (e.inner_shape.has_value() != e.has(Affordance::CONTAINER)) {
            throw std::runtime_error("inner cavity must pair with CONTAINER: " + id);
        }
        if (e.inner_shape) {
            if (extent_x(*e.inner_shape) > extent_x(e.shape) ||
                extent_y(*e.inner_shape) > extent_y(e.shape)) {
                throw std::runtime_error("inner cavity exceeds outer shape: " + id);
            }
        }
        for (const auto& jt : e.joints) {
            if (!(jt.lo < jt.hi)) throw JointOutOfRange("joint range inverted: " + id);
            if (jt.value < jt.lo || jt.value > jt.hi) {
                throw JointOutOfRange("joint value outside range: " + id);
            }
        }
    }
}

double query_overlap(const SceneGraph& scene, const std::string& id_a,
                     const std::string& id_b) {
    const Entity& a = scene.get(id_a);
    const Entity& b = scene.get(id_b);
    return a.overlap_with(b);
}

bool disk_free(const SceneGraph& scene, Vec2 c, double radius,
               const std::set<std::string>& exclude) {
    const Rect& wb = scene.world_bounds;
    if (c.x < wb.min_x + radius || c.x > wb.max_x - radius ||
        c.y < wb.min_y + radius || c.y > wb.max_y - radius) {
        return false;
    }
    const Shape probe = Disk{radius};
    const Pose2 pose{c.x, c.y, 0.0};
    for (const auto& [id, e] : scene.entities) {
        if (exclude.count(id)) continue;
        if (signed_overlap(probe, pose, 1.0, e.shape, e.pose, e.scale) > 1e-9) {
            return false;
        }
    }
    return true;
}

ReachResult query_reach(const SceneGraph& scene, const std::string& target_id) {
    const Entity& target = scene.get(target_id);
    const Vec2 t = target.pose.position();
    const Rect& wb = scene.world_bounds;
    const double r = scene.robot.base_radius;
    const double reach = scene.robot.reach;

    // lattice anchored at world min, lexicographic (x, y) scan
    const int nx = static_cast<int>(std::floor(wb.width() / kGridRes)) + 1;
    const int ny = static_cast<int>(std::floor(wb.height() / kGridRes)) + 1;
    for (int ix = 0; ix < nx; ++ix) {
        const double x = wb.min_x + ix * kGridRes;
        if (std::abs(x - t.x) > reach) continue;
        for (int iy = 0; iy < ny; ++iy) {
            const double y = wb.min_y + iy * kGridRes;
            const Vec2 c{x, y};
            if (norm(c - t) > reach) continue;
            if (!disk_free(scene, c, r)) continue;
            return {true, Pose2{x, y, wrap_angle(std::atan2(t.y - y, t.x - x))}};
        }
    }
    return {false, std::nullopt};
}

bool query_containment(const SceneGraph& scene, const std::string& container_id,
                       const std::string& item_id, double clearance) {
    const Entity& container = scene.get(container_id);
    const Entity& item = scene.get(item_id);
    if (!container.inner_shape) throw NotAContainer(container_id);
    const double iw = extent_x(*container.inner_shape) * container.scale;
    const double ih = extent_y(*container.inner_shape) * container.scale;
    const double ax = extent_x(item.shape) * item.scale;
    const double ay = extent_y(item.shape) * item.scale;
    const bool fit0 = ax + clearance <= iw && ay + clearance <= ih;
    const bool fit90 = ay + clearance <= iw && ax + clearance <= ih;
    return fit0 || fit90;
}

std::string asset_root(const std::string& entity_id) {
    const auto pos = entity_id.rfind('_');
    if (pos == std::string::npos || pos + 1 >= entity_id.size()) return entity_id;
    for (size_t i = pos + 1; i < entity_id.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(entity_id[i]))) return entity_id;
    }
    return entity_id.substr(0, pos);
}

namespace {

std::string unique_id(const SceneGraph& scene, const std::string& base) {
    if (!scene.has(base)) return base;
    for (int n = 2;; ++n) {
        std::string candidate = base + "_" + std::to_string(n);
        if (!scene.has(candidate)) return candidate;
    }
}

} // namespace

SceneGraph apply_mutation(const SceneGraph& scene, const SceneMutation& op,
                          const AssetCatalog& catalog) {
    SceneGraph out = scene;
    if (const auto* swap = std::get_if<SwapAsset>(&op)) {
        Entity& e = out.get(swap->target);
        const EntityTemplate& t = catalog.resolve(swap->query);
        // id, pose and scale survive the swap; everything else is
        // taken from the catalog entry
        e.shape = t.shape;
        e.inner_shape = t.inner_shape;
        e.mass = t.mass;
        e.affordances = t.affordances;
        e.joints = t.joints;
    } else if (const auto* spawn = std::get_if<SpawnAsset>(&op)) {
        const EntityTemplate& t = catalog.resolve(spawn->query);
        const std::string id = unique_id(out, t.asset);
        out.entities[id] = make_entity(t, id, spawn->pose);
    } else if (const auto* rem = std::get_if<RemoveAsset>(&op)) {
        if (!out.has(rem->target)) throw UnknownEntity(rem->target);
        out.entities.erase(rem->target);
    } else if (const auto* sj = std::get_if<SetJoint>(&op)) {
        Entity& e = out.get(sj->target);
        if (sj->index < 0 || sj->index >= static_cast<int>(e.joints.size())) {
            throw JointOutOfRange("no joint " + std::to_string(sj->index) + " on " +
                                  sj->target);
        }
        JointSpec& jt = e.joints[static_cast<size_t>(sj->index)];
        if (sj->value < jt.lo || sj->value > jt.hi) {
            throw JointOutOfRange("joint value outside range on " + sj->target);
        }
        jt.value = sj->value;
    } else if (const auto* tp = std::get_if<TransformPose>(&op)) {
        Entity& e = out.get(tp->target);
        e.pose.x += tp->delta.x;
        e.pose.y += tp->delta.y;
        e.pose.theta = wrap_angle(e.pose.theta + tp->delta.theta);
        if (!out.world_bounds.contains(e.pose.position())) {
            throw OutOfWorldBounds("transform leaves world bounds: " + tp->target);
        }
    } else if (const auto* rs = std::get_if<Rescale>(&op)) {
        Entity& e = out.get(rs->target);
        if (rs->factor < kMinScale || rs->factor > kMaxScale) {
            throw ScaleOutOfBounds("rescale factor outside bounds");
        }
        const double next = e.scale * rs->factor;
        // cumulative scale is bounded too, so chained shrink/grow
        // repairs cannot walk geometry out of the admissible range
        double lo = kMinScale, hi = kMaxScale;
        if (catalog.has_asset(asset_root(e.id))) {
            const EntityTemplate& t = catalog.asset(asset_root(e.id));
            lo = t.scale_lo;
            hi = t.scale_hi;
        }
        if (next < lo || next > hi) {
            throw ScaleOutOfBounds("cumulative scale outside bounds: " + rs->target);
        }
        e.scale = next;
    }
    out.validate();
    return out;
}

Json shape_to_json(const Shape& s) {
    if (const auto* b = std::get_if<Box>(&s)) {
        return {{"kind", "box"}, {"half_w", b->half_w}, {"half_h", b->half_h}};
    }
    return {{"kind", "disk"}, {"radius", std::get<Disk>(s).radius}};
}

Shape shape_from_json(const Json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "box") {
        return Box{j.at("half_w").get<double>(), j.at("half_h").get<double>()};
    }
    if (kind == "disk") return Disk{j.at("radius").get<double>()};
    throw std::runtime_error("bad shape kind: " + kind);
}

Json pose_to_json(const Pose2& p) {
    return {{"x", p.x}, {"y", p.y}, {"theta", p.theta}};
}

Pose2 pose_from_json(const Json& j) {
    return {j.at("x").get<double>(), j.at("y").get<double>(),
            j.at("theta").get<double>()};
}

Json entity_to_json(const Entity& e) {
    Json out;
    out["id"] = e.id;
    out["shape"] = shape_to_json(e.shape);
    if (e.inner_shape) out["inner_shape"] = shape_to_json(*e.inner_shape);
    out["pose"] = pose_to_json(e.pose);
    out["scale"] = e.scale;
    out["mass"] = e.mass;
    Json affs = Json::array();
    for (Affordance a : e.affordances) affs.push_back(to_string(a)); // set order
    out["affordances"] = affs;
    Json joints = Json::array();
    for (const auto& jt : e.joints) {
        joints.push_back({{"kind", jt.kind == JointKind::REVOLUTE ? "revolute"
                                                                  : "prismatic"},
                          {"lo", jt.lo},
                          {"hi", jt.hi},
                          {"value", jt.value}});
    }
    out["joints"] = joints;
    return out;
}

Entity entity_from_json(const Json& j) {
    Entity e;
    e.id = j.at("id").get<std::string>();
    e.shape = shape_from_json(j.at("shape"));
    if (j.contains("inner_shape")) e.inner_shape = shape_from_json(j.at("inner_shape"));
    e.pose = pose_from_json(j.at("pose"));
    e.scale = j.at("scale").get<double>();
    e.mass = j.at("mass").get<double>();
    for (const auto& a : j.at("affordances")) {
        e.affordances.insert(affordance_from_string(a.get<std::string>()));
    }
    for (const auto& jt : j.at("joints")) {
        JointSpec js;
        js.kind = jt.at("kind").get<std::string>() == "revolute" ? JointKind::REVOLUTE
                                                                 : JointKind::PRISMATIC;
        js.lo = jt.at("lo").get<double>();
        js.hi = jt.at("hi").get<double>();
        js.value = jt.at("value").get<double>();
        e.joints.push_back(js);
    }
    return e;
}

Json scene_to_json(const SceneGraph& scene) {
    Json out;
    out["world_bounds"] = {{"min_x", scene.world_bounds.min_x},
                           {"min_y", scene.world_bounds.min_y},
                           {"max_x", scene.world_bounds.max_x},
                           {"max_y", scene.world_bounds.max_y}};
    Json ents = Json::array();
    for (const auto& [id, e] : scene.entities) ents.push_back(entity_to_json(e));
    out["entities"] = ents; // map iteration keeps this sorted by id
    out["robot"] = {{"base_radius", scene.robot.base_radius},
                    {"reach", scene.robot.reach},
                    {"torque_limit", scene.robot.torque_limit},
                    {"base_pose", pose_to_json(scene.robot.base_pose)}};
    return out;
}

SceneGraph scene_from_json(const Json& j) {
    SceneGraph s;
    const Json& wb = j.at("world_bounds");
    s.world_bounds = {wb.at("min_x").get<double>(), wb.at("min_y").get<double>(),
                      wb.at("max_x").get<double>(), wb.at("max_y").get<double>()};
    for (const auto& ej : j.at("entities")) {
        Entity e = entity_from_json(ej);
        s.entities[e.id] = std::move(e);
    }
    const Json& r = j.at("robot");
    s.robot.base_radius = r.at("base_radius").get<double>();
    s.robot.reach = r.at("reach").get<double>();
    s.robot.torque_limit = r.at("torque_limit").get<double>();
    s.robot.base_pose = pose_from_json(r.at("base_pose"));
    s.validate();
    return s;
}

} // namespace taskforge
