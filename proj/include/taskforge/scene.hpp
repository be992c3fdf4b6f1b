#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "taskforge/geo.hpp"
#include "taskforge/json_io.hpp"

namespace taskforge {

struct AssetCatalog; // catalog.hpp

inline constexpr double kGridRes = 0.05;            // base-pose / planner lattice
inline constexpr double kMinScale = 0.25;           // rescale bounds, errors not clamps
inline constexpr double kMaxScale = 4.0;
inline constexpr double kInterpenetrationTol = 1e-3;

enum class Affordance { GRASPABLE, CONTAINER, HEAT_SOURCE, SUPPORT, OPENABLE, SLIDABLE };

std::string to_string(Affordance a);
Affordance affordance_from_string(const std::string& s);

enum class JointKind { REVOLUTE, PRISMATIC };

struct JointSpec {
    JointKind kind = JointKind::REVOLUTE;
    double lo = 0.0;
    double hi = 1.0; // lo < hi
    double value = 0.0; // within [lo, hi]
};

struct Entity {
    std::string id;
    Shape shape = Box{0.1, 0.1};
    std::optional<Shape> inner_shape; // present iff CONTAINER
    Pose2 pose;
    double scale = 1.0;
    double mass = 0.0;
    std::set<Affordance> affordances;
    std::vector<JointSpec> joints;

    bool has(Affordance a) const { return affordances.count(a) > 0; }
    double overlap_with(const Entity& other) const {
        return signed_overlap(shape, pose, scale, other.shape, other.pose, other.scale);
    }
    Rect outer_footprint() const { return footprint(shape, pose, scale); }
    // inner cavity footprint, centred on the entity pose
    Rect inner_footprint() const;
};

struct RobotModel {
    double base_radius = 0.15;
    double reach = 1.0;
    double torque_limit = 5.0;
    Pose2 base_pose;
};

struct SceneGraph {
    Rect world_bounds{0.0, 0.0, 6.0, 6.0};
    std::map<std::string, Entity> entities; // keyed & serialized by id
    RobotModel robot;

    const Entity& get(const std::string& id) const;
    Entity& get(const std::string& id);
    bool has(const std::string& id) const { return entities.count(id) > 0; }

    // throws on any structural invariant violation
    void validate() const;
};

struct UnknownEntity : std::runtime_error {
    explicit UnknownEntity(const std::string& id)
        : std::runtime_error("unknown entity: " + id) {}
};
struct JointOutOfRange : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ScaleOutOfBounds : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct OutOfWorldBounds : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NotAContainer : std::runtime_error {
    explicit NotAContainer(const std::string& id)
        : std::runtime_error("entity has no inner cavity: " + id) {}
};
struct UnknownAssetQuery : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// signed penetration depth between two scene entities
double query_overlap(const SceneGraph& scene, const std::string& id_a,
                     const std::string& id_b);

struct ReachResult {
    bool reachable = false;
    std::optional<Pose2> witness; // first admissible base pose in (x, y) order
};

// TRUE iff a collision-free base pose inside world_bounds exists from
// which the target centroid lies within robot.reach. Pure geometric
// existence on the 5 cm lattice; navigability is the executor's concern.
ReachResult query_reach(const SceneGraph& scene, const std::string& target_id);

// TRUE iff the item's effective extents + clearance fit inside the
// container's effective inner extents at orientation 0 deg or 90 deg.
bool query_containment(const SceneGraph& scene, const std::string& container_id,
                       const std::string& item_id, double clearance);

// true when a base disk of `radius` at `c` fits: inside bounds and not
// penetrating any entity (ids in `exclude` are ignored)
bool disk_free(const SceneGraph& scene, Vec2 c, double radius,
               const std::set<std::string>& exclude = {});

// Entity ids are "<asset>" or "<asset>_<n>"; returns the asset part.
std::string asset_root(const std::string& entity_id);

struct SwapAsset {
    std::string target;
    std::string query; // catalog asset id or "affordance:A+B" form
};
struct SpawnAsset {
    std::string query;
    Pose2 pose;
};
struct RemoveAsset {
    std::string target;
};
struct SetJoint {
    std::string target;
    int index = 0;
    double value = 0.0;
};
struct TransformPose {
    std::string target;
    Pose2 delta;
};
struct Rescale {
    std::string target;
    double factor = 1.0;
};

using SceneMutation =
    std::variant<SwapAsset, SpawnAsset, RemoveAsset, SetJoint, TransformPose, Rescale>;

// Pure: returns the mutated copy, re-validating all invariants.
// The catalog resolves SwapAsset / SpawnAsset queries.
SceneGraph apply_mutation(const SceneGraph& scene, const SceneMutation& op,
                          const AssetCatalog& catalog);

Json shape_to_json(const Shape& s);
Shape shape_from_json(const Json& j);
Json pose_to_json(const Pose2& p);
Pose2 pose_from_json(const Json& j);
Json entity_to_json(const Entity& e);
Entity entity_from_json(const Json& j);
Json scene_to_json(const SceneGraph& scene);
SceneGraph scene_from_json(const Json& j);

inline std::string scene_to_string(const SceneGraph& scene) {
    return dump_canonical(scene_to_json(scene));
}

} // namespace taskforge
