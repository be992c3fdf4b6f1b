#pragma once

#include <map>
#include <string>
#include <vector>

#include "taskforge/scene.hpp"

namespace taskforge {

// A catalog entry: everything an Entity carries except id, pose and
// current scale.
struct EntityTemplate {
    std::string asset;
    Shape shape = Box{0.1, 0.1};
    std::optional<Shape> inner_shape;
    double mass = 0.0;
    std::set<Affordance> affordances;
    std::vector<JointSpec> joints;
    double scale_lo = kMinScale; // admissible cumulative scale for this asset
    double scale_hi = kMaxScale;
};

// Task template descriptor. The structural recipe (milestones and
// primitive sequence) is keyed by name in the generator; the catalog
// carries the slot vocabulary so alternative catalogs can restrict it.
struct TaskTemplate {
    std::string name;
    std::map<std::string, std::vector<std::string>> slots; // role -> asset options
};

struct AssetCatalog {
    int schema_version = 1;
    std::map<std::string, EntityTemplate> assets;
    std::vector<TaskTemplate> templates;

    const EntityTemplate& asset(const std::string& id) const;
    bool has_asset(const std::string& id) const { return assets.count(id) > 0; }

    // Resolves a swap/spawn query: either an exact asset id, or
    // "affordance:A+B" meaning the lexicographically smallest asset
    // carrying every listed affordance. Throws UnknownAssetQuery.
    const EntityTemplate& resolve(const std::string& query) const;
};

// in-code default catalog (16 assets, 6 task templates)
const AssetCatalog& builtin_catalog();

Json entity_template_to_json(const EntityTemplate& t);
EntityTemplate entity_template_from_json(const Json& j);
Json catalog_to_json(const AssetCatalog& c);
AssetCatalog catalog_from_json(const Json& j);
AssetCatalog load_catalog(const std::string& path);

// instantiate an entity from a template
Entity make_entity(const EntityTemplate& t, const std::string& id, Pose2 pose,
                   double scale = 1.0);

} // namespace taskforge
