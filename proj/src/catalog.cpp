#include "taskforge/catalog.hpp"

#include <sstream>

namespace taskforge {

const EntityTemplate& AssetCatalog::asset(const std::string& id) const {
    auto it = assets.find(id);
    if (it == assets.end()) throw UnknownAssetQuery("no such asset: " + id);
    return it->second;
}

const EntityTemplate& AssetCatalog::resolve(const std::string& query) const {
    constexpr const char* kPrefix = "affordance:";
    if (query.rfind(kPrefix, 0) != 0) return asset(query);

    std::set<Affordance> wanted;
    std::stringstream ss(query.substr(std::string(kPrefix).size()));
    std::string part;
    while (std::getline(ss, part, '+')) {
        if (!part.empty()) wanted.insert(affordance_from_string(part));
    }
    for (const auto& [id, tpl] : assets) { // map order = lexicographic
        bool ok = true;
        for (Affordance a : wanted) {
            if (!tpl.affordances.count(a)) { ok = false; break; }
        }
        if (ok) return tpl;
    }
    throw UnknownAssetQuery("no asset satisfies query: " + query);
}

Entity make_entity(const EntityTemplate& t, const std::string& id, Pose2 pose,
                   double scale) {
    Entity e;
    e.id = id;
    e.shape = t.shape;
    e.inner_shape = t.inner_shape;
    e.pose = pose;
    e.scale = scale;
    e.mass = t.mass;
    e.affordances = t.affordances;
    e.joints = t.joints;
    return e;
}

namespace {

EntityTemplate tpl(std::string asset, Shape shape, double mass,
                   std::set<Affordance> affs,
                   std::optional<Shape> inner = std::nullopt,
                   std::vector<JointSpec> joints = {}) {
    EntityTemplate t;
    t.asset = std::move(asset);
    t.shape = shape;
    t.inner_shape = inner;
    t.mass = mass;
    t.affordances = std::move(affs);
    t.joints = std::move(joints);
    return t;
}

AssetCatalog build_default() {
    using A = Affordance;
    AssetCatalog c;
    auto add = [&](EntityTemplate t) { c.assets[t.asset] = std::move(t); };

    add(tpl("microwave", Box{0.30, 0.22}, 12.0, {A::CONTAINER, A::HEAT_SOURCE},
            Box{0.22, 0.15}));
    add(tpl("oven", Box{0.33, 0.28}, 25.0, {A::CONTAINER, A::HEAT_SOURCE},
            Box{0.26, 0.21}));
    add(tpl("pot", Box{0.14, 0.12}, 1.2, {A::CONTAINER}, Box{0.11, 0.09}));
    add(tpl("basket", Box{0.16, 0.14}, 0.7, {A::CONTAINER}, Box{0.13, 0.11}));
    add(tpl("fridge", Box{0.35, 0.30}, 45.0, {A::CONTAINER}, Box{0.28, 0.24}));
    add(tpl("meal", Disk{0.08}, 0.5, {A::GRASPABLE}));
    add(tpl("egg", Disk{0.03}, 0.06, {A::GRASPABLE}));
    add(tpl("ingredient", Box{0.05, 0.04}, 0.3, {A::GRASPABLE}));
    add(tpl("crate", Box{0.18, 0.18}, 2.0, {A::GRASPABLE}));
    add(tpl("door", Box{0.45, 0.05}, 9.0, {A::OPENABLE}, std::nullopt,
            {{JointKind::REVOLUTE, 0.0, 1.5708, 0.0}}));
    add(tpl("window", Box{0.50, 0.04}, 6.0, {A::SLIDABLE}, std::nullopt,
            {{JointKind::PRISMATIC, 0.0, 0.8, 0.0}}));
    add(tpl("table", Box{0.50, 0.35}, 22.0, {A::SUPPORT}));
    add(tpl("shelf", Box{0.40, 0.12}, 16.0, {A::SUPPORT}));
    add(tpl("drawer", Box{0.25, 0.18}, 7.0, {A::CONTAINER, A::SLIDABLE},
            Box{0.20, 0.13}, {{JointKind::PRISMATIC, 0.0, 0.4, 0.0}}));
    add(tpl("stove", Box{0.30, 0.30}, 30.0, {A::HEAT_SOURCE, A::SUPPORT}));
    add(tpl("wall", Box{0.50, 0.08}, 100.0, {}));

    c.templates = {
        {"heat_food",
         {{"appliance", {"microwave", "oven"}}, {"food", {"meal", "egg"}}}},
        {"insert_item",
         {{"container", {"pot", "basket"}}, {"item", {"egg", "ingredient"}}}},
        {"open_door", {{"door", {"door"}}}},
        {"slide_window", {{"panel", {"window"}}}},
        {"pick_place",
         {{"item", {"meal", "crate", "ingredient", "egg"}},
          {"surface", {"table", "shelf"}}}},
        {"stock_drawer",
         {{"drawer", {"drawer"}}, {"item", {"egg", "ingredient"}}}},
    };
    return c;
}

} // namespace

const AssetCatalog& builtin_catalog() {
    static const AssetCatalog c = build_default();
    return c;
}

Json entity_template_to_json(const EntityTemplate& t) {
    Json a;
    a["id"] = t.asset;
    a["shape"] = shape_to_json(t.shape);
    if (t.inner_shape) a["inner_shape"] = shape_to_json(*t.inner_shape);
    a["mass"] = t.mass;
    Json affs = Json::array();
    for (Affordance af : t.affordances) affs.push_back(to_string(af));
    a["affordances"] = affs;
    Json joints = Json::array();
    for (const auto& jt : t.joints) {
        joints.push_back({{"kind", jt.kind == JointKind::REVOLUTE ? "revolute"
                                                                  : "prismatic"},
                          {"lo", jt.lo},
                          {"hi", jt.hi},
                          {"value", jt.value}});
    }
    a["joints"] = joints;
    a["scale_bounds"] = Json::array({t.scale_lo, t.scale_hi});
    return a;
}

EntityTemplate entity_template_from_json(const Json& j) {
    EntityTemplate t;
    t.asset = j.at("id").get<std::string>();
    t.shape = shape_from_json(j.at("shape"));
    if (j.contains("inner_shape")) t.inner_shape = shape_from_json(j.at("inner_shape"));
    t.mass = j.at("mass").get<double>();
    for (const auto& af : j.at("affordances")) {
        t.affordances.insert(affordance_from_string(af.get<std::string>()));
    }
    for (const auto& jt : j.at("joints")) {
        JointSpec js;
        js.kind = jt.at("kind").get<std::string>() == "revolute" ? JointKind::REVOLUTE
                                                                 : JointKind::PRISMATIC;
        js.lo = jt.at("lo").get<double>();
        js.hi = jt.at("hi").get<double>();
        js.value = jt.at("value").get<double>();
        t.joints.push_back(js);
    }
    if (j.contains("scale_bounds")) {
        t.scale_lo = j.at("scale_bounds").at(0).get<double>();
        t.scale_hi = j.at("scale_bounds").at(1).get<double>();
    }
    return t;
}

Json catalog_to_json(const AssetCatalog& c) {
    Json assets = Json::array();
    for (const auto& [id, t] : c.assets) {
        (void)id;
        assets.push_back(entity_template_to_json(t));
    }
    Json tpls = Json::array();
    for (const auto& t : c.templates) {
        Json slots;
        for (const auto& [role, options] : t.slots) slots[role] = options;
        tpls.push_back({{"name", t.name}, {"slots", slots}});
    }
    return {{"schema_version", c.schema_version},
            {"assets", assets},
            {"task_templates", tpls}};
}

AssetCatalog catalog_from_json(const Json& j) {
    AssetCatalog c;
    c.schema_version = j.at("schema_version").get<int>();
    for (const auto& a : j.at("assets")) {
        EntityTemplate t = entity_template_from_json(a);
        c.assets[t.asset] = std::move(t);
    }
    for (const auto& tj : j.at("task_templates")) {
        TaskTemplate t;
        t.name = tj.at("name").get<std::string>();
        for (auto it = tj.at("slots").begin(); it != tj.at("slots").end(); ++it) {
            t.slots[it.key()] = it.value().get<std::vector<std::string>>();
        }
        c.templates.push_back(std::move(t));
    }
    return c;
}

AssetCatalog load_catalog(const std::string& path) {
    return catalog_from_json(load_json_file(path));
}

} // namespace taskforge
