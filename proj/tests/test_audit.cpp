#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "taskforge/audit.hpp"
#include "taskforge/generator.hpp"

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

// sealed square enclosure with edge-meeting walls (no interpenetration):
// long north/south slabs, short east/west fillers between them
void sealed_alcove(SceneGraph& scene, Vec2 c, double cavity, double t) {
    const double span = cavity + t;
    scene.entities["wall_n"] =
        basic("wall_n", Box{cavity + 2 * t, t}, {c.x, c.y + span, 0});
    scene.entities["wall_s"] =
        basic("wall_s", Box{cavity + 2 * t, t}, {c.x, c.y - span, 0});
    scene.entities["wall_e"] = basic("wall_e", Box{t, cavity}, {c.x + span, c.y, 0});
    scene.entities["wall_w"] = basic("wall_w", Box{t, cavity}, {c.x - span, c.y, 0});
}

std::multiset<DefectCode> codes(const StaticAuditReport& r) {
    std::multiset<DefectCode> out;
    for (const auto& d : r.diagnostics) out.insert(d.code);
    return out;
}

const std::vector<std::string> kCheckNames = {
    "reachability", "affordance_matching", "physical_plausibility",
    "morphological_compatibility"};

} // namespace

TEST_CASE("clean sampled tasks audit clean") {
    const AssetCatalog& cat = builtin_catalog();
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
        const Task task = sample_clean_task(cat, seed);
        const StaticAuditReport r = check_static(task);
        CHECK(r.valid);
        CHECK(r.diagnostics.empty());
        REQUIRE(r.checks_run.size() == 4);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(r.checks_run[i].name == kCheckNames[i]);
            CHECK(r.checks_run[i].passed);
        }
        CHECK(static_validity_score(r) == doctest::Approx(1.0));
    }
}

TEST_CASE("every static defect is caught under its own code only") {
    const AssetCatalog& cat = builtin_catalog();
    const DefectCode statics[] = {
        DefectCode::DS1_AFFORDANCE_MISMATCH, DefectCode::DS2_MISSING_ASSET,
        DefectCode::DS3_PRECONDITION_CONFLICT, DefectCode::DG1_OUT_OF_REACH,
        DefectCode::DG2_INTERPENETRATION, DefectCode::DG3_MORPHOLOGICAL_MISMATCH};
    for (DefectCode code : statics) {
        for (std::uint64_t seed : {10ULL, 11ULL, 12ULL}) {
            const GeneratedTask g = sample_batch_task(cat, seed, code);
            REQUIRE(g.injected == code);
            const StaticAuditReport r = check_static(g.task);
            CHECK_FALSE(r.valid);
            REQUIRE_FALSE(r.diagnostics.empty());
            for (const auto& d : r.diagnostics) {
                CHECK(d.code == code);
                CHECK(d.category == category_of(code));
                CHECK_FALSE(d.subjects.empty());
            }
        }
    }
}

TEST_CASE("dynamic defects are invisible to the static audit") {
    const AssetCatalog& cat = builtin_catalog();
    const DefectCode dynamics[] = {
        DefectCode::DD1_OVER_MASS, DefectCode::DD2_TIGHT_TOLERANCE,
        DefectCode::DD3_BLOCKED_CORRIDOR, DefectCode::DD4_SHORT_HORIZON};
    for (DefectCode code : dynamics) {
        CHECK_FALSE(is_static_code(code));
        for (std::uint64_t seed : {20ULL, 21ULL}) {
            const GeneratedTask g = sample_batch_task(cat, seed, code);
            REQUIRE(g.injected == code);
            const StaticAuditReport r = check_static(g.task);
            CHECK(r.valid);
            CHECK(r.diagnostics.empty());
        }
    }
}

TEST_CASE("stacked geometric defects yield exactly two diagnostics") {
    // gem walled off (out of reach) and too big for the lockbox cavity
    SceneGraph scene;
    scene.robot.base_pose = {1.0, 1.0, 0.0};
    scene.entities["gem"] = basic("gem", Disk{0.04}, {3.0, 3.0, 0});
    sealed_alcove(scene, {3.0, 3.0}, 0.12, 0.45);
    Entity lockbox = basic("lockbox", Box{0.1, 0.1}, {1.0, 4.5, 0});
    lockbox.inner_shape = Box{0.03, 0.03};
    lockbox.affordances = {Affordance::CONTAINER};
    scene.entities["lockbox"] = lockbox;
    scene.validate();

    Task task;
    task.scene = scene;
    task.instruction.text = "the gem belongs in the lockbox";
    task.instruction.milestones = {GoalPredicate::inside("gem", "lockbox")};

    const StaticAuditReport r = check_static(task);
    CHECK_FALSE(r.valid);
    REQUIRE(r.diagnostics.size() == 2);
    // diagnostics come out in check order
    CHECK(r.diagnostics[0].code == DefectCode::DG1_OUT_OF_REACH);
    CHECK(r.diagnostics[0].subjects == std::vector<std::string>{"gem"});
    CHECK(r.diagnostics[1].code == DefectCode::DG3_MORPHOLOGICAL_MISMATCH);
    CHECK(static_validity_score(r) == doctest::Approx(0.5));
}

TEST_CASE("validity score counts passed checks") {
    // single failing check: heating goal aimed at a cold container
    SceneGraph scene;
    scene.robot.base_pose = {1.0, 1.0, 0.0};
    Entity coolbox = basic("coolbox", Box{0.25, 0.25}, {2.0, 2.0, 0});
    coolbox.inner_shape = Box{0.2, 0.2};
    coolbox.affordances = {Affordance::CONTAINER};
    scene.entities["coolbox"] = coolbox;
    Entity soup = basic("soup", Disk{0.06}, {4.0, 2.0, 0});
    soup.affordances = {Affordance::GRASPABLE};
    scene.entities["soup"] = soup;
    scene.validate();

    Task task;
    task.scene = scene;
    task.instruction.text = "heat the soup";
    task.instruction.milestones = {GoalPredicate::inside("soup", "coolbox")};

    const StaticAuditReport one = check_static(task);
    CHECK_FALSE(one.valid);
    REQUIRE(one.diagnostics.size() == 1);
    CHECK(one.diagnostics[0].code == DefectCode::DS1_AFFORDANCE_MISMATCH);
    CHECK(one.diagnostics[0].subjects == std::vector<std::string>{"coolbox"});
    CHECK(static_validity_score(one) == doctest::Approx(0.75));

    // all four checks failing floors the score
    Task wreck = task;
    // overlapping clutter pair
    wreck.scene.entities["crate_a"] = basic("crate_a", Box{0.2, 0.2}, {5.3, 4.5, 0});
    wreck.scene.entities["crate_b"] = basic("crate_b", Box{0.2, 0.2}, {5.4, 4.5, 0});
    // soup walled off and, scaled up, too big for the coolbox cavity
    sealed_alcove(wreck.scene, {4.0, 2.0}, 0.12, 0.45);
    wreck.scene.get("soup").scale = 4.0; // radius 0.24 > inner half width 0.2
    wreck.scene.validate();
    const StaticAuditReport all = check_static(wreck);
    CHECK_FALSE(all.valid);
    CHECK(static_validity_score(all) == doctest::Approx(0.0));
}

TEST_CASE("preset joint goals are flagged as precondition conflicts") {
    const AssetCatalog& cat = builtin_catalog();
    SceneGraph scene;
    scene.robot.base_pose = {1.0, 1.0, 0.0};
    scene.entities["door"] = make_entity(cat.asset("door"), "door", {3.0, 3.0, 0});
    const JointSpec j = scene.get("door").joints[0];
    const double target = j.lo + 0.8 * (j.hi - j.lo);
    scene.get("door").joints[0].value = target; // already open
    scene.validate();

    Task task;
    task.scene = scene;
    task.instruction.text = "swing the door open";
    task.instruction.milestones = {GoalPredicate::joint_at("door", 0, target, 0.1)};
    PrimitiveSpec art;
    art.kind = PrimitiveKind::ARTICULATE;
    art.targets["target"] = "door";
    art.params = {{"stroke", 0.0, j.hi - j.lo}};
    task.policy.primitives = {art};

    const StaticAuditReport r = check_static(task);
    CHECK_FALSE(r.valid);
    REQUIRE(r.diagnostics.size() == 1);
    CHECK(r.diagnostics[0].code == DefectCode::DS3_PRECONDITION_CONFLICT);
    CHECK_FALSE(r.check_passed("physical_plausibility"));
    CHECK(r.check_passed("reachability"));
}

TEST_CASE("missing referenced assets are reported as D-S2") {
    SceneGraph scene;
    scene.robot.base_pose = {1.0, 1.0, 0.0};
    Entity crate = basic("crate", Box{0.2, 0.2}, {3.0, 3.0, 0});
    crate.affordances = {Affordance::SUPPORT};
    scene.entities["crate"] = crate;
    Task task;
    task.scene = scene;
    task.instruction.text = "stack the phantom on the crate";
    task.instruction.milestones = {GoalPredicate::on("phantom", "crate")};
    const StaticAuditReport r = check_static(task);
    CHECK_FALSE(r.valid);
    REQUIRE(r.diagnostics.size() == 1);
    CHECK(r.diagnostics[0].code == DefectCode::DS2_MISSING_ASSET);
    CHECK(r.diagnostics[0].subjects == std::vector<std::string>{"phantom"});
    CHECK_FALSE(r.check_passed("affordance_matching"));
}

TEST_CASE("supported and contained overlaps are allowed") {
    SceneGraph scene;
    scene.robot.base_pose = {1.0, 1.0, 0.0};
    Entity tray = basic("tray", Box{0.3, 0.3}, {3.0, 3.0, 0});
    tray.affordances = {Affordance::SUPPORT};
    scene.entities["tray"] = tray;
    scene.entities["mug"] = basic("mug", Disk{0.05}, {3.0, 3.0, 0});
    Task task;
    task.scene = scene;
    task.instruction.text = "leave the mug on the tray";
    task.instruction.milestones = {GoalPredicate::on("mug", "tray")};
    const StaticAuditReport ok = check_static(task);
    CHECK(ok.valid);
    // the same penetration without a support affordance is a defect
    Task bad = task;
    bad.scene.get("tray").affordances.clear();
    bad.instruction.milestones = {GoalPredicate::at_region("mug", {2, 2, 4, 4})};
    const StaticAuditReport r = check_static(bad);
    CHECK_FALSE(r.valid);
    REQUIRE(r.diagnostics.size() == 1);
    CHECK(r.diagnostics[0].code == DefectCode::DG2_INTERPENETRATION);
}

TEST_CASE("audit report json round trip") {
    const AssetCatalog& cat = builtin_catalog();
    const GeneratedTask g =
        sample_batch_task(cat, 33, DefectCode::DG1_OUT_OF_REACH);
    const StaticAuditReport r = check_static(g.task);
    const StaticAuditReport back = audit_report_from_json(audit_report_to_json(r));
    CHECK(back.valid == r.valid);
    CHECK(codes(back) == codes(r));
    REQUIRE(back.checks_run.size() == r.checks_run.size());
    for (std::size_t i = 0; i < r.checks_run.size(); ++i) {
        CHECK(back.checks_run[i].name == r.checks_run[i].name);
        CHECK(back.checks_run[i].passed == r.checks_run[i].passed);
    }
    CHECK(dump_canonical(audit_report_to_json(back)) ==
          dump_canonical(audit_report_to_json(r)));
}
