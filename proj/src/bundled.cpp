#include "taskforge/bundled.hpp"

#include <stdexcept>
#include <utility>

#include "taskforge/generator.hpp"
#include "taskforge/rng.hpp"

namespace taskforge {

namespace {

// window joint travel; strokes clamp to [0, kSpan]
constexpr double kSpan = 0.8;

PrimitiveSpec slide(const std::string& id, double lo, double hi) {
    PrimitiveSpec p;
    p.kind = PrimitiveKind::ARTICULATE;
    p.targets["target"] = id;
    p.joint = 0;
    p.params = {{"stroke", lo, hi}};
    return p;
}

// One or two prismatic vents inside the robot's initial reach, so the
// policy is pure articulation and every rollout outcome is decided by
// the stroke draw alone.
Task articulation_world(int vents) {
    const AssetCatalog catalog = builtin_catalog();
    const EntityTemplate& vent = catalog.asset("window");

    Task t;
    t.seed = 7;
    t.scene.robot.base_pose = {1.0, 1.0, 0.0};
    t.scene.entities.emplace("vent", make_entity(vent, "vent", Pose2{1.8, 1.0, 0.0}));
    if (vents > 1)
        t.scene.entities.emplace("vent_2", make_entity(vent, "vent_2", Pose2{1.0, 1.8, 0.0}));
    t.scene.validate();
    return t;
}

BundledTask make_gate_half() {
    BundledTask b;
    b.name = "gate_half";
    b.exact_mu = 0.5;
    b.task = articulation_world(1);
    b.task.instruction.text = "slide the vent open";
    // success iff stroke >= kSpan / 2: exactly half the box
    b.task.instruction.milestones = {GoalPredicate::joint_at("vent", 0, kSpan, kSpan / 2)};
    b.task.policy.primitives = {slide("vent", 0.0, kSpan)};
    return b;
}

BundledTask make_gate_quarter() {
    BundledTask b;
    b.name = "gate_quarter";
    b.exact_mu = 0.25;
    b.task = articulation_world(2);
    b.task.instruction.text = "slide both vents open";
    b.task.instruction.milestones = {GoalPredicate::joint_at("vent", 0, kSpan, kSpan / 2),
                                     GoalPredicate::joint_at("vent_2", 0, kSpan, kSpan / 2)};
    b.task.policy.primitives = {slide("vent", 0.0, kSpan), slide("vent_2", 0.0, kSpan)};
    return b;
}

BundledTask make_always_pass() {
    BundledTask b;
    b.name = "always_pass";
    b.exact_mu = 1.0;
    b.task = articulation_world(1);
    b.task.instruction.text = "pull the vent fully open";
    // clamp(stroke) lands in [kSpan/2, kSpan], always inside tolerance
    b.task.instruction.milestones = {GoalPredicate::joint_at("vent", 0, kSpan, kSpan / 2)};
    b.task.policy.primitives = {slide("vent", kSpan / 2, 1.5 * kSpan)};
    return b;
}

BundledTask make_always_fail() {
    BundledTask b;
    b.name = "always_fail";
    b.exact_mu = 0.0;
    b.task = articulation_world(1);
    b.task.instruction.text = "slide the vent beyond its track";
    // the goal sits past the joint limit, out of reach of any stroke
    b.task.instruction.milestones = {GoalPredicate::joint_at("vent", 0, 3.0 * kSpan, kSpan / 4)};
    b.task.policy.primitives = {slide("vent", 0.0, kSpan)};
    return b;
}

} // namespace

std::vector<BundledTask> bundled_mu_tasks() {
    std::vector<BundledTask> out;
    out.push_back(make_always_fail());
    out.push_back(make_always_pass());
    out.push_back(make_gate_half());
    out.push_back(make_gate_quarter());
    return out;
}

Task bundled_task(const std::string& name) {
    for (BundledTask& b : bundled_mu_tasks())
        if (b.name == name) return std::move(b.task);
    throw std::out_of_range("no bundled task named " + name);
}

std::vector<std::string> diversity_corpus(const AssetCatalog& catalog, int n,
                                          std::uint64_t seed) {
    if (n < 0) throw std::invalid_argument("corpus size must be >= 0");
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i));
        for (int attempt = 0;; ++attempt) {
            try {
                out.push_back(sample_task(catalog, s).instruction.text);
                break;
            } catch (const GenerationFailure&) {
                if (attempt >= 16) throw;
                s = derive_seed(s, 0xD1CE);
            }
        }
    }
    return out;
}

} // namespace taskforge
