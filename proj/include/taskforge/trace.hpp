#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "taskforge/scene.hpp"

namespace taskforge {

enum class DivergenceClass {
    COLLISION_DEADLOCK,
    GRASP_TORQUE,
    INSERTION_TOLERANCE,
    HORIZON_EXHAUSTED,
    PRECONDITION_ALREADY_MET,
    PLANNER_NO_PATH,
};

std::string to_string(DivergenceClass c);
DivergenceClass divergence_from_string(const std::string& s);

struct DivergenceReport {
    DivergenceClass cls = DivergenceClass::COLLISION_DEADLOCK;
    int primitive_index = -1;
    int step = -1;
    std::string detail;
};

enum class TraceEvent { MOVE, GRASP, PLACE, INSERT, ARTICULATE, SKIP };

std::string to_string(TraceEvent e);
TraceEvent trace_event_from_string(const std::string& s);

struct EntityUpdate {
    std::string id;
    std::optional<Pose2> pose;
    std::optional<std::pair<int, double>> joint; // index, new value
};

struct StepRecord {
    int step = 0;            // 1-based; 0 is the initial state
    int primitive_index = 0;
    TraceEvent event = TraceEvent::MOVE;
    Pose2 robot_pose;
    std::string held;        // empty when the gripper is free
    std::vector<EntityUpdate> updates;
};

// Snapshot taken at a primitive boundary; enough state to resume.
struct Checkpoint {
    int primitive_index = 0; // next primitive to run
    SceneGraph scene;        // includes robot pose
    std::string held;
    int steps_used = 0;
    std::vector<std::optional<int>> milestone_times;
};

enum class TraceOutcome { SUCCESS, DIVERGED };

struct ExecutionTrace {
    SceneGraph initial_scene;
    std::vector<double> theta;
    std::uint64_t seed = 0;
    Json config_echo;
    std::vector<StepRecord> steps;
    TraceOutcome outcome = TraceOutcome::DIVERGED;
    std::optional<DivergenceReport> divergence;
    std::vector<std::optional<int>> milestone_times;
    int steps_used = 0;
    std::vector<Checkpoint> checkpoints;
};

// line-delimited JSON, header record first
std::string trace_to_jsonl(const ExecutionTrace& t);
ExecutionTrace trace_from_jsonl(const std::string& text);

} // namespace taskforge
