#pragma once

#include <string>
#include <map>

#include "taskforge/geo.hpp"
#include "taskforge/json_io.hpp"

namespace taskforge {

// Scene ops carry enough embedded data (resolved templates, poses) to
// replay without the catalog that produced them.
enum class RepairOpKind {
    SWAP_ASSET,
    SPAWN_ASSET,
    REMOVE_ASSET,
    SET_JOINT,
    TRANSFORM_POSE,
    RESCALE,
    REPLAN_PATH,
    ADJUST_GRASP,
    TUNE_IMPEDANCE,
    SET_HORIZON,
    SET_SEARCH_WEIGHTS,
    SKIP_SUBSTEP,
    RESET_ROBOT,
};

std::string to_string(RepairOpKind k);
RepairOpKind repair_op_kind_from_string(const std::string& s);

struct RepairOp {
    RepairOpKind kind = RepairOpKind::TRANSFORM_POSE;
    std::string target;                   // entity id (scene ops, RESCALE)
    std::string query;                    // SWAP/SPAWN asset query
    Json resolved;                        // embedded template for SWAP/SPAWN
    Pose2 pose;                           // SPAWN position, TRANSFORM delta
    int index = 0;                        // SET_JOINT joint, SKIP_SUBSTEP primitive
    double value = 0.0;                   // joint value / scale factor / multiplier
    std::map<std::string, double> weights; // SET_SEARCH_WEIGHTS

    // Swapping identity costs most, adding or deleting matter costs two,
    // reshaping in place costs one, solver retunes are free.
    int cost() const {
        switch (kind) {
            case RepairOpKind::SWAP_ASSET: return 3;
            case RepairOpKind::SPAWN_ASSET: return 2;
            case RepairOpKind::REMOVE_ASSET: return 2;
            case RepairOpKind::SET_JOINT: return 1;
            case RepairOpKind::TRANSFORM_POSE: return 1;
            case RepairOpKind::RESCALE: return 1;
            default: return 0;
        }
    }

    bool is_scene_op() const {
        switch (kind) {
            case RepairOpKind::SWAP_ASSET:
            case RepairOpKind::SPAWN_ASSET:
            case RepairOpKind::REMOVE_ASSET:
            case RepairOpKind::SET_JOINT:
            case RepairOpKind::TRANSFORM_POSE:
            case RepairOpKind::RESCALE: return true;
            default: return false;
        }
    }
};

Json repair_op_to_json(const RepairOp& op);
RepairOp repair_op_from_json(const Json& j);

} // namespace taskforge
