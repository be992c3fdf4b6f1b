#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "taskforge/catalog.hpp"
#include "taskforge/task.hpp"

namespace taskforge {

struct BundledTask {
    std::string name;
    Task task;
    double exact_mu = 0.0; // closed-form success fraction of the parameter box
};

// Tiny articulation worlds whose parameter boxes have closed-form
// success fractions (0, 1/4, 1/2, 1). They pin the Monte Carlo
// estimator and the grid scan to exact values.
std::vector<BundledTask> bundled_mu_tasks();

// Lookup by name; throws std::out_of_range for unknown names.
Task bundled_task(const std::string& name);

inline constexpr int kDiversityCorpusSize = 352;

// Instruction corpus for diversity scoring: entry i is drawn from a
// seed derived from (seed, i), so the corpus is stable across runs.
std::vector<std::string> diversity_corpus(const AssetCatalog& catalog, int n,
                                          std::uint64_t seed);

} // namespace taskforge
