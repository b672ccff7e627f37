#pragma once

#include <filesystem>
#include <vector>

#include "pmf/metric.hpp"

namespace pmf {

/// Nested farthest-point samples. Level index lists are prefixes of one
/// greedy FPS run, so indices(level i) is a prefix of indices(level i+1);
/// radius(level i) is the covering radius of that level over the whole
/// space. Radii strictly decrease.
struct SamplingHierarchy {
    struct Level {
        std::vector<int> indices;
        double radius;
    };
    std::vector<Level> levels;
    int seed = 0;

    const Level& finest() const { return levels.back(); }
    const Level& coarsest() const { return levels.front(); }
};

/// Greedy farthest-point sampling starting at `seed`: each new sample
/// maximizes the distance to the current sample set, ties broken toward
/// the smallest index. Deterministic given (space, level_sizes, seed).
///
/// level_sizes must be strictly increasing, the last entry at most n.
SamplingHierarchy farthest_point_sampling(const MetricSpace& space,
                                          const std::vector<int>& level_sizes, int seed = 0);

/// Max pairwise distance over a farthest-point sample of the given size;
/// a lower bound on the true diameter, monotone in sample_count. Used for
/// error normalization.
double shape_diameter(const MetricSpace& space, int sample_count, int seed = 0);

/// The published six-scale schedule {1000, 2000, 4000, 8000, 16000, n},
/// clipped to n (entries >= n dropped, n appended).
std::vector<int> default_level_schedule(int n);

/// Text export: one line per level, "n_i r_i idx...".
void write_hierarchy(const SamplingHierarchy& h, const std::filesystem::path& path);
SamplingHierarchy load_hierarchy(const std::filesystem::path& path);

}  // namespace pmf
