#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "pmf/assignment.hpp"
#include "pmf/geometry.hpp"
#include "pmf/metric.hpp"

namespace pmf {

/// Per-vertex geodesic error d_Y(map[i], truth[i]) / diameter. The map
/// need not be bijective (noisy inputs rarely are); distances are fetched
/// column-wise at whichever of the two target sets has fewer distinct
/// vertices.
std::vector<double> geodesic_errors(std::span<const int> map, std::span<const int> truth,
                                    const MetricSpace& space_y, double diameter);

std::vector<double> geodesic_errors(const Permutation& perm, const Permutation& truth,
                                    const MetricSpace& space_y, double diameter);

/// Cumulative fraction of vertices with error <= threshold.
struct ErrorCurve {
    std::vector<double> thresholds;
    std::vector<double> fractions;
};

ErrorCurve error_curve(std::span<const double> errors, std::span<const double> thresholds);

/// 0 to 0.25 in steps of 0.0025.
std::vector<double> default_thresholds();

/// Two-column CSV "threshold,fraction" with a header line.
void write_error_curve_csv(const ErrorCurve& curve, const std::filesystem::path& path);

/// Write mesh_y as ASCII PLY with per-vertex RGB: vertex j receives the
/// bounding-box-normalized coordinate color of mesh_x vertex perm^-1(j).
void color_transfer_export(const TriMesh& mesh_x, const TriMesh& mesh_y, const Permutation& perm,
                           const std::filesystem::path& path);

}  // namespace pmf
