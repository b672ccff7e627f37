#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "pmf/geometry.hpp"

namespace pmf {

/// Finite metric space with on-demand distance columns. A full n-by-n
/// matrix is only ever assembled through full_distance_matrix(), which is
/// guarded by a size cap; everything else works column-wise so memory
/// stays O(n * columns-in-use).
///
/// Kinds:
///  - mesh_geodesic: shortest paths on the mesh edge graph weighted by
///    Euclidean edge lengths (an O(edge-length) overestimate of the exact
///    polyhedral geodesic; the Gaussian kernel downstream tolerates it).
///  - submesh: the mesh-geodesic metric restricted to a vertex subset;
///    paths still run through the full edge graph.
///  - circle: n uniformly spaced points, arc-length distance.
///  - explicit_matrix: a stored symmetric matrix.
class MetricSpace {
public:
    static MetricSpace mesh_geodesic(std::shared_ptr<const TriMesh> mesh);
    static MetricSpace submesh(std::shared_ptr<const TriMesh> mesh, std::vector<int> vertex_ids);
    static MetricSpace circle(double circumference, int n);
    static MetricSpace explicit_matrix(Eigen::MatrixXd distances,
                                       std::optional<double> area_hint = std::nullopt);

    /// Parse the explicit-matrix text format: first line n, then n rows.
    static MetricSpace load_explicit(const std::filesystem::path& path);

    int size() const { return n_; }

    /// All distances from `source`, cached. Repeated calls return the
    /// identical vector (bit-for-bit).
    std::shared_ptr<const std::vector<double>> distance_column(int source) const;

    /// Exact distances from `source` for all points within `radius`
    /// (inclusive), as (index, distance) pairs ordered by index. Values
    /// agree bit-for-bit with distance_column.
    std::vector<std::pair<int, double>> distances_within(int source, double radius) const;

    /// Assemble all columns. Throws SizeCapError when n exceeds the cap
    /// (default 4096) and points the caller at column-wise access.
    Eigen::MatrixXd full_distance_matrix() const;

    void set_matrix_cap(int cap) { matrix_cap_ = cap; }
    int matrix_cap() const { return matrix_cap_; }

    /// Cache capacity in columns. Also bounded by a byte budget so large
    /// spaces cannot exhaust memory through cache growth alone.
    void set_cache_capacity(std::size_t columns) const;

    /// Area used to resolve area-relative kernel widths: mesh area for
    /// (sub)mesh spaces, circumference^2/pi for circles (a circle of
    /// circumference C surrogates the sphere of the same great circle),
    /// the stored hint for explicit spaces.
    double area_surrogate() const;

    /// Original mesh vertex id of point i (identity except for submesh).
    int original_id(int i) const;

    /// Backing mesh if this space is mesh-derived.
    const TriMesh* mesh() const { return mesh_ ? mesh_.get() : nullptr; }

    bool is_graph_backed() const { return mesh_ != nullptr; }

private:
    MetricSpace() = default;
    void compute_column(int source, std::vector<double>& out) const;
    void validate_explicit() const;

    enum class Kind { MeshGeodesic, Submesh, Circle, Explicit };
    Kind kind_ = Kind::Explicit;
    int n_ = 0;
    int matrix_cap_ = 4096;

    std::shared_ptr<const TriMesh> mesh_;
    std::vector<int> vertex_ids_;       // submesh only
    std::vector<int> parent_to_local_;  // submesh only, -1 where unsampled
    double circumference_ = 0.0;
    Eigen::MatrixXd explicit_d_;
    std::optional<double> area_hint_;

    struct ColumnCache;
    std::shared_ptr<ColumnCache> cache_;  // shared so MetricSpace stays copyable
};

}  // namespace pmf
