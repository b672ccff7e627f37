#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace pmf {

enum class MeshFormat { Off, PlyAscii };

/// Immutable triangle mesh. Vertex order is preserved exactly as loaded;
/// correspondence indices always refer to this order (0-based).
///
/// Construction validates: face indices in range, no repeated vertex
/// within a face, no zero-length edge, and a connected edge graph
/// (required for finite geodesic distances). Boundary is allowed.
class TriMesh {
public:
    TriMesh(std::vector<Eigen::Vector3d> vertices,
            std::vector<std::array<int, 3>> faces);

    int vertex_count() const { return static_cast<int>(vertices_.size()); }
    int face_count() const { return static_cast<int>(faces_.size()); }
    int edge_count() const { return static_cast<int>(edges_.size()); }

    const std::vector<Eigen::Vector3d>& vertices() const { return vertices_; }
    const std::vector<std::array<int, 3>>& faces() const { return faces_; }

    /// Unique undirected edges (i < j) with Euclidean lengths.
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    const std::vector<double>& edge_lengths() const { return edge_lengths_; }

    /// CSR adjacency over the edge graph.
    const std::vector<int>& adjacency_offsets() const { return adj_offsets_; }
    const std::vector<int>& adjacency_targets() const { return adj_targets_; }
    const std::vector<double>& adjacency_weights() const { return adj_weights_; }

private:
    std::vector<Eigen::Vector3d> vertices_;
    std::vector<std::array<int, 3>> faces_;
    std::vector<std::pair<int, int>> edges_;
    std::vector<double> edge_lengths_;
    std::vector<int> adj_offsets_;
    std::vector<int> adj_targets_;
    std::vector<double> adj_weights_;
};

/// Load an ASCII OFF or ASCII PLY mesh. The format is inferred from the
/// extension unless given explicitly. Binary PLY is rejected. Errors name
/// the offending line or element.
TriMesh load_mesh(const std::filesystem::path& path);
TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format);

/// Write a mesh so that load_mesh reproduces vertices and faces
/// bit-identically (doubles are printed with round-trip precision).
void write_mesh(const TriMesh& mesh, const std::filesystem::path& path, MeshFormat format);

/// Total surface area (sum of triangle areas via the cross product).
double mesh_area(const TriMesh& mesh);

}  // namespace pmf
