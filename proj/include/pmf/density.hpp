#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pmf/metric.hpp"

namespace pmf {

/// Width of the unnormalized Gaussian kernel exp(-d^2 / 2 sigma^2).
/// sigma^2 is specified relative to the target shape's area (default 2%)
/// and resolved against a concrete space before use, so the mesh's length
/// unit cancels.
struct KernelParams {
    double sigma_sq_rel = 0.02;
    std::optional<double> sigma_sq;  // resolved absolute value (length^2)

    /// Kernel factors below this are stored as exact zeros in sparse
    /// contexts. Dense matrices keep exact values.
    double sparse_floor = 1e-12;

    double resolved() const;
    KernelParams resolved_for(const MetricSpace& target) const;
};

double kernel_value(double d, const KernelParams& params);

/// The noisy input sample {(xi_k, eta_k)} with optional per-pair weights.
/// Pairs need not be distinct on either side.
struct MatchSet {
    std::vector<int> xi;
    std::vector<int> eta;
    std::vector<double> weights;  // empty = all ones

    int size() const { return static_cast<int>(xi.size()); }
    double weight(int k) const { return weights.empty() ? 1.0 : weights[k]; }
    void validate(int n_x, int n_y) const;

    /// Text format: one pair per line "xi eta [weight]", 0-based, '#'
    /// comments allowed.
    static MatchSet load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

/// Kernel matrix (n x m): entry (i,k) = K(d(x_i, anchors[k])). Columns
/// are computed from on-demand distance columns and may run in parallel.
Eigen::MatrixXd kernel_matrix(const MetricSpace& space, std::span<const int> anchors,
                              const KernelParams& params);

/// Rows restricted to `row_points` (positions in the space), same layout.
Eigen::MatrixXd kernel_matrix_rows(const MetricSpace& space, std::span<const int> row_points,
                                   std::span<const int> anchors, const KernelParams& params);

/// Dense payoff F[i][j] = sum_k w_k kx(i,k) ky(j,k) -- the Parzen density
/// sampled on the full vertex grid.
struct DensePayoff {
    Eigen::MatrixXd values;
    double sigma_sq = 0.0;
    int match_count = 0;
};

DensePayoff payoff_dense(const Eigen::MatrixXd& kx, const Eigen::MatrixXd& ky,
                         std::span<const double> weights = {});

/// Feasibility structure of the coarse-to-fine step: row s (fine point on
/// X) may match column t (fine point on Y) only if that respects the
/// coarse correspondence's vicinities. A pair is disallowed iff some
/// coarse anchor covers s (distance < radius_x) while t is farther than
/// vicinity_factor * radius_y from that anchor's image, or symmetrically
/// with the roles of the two shapes swapped.
struct WeightMask {
    int rows = 0;
    int cols = 0;
    std::vector<std::vector<int>> allowed;  // per row, sorted column lists
    std::size_t nnz() const;
};

WeightMask weight_mask(const MetricSpace& space_x, const MetricSpace& space_y,
                       std::span<const int> coarse_x, std::span<const int> coarse_y_image,
                       double radius_x, double radius_y, std::span<const int> fine_x,
                       std::span<const int> fine_y, double vicinity_factor = 2.0);

/// Sparse payoff in CSR form; stores sums only at mask-allowed pairs.
struct SparsePayoff {
    int rows = 0;
    int cols = 0;
    std::vector<int> row_offsets;
    std::vector<int> col_index;
    std::vector<double> values;
    double sigma_sq = 0.0;
    int match_count = 0;

    std::size_t nnz() const { return values.size(); }
};

/// From precomputed kernel matrices (small scales, tests).
SparsePayoff payoff_sparse(const Eigen::MatrixXd& kx, const Eigen::MatrixXd& ky,
                           std::span<const double> weights, const WeightMask& mask,
                           const KernelParams& params);

/// Column-streaming equivalent: never materializes kernel matrices; used
/// by the multiscale pipeline. Agrees with payoff_sparse up to the
/// kernel floor semantics (which both apply).
SparsePayoff payoff_sparse_streamed(const MetricSpace& space_x, const MetricSpace& space_y,
                                    std::span<const int> anchors_x,
                                    std::span<const int> anchors_y,
                                    std::span<const double> weights,
                                    std::span<const int> fine_x, std::span<const int> fine_y,
                                    const WeightMask& mask, const KernelParams& params);

}  // namespace pmf
