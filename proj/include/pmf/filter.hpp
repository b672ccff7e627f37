#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pmf/assignment.hpp"
#include "pmf/density.hpp"
#include "pmf/metric.hpp"
#include "pmf/sampling.hpp"

namespace pmf {

enum class SolverKind { Exact, Auction };

struct PmfConfig {
    KernelParams kernel;
    int max_iters = 10;
    bool stop_on_fixed_point = true;
    SolverKind solver = SolverKind::Auction;
    AuctionConfig auction;
    bool record_history = false;

    /// Per-iteration multiplier on sigma^2 (1 = width fixed across
    /// iterations, the default).
    double sigma_decay = 1.0;

    /// Multiscale: assignment solves per refinement level.
    int level_inner_iters = 1;
};

/// How the multiscale pipeline reacts to an infeasible vicinity mask.
struct WidenPolicy {
    enum class Kind { Fail, Widen };
    Kind kind = Kind::Fail;
    double step = 1.5;   // multiplies the vicinity factor per retry
    int max_retries = 3;

    static WidenPolicy fail() { return {}; }
    static WidenPolicy widen(double step = 1.5, int max_retries = 3) {
        return {Kind::Widen, step, max_retries};
    }
};

struct Widening {
    int level;      // refinement level whose mask was widened (1-based)
    double factor;  // vicinity factor that finally succeeded
};

struct PmfResult {
    Permutation final;
    std::vector<double> objective_trace;  // <P,F> per iteration (or per level)
    int iterations_run = 0;
    std::optional<std::vector<Permutation>> history;
    std::vector<Widening> widenings;
    double sigma_sq = 0.0;  // resolved width actually used
    SolveStats last_stats;
};

/// Row-wise argmax of a dense payoff (ties toward the smaller column).
/// Not necessarily a bijection -- this is the unconstrained estimator the
/// bijective filter improves on.
std::vector<int> pointwise_estimate(const Eigen::MatrixXd& payoff);

/// Iterated kernel density estimation + assignment on the full vertex
/// sets: build the dense payoff from the current matches (first round:
/// `init`, possibly sparse; afterwards the full match set {(i, p(i))}),
/// solve the assignment, repeat until the permutation repeats or
/// max_iters is reached.
PmfResult pmf_single_scale(const MetricSpace& space_x, const MetricSpace& space_y,
                           const MatchSet& init, const PmfConfig& cfg);

/// Coarse-to-fine variant: level 1 is solved like pmf_single_scale on
/// the coarsest samples; every following level solves one (optionally a
/// few) vicinity-masked sparse assignments seeded by the previous level.
/// Never assembles an n x n matrix.
PmfResult pmf_multiscale(const MetricSpace& space_x, const MetricSpace& space_y,
                         const SamplingHierarchy& hier_x, const SamplingHierarchy& hier_y,
                         const MatchSet& init, const PmfConfig& cfg,
                         const WidenPolicy& policy = WidenPolicy::fail());

/// One masked refinement step (exposed for tests and custom pipelines):
/// fine points of both shapes are matched under the vicinity mask induced
/// by the coarse correspondence coarse_x[k] -> coarse_y_image[k].
LapResult solve_constrained_level(const MetricSpace& space_x, const MetricSpace& space_y,
                                  std::span<const int> coarse_x,
                                  std::span<const int> coarse_y_image, double radius_x,
                                  double radius_y, std::span<const int> fine_x,
                                  std::span<const int> fine_y, const KernelParams& params,
                                  const AuctionConfig& auction, const WidenPolicy& policy,
                                  int level_index, std::vector<Widening>* widenings);

/// The one-dimensional three-point configuration {-b, 0, b} mapped to
/// {-a, 0, a+delta}: the filter moves the middle match by y_hat, which
/// the first-order analysis predicts as c * delta with c in (0, 1/2) for
/// a < sigma/sqrt(2), and the polyline through the filtered matches is
/// strictly shorter than the input one.
struct ThreePointResult {
    double y_hat;          // numeric maximizer of the local density
    double c_closed_form;  // first-order coefficient
    double length_input;     // L(input polyline)
    double length_filtered;  // L(filtered polyline)
};

ThreePointResult three_point_1d(double a, double b, double delta, double sigma);

}  // namespace pmf
