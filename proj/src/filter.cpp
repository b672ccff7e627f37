#include "pmf/filter.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "pmf/errors.hpp"

namespace pmf {

std::vector<int> pointwise_estimate(const Eigen::MatrixXd& payoff) {
    std::vector<int> out(payoff.rows());
    for (Eigen::Index i = 0; i < payoff.rows(); ++i) {
        int best = 0;
        double best_v = payoff(i, 0);
        for (Eigen::Index j = 1; j < payoff.cols(); ++j)
            if (payoff(i, j) > best_v) {
                best_v = payoff(i, j);
                best = static_cast<int>(j);
            }
        out[i] = best;
    }
    return out;
}

namespace {

LapResult solve_dense(const Eigen::MatrixXd& f, const PmfConfig& cfg) {
    return cfg.solver == SolverKind::Exact ? lap_exact(f) : lap_auction(f, cfg.auction);
}

// If the match set is a complete bijection, return it as the incumbent
// so a fixed-point init stops after one iteration.
std::optional<Permutation> as_permutation(const MatchSet& init, int n) {
    if (init.size() != n) return std::nullopt;
    std::vector<int> fwd(n, -1);
    for (int k = 0; k < n; ++k) {
        if (fwd[init.xi[k]] != -1) return std::nullopt;
        fwd[init.xi[k]] = init.eta[k];
    }
    try {
        return Permutation(std::move(fwd));
    } catch (const ValidationError&) {
        return std::nullopt;
    }
}

// Core loop shared by the single-scale filter and the coarsest multiscale
// level. Rows/columns of the payoff are the points `points_x`/`points_y`
// of the ambient spaces; the first payoff uses `init` as anchors (ids in
// the ambient spaces), later ones use the full current match set.
PmfResult iterate_pmf(const MetricSpace& space_x, const MetricSpace& space_y,
                      std::span<const int> points_x, std::span<const int> points_y,
                      const MatchSet& init, const PmfConfig& cfg, const KernelParams& params0,
                      std::optional<Permutation> incumbent) {
    const int n = static_cast<int>(points_x.size());
    KernelParams params = params0;

    std::vector<int> anchors_x = init.xi, anchors_y = init.eta;
    std::vector<double> weights = init.weights;

    std::optional<Permutation> current;
    PmfResult result{Permutation::identity(n), {}, 0, std::nullopt, {}, params.resolved(), {}};
    if (cfg.record_history) result.history.emplace();

    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        const auto kx = kernel_matrix_rows(space_x, points_x, anchors_x, params);
        const auto ky = kernel_matrix_rows(space_y, points_y, anchors_y, params);
        const auto f = payoff_dense(kx, ky, weights);
        auto lap = solve_dense(f.values, cfg);
        result.objective_trace.push_back(lap.objective);
        result.last_stats = lap.stats;
        result.iterations_run = iter;
        if (cfg.record_history) result.history->push_back(lap.perm);

        const bool fixed_point =
            cfg.stop_on_fixed_point && incumbent && lap.perm == *incumbent;
        current = std::move(lap.perm);
        if (fixed_point) break;
        incumbent = current;

        // next round: the full match set {(i, p(i))} as anchors
        anchors_x.resize(n);
        anchors_y.resize(n);
        for (int i = 0; i < n; ++i) {
            anchors_x[i] = points_x[i];
            anchors_y[i] = points_y[(*current)(i)];
        }
        weights.clear();
        if (cfg.sigma_decay != 1.0) params.sigma_sq = params.resolved() * cfg.sigma_decay;
    }
    result.final = std::move(*current);
    result.sigma_sq = params.resolved();
    return result;
}

}  // namespace

PmfResult pmf_single_scale(const MetricSpace& space_x, const MetricSpace& space_y,
                           const MatchSet& init, const PmfConfig& cfg) {
    const int n = space_x.size();
    if (n != space_y.size())
        throw UsageError("pmf_single_scale: vertex counts differ (" + std::to_string(n) + " vs " +
                         std::to_string(space_y.size()) +
                         "); resample the larger shape to matching size first (see the resample "
                         "subcommand)");
    if (cfg.max_iters < 1) throw UsageError("max_iters must be >= 1");
    if (n > space_x.matrix_cap())
        throw SizeCapError("pmf_single_scale: n=" + std::to_string(n) +
                           " exceeds the dense size cap " + std::to_string(space_x.matrix_cap()) +
                           "; use the multiscale pipeline");
    init.validate(n, n);

    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    const auto params = cfg.kernel.resolved_for(space_y);
    return iterate_pmf(space_x, space_y, all, all, init, cfg, params, as_permutation(init, n));
}

namespace {

// Mask construction + masked solve with the widening retry loop. Returns
// the solve result together with the mask that made it feasible.
std::pair<LapResult, WeightMask> solve_level_with_widening(
    const MetricSpace& space_x, const MetricSpace& space_y, std::span<const int> coarse_x,
    std::span<const int> coarse_y_image, double radius_x, double radius_y,
    std::span<const int> fine_x, std::span<const int> fine_y, const KernelParams& params,
    const AuctionConfig& auction, const WidenPolicy& policy, int level_index,
    std::vector<Widening>* widenings) {
    double factor = 2.0;
    const int attempts = policy.kind == WidenPolicy::Kind::Widen ? policy.max_retries + 1 : 1;
    for (int attempt = 0;; ++attempt) {
        try {
            auto mask = weight_mask(space_x, space_y, coarse_x, coarse_y_image, radius_x,
                                    radius_y, fine_x, fine_y, factor);
            const auto f = payoff_sparse_streamed(space_x, space_y, coarse_x, coarse_y_image, {},
                                                  fine_x, fine_y, mask, params);
            auto result = lap_auction_sparse(f, auction);
            if (widenings && factor != 2.0) widenings->push_back({level_index, factor});
            return {std::move(result), std::move(mask)};
        } catch (const Error& e) {
            const bool recoverable = dynamic_cast<const InfeasibleMaskError*>(&e) ||
                                     dynamic_cast<const InfeasibleAssignmentError*>(&e);
            if (!recoverable || attempt + 1 >= attempts) throw;
            factor *= policy.step;
        }
    }
}

}  // namespace

LapResult solve_constrained_level(const MetricSpace& space_x, const MetricSpace& space_y,
                                  std::span<const int> coarse_x,
                                  std::span<const int> coarse_y_image, double radius_x,
                                  double radius_y, std::span<const int> fine_x,
                                  std::span<const int> fine_y, const KernelParams& params,
                                  const AuctionConfig& auction, const WidenPolicy& policy,
                                  int level_index, std::vector<Widening>* widenings) {
    return solve_level_with_widening(space_x, space_y, coarse_x, coarse_y_image, radius_x,
                                     radius_y, fine_x, fine_y, params, auction, policy,
                                     level_index, widenings)
        .first;
}

PmfResult pmf_multiscale(const MetricSpace& space_x, const MetricSpace& space_y,
                         const SamplingHierarchy& hier_x, const SamplingHierarchy& hier_y,
                         const MatchSet& init, const PmfConfig& cfg, const WidenPolicy& policy) {
    const int n = space_x.size();
    if (n != space_y.size())
        throw UsageError("pmf_multiscale: vertex counts differ (" + std::to_string(n) + " vs " +
                         std::to_string(space_y.size()) + ")");
    if (hier_x.levels.size() != hier_y.levels.size())
        throw UsageError("pmf_multiscale: hierarchies have different level counts");
    for (size_t i = 0; i < hier_x.levels.size(); ++i)
        if (hier_x.levels[i].indices.size() != hier_y.levels[i].indices.size())
            throw UsageError("pmf_multiscale: hierarchies disagree on level " + std::to_string(i) +
                             " size");
    if (static_cast<int>(hier_x.finest().indices.size()) != n)
        throw UsageError("pmf_multiscale: finest hierarchy level must cover all " +
                         std::to_string(n) + " points");
    init.validate(n, n);

    const auto params = cfg.kernel.resolved_for(space_y);
    const int n1 = static_cast<int>(hier_x.coarsest().indices.size());
    if (n1 > space_x.matrix_cap())
        throw SizeCapError("pmf_multiscale: coarsest level size " + std::to_string(n1) +
                           " exceeds the dense size cap " + std::to_string(space_x.matrix_cap()));

    PmfResult result{Permutation::identity(n), {}, 0, std::nullopt, {}, params.resolved(), {}};
    if (cfg.record_history) result.history.emplace();

    // Level 1: dense PMF restricted to the coarsest samples. The first
    // payoff anchors at the raw init matches (arbitrary vertices of the
    // ambient spaces); the iteration then continues on explicit
    // sub-metrics of the sample sets.
    const auto& level1_x = hier_x.coarsest().indices;
    const auto& level1_y = hier_y.coarsest().indices;
    Permutation current = [&] {
        const auto kx = kernel_matrix_rows(space_x, level1_x, init.xi, params);
        const auto ky = kernel_matrix_rows(space_y, level1_y, init.eta, params);
        const auto f = payoff_dense(kx, ky, init.weights);
        auto lap = cfg.solver == SolverKind::Exact ? lap_exact(f.values)
                                                   : lap_auction(f.values, cfg.auction);
        result.objective_trace.push_back(lap.objective);
        result.last_stats = lap.stats;
        return lap.perm;
    }();
    result.iterations_run = 1;

    if (cfg.max_iters > 1 && n1 > 1) {
        PmfConfig level_cfg = cfg;
        level_cfg.max_iters = cfg.max_iters - 1;
        level_cfg.record_history = false;
        MatchSet seed;
        seed.xi.resize(n1);
        seed.eta.resize(n1);
        for (int i = 0; i < n1; ++i) {
            seed.xi[i] = level1_x[i];
            seed.eta[i] = level1_y[current(i)];
        }
        auto sub = iterate_pmf(space_x, space_y, level1_x, level1_y, seed, level_cfg, params,
                               current);
        current = sub.final;
        result.objective_trace.insert(result.objective_trace.end(), sub.objective_trace.begin(),
                                      sub.objective_trace.end());
        result.iterations_run += sub.iterations_run;
        result.last_stats = sub.last_stats;
    }
    if (cfg.record_history) result.history->push_back(current);

    // Refinement levels: one masked sparse assignment per level.
    for (size_t level = 1; level < hier_x.levels.size(); ++level) {
        const auto& coarse_lx = hier_x.levels[level - 1];
        const auto& coarse_ly = hier_y.levels[level - 1];
        const auto& fine_x = hier_x.levels[level].indices;
        const auto& fine_y = hier_y.levels[level].indices;
        const int nc = static_cast<int>(coarse_lx.indices.size());

        std::vector<int> coarse_y_image(nc);
        for (int k = 0; k < nc; ++k) coarse_y_image[k] = coarse_ly.indices[current(k)];

        auto [lap, mask] = solve_level_with_widening(
            space_x, space_y, coarse_lx.indices, coarse_y_image, coarse_lx.radius,
            coarse_ly.radius, fine_x, fine_y, params, cfg.auction, policy,
            static_cast<int>(level), &result.widenings);

        for (int inner = 1; inner < cfg.level_inner_iters; ++inner) {
            // re-anchor the density at the full level-wide match set; the
            // mask stays the one induced by the coarse level
            const int nf = static_cast<int>(fine_x.size());
            std::vector<int> ax(nf), ay(nf);
            for (int s = 0; s < nf; ++s) {
                ax[s] = fine_x[s];
                ay[s] = fine_y[lap.perm(s)];
            }
            const auto f = payoff_sparse_streamed(space_x, space_y, ax, ay, {}, fine_x, fine_y,
                                                  mask, params);
            Permutation prev = lap.perm;
            lap = lap_auction_sparse(f, cfg.auction);
            if (lap.perm == prev) break;
        }

        result.objective_trace.push_back(lap.objective);
        result.last_stats = lap.stats;
        result.iterations_run += 1;
        current = std::move(lap.perm);
        if (cfg.record_history) result.history->push_back(current);
    }

    // map sample positions back to original vertex ids
    const auto& finest_x = hier_x.finest().indices;
    const auto& finest_y = hier_y.finest().indices;
    std::vector<int> fwd(n, -1);
    for (int s = 0; s < n; ++s) fwd[finest_x[s]] = finest_y[current(s)];
    result.final = Permutation(std::move(fwd));
    return result;
}

namespace {

double golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                          double tol) {
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - invphi * (hi - lo);
    double x2 = lo + invphi * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    while (hi - lo > tol) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - invphi * (hi - lo);
            f1 = f(x1);
        }
    }
    return (lo + hi) / 2.0;
}

}  // namespace

ThreePointResult three_point_1d(double a, double b, double delta, double sigma) {
    if (!(a > 0.0) || !(b > 0.0) || !(sigma > 0.0))
        throw UsageError("three_point_1d: a, b, sigma must be positive");
    const double s2 = sigma * sigma;
    const auto kernel = [&](double d) { return std::exp(-d * d / (2.0 * s2)); };
    const auto h = [&](double y) {
        return kernel(y) + kernel(b) * (kernel(y + a) + kernel(y - a - delta));
    };

    double y_hat = 0.0;
    if (delta != 0.0) {
        const double lo = -a / 2.0, hi = a / 2.0;
        constexpr double tol = 1e-10;
        y_hat = golden_section_max(h, lo, hi, tol);
        const double margin = 8.0 * tol + (hi - lo) * 1e-9;
        if (y_hat - lo < margin || hi - y_hat < margin || h(y_hat) <= std::max(h(lo), h(hi)))
            throw SolverError(
                "three_point_1d: maximizer not bracketed inside [-a/2, a/2]; parameters are "
                "outside the small-perturbation regime");
    }

    // K''(d) = (d^2 - sigma^2)/sigma^4 * K(d)
    const double kpp0 = -1.0 / s2;
    const double kppa = (a * a - s2) / (s2 * s2) * kernel(a);
    const double c = 1.0 / (2.0 + kpp0 / (kernel(b) * kppa));

    const double l0 = std::hypot(b, a) + std::hypot(b, a + delta);
    const double l_hat = std::hypot(b, a + y_hat) + std::hypot(b, a + delta - y_hat);
    return {y_hat, c, l0, l_hat};
}

}  // namespace pmf
