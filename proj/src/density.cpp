#include "pmf/density.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>

#include "pmf/errors.hpp"
#include "pmf/parallel.hpp"

namespace pmf {

double KernelParams::resolved() const {
    if (!sigma_sq) throw UsageError("kernel width not resolved; call resolved_for(target) first");
    if (*sigma_sq <= 0.0) throw UsageError("kernel sigma^2 must be positive");
    return *sigma_sq;
}

KernelParams KernelParams::resolved_for(const MetricSpace& target) const {
    if (sigma_sq_rel <= 0.0) throw UsageError("sigma_sq_rel must be positive");
    KernelParams out = *this;
    if (!out.sigma_sq) out.sigma_sq = sigma_sq_rel * target.area_surrogate();
    return out;
}

double kernel_value(double d, const KernelParams& params) {
    const double s2 = params.resolved();
    return std::exp(-d * d / (2.0 * s2));
}

void MatchSet::validate(int n_x, int n_y) const {
    if (xi.empty()) throw ValidationError("match set is empty");
    if (xi.size() != eta.size()) throw ValidationError("match set xi/eta length mismatch");
    if (!weights.empty() && weights.size() != xi.size())
        throw ValidationError("match set weight count differs from pair count");
    for (size_t k = 0; k < xi.size(); ++k) {
        if (xi[k] < 0 || xi[k] >= n_x)
            throw ValidationError("match " + std::to_string(k) + ": xi=" + std::to_string(xi[k]) +
                                  " out of range [0," + std::to_string(n_x) + ")");
        if (eta[k] < 0 || eta[k] >= n_y)
            throw ValidationError("match " + std::to_string(k) + ": eta=" + std::to_string(eta[k]) +
                                  " out of range [0," + std::to_string(n_y) + ")");
        if (!weights.empty() && !(weights[k] > 0.0))
            throw ValidationError("match " + std::to_string(k) + ": weight must be positive");
    }
}

MatchSet MatchSet::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    MatchSet m;
    std::string line;
    int line_no = 0;
    bool any_weight = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream ls(line);
        int a, b;
        if (!(ls >> a >> b))
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": expected 'xi eta [weight]'");
        double w;
        if (ls >> w) {
            if (!any_weight) {
                m.weights.assign(m.xi.size(), 1.0);
                any_weight = true;
            }
            m.weights.push_back(w);
        } else if (any_weight) {
            m.weights.push_back(1.0);
        }
        m.xi.push_back(a);
        m.eta.push_back(b);
    }
    if (m.xi.empty()) throw ParseError(path.string() + ": no matches found");
    return m;
}

void MatchSet::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    char buf[40];
    for (size_t k = 0; k < xi.size(); ++k) {
        out << xi[k] << ' ' << eta[k];
        if (!weights.empty()) {
            std::snprintf(buf, sizeof(buf), "%.17g", weights[k]);
            out << ' ' << buf;
        }
        out << '\n';
    }
    if (!out) throw Error("failed writing " + path.string());
}

Eigen::MatrixXd kernel_matrix_rows(const MetricSpace& space, std::span<const int> row_points,
                                   std::span<const int> anchors, const KernelParams& params) {
    if (anchors.empty()) throw UsageError("kernel_matrix: no anchors given");
    const double s2 = params.resolved();
    const auto n = static_cast<Eigen::Index>(row_points.size());
    const auto m = static_cast<Eigen::Index>(anchors.size());
    Eigen::MatrixXd k(n, m);
    parallel_for(m, [&](std::int64_t c) {
        const auto col = space.distance_column(anchors[c]);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = (*col)[row_points[i]];
            k(i, c) = std::exp(-d * d / (2.0 * s2));
        }
    });
    return k;
}

Eigen::MatrixXd kernel_matrix(const MetricSpace& space, std::span<const int> anchors,
                              const KernelParams& params) {
    std::vector<int> all(space.size());
    for (int i = 0; i < space.size(); ++i) all[i] = i;
    return kernel_matrix_rows(space, all, anchors, params);
}

DensePayoff payoff_dense(const Eigen::MatrixXd& kx, const Eigen::MatrixXd& ky,
                         std::span<const double> weights) {
    if (kx.cols() != ky.cols())
        throw UsageError("payoff_dense: kernel matrices disagree on match count (" +
                         std::to_string(kx.cols()) + " vs " + std::to_string(ky.cols()) + ")");
    if (!weights.empty() && static_cast<Eigen::Index>(weights.size()) != kx.cols())
        throw UsageError("payoff_dense: weight count differs from match count");
    DensePayoff f;
    f.match_count = static_cast<int>(kx.cols());
    if (weights.empty()) {
        f.values.noalias() = kx * ky.transpose();
    } else {
        const Eigen::Map<const Eigen::VectorXd> w(weights.data(), weights.size());
        f.values.noalias() = kx * w.asDiagonal() * ky.transpose();
    }
    return f;
}

std::size_t WeightMask::nnz() const {
    std::size_t total = 0;
    for (const auto& row : allowed) total += row.size();
    return total;
}

namespace {

// Sorted-vector membership.
bool contains(const std::vector<int>& sorted, int v) {
    return std::binary_search(sorted.begin(), sorted.end(), v);
}

struct VicinityLists {
    // per coarse anchor: fine points strictly inside the covering radius,
    // and fine points within vicinity_factor * radius (inclusive)
    std::vector<std::vector<int>> cover_by_anchor;
    std::vector<std::vector<int>> near_by_anchor;
    // transposed views, per fine point
    std::vector<std::vector<int>> cover_of_point;
    std::vector<std::vector<int>> near_anchors_of_point;
};

VicinityLists vicinity_lists(const MetricSpace& space, std::span<const int> anchors,
                             double radius, double factor, std::span<const int> fine) {
    const int m = static_cast<int>(anchors.size());
    const int n = static_cast<int>(fine.size());
    std::vector<int> pos(space.size(), -1);
    for (int i = 0; i < n; ++i) pos[fine[i]] = i;

    VicinityLists out;
    out.cover_by_anchor.resize(m);
    out.near_by_anchor.resize(m);
    parallel_for(m, [&](std::int64_t k) {
        for (const auto& [point, d] : space.distances_within(anchors[k], factor * radius)) {
            const int p = pos[point];
            if (p < 0) continue;
            out.near_by_anchor[k].push_back(p);
            if (d < radius) out.cover_by_anchor[k].push_back(p);
        }
        // ball members arrive in space-index order; membership checks need
        // them sorted by fine-list position
        std::sort(out.near_by_anchor[k].begin(), out.near_by_anchor[k].end());
        std::sort(out.cover_by_anchor[k].begin(), out.cover_by_anchor[k].end());
    });
    out.cover_of_point.resize(n);
    out.near_anchors_of_point.resize(n);
    for (int k = 0; k < m; ++k) {
        for (int p : out.cover_by_anchor[k]) out.cover_of_point[p].push_back(k);
        for (int p : out.near_by_anchor[k]) out.near_anchors_of_point[p].push_back(k);
    }
    return out;
}

}  // namespace

WeightMask weight_mask(const MetricSpace& space_x, const MetricSpace& space_y,
                       std::span<const int> coarse_x, std::span<const int> coarse_y_image,
                       double radius_x, double radius_y, std::span<const int> fine_x,
                       std::span<const int> fine_y, double vicinity_factor) {
    if (coarse_x.size() != coarse_y_image.size())
        throw UsageError("weight_mask: coarse sample and image counts differ");
    if (coarse_x.empty()) throw UsageError("weight_mask: no coarse anchors");
    if (!(radius_x > 0.0) || !(radius_y > 0.0))
        throw UsageError("weight_mask: covering radii must be positive (finest level needs no mask)");
    if (vicinity_factor < 1.0) throw UsageError("weight_mask: vicinity factor below 1");

    const int nr = static_cast<int>(fine_x.size());
    const int nc = static_cast<int>(fine_y.size());

    const auto vx = vicinity_lists(space_x, coarse_x, radius_x, vicinity_factor, fine_x);
    const auto vy = vicinity_lists(space_y, coarse_y_image, radius_y, vicinity_factor, fine_y);

    // fine Y points no anchor image covers; they are unconstrained on the
    // Y side and only case 1 can exclude them
    std::vector<int> uncovered_t;
    for (int t = 0; t < nc; ++t)
        if (vy.cover_of_point[t].empty()) uncovered_t.push_back(t);

    WeightMask mask;
    mask.rows = nr;
    mask.cols = nc;
    mask.allowed.resize(nr);

    std::vector<int> infeasible_rows;
    std::mutex infeasible_mu;

    parallel_for(nr, [&](std::int64_t s) {
        const auto& cover_s = vx.cover_of_point[s];
        const auto& near_s = vx.near_anchors_of_point[s];
        std::vector<int> candidates;
        if (!cover_s.empty()) {
            // intersection of the Y vicinities of every anchor covering s
            const int k0 = *std::min_element(
                cover_s.begin(), cover_s.end(), [&](int a, int b) {
                    return vy.near_by_anchor[a].size() < vy.near_by_anchor[b].size();
                });
            for (int t : vy.near_by_anchor[k0]) {
                bool ok = true;
                for (int k : cover_s)
                    if (k != k0 && !contains(vy.near_by_anchor[k], t)) {
                        ok = false;
                        break;
                    }
                if (ok) candidates.push_back(t);
            }
        } else {
            // no anchor covers s: any t whose covering anchors all sit
            // within the X vicinity of s qualifies
            candidates = uncovered_t;
            for (int k : near_s)
                candidates.insert(candidates.end(), vy.cover_by_anchor[k].begin(),
                                  vy.cover_by_anchor[k].end());
            std::sort(candidates.begin(), candidates.end());
            candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
        }
        auto& row = mask.allowed[s];
        for (int t : candidates) {
            bool ok = true;
            for (int k : vy.cover_of_point[t])
                if (!contains(near_s, k)) {
                    ok = false;
                    break;
                }
            if (ok) row.push_back(t);
        }
        std::sort(row.begin(), row.end());
        if (row.empty()) {
            std::lock_guard<std::mutex> lock(infeasible_mu);
            infeasible_rows.push_back(static_cast<int>(s));
        }
    });

    if (!infeasible_rows.empty()) {
        std::sort(infeasible_rows.begin(), infeasible_rows.end());
        const int s = infeasible_rows.front();
        std::vector<int> nearest = vx.cover_of_point[s];
        if (nearest.empty()) nearest = vx.near_anchors_of_point[s];
        throw InfeasibleMaskError(
            "weight_mask: fine point " + std::to_string(fine_x[s]) + " (row " + std::to_string(s) +
                ") has no allowed column; the coarse map separates its covering anchors' images "
                "beyond " +
                std::to_string(vicinity_factor) +
                "x the covering radius. Widening the vicinity factor may restore feasibility.",
            s, std::move(nearest));
    }
    return mask;
}

namespace {

double floored(double v, double floor) { return v < floor ? 0.0 : v; }

}  // namespace

SparsePayoff payoff_sparse(const Eigen::MatrixXd& kx, const Eigen::MatrixXd& ky,
                           std::span<const double> weights, const WeightMask& mask,
                           const KernelParams& params) {
    if (kx.cols() != ky.cols()) throw UsageError("payoff_sparse: match count mismatch");
    if (kx.rows() != mask.rows || ky.rows() != mask.cols)
        throw UsageError("payoff_sparse: mask shape disagrees with kernel matrices");
    const int m = static_cast<int>(kx.cols());
    SparsePayoff f;
    f.rows = mask.rows;
    f.cols = mask.cols;
    f.sigma_sq = params.resolved();
    f.match_count = m;
    f.row_offsets.resize(mask.rows + 1, 0);
    for (int s = 0; s < mask.rows; ++s)
        f.row_offsets[s + 1] = f.row_offsets[s] + static_cast<int>(mask.allowed[s].size());
    f.col_index.resize(f.row_offsets.back());
    f.values.assign(f.row_offsets.back(), 0.0);
    for (int s = 0; s < mask.rows; ++s)
        std::copy(mask.allowed[s].begin(), mask.allowed[s].end(),
                  f.col_index.begin() + f.row_offsets[s]);

    const double floor = params.sparse_floor;
    parallel_for(mask.rows, [&](std::int64_t s) {
        for (int it = f.row_offsets[s]; it < f.row_offsets[s + 1]; ++it) {
            const int t = f.col_index[it];
            double sum = 0.0;
            for (int k = 0; k < m; ++k) {
                const double w = weights.empty() ? 1.0 : weights[k];
                sum += w * floored(kx(s, k), floor) * floored(ky(t, k), floor);
            }
            f.values[it] = sum;
        }
    });
    return f;
}

SparsePayoff payoff_sparse_streamed(const MetricSpace& space_x, const MetricSpace& space_y,
                                    std::span<const int> anchors_x,
                                    std::span<const int> anchors_y,
                                    std::span<const double> weights,
                                    std::span<const int> fine_x, std::span<const int> fine_y,
                                    const WeightMask& mask, const KernelParams& params) {
    if (anchors_x.size() != anchors_y.size())
        throw UsageError("payoff_sparse_streamed: anchor counts differ");
    if (static_cast<int>(fine_x.size()) != mask.rows || static_cast<int>(fine_y.size()) != mask.cols)
        throw UsageError("payoff_sparse_streamed: mask shape disagrees with fine point lists");
    const int m = static_cast<int>(anchors_x.size());
    const int nr = mask.rows;
    const int nc = mask.cols;
    const double s2 = params.resolved();
    const double floor = params.sparse_floor;

    SparsePayoff f;
    f.rows = nr;
    f.cols = nc;
    f.sigma_sq = s2;
    f.match_count = m;
    f.row_offsets.resize(nr + 1, 0);
    for (int s = 0; s < nr; ++s)
        f.row_offsets[s + 1] = f.row_offsets[s] + static_cast<int>(mask.allowed[s].size());
    f.col_index.resize(f.row_offsets.back());
    f.values.assign(f.row_offsets.back(), 0.0);
    for (int s = 0; s < nr; ++s)
        std::copy(mask.allowed[s].begin(), mask.allowed[s].end(),
                  f.col_index.begin() + f.row_offsets[s]);

    // Stream anchors in blocks: columns of the block fetched in parallel,
    // then accumulated row-parallel in ascending anchor order so each
    // entry's summation order is fixed.
    constexpr int kBlock = 32;
    std::vector<std::vector<double>> kxv(kBlock), kyv(kBlock);
    for (int block = 0; block < m; block += kBlock) {
        const int bend = std::min(m, block + kBlock);
        parallel_for(2 * (bend - block), [&](std::int64_t j) {
            const int k = block + static_cast<int>(j) / 2;
            if (j % 2 == 0) {
                const auto col = space_x.distance_column(anchors_x[k]);
                auto& kv = kxv[k - block];
                kv.resize(nr);
                for (int s = 0; s < nr; ++s) {
                    const double d = (*col)[fine_x[s]];
                    kv[s] = floored(std::exp(-d * d / (2.0 * s2)), floor);
                }
            } else {
                const auto col = space_y.distance_column(anchors_y[k]);
                auto& kv = kyv[k - block];
                kv.resize(nc);
                for (int t = 0; t < nc; ++t) {
                    const double d = (*col)[fine_y[t]];
                    kv[t] = floored(std::exp(-d * d / (2.0 * s2)), floor);
                }
            }
        });
        parallel_for_ranges(nr, [&](std::int64_t rb, std::int64_t re) {
            for (std::int64_t s = rb; s < re; ++s) {
                const int begin = f.row_offsets[s], end = f.row_offsets[s + 1];
                for (int k = block; k < bend; ++k) {
                    const double w = weights.empty() ? 1.0 : weights[k];
                    const double kxs = w * kxv[k - block][s];
                    if (kxs == 0.0) continue;
                    const auto& ky = kyv[k - block];
                    for (int it = begin; it < end; ++it)
                        f.values[it] += kxs * ky[f.col_index[it]];
                }
            }
        });
    }
    return f;
}

}  // namespace pmf
