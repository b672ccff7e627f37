#include "pmf/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "pmf/errors.hpp"

namespace pmf {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Permutation::Permutation(std::vector<int> forward) : forward_(std::move(forward)) {
    const int n = static_cast<int>(forward_.size());
    if (n == 0) throw ValidationError("permutation must be nonempty");
    inverse_.assign(n, -1);
    for (int i = 0; i < n; ++i) {
        const int j = forward_[i];
        if (j < 0 || j >= n)
            throw ValidationError("permutation image " + std::to_string(j) + " at " +
                                  std::to_string(i) + " out of range [0," + std::to_string(n) + ")");
        if (inverse_[j] != -1)
            throw ValidationError("not a bijection: " + std::to_string(inverse_[j]) + " and " +
                                  std::to_string(i) + " both map to " + std::to_string(j));
        inverse_[j] = i;
    }
}

Permutation Permutation::identity(int n) {
    std::vector<int> fwd(n);
    std::iota(fwd.begin(), fwd.end(), 0);
    return Permutation(std::move(fwd));
}

Permutation Permutation::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::vector<std::pair<int, int>> pairs;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream ls(line);
        int i, p;
        if (!(ls >> i >> p))
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 'i p_i'");
        pairs.emplace_back(i, p);
    }
    if (pairs.empty()) throw ParseError(path.string() + ": empty permutation file");
    std::vector<int> fwd(pairs.size(), -1);
    for (const auto& [i, p] : pairs) {
        if (i < 0 || i >= static_cast<int>(fwd.size()) || fwd[i] != -1)
            throw ParseError(path.string() + ": source index " + std::to_string(i) +
                             " missing, repeated, or out of range");
        fwd[i] = p;
    }
    return Permutation(std::move(fwd));
}

void Permutation::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    for (int i = 0; i < size(); ++i) out << i << ' ' << forward_[i] << '\n';
    if (!out) throw Error("failed writing " + path.string());
}

namespace {

void check_payoff(const Eigen::MatrixXd& f) {
    if (f.rows() != f.cols()) throw UsageError("payoff matrix must be square");
    if (f.rows() == 0) throw UsageError("payoff matrix is empty");
    if (f.hasNaN()) throw ValidationError("payoff matrix contains NaN");
}

double objective_of(const Eigen::MatrixXd& f, const std::vector<int>& p) {
    double obj = 0.0;
    for (int i = 0; i < static_cast<int>(p.size()); ++i) obj += f(i, p[i]);
    return obj;
}

}  // namespace

LapResult lap_bruteforce(const Eigen::MatrixXd& payoff) {
    check_payoff(payoff);
    const int n = static_cast<int>(payoff.rows());
    if (n > 9)
        throw UsageError("lap_bruteforce: n=" + std::to_string(n) +
                         " too large for exhaustive enumeration (max 9)");
    std::vector<int> perm(n), best(n);
    std::iota(perm.begin(), perm.end(), 0);
    best = perm;
    double best_obj = objective_of(payoff, perm);
    while (std::next_permutation(perm.begin(), perm.end())) {
        const double obj = objective_of(payoff, perm);
        if (obj > best_obj) {  // ties keep the lexicographically first
            best_obj = obj;
            best = perm;
        }
    }
    return {Permutation(std::move(best)), best_obj, {}};
}

LapResult lap_exact(const Eigen::MatrixXd& payoff) {
    check_payoff(payoff);
    const int n = static_cast<int>(payoff.rows());

    // Shortest augmenting paths with potentials on cost = -payoff
    // (1-based internal arrays).
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = 0;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = -payoff(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> fwd(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j]) fwd[p[j] - 1] = j - 1;
    const double obj = objective_of(payoff, fwd);
    return {Permutation(std::move(fwd)), obj, {}};
}

namespace {

// Shared forward-auction core. row_entries(i) yields (column, value)
// pairs in ascending column order; dense callers adapt on the fly.
template <typename RowScan>
LapResult auction_run(int n, double max_payoff, double min_payoff, const AuctionConfig& cfg,
                      const RowScan& scan_row,
                      const std::function<double(int, int)>& value_at) {
    const double range = max_payoff - min_payoff;
    const double magnitude = std::max({std::abs(max_payoff), std::abs(min_payoff), 1e-300});
    const double eps_final = cfg.eps_final > 0.0 ? cfg.eps_final : 1e-9 * magnitude;
    double eps = cfg.eps_start > 0.0 ? cfg.eps_start : range / 2.0;
    eps = std::max(eps, eps_final);
    if (!(cfg.eps_scale_factor > 0.0 && cfg.eps_scale_factor < 1.0))
        throw UsageError("auction: eps_scale_factor must lie in (0,1)");
    // jump used as the "second best" when a row has a single candidate
    const double lone_jump = range + 1.0;

    std::vector<double> price(n, 0.0);
    std::vector<int> owner(n, -1);
    std::vector<int> assigned(n, -1);
    SolveStats stats;

    for (;;) {
        ++stats.phases;
        std::fill(owner.begin(), owner.end(), -1);
        std::fill(assigned.begin(), assigned.end(), -1);
        std::deque<int> queue;
        for (int i = 0; i < n; ++i) queue.push_back(i);
        while (!queue.empty()) {
            const int i = queue.front();
            queue.pop_front();
            if (++stats.rounds > cfg.max_rounds)
                throw SolverError("auction: round budget exhausted at eps=" + std::to_string(eps) +
                                  " (" + std::to_string(stats.rounds) + " bids); payoff may be "
                                  "pathological");
            int best_j = -1;
            double best_v = -kInf, second_v = -kInf;
            scan_row(i, [&](int j, double f) {
                const double v = f - price[j];
                if (v > best_v) {
                    second_v = best_v;
                    best_v = v;
                    best_j = j;
                } else if (v > second_v) {
                    second_v = v;
                }
            });
            if (best_j < 0) throw SolverError("auction: row " + std::to_string(i) + " has no entries");
            if (second_v == -kInf) second_v = best_v - lone_jump;
            price[best_j] += best_v - second_v + eps;
            if (owner[best_j] >= 0) {
                assigned[owner[best_j]] = -1;
                queue.push_back(owner[best_j]);
            }
            owner[best_j] = i;
            assigned[i] = best_j;
        }
        if (eps <= eps_final) break;
        eps = std::max(eps_final, eps * cfg.eps_scale_factor);
    }
    stats.final_eps = eps;

    double obj = 0.0;
    for (int i = 0; i < n; ++i) obj += value_at(i, assigned[i]);
    return {Permutation(std::move(assigned)), obj, stats};
}

}  // namespace

LapResult lap_auction(const Eigen::MatrixXd& payoff, const AuctionConfig& cfg) {
    check_payoff(payoff);
    const int n = static_cast<int>(payoff.rows());
    const double maxF = payoff.maxCoeff(), minF = payoff.minCoeff();
    if (maxF == minF) {
        // total tie: every assignment optimal; smallest by convention
        return {Permutation::identity(n), n * maxF, {}};
    }
    return auction_run(
        n, maxF, minF, cfg,
        [&](int i, const auto& visit) {
            for (int j = 0; j < n; ++j) visit(j, payoff(i, j));
        },
        [&](int i, int j) { return payoff(i, j); });
}

namespace {

// Hopcroft-Karp maximum matching; on deficiency, extracts the rows
// reachable from unmatched rows by alternating paths (a Hall violator).
void check_perfect_matching(const SparsePayoff& f) {
    const int n = f.rows;
    std::vector<int> match_row(n, -1), match_col(n, -1);
    std::vector<int> dist(n);
    constexpr int kInfDist = std::numeric_limits<int>::max();

    auto bfs = [&]() {
        std::deque<int> q;
        for (int i = 0; i < n; ++i) {
            if (match_row[i] == -1) {
                dist[i] = 0;
                q.push_back(i);
            } else {
                dist[i] = kInfDist;
            }
        }
        bool found = false;
        while (!q.empty()) {
            const int i = q.front();
            q.pop_front();
            for (int it = f.row_offsets[i]; it < f.row_offsets[i + 1]; ++it) {
                const int w = match_col[f.col_index[it]];
                if (w == -1) {
                    found = true;
                } else if (dist[w] == kInfDist) {
                    dist[w] = dist[i] + 1;
                    q.push_back(w);
                }
            }
        }
        return found;
    };
    std::function<bool(int)> dfs = [&](int i) {
        for (int it = f.row_offsets[i]; it < f.row_offsets[i + 1]; ++it) {
            const int j = f.col_index[it];
            const int w = match_col[j];
            if (w == -1 || (dist[w] == dist[i] + 1 && dfs(w))) {
                match_row[i] = j;
                match_col[j] = i;
                return true;
            }
        }
        dist[i] = kInfDist;
        return false;
    };

    int matched = 0;
    while (bfs()) {
        for (int i = 0; i < n; ++i)
            if (match_row[i] == -1 && dfs(i)) ++matched;
    }
    if (matched == n) return;

    // alternating-reachability closure from unmatched rows
    std::vector<char> row_seen(n, 0), col_seen(n, 0);
    std::deque<int> q;
    for (int i = 0; i < n; ++i)
        if (match_row[i] == -1) {
            row_seen[i] = 1;
            q.push_back(i);
        }
    while (!q.empty()) {
        const int i = q.front();
        q.pop_front();
        for (int it = f.row_offsets[i]; it < f.row_offsets[i + 1]; ++it) {
            const int j = f.col_index[it];
            if (col_seen[j]) continue;
            col_seen[j] = 1;
            const int w = match_col[j];
            if (w != -1 && !row_seen[w]) {
                row_seen[w] = 1;
                q.push_back(w);
            }
        }
    }
    std::vector<int> rows, cols;
    for (int i = 0; i < n; ++i)
        if (row_seen[i]) rows.push_back(i);
    for (int j = 0; j < n; ++j)
        if (col_seen[j]) cols.push_back(j);
    const std::string msg = "masked assignment infeasible: " + std::to_string(rows.size()) +
                            " rows share only " + std::to_string(cols.size()) +
                            " allowed columns (Hall violation)";
    throw InfeasibleAssignmentError(msg, std::move(rows), std::move(cols));
}

}  // namespace

LapResult lap_auction_sparse(const SparsePayoff& f, const AuctionConfig& cfg) {
    const int n = f.rows;
    if (n == 0) throw UsageError("sparse payoff is empty");
    if (f.rows != f.cols) throw UsageError("sparse payoff must be square");
    for (int i = 0; i < n; ++i)
        if (f.row_offsets[i + 1] == f.row_offsets[i])
            throw InfeasibleAssignmentError(
                "masked assignment infeasible: row " + std::to_string(i) + " has no allowed column",
                {i}, {});
    for (double v : f.values)
        if (std::isnan(v)) throw ValidationError("sparse payoff contains NaN");

    check_perfect_matching(f);

    double maxF = -kInf, minF = kInf;
    for (double v : f.values) {
        maxF = std::max(maxF, v);
        minF = std::min(minF, v);
    }
    if (maxF == minF) {
        // all stored values equal: any feasible perfect matching is
        // optimal; run one auction phase at fixed eps to find one
        AuctionConfig flat = cfg;
        flat.eps_start = 1.0;
        flat.eps_final = 1.0;
        auto result = auction_run(
            n, maxF + 1.0, minF, flat,
            [&](int i, const auto& visit) {
                for (int it = f.row_offsets[i]; it < f.row_offsets[i + 1]; ++it)
                    visit(f.col_index[it], f.values[it]);
            },
            [&](int i, int j) {
                for (int it = f.row_offsets[i]; it < f.row_offsets[i + 1]; ++it)
                    if (f.col_index[it] == j) return f.values[it];
                throw Error("assignment left the mask");
            });
        return result;
    }

    return auction_run(
        n, maxF, minF, cfg,
        [&](int i, const auto& visit) {
            for (int it = f.row_offsets[i]; it < f.row_offsets[i + 1]; ++it)
                visit(f.col_index[it], f.values[it]);
        },
        [&](int i, int j) {
            for (int it = f.row_offsets[i]; it < f.row_offsets[i + 1]; ++it)
                if (f.col_index[it] == j) return f.values[it];
            throw Error("assignment left the mask");
        });
}

}  // namespace pmf
