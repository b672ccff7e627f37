#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "pmf/density.hpp"

namespace pmf {

/// A bijection between two equally sized vertex sets. Construction
/// validates bijectivity, so any Permutation in flight is a certificate.
class Permutation {
public:
    explicit Permutation(std::vector<int> forward);
    static Permutation identity(int n);

    int size() const { return static_cast<int>(forward_.size()); }
    int operator()(int i) const { return forward_[i]; }
    const std::vector<int>& forward() const { return forward_; }
    const std::vector<int>& inverse() const { return inverse_; }

    bool operator==(const Permutation& other) const { return forward_ == other.forward_; }
    bool operator!=(const Permutation& other) const { return !(*this == other); }

    /// Text format: one line per source, "i p_i".
    static Permutation load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

private:
    std::vector<int> forward_;
    std::vector<int> inverse_;
};

struct SolveStats {
    std::int64_t rounds = 0;  // auction bids; 0 for direct solvers
    int phases = 0;
    double final_eps = 0.0;
};

struct LapResult {
    Permutation perm;
    double objective;
    SolveStats stats;
};

/// Epsilon-scaling schedule for the auction solver. Negative entries are
/// resolved from the payoff: eps_start = (max-min)/2, eps_final =
/// 1e-9 * max payoff magnitude.
struct AuctionConfig {
    double eps_start = -1.0;
    double eps_scale_factor = 0.25;
    double eps_final = -1.0;
    std::int64_t max_rounds = 200'000'000;
};

/// Exhaustive maximizer of <P, F> for n <= 9; ties broken toward the
/// lexicographically smallest assignment vector. This is the test oracle
/// the other solvers are checked against.
LapResult lap_bruteforce(const Eigen::MatrixXd& payoff);

/// Exact O(n^3) maximizer (shortest augmenting paths on the negated
/// payoff). Rejects NaN entries.
LapResult lap_exact(const Eigen::MatrixXd& payoff);

/// Forward auction with epsilon scaling, Gauss-Seidel bidding in
/// ascending row order. The returned objective is within n * eps_final
/// of the optimum.
LapResult lap_auction(const Eigen::MatrixXd& payoff, const AuctionConfig& cfg = {});

/// Auction restricted to the stored entries of a sparse payoff. Checks
/// feasibility first (Hopcroft-Karp); an infeasible mask raises
/// InfeasibleAssignmentError carrying a Hall-violating row set.
LapResult lap_auction_sparse(const SparsePayoff& payoff, const AuctionConfig& cfg = {});

}  // namespace pmf
