#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "pmf/density.hpp"
#include "pmf/errors.hpp"
#include "support/shapes.hpp"

using namespace pmf;

namespace {

KernelParams resolved(double sigma_sq) {
    KernelParams p;
    p.sigma_sq = sigma_sq;
    return p;
}

// Independent Parzen oracle: triple loop straight over distance columns.
Eigen::MatrixXd parzen_bruteforce(const MetricSpace& x, const MetricSpace& y, const MatchSet& m,
                                  double sigma_sq) {
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(x.size(), y.size());
    for (int i = 0; i < x.size(); ++i)
        for (int j = 0; j < y.size(); ++j)
            for (int k = 0; k < m.size(); ++k) {
                const double dx = (*x.distance_column(m.xi[k]))[i];
                const double dy = (*y.distance_column(m.eta[k]))[j];
                f(i, j) += m.weight(k) * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma_sq));
            }
    return f;
}

}  // namespace

TEST_CASE("kernel_value at characteristic distances") {
    const auto p = resolved(4.0);  // sigma = 2
    CHECK(kernel_value(0.0, p) == 1.0);
    CHECK(kernel_value(2.0, p) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
    CHECK(kernel_value(6.0, p) == doctest::Approx(std::exp(-4.5)).epsilon(1e-15));
}

TEST_CASE("kernel width resolution") {
    SUBCASE("relative width against circle area surrogate") {
        const auto c = MetricSpace::circle(2.0 * std::numbers::pi, 16);
        KernelParams p;
        p.sigma_sq_rel = 0.02;
        const auto r = p.resolved_for(c);
        // C^2/pi = 4 pi for the unit circle
        CHECK(r.resolved() == doctest::Approx(0.02 * 4.0 * std::numbers::pi).epsilon(1e-12));
    }
    SUBCASE("unresolved width is an error") {
        KernelParams p;
        CHECK_THROWS_AS((void)kernel_value(1.0, p), UsageError);
    }
    SUBCASE("explicit space needs an area hint") {
        Eigen::MatrixXd d(2, 2);
        d << 0, 1, 1, 0;
        const auto s = MetricSpace::explicit_matrix(d);
        KernelParams p;
        CHECK_THROWS_AS(p.resolved_for(s), UsageError);
        const auto hinted = MetricSpace::explicit_matrix(d, 3.0);
        CHECK(p.resolved_for(hinted).resolved() == doctest::Approx(0.06));
    }
}

TEST_CASE("kernel_matrix column on the 8-point circle, sigma^2 = 2") {
    const auto c = MetricSpace::circle(8.0, 8);
    const std::vector<int> anchors = {0};
    const auto k = kernel_matrix(c, anchors, resolved(2.0));
    REQUIRE(k.rows() == 8);
    REQUIRE(k.cols() == 1);
    const std::vector<double> expected = {1.0,
                                          std::exp(-0.25),
                                          std::exp(-1.0),
                                          std::exp(-2.25),
                                          std::exp(-4.0),
                                          std::exp(-2.25),
                                          std::exp(-1.0),
                                          std::exp(-0.25)};
    for (int i = 0; i < 8; ++i) CHECK(k(i, 0) == doctest::Approx(expected[i]).epsilon(1e-15));
}

TEST_CASE("kernel_matrix: self-anchor row is exactly 1; equal anchors give equal columns") {
    const auto c = MetricSpace::circle(8.0, 8);
    const std::vector<int> anchors = {3, 3, 3};
    const auto k = kernel_matrix(c, anchors, resolved(1.0));
    CHECK(k(3, 0) == 1.0);
    CHECK(k.col(0) == k.col(1));
    CHECK(k.col(0) == k.col(2));
}

TEST_CASE("payoff_dense equals the brute-force Parzen sum (seeded circle instances)") {
    shapes::Rng rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 8 + rng.below(57);  // up to 64
        const int m = 1 + rng.below(8);
        const auto space = MetricSpace::circle(2.0 * std::numbers::pi, n);
        MatchSet matches;
        for (int k = 0; k < m; ++k) {
            matches.xi.push_back(rng.below(n));
            matches.eta.push_back(rng.below(n));
        }
        if (trial % 2 == 0) {
            for (int k = 0; k < m; ++k) matches.weights.push_back(0.25 + rng.uniform());
        }
        const double s2 = 0.1 + rng.uniform();
        const auto kx = kernel_matrix(space, matches.xi, resolved(s2));
        const auto ky = kernel_matrix(space, matches.eta, resolved(s2));
        const auto f = payoff_dense(kx, ky, matches.weights);
        const auto oracle = parzen_bruteforce(space, space, matches, s2);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                CHECK(f.values(i, j) == doctest::Approx(oracle(i, j)).epsilon(1e-12));
    }
}

TEST_CASE("single match: separable peak with value 1 at (xi, eta)") {
    const auto space = MetricSpace::circle(10.0, 10);
    MatchSet m;
    m.xi = {4};
    m.eta = {7};
    const auto p = resolved(0.8);
    const auto f = payoff_dense(kernel_matrix(space, m.xi, p), kernel_matrix(space, m.eta, p));
    CHECK(f.values(4, 7) == 1.0);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j)
            if (i != 4 || j != 7) CHECK(f.values(i, j) < 1.0);
}

TEST_CASE("payoff symmetry: swapping shapes transposes F exactly") {
    const auto cx = MetricSpace::circle(6.0, 12);
    const auto cy = MetricSpace::circle(6.0, 12);
    MatchSet m;
    m.xi = {0, 3, 7};
    m.eta = {1, 4, 9};
    const auto p = resolved(0.5);
    const auto kx = kernel_matrix(cx, m.xi, p);
    const auto ky = kernel_matrix(cy, m.eta, p);
    const auto f = payoff_dense(kx, ky);
    const auto f_swapped = payoff_dense(ky, kx);
    CHECK(f_swapped.values == f.values.transpose());
}

TEST_CASE("single-kernel monotonicity in sigma^2") {
    const auto space = MetricSpace::circle(8.0, 8);
    MatchSet m;
    m.xi = {0};
    m.eta = {0};
    const auto f1 = payoff_dense(kernel_matrix(space, m.xi, resolved(0.5)),
                                 kernel_matrix(space, m.eta, resolved(0.5)));
    const auto f2 = payoff_dense(kernel_matrix(space, m.xi, resolved(2.0)),
                                 kernel_matrix(space, m.eta, resolved(2.0)));
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) CHECK(f2.values(i, j) >= f1.values(i, j));
}

TEST_CASE("match file round trip and validation") {
    const auto path = std::filesystem::temp_directory_path() / "pmf_matches_test.txt";
    {
        std::ofstream out(path);
        out << "# seeds\n0 7\n22 29 2.5\n";
    }
    const auto m = MatchSet::load(path);
    REQUIRE(m.size() == 2);
    CHECK(m.xi == std::vector<int>{0, 22});
    CHECK(m.eta == std::vector<int>{7, 29});
    CHECK(m.weight(0) == 1.0);
    CHECK(m.weight(1) == 2.5);
    CHECK_THROWS_AS(m.validate(10, 64), ValidationError);  // xi=22 out of range
    m.save(path);
    const auto again = MatchSet::load(path);
    CHECK(again.xi == m.xi);
    CHECK(again.weights == std::vector<double>{1.0, 2.5});
}

namespace {

// Straight re-evaluation of the two exclusion rules for one pair.
bool excluded_by_rule(const MetricSpace& x, const MetricSpace& y, std::span<const int> coarse_x,
                      std::span<const int> coarse_y_img, double rx, double ry, double factor,
                      int s, int t) {
    for (size_t k = 0; k < coarse_x.size(); ++k) {
        const double dx = (*x.distance_column(coarse_x[k]))[s];
        const double dy = (*y.distance_column(coarse_y_img[k]))[t];
        if (dx < rx && dy > factor * ry) return true;
        if (dy < ry && dx > factor * rx) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("weight mask on a 16-point circle") {
    const auto space = MetricSpace::circle(16.0, 16);
    const std::vector<int> coarse = {0, 8, 4, 12};  // FPS-style spread, covering radius 2
    const double r = 2.0;
    std::vector<int> fine(16);
    for (int i = 0; i < 16; ++i) fine[i] = i;

    SUBCASE("identity coarse map allows the diagonal everywhere") {
        const auto mask = weight_mask(space, space, coarse, coarse, r, r, fine, fine);
        for (int s = 0; s < 16; ++s)
            CHECK(std::binary_search(mask.allowed[s].begin(), mask.allowed[s].end(), s));
    }

    SUBCASE("a far-swapped image excludes vicinity violations; mask matches the rules") {
        const std::vector<int> image = {0, 8, 12, 4};  // images of 4 and 12 swapped
        const auto mask = weight_mask(space, space, coarse, image, r, r, fine, fine);
        // vertex 4 is covered by anchor 4 whose image is 12; mapping it to 4
        // violates the vicinity bound d(4, 12) = 8 > 2r = 4
        CHECK_FALSE(std::binary_search(mask.allowed[4].begin(), mask.allowed[4].end(), 4));
        for (int s = 0; s < 16; ++s) {
            std::vector<char> allowed(16, 0);
            for (int t : mask.allowed[s]) allowed[t] = 1;
            for (int t = 0; t < 16; ++t)
                CHECK(static_cast<bool>(allowed[t]) ==
                      !excluded_by_rule(space, space, coarse, image, r, r, 2.0, s, t));
        }
    }

    SUBCASE("fine lists in sampling order (not index order) give the same mask") {
        // fine points listed in an FPS-like shuffled order
        const std::vector<int> shuffled = {0, 8, 4, 12, 2, 6, 10, 14, 1, 3, 5, 7, 9, 11, 13, 15};
        const std::vector<int> image = {0, 8, 12, 4};
        const auto mask = weight_mask(space, space, coarse, image, r, r, shuffled, shuffled);
        for (int s = 0; s < 16; ++s) {
            std::vector<char> allowed(16, 0);
            for (int t : mask.allowed[s]) allowed[t] = 1;
            for (int t = 0; t < 16; ++t)
                CHECK(static_cast<bool>(allowed[t]) ==
                      !excluded_by_rule(space, space, coarse, image, r, r, 2.0, shuffled[s],
                                        shuffled[t]));
        }
    }
}

TEST_CASE("weight mask infeasible row reports the offending point") {
    // X: four collinear points; point 0 is covered by both anchors 1 and 2
    auto line_space = [](std::vector<double> coords) {
        const int n = static_cast<int>(coords.size());
        Eigen::MatrixXd d(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) d(i, j) = std::abs(coords[i] - coords[j]);
        return MetricSpace::explicit_matrix(d, 1.0);
    };
    const auto x = line_space({0.03, 0.0, 0.06, -0.05});
    const auto y = line_space({0.03, 0.0, 20.0, 19.97});
    const std::vector<int> coarse_x = {1, 2};
    const std::vector<int> image_y = {1, 2};  // images 20 apart
    std::vector<int> fine = {0, 1, 2, 3};
    try {
        (void)weight_mask(x, y, coarse_x, image_y, 0.05, 0.05, fine, fine);
        FAIL("expected InfeasibleMaskError");
    } catch (const InfeasibleMaskError& e) {
        CHECK(e.row == 0);
        CHECK(std::string(e.what()).find("Widening") != std::string::npos);
        CHECK(e.nearest_coarse == std::vector<int>{0, 1});
    }
}

TEST_CASE("sparse payoff") {
    const auto space = MetricSpace::circle(12.0, 12);
    MatchSet m;
    m.xi = {0, 4, 8};
    m.eta = {0, 4, 8};
    const auto p = resolved(1.5);
    const auto kx = kernel_matrix(space, m.xi, p);
    const auto ky = kernel_matrix(space, m.eta, p);
    const auto dense = payoff_dense(kx, ky);
    std::vector<int> fine(12);
    for (int i = 0; i < 12; ++i) fine[i] = i;

    SUBCASE("all-allowed mask reproduces the dense payoff") {
        WeightMask mask;
        mask.rows = mask.cols = 12;
        mask.allowed.assign(12, fine);
        const auto sparse = payoff_sparse(kx, ky, {}, mask, p);
        REQUIRE(sparse.nnz() == 144);
        for (int s = 0; s < 12; ++s)
            for (int it = sparse.row_offsets[s]; it < sparse.row_offsets[s + 1]; ++it)
                CHECK(sparse.values[it] ==
                      doctest::Approx(dense.values(s, sparse.col_index[it])).epsilon(1e-12));
    }

    SUBCASE("diagonal mask stores exactly n entries") {
        WeightMask mask;
        mask.rows = mask.cols = 12;
        mask.allowed.resize(12);
        for (int i = 0; i < 12; ++i) mask.allowed[i] = {i};
        const auto sparse = payoff_sparse(kx, ky, {}, mask, p);
        CHECK(sparse.nnz() == 12);
        for (int s = 0; s < 12; ++s) CHECK(sparse.col_index[sparse.row_offsets[s]] == s);
    }

    SUBCASE("streamed route agrees with the matrix route, pattern equals mask") {
        const std::vector<int> coarse = {0, 6};
        const auto mask = weight_mask(space, space, coarse, coarse, 3.0, 3.0, fine, fine);
        const auto a = payoff_sparse(kx, ky, {}, mask, p);
        const auto b = payoff_sparse_streamed(space, space, m.xi, m.eta, {}, fine, fine, mask, p);
        REQUIRE(a.nnz() == b.nnz());
        CHECK(a.col_index == b.col_index);
        std::size_t it = 0;
        for (int s = 0; s < mask.rows; ++s)
            for (int t : mask.allowed[s]) {
                CHECK(a.col_index[it] == t);
                CHECK(b.values[it] == doctest::Approx(a.values[it]).epsilon(1e-12));
                ++it;
            }
    }
}
