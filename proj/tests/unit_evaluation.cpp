#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "pmf/errors.hpp"
#include "pmf/evaluation.hpp"
#include "support/shapes.hpp"

using namespace pmf;

TEST_CASE("geodesic_errors") {
    SUBCASE("perfect agreement is all zeros") {
        const auto space = MetricSpace::circle(8.0, 8);
        const auto p = shapes::rotation(8, 3);
        const auto errors = geodesic_errors(p, p, space, 4.0);
        for (double e : errors) CHECK(e == 0.0);
    }
    SUBCASE("shift by one on the 8-circle: every error is 0.25 of the half-circumference") {
        const auto space = MetricSpace::circle(8.0, 8);
        const auto truth = Permutation::identity(8);
        const auto shifted = shapes::rotation(8, 1);
        const auto errors = geodesic_errors(shifted, truth, space, 4.0);
        for (double e : errors) CHECK(e == doctest::Approx(0.25));
    }
    SUBCASE("one vertex mapped to the antipode has error exactly 1") {
        const auto space = MetricSpace::circle(8.0, 8);
        std::vector<int> fwd = {4, 1, 2, 3, 0, 5, 6, 7};  // 0 <-> 4 swapped
        const auto perm = Permutation(std::move(fwd));
        const auto errors = geodesic_errors(perm, Permutation::identity(8), space, 4.0);
        CHECK(errors[0] == 1.0);
        CHECK(errors[4] == 1.0);
        for (int i : {1, 2, 3, 5, 6, 7}) CHECK(errors[i] == 0.0);
    }
    SUBCASE("zero exactly on the agreement set") {
        const auto space = MetricSpace::circle(16.0, 16);
        shapes::Rng rng(4);
        std::vector<int> fwd(16);
        std::iota(fwd.begin(), fwd.end(), 0);
        std::swap(fwd[2], fwd[9]);
        std::swap(fwd[5], fwd[11]);
        const Permutation perm(std::move(fwd));
        const auto errors = geodesic_errors(perm, Permutation::identity(16), space, 8.0);
        for (int i = 0; i < 16; ++i) CHECK((errors[i] == 0.0) == (perm(i) == i));
    }
}

TEST_CASE("error_curve") {
    SUBCASE("all-zero errors saturate immediately") {
        const std::vector<double> errors(5, 0.0);
        const std::vector<double> thresholds = {0.1, 0.2};
        const auto c = error_curve(errors, thresholds);
        CHECK(c.fractions == std::vector<double>{1.0, 1.0});
    }
    SUBCASE("exact counting, no interpolation") {
        const std::vector<double> errors = {0.0, 0.5, 1.0};
        const std::vector<double> thresholds = {0.25, 0.75, 1.0};
        const auto c = error_curve(errors, thresholds);
        CHECK(c.fractions[0] == doctest::Approx(1.0 / 3.0));
        CHECK(c.fractions[1] == doctest::Approx(2.0 / 3.0));
        CHECK(c.fractions[2] == doctest::Approx(1.0));
    }
    SUBCASE("matches an independent sort-and-scan oracle on seeded errors") {
        shapes::Rng rng(8);
        std::vector<double> errors(200);
        for (auto& e : errors) e = rng.uniform();
        const auto thresholds = default_thresholds();
        const auto c = error_curve(errors, thresholds);
        std::vector<double> sorted = errors;
        std::sort(sorted.begin(), sorted.end());
        for (size_t t = 0; t < thresholds.size(); ++t) {
            const auto it = std::upper_bound(sorted.begin(), sorted.end(), thresholds[t]);
            CHECK(c.fractions[t] ==
                  doctest::Approx(static_cast<double>(it - sorted.begin()) / 200.0));
        }
        // curve reaches 1 at any threshold >= max error
        CHECK(error_curve(errors, std::vector<double>{1.0}).fractions[0] == 1.0);
    }
    SUBCASE("fractions are nondecreasing") {
        shapes::Rng rng(9);
        std::vector<double> errors(64);
        for (auto& e : errors) e = rng.uniform() * 0.5;
        const auto c = error_curve(errors, default_thresholds());
        for (size_t i = 1; i < c.fractions.size(); ++i) CHECK(c.fractions[i] >= c.fractions[i - 1]);
    }
    SUBCASE("non-monotone thresholds rejected") {
        const std::vector<double> errors = {0.1};
        CHECK_THROWS_AS(error_curve(errors, std::vector<double>{0.2, 0.1}), UsageError);
    }
}

TEST_CASE("error curve CSV export") {
    const std::vector<double> errors = {0.0, 0.1};
    const auto c = error_curve(errors, std::vector<double>{0.05, 0.15});
    const auto path = std::filesystem::temp_directory_path() / "pmf_curve_test.csv";
    write_error_curve_csv(c, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "threshold,fraction");
    std::string line1;
    std::getline(in, line1);
    CHECK(line1 == "0.050000000000000003,0.5");
}

TEST_CASE("color transfer export") {
    const auto dir = std::filesystem::temp_directory_path() / "pmf_eval_tests";
    std::filesystem::create_directories(dir);

    SUBCASE("identity on identical meshes reproduces the mesh's own colormap") {
        const auto mesh = shapes::icosphere(1, 1.0);
        const auto path = dir / "identity.ply";
        color_transfer_export(mesh, mesh, Permutation::identity(mesh.vertex_count()), path);
        const auto reloaded = load_mesh(path);  // loader validates and skips colors
        CHECK(reloaded.vertex_count() == mesh.vertex_count());
        CHECK(reloaded.face_count() == mesh.face_count());

        // vertex at +x must be pure red-dominant in x channel: parse one line
        std::ifstream in(path);
        std::string line;
        while (std::getline(in, line) && line != "end_header") {
        }
        int reds = 0;
        for (int i = 0; i < mesh.vertex_count(); ++i) {
            std::getline(in, line);
            std::istringstream ls(line);
            double x, y, z;
            int r, g, b;
            ls >> x >> y >> z >> r >> g >> b;
            CHECK(r >= 0);
            CHECK(r <= 255);
            CHECK(g >= 0);
            CHECK(g <= 255);
            CHECK(b >= 0);
            CHECK(b <= 255);
            // identity: color encodes the vertex's own normalized position
            const int expect_r = static_cast<int>(std::lround(255.0 * (x - (-1.0)) / 2.0));
            if (r == expect_r) ++reds;
        }
        CHECK(reds == mesh.vertex_count());
    }

    SUBCASE("reversed ring permutation reverses the colors") {
        const auto ring = shapes::ring_mesh(8, 1.0, 0.2);
        const int n = ring.vertex_count();
        std::vector<int> rev(n);
        for (int i = 0; i < n; ++i) rev[i] = n - 1 - i;
        const Permutation reversal(std::move(rev));
        const auto path_rev = dir / "reversed.ply";
        const auto path_id = dir / "ring_id.ply";
        color_transfer_export(ring, ring, reversal, path_rev);
        color_transfer_export(ring, ring, Permutation::identity(n), path_id);

        auto read_colors = [](const std::filesystem::path& p, int count) {
            std::ifstream in(p);
            std::string line;
            while (std::getline(in, line) && line != "end_header") {
            }
            std::vector<std::array<int, 3>> colors(count);
            for (int i = 0; i < count; ++i) {
                std::getline(in, line);
                std::istringstream ls(line);
                double x, y, z;
                ls >> x >> y >> z >> colors[i][0] >> colors[i][1] >> colors[i][2];
            }
            return colors;
        };
        const auto reversed = read_colors(path_rev, n);
        const auto identity = read_colors(path_id, n);
        for (int j = 0; j < n; ++j) CHECK(reversed[j] == identity[n - 1 - j]);
    }
}
