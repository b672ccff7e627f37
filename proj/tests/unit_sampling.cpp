#include <doctest.h>

#include <filesystem>
#include <memory>

#include "pmf/errors.hpp"
#include "pmf/sampling.hpp"
#include "support/shapes.hpp"

using namespace pmf;

TEST_CASE("circle n=8: two samples land on antipodes, radius two arc steps") {
    const auto c = MetricSpace::circle(8.0, 8);
    const auto h = farthest_point_sampling(c, {2}, 0);
    REQUIRE(h.levels.size() == 1);
    CHECK(h.levels[0].indices == std::vector<int>{0, 4});
    CHECK(h.levels[0].radius == doctest::Approx(2.0));
}

TEST_CASE("circle n=8: greedy order [0,4,2,6] with ties to the smaller index") {
    const auto c = MetricSpace::circle(8.0, 8);
    const auto h = farthest_point_sampling(c, {2, 4}, 0);
    REQUIRE(h.levels.size() == 2);
    CHECK(h.levels[1].indices == std::vector<int>{0, 4, 2, 6});
    CHECK(h.levels[1].radius == doctest::Approx(1.0));
    CHECK(h.levels[0].radius > h.levels[1].radius);
}

TEST_CASE("sampling every vertex gives radius zero") {
    const auto c = MetricSpace::circle(5.0, 10);
    const auto h = farthest_point_sampling(c, {10}, 3);
    CHECK(h.levels[0].indices.size() == 10);
    CHECK(h.levels[0].radius == 0.0);
}

TEST_CASE("prefix property: [a] run is a prefix of [a,b] run") {
    const auto s = MetricSpace::mesh_geodesic(std::make_shared<TriMesh>(shapes::icosphere(2, 1.0)));
    const auto h1 = farthest_point_sampling(s, {12}, 0);
    const auto h2 = farthest_point_sampling(s, {12, 40}, 0);
    CHECK(std::equal(h1.levels[0].indices.begin(), h1.levels[0].indices.end(),
                     h2.levels[1].indices.begin()));
    CHECK(h1.levels[0].indices == h2.levels[0].indices);
    CHECK(h1.levels[0].radius == h2.levels[0].radius);
}

TEST_CASE("covering and separation properties") {
    const auto mesh = std::make_shared<TriMesh>(shapes::icosphere(2, 1.0));
    const auto s = MetricSpace::mesh_geodesic(mesh);
    const auto h = farthest_point_sampling(s, {8, 24, 60}, 0);
    for (const auto& level : h.levels) {
        // covering: every vertex within radius of some sample
        std::vector<double> mind(s.size(), 1e300);
        for (int sample : level.indices) {
            const auto col = s.distance_column(sample);
            for (int j = 0; j < s.size(); ++j) mind[j] = std::min(mind[j], (*col)[j]);
        }
        double worst = 0.0;
        for (double d : mind) worst = std::max(worst, d);
        CHECK(worst == doctest::Approx(level.radius));
        // separation: samples pairwise at least the covering radius apart
        for (size_t a = 0; a < level.indices.size(); ++a) {
            const auto col = s.distance_column(level.indices[a]);
            for (size_t b = a + 1; b < level.indices.size(); ++b)
                CHECK((*col)[level.indices[b]] >= level.radius - 1e-12);
        }
    }
}

TEST_CASE("graph-backed and generic FPS agree") {
    const auto mesh = std::make_shared<TriMesh>(shapes::icosphere(2, 1.0));
    const auto graph_space = MetricSpace::mesh_geodesic(mesh);
    auto explicit_space = MetricSpace::explicit_matrix(graph_space.full_distance_matrix());
    const auto ha = farthest_point_sampling(graph_space, {20}, 4);
    const auto hb = farthest_point_sampling(explicit_space, {20}, 4);
    CHECK(ha.levels[0].indices == hb.levels[0].indices);
    CHECK(ha.levels[0].radius == doctest::Approx(hb.levels[0].radius).epsilon(1e-12));
}

TEST_CASE("input validation") {
    const auto c = MetricSpace::circle(8.0, 8);
    CHECK_THROWS_AS(farthest_point_sampling(c, {9}, 0), UsageError);
    CHECK_THROWS_AS(farthest_point_sampling(c, {4, 2}, 0), UsageError);
    CHECK_THROWS_AS(farthest_point_sampling(c, {}, 0), UsageError);
    CHECK_THROWS_AS(farthest_point_sampling(c, {4}, 99), UsageError);
}

TEST_CASE("hierarchy text round trip") {
    const auto c = MetricSpace::circle(8.0, 8);
    const auto h = farthest_point_sampling(c, {2, 4}, 0);
    const auto path = std::filesystem::temp_directory_path() / "pmf_hier_test.txt";
    write_hierarchy(h, path);
    const auto loaded = load_hierarchy(path);
    REQUIRE(loaded.levels.size() == h.levels.size());
    for (size_t i = 0; i < h.levels.size(); ++i) {
        CHECK(loaded.levels[i].indices == h.levels[i].indices);
        CHECK(loaded.levels[i].radius == h.levels[i].radius);
    }
}

TEST_CASE("default schedule clips to n") {
    CHECK(default_level_schedule(27894) ==
          std::vector<int>{1000, 2000, 4000, 8000, 16000, 27894});
    CHECK(default_level_schedule(20000) ==
          std::vector<int>{1000, 2000, 4000, 8000, 16000, 20000});
    CHECK(default_level_schedule(16000) == std::vector<int>{1000, 2000, 4000, 8000, 16000});
    CHECK(default_level_schedule(642) == std::vector<int>{642});
}
