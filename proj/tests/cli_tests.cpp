// End-to-end tests of the pmf command-line tool. The binary path comes in
// through PMF_CLI_PATH; fixtures are generated into a temp directory.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pmf/assignment.hpp"
#include "pmf/density.hpp"
#include "pmf/geometry.hpp"
#include "support/shapes.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code;
    std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
    const fs::path out = fs::temp_directory_path() / "pmf_cli_out.txt";
    const std::string cmd = std::string(PMF_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    int code = -1;
    if (WIFEXITED(status)) code = WEXITSTATUS(status);
    return {code, ss.str()};
}

fs::path work_dir() {
    const auto dir = fs::temp_directory_path() / "pmf_cli_tests";
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Ring pair related by a known rotation of k ring positions.
struct RingFixture {
    fs::path mesh_x, mesh_y, matches, truth;
    pmf::Permutation truth_perm = pmf::Permutation::identity(1);
};

RingFixture make_ring_fixture(int ring_count, int shift_positions) {
    const auto dir = work_dir();
    const auto mesh = shapes::ring_mesh(ring_count, 1.0, 0.3);
    const int n = mesh.vertex_count();
    const auto order = shapes::rotation(n, 2 * shift_positions);  // interleaved layout
    const auto mesh_y = shapes::relabel(mesh, order);
    // Y vertex j carries X vertex order(j): the true map X->Y is order^-1
    std::vector<int> truth_fwd = order.inverse();
    pmf::Permutation truth(std::move(truth_fwd));

    RingFixture fx;
    fx.mesh_x = dir / "ring_x.off";
    fx.mesh_y = dir / "ring_y.off";
    fx.matches = dir / "ring_seeds.txt";
    fx.truth = dir / "ring_truth.txt";
    pmf::write_mesh(mesh, fx.mesh_x, pmf::MeshFormat::Off);
    pmf::write_mesh(mesh_y, fx.mesh_y, pmf::MeshFormat::Off);
    {
        std::ofstream out(fx.matches);
        out << 0 << ' ' << truth(0) << '\n';
        const int second = 2 * (ring_count / 3);
        out << second << ' ' << truth(second) << '\n';
    }
    truth.save(fx.truth);
    fx.truth_perm = std::move(truth);
    return fx;
}

}  // namespace

TEST_CASE("fps: ring fixture with two levels") {
    const auto dir = work_dir();
    const auto mesh_path = dir / "fps_ring.off";
    pmf::write_mesh(shapes::ring_mesh(8), mesh_path, pmf::MeshFormat::Off);
    const auto out = dir / "hier.txt";

    const auto r = run_cli("fps " + mesh_path.string() + " --sizes 2,4 -o " + out.string());
    CHECK(r.exit_code == 0);
    std::ifstream in(out);
    int lines = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 2);
}

TEST_CASE("fps: non-monotone sizes are a usage error") {
    const auto dir = work_dir();
    const auto mesh_path = dir / "fps_ring2.off";
    pmf::write_mesh(shapes::ring_mesh(8), mesh_path, pmf::MeshFormat::Off);
    const auto r = run_cli("fps " + mesh_path.string() + " --sizes 4,2 -o " +
                           (dir / "h.txt").string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("increasing") != std::string::npos);
}

TEST_CASE("match: ring pair, two seeds, recovers the ground-truth rotation") {
    const auto fx = make_ring_fixture(16, 3);
    const auto prefix = (work_dir() / "ring_run").string();
    // the thin ring needs a wider kernel than the 2% default
    const auto r = run_cli("match " + fx.mesh_x.string() + " " + fx.mesh_y.string() + " " +
                           fx.matches.string() + " --sigma-rel 0.2 -o " + prefix);
    REQUIRE(r.exit_code == 0);
    const auto perm = pmf::Permutation::load(prefix + ".perm.txt");
    CHECK(perm == fx.truth_perm);
}

TEST_CASE("match: default flags are recorded in the manifest") {
    const auto fx = make_ring_fixture(16, 3);
    const auto prefix = (work_dir() / "ring_defaults").string();
    const auto r = run_cli("match " + fx.mesh_x.string() + " " + fx.mesh_y.string() + " " +
                           fx.matches.string() + " -o " + prefix);
    REQUIRE(r.exit_code == 0);
    // output is a valid bijection regardless of recovery quality
    (void)pmf::Permutation::load(prefix + ".perm.txt");
    const auto manifest = read_file(prefix + ".manifest.json");
    CHECK(manifest.find("\"sigma_sq_rel\": 0.02") != std::string::npos);
    CHECK(manifest.find("\"solver\": \"auction\"") != std::string::npos);
    CHECK(manifest.find("\"sigma_sq_resolved\"") != std::string::npos);
}

TEST_CASE("match: multiscale run matches the single-scale result on the ring pair") {
    const auto fx = make_ring_fixture(16, 3);
    const auto prefix = (work_dir() / "ring_ms").string();
    const auto r = run_cli("match " + fx.mesh_x.string() + " " + fx.mesh_y.string() + " " +
                           fx.matches.string() +
                           " --sigma-rel 0.2 --multiscale --schedule 8,16,32 -o " + prefix);
    REQUIRE(r.exit_code == 0);
    const auto perm = pmf::Permutation::load(prefix + ".perm.txt");
    CHECK(perm == fx.truth_perm);
    const auto manifest = read_file(prefix + ".manifest.json");
    CHECK(manifest.find("\"schedule\"") != std::string::npos);
}

TEST_CASE("match: missing match file is a usage error") {
    const auto fx = make_ring_fixture(8, 1);
    const auto r = run_cli("match " + fx.mesh_x.string() + " " + fx.mesh_y.string() +
                           " /nonexistent/matches.txt -o " + (work_dir() / "x").string());
    CHECK(r.exit_code == 2);
}

TEST_CASE("match: different vertex counts point at resample, exit 3") {
    const auto dir = work_dir();
    const auto a = dir / "count_a.off";
    const auto b = dir / "count_b.off";
    pmf::write_mesh(shapes::ring_mesh(8), a, pmf::MeshFormat::Off);
    pmf::write_mesh(shapes::ring_mesh(10), b, pmf::MeshFormat::Off);
    const auto seeds = dir / "count_seeds.txt";
    {
        std::ofstream out(seeds);
        out << "0 0\n";
    }
    const auto r = run_cli("match " + a.string() + " " + b.string() + " " + seeds.string() +
                           " -o " + (dir / "count_run").string());
    CHECK(r.exit_code == 3);
    CHECK(r.output.find("resample") != std::string::npos);
}

TEST_CASE("match: unknown solver is a usage error") {
    const auto fx = make_ring_fixture(8, 1);
    const auto r = run_cli("match " + fx.mesh_x.string() + " " + fx.mesh_y.string() + " " +
                           fx.matches.string() + " --solver simplex -o " +
                           (work_dir() / "y").string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("solver") != std::string::npos);
}

TEST_CASE("eval: perfect permutation reports mean 0 and writes the CSV") {
    const auto fx = make_ring_fixture(12, 2);
    const auto csv = (work_dir() / "errors.csv").string();
    const auto r = run_cli("eval " + fx.truth.string() + " " + fx.truth.string() + " " +
                           fx.mesh_y.string() + " -o " + csv);
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("mean 0") != std::string::npos);
    CHECK(r.output.find("<=0.05: 100%") != std::string::npos);
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "threshold,fraction");
}

TEST_CASE("eval: mean error of a one-step rotation matches hand arithmetic") {
    // identity vs rotation by one ring position on the ring mesh, with a
    // pinned diameter: every vertex moves by exactly one chord
    const auto dir = work_dir();
    const int ring = 12;
    const auto mesh = shapes::ring_mesh(ring, 1.0, 0.3);
    const int n = mesh.vertex_count();
    const auto mesh_path = dir / "eval_ring.off";
    pmf::write_mesh(mesh, mesh_path, pmf::MeshFormat::Off);
    const auto id_path = dir / "eval_id.txt";
    const auto rot_path = dir / "eval_rot.txt";
    pmf::Permutation::identity(n).save(id_path);
    shapes::rotation(n, 2).save(rot_path);

    const double chord_out = (mesh.vertices()[0] - mesh.vertices()[2]).norm();
    const double chord_in = (mesh.vertices()[1] - mesh.vertices()[3]).norm();
    const double expected_mean = (chord_out + chord_in) / 2.0 / 2.0;  // diameter 2

    const auto r = run_cli("eval " + rot_path.string() + " " + id_path.string() + " " +
                           mesh_path.string() + " --diameter 2");
    REQUIRE(r.exit_code == 0);
    std::istringstream parse(r.output.substr(r.output.find("mean ") + 5));
    double mean = -1;
    parse >> mean;
    CHECK(mean == doctest::Approx(expected_mean).epsilon(1e-4));
}

TEST_CASE("eval: mismatched permutation lengths name both sizes, exit 3") {
    const auto dir = work_dir();
    const auto fx = make_ring_fixture(8, 1);
    const auto small = dir / "small_perm.txt";
    pmf::Permutation::identity(4).save(small);
    const auto r = run_cli("eval " + small.string() + " " + fx.truth.string() + " " +
                           fx.mesh_y.string());
    CHECK(r.exit_code == 3);
    CHECK(r.output.find("4") != std::string::npos);
    CHECK(r.output.find("16") != std::string::npos);
}

TEST_CASE("resample") {
    const auto dir = work_dir();
    const auto mesh_path = dir / "resample_sphere.ply";
    pmf::write_mesh(shapes::icosphere(3, 1.0), mesh_path, pmf::MeshFormat::PlyAscii);

    SUBCASE("target equal to n gives the identity map") {
        const auto prefix = (dir / "rs_full").string();
        const auto mesh_small = dir / "rs_ring.off";
        pmf::write_mesh(shapes::ring_mesh(8), mesh_small, pmf::MeshFormat::Off);
        const auto r = run_cli("resample " + mesh_small.string() + " 16 -o " + prefix);
        REQUIRE(r.exit_code == 0);
        std::ifstream in(prefix + ".samples.txt");
        std::string line;
        std::getline(in, line);  // comment
        for (int i = 0; i < 16; ++i) {
            std::getline(in, line);
            CHECK(line == std::to_string(i));
        }
    }
    SUBCASE("target above n is a usage error") {
        const auto r = run_cli("resample " + mesh_path.string() + " 99999 -o " +
                               (dir / "rs_over").string());
        CHECK(r.exit_code == 2);
    }
    SUBCASE("100 samples from the 642-sphere, with covering radius and explicit metric") {
        const auto prefix = (dir / "rs100").string();
        const auto r = run_cli("resample " + mesh_path.string() + " 100 -o " + prefix);
        REQUIRE(r.exit_code == 0);
        CHECK(r.output.find("covering radius") != std::string::npos);
        CHECK(fs::exists(prefix + ".metric.txt"));
        const auto space = pmf::MetricSpace::load_explicit(prefix + ".metric.txt");
        CHECK(space.size() == 100);
    }
}

TEST_CASE("transfer: writes a reloadable colored PLY") {
    const auto fx = make_ring_fixture(10, 2);
    const auto out = (work_dir() / "transfer.ply").string();
    const auto r = run_cli("transfer " + fx.mesh_x.string() + " " + fx.mesh_y.string() + " " +
                           fx.truth.string() + " -o " + out);
    REQUIRE(r.exit_code == 0);
    const auto reloaded = pmf::load_mesh(out);
    CHECK(reloaded.vertex_count() == 20);
}

TEST_CASE("determinism: identical invocations produce byte-identical outputs") {
    const auto fx = make_ring_fixture(16, 5);
    const auto p1 = (work_dir() / "det_a").string();
    const auto p2 = (work_dir() / "det_b").string();
    const std::string tail = fx.mesh_x.string() + " " + fx.mesh_y.string() + " " +
                             fx.matches.string() + " --sigma-rel 0.2";
    REQUIRE(run_cli("match " + tail + " -o " + p1).exit_code == 0);
    REQUIRE(run_cli("match " + tail + " -o " + p2).exit_code == 0);
    CHECK(read_file(p1 + ".perm.txt") == read_file(p2 + ".perm.txt"));

    const auto csv1 = (work_dir() / "det_a.csv").string();
    const auto csv2 = (work_dir() / "det_b.csv").string();
    REQUIRE(run_cli("eval " + p1 + ".perm.txt " + fx.truth.string() + " " + fx.mesh_y.string() +
                    " -o " + csv1)
                .exit_code == 0);
    REQUIRE(run_cli("eval " + p2 + ".perm.txt " + fx.truth.string() + " " + fx.mesh_y.string() +
                    " -o " + csv2)
                .exit_code == 0);
    CHECK(read_file(csv1) == read_file(csv2));
}

TEST_CASE("threads flag does not change results") {
    const auto fx = make_ring_fixture(16, 4);
    const auto p1 = (work_dir() / "thr_1").string();
    const auto p2 = (work_dir() / "thr_4").string();
    const std::string tail = fx.mesh_x.string() + " " + fx.mesh_y.string() + " " +
                             fx.matches.string() +
                             " --sigma-rel 0.2 --multiscale --schedule 8,16,32";
    REQUIRE(run_cli("--threads 1 match " + tail + " -o " + p1).exit_code == 0);
    REQUIRE(run_cli("--threads 4 match " + tail + " -o " + p2).exit_code == 0);
    CHECK(read_file(p1 + ".perm.txt") == read_file(p2 + ".perm.txt"));
}
