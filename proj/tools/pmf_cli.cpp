// pmf - dense bijective correspondence between discretized shapes via
// kernel density estimation in the product space and linear assignment.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "pmf/errors.hpp"
#include "pmf/evaluation.hpp"
#include "pmf/filter.hpp"
#include "pmf/parallel.hpp"

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string g_stage = "startup";

void stage(const std::string& s) { g_stage = s; }

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        try {
            out.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw pmf::UsageError("cannot parse integer list entry '" + tok + "'");
        }
    }
    if (out.empty()) throw pmf::UsageError("empty integer list");
    return out;
}

std::vector<int> load_index_list(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw pmf::ParseError("cannot open " + path.string());
    std::vector<int> ids;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        int v;
        while (ls >> v) ids.push_back(v);
    }
    if (ids.empty()) throw pmf::ParseError(path.string() + ": no indices found");
    return ids;
}

struct MatchOptions {
    std::string mesh_x, mesh_y, matches, out_prefix = "pmf_run";
    std::string samples_x, samples_y;
    double sigma_rel = 0.02;
    double sigma_decay = 1.0;
    int iters = 10;
    std::string solver = "auction";
    bool multiscale = false;
    std::string schedule;
    int seed_x = -1;  // default: first match pair anchors the hierarchies
    int seed_y = -1;
    int level_iters = 1;
    std::string widen = "fail";
    double widen_step = 1.5;
    int threads = 0;
};

json timings_json(const std::vector<std::pair<std::string, double>>& timings) {
    json t;
    for (const auto& [name, ms] : timings) t[name] = ms;
    return t;
}

int run_match(const MatchOptions& opt) {
    const auto t_start = std::chrono::steady_clock::now();
    std::vector<std::pair<std::string, double>> timings;

    stage("load");
    auto t0 = std::chrono::steady_clock::now();
    auto mesh_x = std::make_shared<pmf::TriMesh>(pmf::load_mesh(opt.mesh_x));
    auto mesh_y = std::make_shared<pmf::TriMesh>(pmf::load_mesh(opt.mesh_y));

    pmf::MetricSpace space_x = opt.samples_x.empty()
                                   ? pmf::MetricSpace::mesh_geodesic(mesh_x)
                                   : pmf::MetricSpace::submesh(mesh_x, load_index_list(opt.samples_x));
    pmf::MetricSpace space_y = opt.samples_y.empty()
                                   ? pmf::MetricSpace::mesh_geodesic(mesh_y)
                                   : pmf::MetricSpace::submesh(mesh_y, load_index_list(opt.samples_y));
    if (space_x.size() != space_y.size())
        throw pmf::ValidationError(
            "shapes have different point counts (" + std::to_string(space_x.size()) + " vs " +
            std::to_string(space_y.size()) + "); use 'pmf resample' to equalize them first");

    const auto matches = pmf::MatchSet::load(opt.matches);
    matches.validate(space_x.size(), space_y.size());
    timings.emplace_back("load_ms", ms_since(t0));

    pmf::PmfConfig cfg;
    cfg.kernel.sigma_sq_rel = opt.sigma_rel;
    cfg.sigma_decay = opt.sigma_decay;
    cfg.max_iters = opt.iters;
    cfg.level_inner_iters = opt.level_iters;
    if (opt.solver == "exact")
        cfg.solver = pmf::SolverKind::Exact;
    else if (opt.solver == "auction")
        cfg.solver = pmf::SolverKind::Auction;
    else
        throw pmf::UsageError("unknown solver '" + opt.solver + "' (expected exact|auction)");

    pmf::WidenPolicy policy = pmf::WidenPolicy::fail();
    if (opt.widen == "widen")
        policy = pmf::WidenPolicy::widen(opt.widen_step);
    else if (opt.widen != "fail")
        throw pmf::UsageError("unknown widen policy '" + opt.widen + "' (expected fail|widen)");

    std::vector<int> schedule;
    json hier_info;
    pmf::PmfResult result = [&] {
        if (!opt.multiscale) {
            stage("filter");
            t0 = std::chrono::steady_clock::now();
            auto r = pmf::pmf_single_scale(space_x, space_y, matches, cfg);
            timings.emplace_back("filter_ms", ms_since(t0));
            return r;
        }
        stage("hierarchy");
        t0 = std::chrono::steady_clock::now();
        schedule = opt.schedule.empty() ? pmf::default_level_schedule(space_x.size())
                                        : parse_int_list(opt.schedule);
        space_x.set_cache_capacity(2 * std::max<std::size_t>(matches.size(), schedule.front()));
        space_y.set_cache_capacity(2 * std::max<std::size_t>(matches.size(), schedule.front()));
        // hierarchies anchor at the first match pair unless overridden, so
        // the sought correspondence stays representable at coarse scales
        const int seed_x = opt.seed_x >= 0 ? opt.seed_x : matches.xi.front();
        const int seed_y = opt.seed_y >= 0 ? opt.seed_y : matches.eta.front();
        const auto hier_x = pmf::farthest_point_sampling(space_x, schedule, seed_x);
        const auto hier_y = pmf::farthest_point_sampling(space_y, schedule, seed_y);
        for (size_t i = 0; i < hier_x.levels.size(); ++i)
            hier_info.push_back({{"size", hier_x.levels[i].indices.size()},
                                 {"radius_x", hier_x.levels[i].radius},
                                 {"radius_y", hier_y.levels[i].radius}});
        timings.emplace_back("hierarchy_ms", ms_since(t0));

        stage("filter");
        t0 = std::chrono::steady_clock::now();
        auto r = pmf::pmf_multiscale(space_x, space_y, hier_x, hier_y, matches, cfg, policy);
        timings.emplace_back("filter_ms", ms_since(t0));
        return r;
    }();

    stage("write");
    const fs::path perm_path = opt.out_prefix + ".perm.txt";
    const fs::path manifest_path = opt.out_prefix + ".manifest.json";
    result.final.save(perm_path);

    json manifest;
    manifest["command"] = "match";
    manifest["version"] = kVersion;
    manifest["inputs"] = {{"mesh_x", opt.mesh_x}, {"mesh_y", opt.mesh_y}, {"matches", opt.matches}};
    if (!opt.samples_x.empty()) manifest["inputs"]["samples_x"] = opt.samples_x;
    if (!opt.samples_y.empty()) manifest["inputs"]["samples_y"] = opt.samples_y;
    manifest["config"] = {{"sigma_sq_rel", opt.sigma_rel},
                          {"sigma_sq_resolved", result.sigma_sq},
                          {"sigma_decay", opt.sigma_decay},
                          {"solver", opt.solver},
                          {"max_iters", opt.iters},
                          {"multiscale", opt.multiscale},
                          {"threads", pmf::thread_count()},
                          {"widen_policy", opt.widen},
                          {"level_inner_iters", opt.level_iters},
                          {"match_count", matches.size()}};
    if (opt.multiscale) {
        manifest["config"]["schedule"] = schedule;
        manifest["config"]["seed_x"] = opt.seed_x >= 0 ? opt.seed_x : matches.xi.front();
        manifest["config"]["seed_y"] = opt.seed_y >= 0 ? opt.seed_y : matches.eta.front();
        manifest["hierarchy"] = hier_info;
    }
    manifest["result"] = {{"iterations_run", result.iterations_run},
                          {"objective_trace", result.objective_trace},
                          {"auction_rounds", result.last_stats.rounds},
                          {"auction_final_eps", result.last_stats.final_eps}};
    if (!result.widenings.empty()) {
        json w = json::array();
        for (const auto& item : result.widenings)
            w.push_back({{"level", item.level}, {"factor", item.factor}});
        manifest["result"]["widenings"] = w;
    }
    manifest["outputs"] = {perm_path.string(), manifest_path.string()};
    manifest["timings_ms"] = timings_json(timings);
    manifest["timings_ms"]["total_ms"] = ms_since(t_start);

    std::ofstream mout(manifest_path);
    mout << manifest.dump(2) << '\n';
    if (!mout) throw pmf::Error("failed writing " + manifest_path.string());

    std::cout << "wrote " << perm_path.string() << " (" << result.iterations_run
              << " iterations, objective " << result.objective_trace.back() << ")\n";
    return 0;
}

int run_fps(const std::string& mesh_path, const std::string& sizes_csv, int seed,
            const std::string& out) {
    stage("load");
    auto mesh = std::make_shared<pmf::TriMesh>(pmf::load_mesh(mesh_path));
    auto space = pmf::MetricSpace::mesh_geodesic(mesh);
    stage("sampling");
    const auto sizes = sizes_csv.empty() ? pmf::default_level_schedule(space.size())
                                         : parse_int_list(sizes_csv);
    const auto hier = pmf::farthest_point_sampling(space, sizes, seed);
    stage("write");
    pmf::write_hierarchy(hier, out);
    std::cout << "wrote " << out << " (" << hier.levels.size() << " levels, coarsest radius "
              << hier.coarsest().radius << ")\n";
    return 0;
}

int run_eval(const std::string& perm_path, const std::string& truth_path,
             const std::string& mesh_path, double diameter, int diameter_samples,
             const std::string& out_csv) {
    stage("load");
    auto mesh = std::make_shared<pmf::TriMesh>(pmf::load_mesh(mesh_path));
    auto space = pmf::MetricSpace::mesh_geodesic(mesh);
    const auto perm = pmf::Permutation::load(perm_path);
    const auto truth = pmf::Permutation::load(truth_path);
    if (perm.size() != truth.size())
        throw pmf::ValidationError("permutation sizes differ: " + std::to_string(perm.size()) +
                                   " vs " + std::to_string(truth.size()));
    if (perm.size() != space.size())
        throw pmf::ValidationError("permutation size " + std::to_string(perm.size()) +
                                   " does not match mesh vertex count " +
                                   std::to_string(space.size()));

    stage("evaluate");
    if (diameter <= 0.0) diameter = pmf::shape_diameter(space, diameter_samples);
    auto errors = pmf::geodesic_errors(perm, truth, space, diameter);
    const auto curve = pmf::error_curve(errors, pmf::default_thresholds());

    stage("write");
    if (!out_csv.empty()) pmf::write_error_curve_csv(curve, out_csv);

    std::vector<double> sorted = errors;
    std::sort(sorted.begin(), sorted.end());
    const double mean =
        std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
    const double median = sorted[sorted.size() / 2];
    std::size_t below = 0;
    for (double e : errors) below += (e <= 0.05);
    char line[160];
    std::snprintf(line, sizeof(line), "mean %.6g, median %.6g, <=0.05: %.6g%%", mean, median,
                  100.0 * static_cast<double>(below) / static_cast<double>(errors.size()));
    std::cout << line << '\n';
    return 0;
}

int run_resample(const std::string& mesh_path, int count, int seed,
                 const std::string& out_prefix) {
    stage("load");
    auto mesh = std::make_shared<pmf::TriMesh>(pmf::load_mesh(mesh_path));
    auto space = pmf::MetricSpace::mesh_geodesic(mesh);
    const int n = space.size();
    if (count > n)
        throw pmf::UsageError("target count " + std::to_string(count) + " exceeds vertex count " +
                              std::to_string(n));
    if (count < 1) throw pmf::UsageError("target count must be positive");

    stage("sampling");
    std::vector<int> order;
    double radius = 0.0;
    if (count == n) {
        order.resize(n);
        std::iota(order.begin(), order.end(), 0);
    } else {
        const auto hier = pmf::farthest_point_sampling(space, {count}, seed);
        order = hier.levels[0].indices;
        radius = hier.levels[0].radius;
    }

    stage("write");
    const fs::path samples_path = out_prefix + ".samples.txt";
    {
        std::ofstream out(samples_path);
        out << "# sample position -> original vertex id; covering radius " << radius << '\n';
        for (int id : order) out << id << '\n';
        if (!out) throw pmf::Error("failed writing " + samples_path.string());
    }
    std::string metric_note = "metric left on-demand (use --samples-x/--samples-y with the mesh)";
    if (count <= space.matrix_cap()) {
        auto sub = pmf::MetricSpace::submesh(mesh, order);
        Eigen::MatrixXd d = sub.full_distance_matrix();
        const fs::path metric_path = out_prefix + ".metric.txt";
        std::ofstream out(metric_path);
        out << count << '\n';
        char buf[40];
        for (int i = 0; i < count; ++i) {
            for (int j = 0; j < count; ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", d(i, j));
                out << buf << (j + 1 == count ? '\n' : ' ');
            }
        }
        if (!out) throw pmf::Error("failed writing " + metric_path.string());
        metric_note = "explicit metric in " + metric_path.string();
    }
    std::cout << "wrote " << samples_path.string() << " (" << count << " samples, covering radius "
              << radius << "; " << metric_note << ")\n";
    return 0;
}

int run_transfer(const std::string& mesh_x_path, const std::string& mesh_y_path,
                 const std::string& perm_path, const std::string& out) {
    stage("load");
    const auto mesh_x = pmf::load_mesh(mesh_x_path);
    const auto mesh_y = pmf::load_mesh(mesh_y_path);
    const auto perm = pmf::Permutation::load(perm_path);
    stage("write");
    pmf::color_transfer_export(mesh_x, mesh_y, perm, out);
    std::cout << "wrote " << out << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "pmf: recover dense bijective correspondences between discretized shapes by kernel "
        "density estimation in the product space + linear assignment. All vertex indices are "
        "0-based."};
    app.require_subcommand(1);
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    app.add_option("--threads", threads, "worker threads (results do not depend on this)")
        ->capture_default_str();

    // match
    MatchOptions mo;
    auto* match = app.add_subcommand("match", "filter a match set into a dense bijection");
    match->add_option("mesh-x", mo.mesh_x, "source mesh (.off/.ply)")
        ->required()
        ->check(CLI::ExistingFile);
    match->add_option("mesh-y", mo.mesh_y, "target mesh (.off/.ply)")
        ->required()
        ->check(CLI::ExistingFile);
    match->add_option("matches", mo.matches, "match file: 'xi eta [weight]' per line")
        ->required()
        ->check(CLI::ExistingFile);
    match->add_option("-o,--out-prefix", mo.out_prefix, "output prefix")->capture_default_str();
    match->add_option("--sigma-rel", mo.sigma_rel, "kernel sigma^2 as a fraction of target area")
        ->capture_default_str();
    match->add_option("--sigma-decay", mo.sigma_decay, "per-iteration multiplier on sigma^2")
        ->capture_default_str();
    match->add_option("--iters", mo.iters, "max filter iterations")->capture_default_str();
    match->add_option("--solver", mo.solver, "assignment solver: auction|exact")
        ->capture_default_str();
    match->add_flag("--multiscale", mo.multiscale, "coarse-to-fine pipeline");
    match->add_option("--schedule", mo.schedule,
                      "comma-separated level sizes (default 1000,2000,4000,8000,16000,n)");
    match->add_option("--seed-x", mo.seed_x,
                      "hierarchy seed vertex on mesh-x (default: first match's xi)");
    match->add_option("--seed-y", mo.seed_y,
                      "hierarchy seed vertex on mesh-y (default: first match's eta)");
    match->add_option("--level-iters", mo.level_iters, "assignment solves per refinement level")
        ->capture_default_str();
    match->add_option("--widen-policy", mo.widen, "on infeasible vicinity mask: fail|widen")
        ->capture_default_str();
    match->add_option("--widen-step", mo.widen_step, "vicinity factor multiplier per retry")
        ->capture_default_str();
    match->add_option("--samples-x", mo.samples_x,
                      "restrict mesh-x to these vertex ids (resample output); match indices then "
                      "refer to sample positions")
        ->check(CLI::ExistingFile);
    match->add_option("--samples-y", mo.samples_y, "restrict mesh-y to these vertex ids")
        ->check(CLI::ExistingFile);

    // fps
    std::string fps_mesh, fps_sizes, fps_out = "hierarchy.txt";
    int fps_seed = 0;
    auto* fps = app.add_subcommand("fps", "farthest-point sampling hierarchy");
    fps->add_option("mesh", fps_mesh, "mesh (.off/.ply)")->required()->check(CLI::ExistingFile);
    fps->add_option("--sizes", fps_sizes, "comma-separated strictly increasing level sizes");
    fps->add_option("--seed", fps_seed, "seed vertex")->capture_default_str();
    fps->add_option("-o,--out", fps_out, "output hierarchy file")->capture_default_str();

    // eval
    std::string ev_perm, ev_truth, ev_mesh, ev_csv;
    double ev_diameter = 0.0;
    int ev_diameter_samples = 50;
    auto* ev = app.add_subcommand("eval", "geodesic error of a permutation against ground truth");
    ev->add_option("perm", ev_perm, "permutation file ('i p_i' lines)")
        ->required()
        ->check(CLI::ExistingFile);
    ev->add_option("truth", ev_truth, "ground-truth permutation file")
        ->required()
        ->check(CLI::ExistingFile);
    ev->add_option("mesh-y", ev_mesh, "target mesh (errors are measured on it)")
        ->required()
        ->check(CLI::ExistingFile);
    ev->add_option("--diameter", ev_diameter, "shape diameter override (skip estimation)");
    ev->add_option("--diameter-samples", ev_diameter_samples,
                   "farthest-point samples for diameter estimation")
        ->capture_default_str();
    ev->add_option("-o,--out", ev_csv, "write 'threshold,fraction' CSV here");

    // resample
    std::string rs_mesh, rs_prefix = "resampled";
    int rs_count = 0, rs_seed = 0;
    auto* rs = app.add_subcommand("resample", "farthest-point subset of a mesh, with metric");
    rs->add_option("mesh", rs_mesh, "mesh (.off/.ply)")->required()->check(CLI::ExistingFile);
    rs->add_option("count", rs_count, "target point count")->required();
    rs->add_option("--seed", rs_seed, "seed vertex")->capture_default_str();
    rs->add_option("-o,--out-prefix", rs_prefix, "output prefix")->capture_default_str();

    // transfer
    std::string tr_mesh_x, tr_mesh_y, tr_perm, tr_out = "transfer.ply";
    auto* tr = app.add_subcommand("transfer", "color-transfer visualization as colored PLY");
    tr->add_option("mesh-x", tr_mesh_x, "source mesh")->required()->check(CLI::ExistingFile);
    tr->add_option("mesh-y", tr_mesh_y, "target mesh")->required()->check(CLI::ExistingFile);
    tr->add_option("perm", tr_perm, "permutation file")->required()->check(CLI::ExistingFile);
    tr->add_option("-o,--out", tr_out, "output PLY")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    pmf::set_thread_count(threads > 0 ? threads : 1);

    try {
        if (app.got_subcommand(match)) return run_match(mo);
        if (app.got_subcommand(fps)) return run_fps(fps_mesh, fps_sizes, fps_seed, fps_out);
        if (app.got_subcommand(ev))
            return run_eval(ev_perm, ev_truth, ev_mesh, ev_diameter, ev_diameter_samples, ev_csv);
        if (app.got_subcommand(rs)) return run_resample(rs_mesh, rs_count, rs_seed, rs_prefix);
        if (app.got_subcommand(tr)) return run_transfer(tr_mesh_x, tr_mesh_y, tr_perm, tr_out);
    } catch (const pmf::UsageError& e) {
        std::cerr << "error [" << g_stage << "]: " << e.what() << '\n';
        return 2;
    } catch (const pmf::ParseError& e) {
        std::cerr << "error [" << g_stage << "]: " << e.what() << '\n';
        return 3;
    } catch (const pmf::ValidationError& e) {
        std::cerr << "error [" << g_stage << "]: " << e.what() << '\n';
        return 3;
    } catch (const pmf::SizeCapError& e) {
        std::cerr << "error [" << g_stage << "]: " << e.what() << '\n';
        return 3;
    } catch (const pmf::InfeasibleMaskError& e) {
        std::cerr << "error [" << g_stage << "]: " << e.what() << '\n';
        return 4;
    } catch (const pmf::InfeasibleAssignmentError& e) {
        std::cerr << "error [" << g_stage << "]: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error [" << g_stage << "]: " << e.what() << '\n';
        return 5;
    }
    return 0;
}
