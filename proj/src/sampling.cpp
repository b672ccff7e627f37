#include "pmf/sampling.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>

#include "pmf/errors.hpp"

namespace pmf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Incremental multi-source Dijkstra: relaxes mind[] (distances on the
// parent graph to the nearest chosen sample) from a newly added source,
// visiting only the region the new sample conquers.
void relax_from(const TriMesh& mesh, int parent_source, std::vector<double>& mind) {
    const auto& offsets = mesh.adjacency_offsets();
    const auto& targets = mesh.adjacency_targets();
    const auto& weights = mesh.adjacency_weights();
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    if (0.0 >= mind[parent_source]) return;
    mind[parent_source] = 0.0;
    heap.emplace(0.0, parent_source);
    while (!heap.empty()) {
        const auto [d, u] = heap.top();
        heap.pop();
        if (d > mind[u]) continue;
        for (int it = offsets[u]; it < offsets[u + 1]; ++it) {
            const int v = targets[it];
            const double nd = d + weights[it];
            if (nd < mind[v]) {
                mind[v] = nd;
                heap.emplace(nd, v);
            }
        }
    }
}

}  // namespace

SamplingHierarchy farthest_point_sampling(const MetricSpace& space,
                                          const std::vector<int>& level_sizes, int seed) {
    const int n = space.size();
    if (level_sizes.empty()) throw UsageError("farthest_point_sampling: no level sizes given");
    for (size_t i = 0; i < level_sizes.size(); ++i) {
        if (level_sizes[i] < 1 || level_sizes[i] > n)
            throw UsageError("farthest_point_sampling: level size " +
                             std::to_string(level_sizes[i]) + " outside [1," + std::to_string(n) +
                             "]");
        if (i > 0 && level_sizes[i] <= level_sizes[i - 1])
            throw UsageError("farthest_point_sampling: level sizes must be strictly increasing");
    }
    if (seed < 0 || seed >= n) throw UsageError("farthest_point_sampling: seed out of range");

    SamplingHierarchy h;
    h.seed = seed;

    const TriMesh* mesh = space.mesh();
    const bool graph = space.is_graph_backed();

    // For graph-backed spaces mind lives on parent vertices (the pruned
    // Dijkstra needs the whole graph); the argmax reads it through
    // original_id. Otherwise mind lives on the space's points directly.
    std::vector<double> mind_parent;
    std::vector<double> mind;
    if (graph)
        mind_parent.assign(mesh->vertex_count(), kInf);
    else
        mind.assign(n, kInf);

    auto mind_at = [&](int j) { return graph ? mind_parent[space.original_id(j)] : mind[j]; };
    auto next_farthest = [&] {
        int best = 0;
        double best_val = mind_at(0);
        for (int j = 1; j < n; ++j) {
            const double d = mind_at(j);
            if (d > best_val) {
                best_val = d;
                best = j;
            }
        }
        return std::make_pair(best, best_val);
    };

    std::vector<int> order;
    order.reserve(level_sizes.back());

    auto add_sample = [&](int idx) {
        order.push_back(idx);
        if (graph) {
            relax_from(*mesh, space.original_id(idx), mind_parent);
        } else {
            const auto col = space.distance_column(idx);
            const auto& c = *col;
            for (int j = 0; j < n; ++j)
                if (c[j] < mind[j]) mind[j] = c[j];
        }
    };

    add_sample(seed);
    size_t level = 0;
    while (level < level_sizes.size()) {
        const auto [far, far_dist] = next_farthest();
        if (static_cast<int>(order.size()) == level_sizes[level]) {
            h.levels.push_back({order, far_dist});
            ++level;
            continue;
        }
        add_sample(far);
    }

    for (size_t i = 1; i < h.levels.size(); ++i)
        if (!(h.levels[i].radius < h.levels[i - 1].radius) &&
            h.levels[i].radius != 0.0)
            throw Error("farthest_point_sampling: covering radii did not strictly decrease");
    return h;
}

double shape_diameter(const MetricSpace& space, int sample_count, int seed) {
    if (sample_count < 2) throw UsageError("shape_diameter needs sample_count >= 2");
    const int k = std::min(sample_count, space.size());
    if (k < 2) {
        // single-point space
        return 0.0;
    }
    const auto h = farthest_point_sampling(space, {k}, seed);
    const auto& s = h.levels[0].indices;
    double diameter = 0.0;
    for (int a = 0; a < k; ++a) {
        const auto col = space.distance_column(s[a]);
        for (int b = a + 1; b < k; ++b) diameter = std::max(diameter, (*col)[s[b]]);
    }
    return diameter;
}

std::vector<int> default_level_schedule(int n) {
    std::vector<int> sizes;
    for (int s : {1000, 2000, 4000, 8000, 16000})
        if (s < n) sizes.push_back(s);
    sizes.push_back(n);
    return sizes;
}

void write_hierarchy(const SamplingHierarchy& h, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    char buf[40];
    for (const auto& lvl : h.levels) {
        std::snprintf(buf, sizeof(buf), "%.17g", lvl.radius);
        out << lvl.indices.size() << ' ' << buf;
        for (int idx : lvl.indices) out << ' ' << idx;
        out << '\n';
    }
    if (!out) throw Error("failed writing " + path.string());
}

SamplingHierarchy load_hierarchy(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    SamplingHierarchy h;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream ls(line);
        size_t count;
        double radius;
        if (!(ls >> count >> radius))
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": expected 'n_i r_i idx...'");
        SamplingHierarchy::Level lvl;
        lvl.radius = radius;
        lvl.indices.resize(count);
        for (size_t i = 0; i < count; ++i)
            if (!(ls >> lvl.indices[i]))
                throw ParseError(path.string() + ":" + std::to_string(line_no) +
                                 ": level lists " + std::to_string(count) + " indices but has fewer");
        h.levels.push_back(std::move(lvl));
    }
    if (h.levels.empty()) throw ParseError(path.string() + ": empty hierarchy file");
    if (!h.levels[0].indices.empty()) h.seed = h.levels[0].indices[0];
    return h;
}

}  // namespace pmf
