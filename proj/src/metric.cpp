#include "pmf/metric.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <list>
#include <mutex>
#include <queue>
#include <sstream>
#include <unordered_map>

#include "pmf/errors.hpp"

namespace pmf {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// Dijkstra over a CSR graph with a lazy binary heap. Deterministic: the
// heap breaks distance ties by smaller vertex index.
void dijkstra(const std::vector<int>& offsets, const std::vector<int>& targets,
              const std::vector<double>& weights, int source, double radius,
              std::vector<double>& dist) {
    const int n = static_cast<int>(offsets.size()) - 1;
    dist.assign(n, kInf);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    dist[source] = 0.0;
    heap.emplace(0.0, source);
    while (!heap.empty()) {
        const auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        if (d > radius) break;  // all remaining entries are farther
        for (int it = offsets[u]; it < offsets[u + 1]; ++it) {
            const int v = targets[it];
            const double nd = d + weights[it];
            if (nd < dist[v]) {
                dist[v] = nd;
                heap.emplace(nd, v);
            }
        }
    }
}

}  // namespace

struct MetricSpace::ColumnCache {
    std::mutex mu;
    std::size_t capacity = 1024;
    std::size_t byte_budget = std::size_t(512) << 20;
    std::list<int> lru;  // front = most recent
    std::unordered_map<int, std::pair<std::shared_ptr<const std::vector<double>>,
                                      std::list<int>::iterator>>
        map;

    std::shared_ptr<const std::vector<double>> get(int source) {
        std::lock_guard<std::mutex> lock(mu);
        auto it = map.find(source);
        if (it == map.end()) return nullptr;
        lru.splice(lru.begin(), lru, it->second.second);
        return it->second.first;
    }

    std::shared_ptr<const std::vector<double>> put(
        int source, std::shared_ptr<const std::vector<double>> col) {
        std::lock_guard<std::mutex> lock(mu);
        auto it = map.find(source);
        if (it != map.end()) {
            // another thread raced us; keep the stored column for bit-identity
            lru.splice(lru.begin(), lru, it->second.second);
            return it->second.first;
        }
        const std::size_t col_bytes = col->size() * sizeof(double) + 64;
        const std::size_t max_cols =
            std::max<std::size_t>(1, std::min(capacity, byte_budget / std::max<std::size_t>(1, col_bytes)));
        while (map.size() >= max_cols) {
            map.erase(lru.back());
            lru.pop_back();
        }
        lru.push_front(source);
        map.emplace(source, std::make_pair(col, lru.begin()));
        return col;
    }
};

MetricSpace MetricSpace::mesh_geodesic(std::shared_ptr<const TriMesh> mesh) {
    MetricSpace s;
    s.kind_ = Kind::MeshGeodesic;
    s.n_ = mesh->vertex_count();
    s.mesh_ = std::move(mesh);
    s.cache_ = std::make_shared<ColumnCache>();
    return s;
}

MetricSpace MetricSpace::submesh(std::shared_ptr<const TriMesh> mesh, std::vector<int> vertex_ids) {
    MetricSpace s;
    s.kind_ = Kind::Submesh;
    s.n_ = static_cast<int>(vertex_ids.size());
    if (s.n_ == 0) throw UsageError("submesh needs at least one vertex id");
    s.parent_to_local_.assign(mesh->vertex_count(), -1);
    for (int i = 0; i < s.n_; ++i) {
        const int id = vertex_ids[i];
        if (id < 0 || id >= mesh->vertex_count())
            throw ValidationError("submesh vertex id " + std::to_string(id) + " out of range");
        if (s.parent_to_local_[id] != -1)
            throw ValidationError("submesh vertex id " + std::to_string(id) + " repeated");
        s.parent_to_local_[id] = i;
    }
    s.mesh_ = std::move(mesh);
    s.vertex_ids_ = std::move(vertex_ids);
    s.cache_ = std::make_shared<ColumnCache>();
    return s;
}

MetricSpace MetricSpace::circle(double circumference, int n) {
    if (circumference <= 0.0) throw UsageError("circle circumference must be positive");
    if (n < 1) throw UsageError("circle needs at least one point");
    MetricSpace s;
    s.kind_ = Kind::Circle;
    s.n_ = n;
    s.circumference_ = circumference;
    s.cache_ = std::make_shared<ColumnCache>();
    return s;
}

MetricSpace MetricSpace::explicit_matrix(Eigen::MatrixXd distances, std::optional<double> area_hint) {
    MetricSpace s;
    s.kind_ = Kind::Explicit;
    if (distances.rows() != distances.cols())
        throw ValidationError("explicit distance matrix must be square");
    s.n_ = static_cast<int>(distances.rows());
    s.explicit_d_ = std::move(distances);
    s.area_hint_ = area_hint;
    s.cache_ = std::make_shared<ColumnCache>();
    s.validate_explicit();
    return s;
}

void MetricSpace::validate_explicit() const {
    const auto& d = explicit_d_;
    for (int i = 0; i < n_; ++i) {
        if (d(i, i) != 0.0)
            throw ValidationError("explicit metric: nonzero diagonal at " + std::to_string(i));
        for (int j = i + 1; j < n_; ++j) {
            if (d(i, j) < 0.0)
                throw ValidationError("explicit metric: negative distance at (" +
                                      std::to_string(i) + "," + std::to_string(j) + ")");
            if (std::abs(d(i, j) - d(j, i)) > 1e-9)
                throw ValidationError("explicit metric: asymmetry at (" + std::to_string(i) +
                                      "," + std::to_string(j) + ")");
        }
    }
    // triangle inequality: exhaustive for small n, sampled above
    auto check_triple = [&](int i, int j, int k) {
        if (d(i, j) > d(i, k) + d(k, j) + 1e-9)
            throw ValidationError("explicit metric: triangle inequality violated for (" +
                                  std::to_string(i) + "," + std::to_string(j) + "," +
                                  std::to_string(k) + ")");
    };
    if (n_ <= 64) {
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j)
                for (int k = 0; k < n_; ++k) check_triple(i, j, k);
    } else {
        std::uint64_t state = 0x9e3779b97f4a7c15ull;
        auto rnd = [&]() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            return static_cast<int>(state % n_);
        };
        for (int t = 0; t < 4096; ++t) check_triple(rnd(), rnd(), rnd());
    }
}

MetricSpace MetricSpace::load_explicit(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    long n;
    if (!(in >> n) || n <= 0) throw ParseError(path.string() + ": expected point count on first line");
    Eigen::MatrixXd d(n, n);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j)
            if (!(in >> d(i, j)))
                throw ParseError(path.string() + ": matrix entry (" + std::to_string(i) + "," +
                                 std::to_string(j) + ") missing or malformed");
    return explicit_matrix(std::move(d));
}

int MetricSpace::original_id(int i) const {
    return kind_ == Kind::Submesh ? vertex_ids_[i] : i;
}

void MetricSpace::compute_column(int source, std::vector<double>& out) const {
    switch (kind_) {
        case Kind::Circle: {
            out.resize(n_);
            const double step = circumference_ / n_;
            for (int j = 0; j < n_; ++j) {
                const int a = std::abs(j - source);
                out[j] = step * std::min(a, n_ - a);
            }
            break;
        }
        case Kind::Explicit: {
            out.assign(explicit_d_.col(source).data(), explicit_d_.col(source).data() + n_);
            break;
        }
        case Kind::MeshGeodesic: {
            dijkstra(mesh_->adjacency_offsets(), mesh_->adjacency_targets(),
                     mesh_->adjacency_weights(), source, kInf, out);
            for (int j = 0; j < n_; ++j)
                if (out[j] == kInf)
                    throw Error("vertex " + std::to_string(j) + " unreachable from " +
                                std::to_string(source));
            break;
        }
        case Kind::Submesh: {
            std::vector<double> full;
            dijkstra(mesh_->adjacency_offsets(), mesh_->adjacency_targets(),
                     mesh_->adjacency_weights(), vertex_ids_[source], kInf, full);
            out.resize(n_);
            for (int j = 0; j < n_; ++j) {
                out[j] = full[vertex_ids_[j]];
                if (out[j] == kInf)
                    throw Error("submesh point " + std::to_string(j) + " unreachable from " +
                                std::to_string(source));
            }
            break;
        }
    }
}

std::shared_ptr<const std::vector<double>> MetricSpace::distance_column(int source) const {
    if (source < 0 || source >= n_)
        throw UsageError("distance_column: source " + std::to_string(source) + " out of range [0," +
                         std::to_string(n_) + ")");
    if (auto hit = cache_->get(source)) return hit;
    auto col = std::make_shared<std::vector<double>>();
    compute_column(source, *col);
    return cache_->put(source, std::move(col));
}

std::vector<std::pair<int, double>> MetricSpace::distances_within(int source, double radius) const {
    if (source < 0 || source >= n_) throw UsageError("distances_within: source out of range");
    std::vector<std::pair<int, double>> hits;
    if (kind_ == Kind::MeshGeodesic || kind_ == Kind::Submesh) {
        const int parent_source = kind_ == Kind::Submesh ? vertex_ids_[source] : source;
        std::vector<double> full;
        dijkstra(mesh_->adjacency_offsets(), mesh_->adjacency_targets(),
                 mesh_->adjacency_weights(), parent_source, radius, full);
        if (kind_ == Kind::MeshGeodesic) {
            for (int j = 0; j < n_; ++j)
                if (full[j] <= radius) hits.emplace_back(j, full[j]);
        } else {
            for (int j = 0; j < n_; ++j)
                if (full[vertex_ids_[j]] <= radius) hits.emplace_back(j, full[vertex_ids_[j]]);
        }
        return hits;
    }
    std::vector<double> col;
    compute_column(source, col);
    for (int j = 0; j < n_; ++j)
        if (col[j] <= radius) hits.emplace_back(j, col[j]);
    return hits;
}

Eigen::MatrixXd MetricSpace::full_distance_matrix() const {
    if (n_ > matrix_cap_)
        throw SizeCapError("full_distance_matrix: n=" + std::to_string(n_) +
                           " exceeds the size cap " + std::to_string(matrix_cap_) +
                           "; use distance_column for column-wise access");
    if (kind_ == Kind::Explicit) return explicit_d_;
    Eigen::MatrixXd d(n_, n_);
    std::vector<double> col;
    for (int i = 0; i < n_; ++i) {
        compute_column(i, col);
        for (int j = 0; j < n_; ++j) d(j, i) = col[j];
    }
    for (int i = 0; i < n_; ++i)
        for (int j = i + 1; j < n_; ++j)
            if (std::abs(d(i, j) - d(j, i)) > 1e-9)
                throw Error("distance matrix asymmetric at (" + std::to_string(i) + "," +
                            std::to_string(j) + ")");
    return d;
}

void MetricSpace::set_cache_capacity(std::size_t columns) const {
    std::lock_guard<std::mutex> lock(cache_->mu);
    cache_->capacity = std::max<std::size_t>(1, columns);
}

double MetricSpace::area_surrogate() const {
    switch (kind_) {
        case Kind::MeshGeodesic:
        case Kind::Submesh:
            return mesh_area(*mesh_);
        case Kind::Circle:
            // sphere whose great circle has this circumference: 4*pi*(C/2pi)^2
            return circumference_ * circumference_ / M_PI;
        case Kind::Explicit:
            if (area_hint_) return *area_hint_;
            throw UsageError(
                "explicit metric space has no area; construct it with an area hint or "
                "resolve the kernel width explicitly");
    }
    return 0.0;  // unreachable
}

}  // namespace pmf
