#include "pmf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "pmf/errors.hpp"

namespace pmf {

std::vector<double> geodesic_errors(std::span<const int> map, std::span<const int> truth,
                                    const MetricSpace& space_y, double diameter) {
    const int n = static_cast<int>(map.size());
    if (static_cast<int>(truth.size()) != n)
        throw UsageError("geodesic_errors: map sizes differ (" + std::to_string(n) + " vs " +
                         std::to_string(truth.size()) + ")");
    if (n != space_y.size())
        throw UsageError("geodesic_errors: map size does not match the target space");
    if (!(diameter > 0.0)) throw UsageError("geodesic_errors: diameter must be positive");
    for (int i = 0; i < n; ++i)
        if (map[i] < 0 || map[i] >= n || truth[i] < 0 || truth[i] >= n)
            throw UsageError("geodesic_errors: target index out of range at " + std::to_string(i));

    const auto distinct = [](std::span<const int> v) {
        std::set<int> s(v.begin(), v.end());
        return std::vector<int>(s.begin(), s.end());
    };
    const auto d_map = distinct(map);
    const auto d_truth = distinct(truth);
    const bool source_is_truth = d_truth.size() <= d_map.size();
    const auto& sources = source_is_truth ? d_truth : d_map;

    std::vector<double> errors(n, 0.0);
    // group queries by source so each column is fetched once
    for (int src : sources) {
        const auto col = space_y.distance_column(src);
        for (int i = 0; i < n; ++i) {
            if (source_is_truth ? truth[i] == src : map[i] == src)
                errors[i] = (*col)[source_is_truth ? map[i] : truth[i]] / diameter;
        }
    }
    return errors;
}

std::vector<double> geodesic_errors(const Permutation& perm, const Permutation& truth,
                                    const MetricSpace& space_y, double diameter) {
    return geodesic_errors(std::span<const int>(perm.forward()),
                           std::span<const int>(truth.forward()), space_y, diameter);
}

ErrorCurve error_curve(std::span<const double> errors, std::span<const double> thresholds) {
    for (size_t i = 0; i < thresholds.size(); ++i) {
        if (thresholds[i] < 0.0) throw UsageError("error_curve: thresholds must be nonnegative");
        if (i > 0 && thresholds[i] <= thresholds[i - 1])
            throw UsageError("error_curve: thresholds must be strictly increasing");
    }
    ErrorCurve curve;
    curve.thresholds.assign(thresholds.begin(), thresholds.end());
    curve.fractions.reserve(thresholds.size());
    for (double t : thresholds) {
        std::size_t count = 0;
        for (double e : errors) count += (e <= t);
        curve.fractions.push_back(errors.empty() ? 0.0
                                                 : static_cast<double>(count) / errors.size());
    }
    return curve;
}

std::vector<double> default_thresholds() {
    std::vector<double> t;
    for (int i = 0; i <= 100; ++i) t.push_back(i * 0.0025);
    return t;
}

void write_error_curve_csv(const ErrorCurve& curve, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << "threshold,fraction\n";
    char buf[80];
    for (size_t i = 0; i < curve.thresholds.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", curve.thresholds[i], curve.fractions[i]);
        out << buf;
    }
    if (!out) throw Error("failed writing " + path.string());
}

void color_transfer_export(const TriMesh& mesh_x, const TriMesh& mesh_y, const Permutation& perm,
                           const std::filesystem::path& path) {
    if (perm.size() != mesh_x.vertex_count() || perm.size() != mesh_y.vertex_count())
        throw UsageError("color_transfer_export: permutation size does not match the meshes");

    Eigen::Vector3d lo = mesh_x.vertices()[0], hi = mesh_x.vertices()[0];
    for (const auto& v : mesh_x.vertices()) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    const Eigen::Vector3d extent = hi - lo;

    const auto channel = [&](double value, double low, double ext) {
        const double t = ext > 0.0 ? (value - low) / ext : 0.0;
        return static_cast<int>(std::lround(255.0 * std::clamp(t, 0.0, 1.0)));
    };

    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << "ply\nformat ascii 1.0\n"
        << "element vertex " << mesh_y.vertex_count() << '\n'
        << "property double x\nproperty double y\nproperty double z\n"
        << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        << "element face " << mesh_y.face_count() << '\n'
        << "property list uchar int vertex_indices\nend_header\n";
    char buf[140];
    for (int j = 0; j < mesh_y.vertex_count(); ++j) {
        const auto& vy = mesh_y.vertices()[j];
        const auto& vx = mesh_x.vertices()[perm.inverse()[j]];
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %d %d %d\n", vy.x(), vy.y(), vy.z(),
                      channel(vx.x(), lo.x(), extent.x()), channel(vx.y(), lo.y(), extent.y()),
                      channel(vx.z(), lo.z(), extent.z()));
        out << buf;
    }
    for (const auto& f : mesh_y.faces()) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    if (!out) throw Error("failed writing " + path.string());
}

}  // namespace pmf
