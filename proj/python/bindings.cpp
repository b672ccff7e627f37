#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>

#include "pmf/errors.hpp"
#include "pmf/evaluation.hpp"
#include "pmf/filter.hpp"
#include "pmf/parallel.hpp"

namespace py = pybind11;
using namespace pmf;

namespace {

TriMesh mesh_from_arrays(py::array_t<double, py::array::c_style | py::array::forcecast> vertices,
                         py::array_t<int, py::array::c_style | py::array::forcecast> faces) {
    if (vertices.ndim() != 2 || vertices.shape(1) != 3)
        throw UsageError("vertices must have shape (n, 3)");
    if (faces.ndim() != 2 || faces.shape(1) != 3)
        throw UsageError("faces must have shape (m, 3)");
    std::vector<Eigen::Vector3d> v(vertices.shape(0));
    const auto* pv = vertices.data();
    for (py::ssize_t i = 0; i < vertices.shape(0); ++i)
        v[i] = {pv[3 * i], pv[3 * i + 1], pv[3 * i + 2]};
    std::vector<std::array<int, 3>> f(faces.shape(0));
    const auto* pf = faces.data();
    for (py::ssize_t i = 0; i < faces.shape(0); ++i) f[i] = {pf[3 * i], pf[3 * i + 1], pf[3 * i + 2]};
    return TriMesh(std::move(v), std::move(f));
}

py::array_t<double> vertices_array(const TriMesh& m) {
    py::array_t<double> out({static_cast<py::ssize_t>(m.vertex_count()), py::ssize_t(3)});
    auto* p = out.mutable_data();
    for (int i = 0; i < m.vertex_count(); ++i)
        for (int c = 0; c < 3; ++c) p[3 * i + c] = m.vertices()[i][c];
    return out;
}

py::array_t<int> faces_array(const TriMesh& m) {
    py::array_t<int> out({static_cast<py::ssize_t>(m.face_count()), py::ssize_t(3)});
    auto* p = out.mutable_data();
    for (int i = 0; i < m.face_count(); ++i)
        for (int c = 0; c < 3; ++c) p[3 * i + c] = m.faces()[i][c];
    return out;
}

std::vector<int> to_int_vector(const py::object& seq) {
    return seq.cast<std::vector<int>>();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Bijective correspondence recovery: kernel density estimation in the product "
              "space of two metric spaces + linear assignment, with a coarse-to-fine scheme.";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    static py::exception<Error> base_error(m, "Error", PyExc_RuntimeError);

    py::class_<TriMesh>(m, "TriMesh")
        .def(py::init(&mesh_from_arrays), py::arg("vertices"), py::arg("faces"))
        .def_property_readonly("vertices", &vertices_array)
        .def_property_readonly("faces", &faces_array)
        .def_property_readonly("vertex_count", &TriMesh::vertex_count)
        .def_property_readonly("face_count", &TriMesh::face_count)
        .def_property_readonly("edge_count", &TriMesh::edge_count);

    m.def("load_mesh", [](const std::filesystem::path& p) { return load_mesh(p); },
          py::arg("path"));
    m.def("write_mesh",
          [](const TriMesh& mesh, const std::filesystem::path& p, const std::string& format) {
              write_mesh(mesh, p,
                         format == "off" ? MeshFormat::Off : MeshFormat::PlyAscii);
          },
          py::arg("mesh"), py::arg("path"), py::arg("format") = "off");
    m.def("mesh_area", &mesh_area, py::arg("mesh"));

    py::class_<MetricSpace>(m, "MetricSpace")
        .def_static(
            "mesh_geodesic",
            [](const TriMesh& mesh) {
                return MetricSpace::mesh_geodesic(std::make_shared<TriMesh>(mesh));
            },
            py::arg("mesh"))
        .def_static(
            "submesh",
            [](const TriMesh& mesh, const py::object& ids) {
                return MetricSpace::submesh(std::make_shared<TriMesh>(mesh), to_int_vector(ids));
            },
            py::arg("mesh"), py::arg("vertex_ids"))
        .def_static("circle", &MetricSpace::circle, py::arg("circumference"), py::arg("n"))
        .def_static(
            "explicit_matrix",
            [](const Eigen::MatrixXd& d, std::optional<double> area) {
                return MetricSpace::explicit_matrix(d, area);
            },
            py::arg("distances"), py::arg("area") = std::nullopt)
        .def_static("load_explicit", &MetricSpace::load_explicit, py::arg("path"))
        .def_property_readonly("size", &MetricSpace::size)
        .def("distance_column",
             [](const MetricSpace& s, int source) {
                 const auto col = s.distance_column(source);
                 return py::array_t<double>(static_cast<py::ssize_t>(col->size()), col->data());
             },
             py::arg("source"))
        .def("full_distance_matrix", &MetricSpace::full_distance_matrix)
        .def("area_surrogate", &MetricSpace::area_surrogate)
        .def("set_matrix_cap", &MetricSpace::set_matrix_cap, py::arg("cap"))
        .def("set_cache_capacity", &MetricSpace::set_cache_capacity, py::arg("columns"));

    py::class_<SamplingHierarchy::Level>(m, "SamplingLevel")
        .def_readonly("indices", &SamplingHierarchy::Level::indices)
        .def_readonly("radius", &SamplingHierarchy::Level::radius);
    py::class_<SamplingHierarchy>(m, "SamplingHierarchy")
        .def_readonly("levels", &SamplingHierarchy::levels)
        .def_readonly("seed", &SamplingHierarchy::seed);

    m.def(
        "farthest_point_sampling",
        [](const MetricSpace& space, const py::object& sizes, int seed) {
            return farthest_point_sampling(space, to_int_vector(sizes), seed);
        },
        py::arg("space"), py::arg("level_sizes"), py::arg("seed") = 0);
    m.def("shape_diameter", &shape_diameter, py::arg("space"), py::arg("sample_count"),
          py::arg("seed") = 0);
    m.def("default_level_schedule", &default_level_schedule, py::arg("n"));

    py::class_<KernelParams>(m, "KernelParams")
        .def(py::init([](double sigma_sq_rel, std::optional<double> sigma_sq,
                         double sparse_floor) {
                 KernelParams p;
                 p.sigma_sq_rel = sigma_sq_rel;
                 p.sigma_sq = sigma_sq;
                 p.sparse_floor = sparse_floor;
                 return p;
             }),
             py::arg("sigma_sq_rel") = 0.02, py::arg("sigma_sq") = std::nullopt,
             py::arg("sparse_floor") = 1e-12)
        .def_readwrite("sigma_sq_rel", &KernelParams::sigma_sq_rel)
        .def_readwrite("sigma_sq", &KernelParams::sigma_sq)
        .def_readwrite("sparse_floor", &KernelParams::sparse_floor)
        .def("resolved_for", &KernelParams::resolved_for, py::arg("target"));

    m.def("kernel_value", &kernel_value, py::arg("distance"), py::arg("params"));
    m.def(
        "kernel_matrix",
        [](const MetricSpace& space, const py::object& anchors, const KernelParams& params) {
            const auto a = to_int_vector(anchors);
            return kernel_matrix(space, a, params);
        },
        py::arg("space"), py::arg("anchors"), py::arg("params"));

    py::class_<MatchSet>(m, "MatchSet")
        .def(py::init([](const py::object& xi, const py::object& eta, const py::object& weights) {
                 MatchSet ms;
                 ms.xi = to_int_vector(xi);
                 ms.eta = to_int_vector(eta);
                 if (!weights.is_none()) ms.weights = weights.cast<std::vector<double>>();
                 return ms;
             }),
             py::arg("xi"), py::arg("eta"), py::arg("weights") = py::none())
        .def_readwrite("xi", &MatchSet::xi)
        .def_readwrite("eta", &MatchSet::eta)
        .def_readwrite("weights", &MatchSet::weights)
        .def_static("load", &MatchSet::load, py::arg("path"))
        .def("save", &MatchSet::save, py::arg("path"));

    m.def(
        "payoff_dense",
        [](const Eigen::MatrixXd& kx, const Eigen::MatrixXd& ky,
           const std::vector<double>& weights) { return payoff_dense(kx, ky, weights).values; },
        py::arg("kx"), py::arg("ky"), py::arg("weights") = std::vector<double>{});

    py::class_<Permutation>(m, "Permutation")
        .def(py::init([](const py::object& forward) {
                 return Permutation(to_int_vector(forward));
             }),
             py::arg("forward"))
        .def_static("identity", &Permutation::identity, py::arg("n"))
        .def_static("load", &Permutation::load, py::arg("path"))
        .def("save", &Permutation::save, py::arg("path"))
        .def_property_readonly("forward",
                               [](const Permutation& p) { return p.forward(); })
        .def_property_readonly("inverse",
                               [](const Permutation& p) { return p.inverse(); })
        .def_property_readonly("size", &Permutation::size)
        .def("__call__", [](const Permutation& p, int i) { return p(i); })
        .def("__len__", &Permutation::size)
        .def("__eq__", [](const Permutation& a, const Permutation& b) { return a == b; });

    py::class_<AuctionConfig>(m, "AuctionConfig")
        .def(py::init<>())
        .def_readwrite("eps_start", &AuctionConfig::eps_start)
        .def_readwrite("eps_scale_factor", &AuctionConfig::eps_scale_factor)
        .def_readwrite("eps_final", &AuctionConfig::eps_final)
        .def_readwrite("max_rounds", &AuctionConfig::max_rounds);

    auto lap_tuple = [](const LapResult& r) {
        return py::make_tuple(r.perm, r.objective);
    };
    m.def("lap_bruteforce",
          [lap_tuple](const Eigen::MatrixXd& f) { return lap_tuple(lap_bruteforce(f)); },
          py::arg("payoff"));
    m.def("lap_exact", [lap_tuple](const Eigen::MatrixXd& f) { return lap_tuple(lap_exact(f)); },
          py::arg("payoff"));
    m.def("lap_auction",
          [lap_tuple](const Eigen::MatrixXd& f, const AuctionConfig& cfg) {
              return lap_tuple(lap_auction(f, cfg));
          },
          py::arg("payoff"), py::arg("config") = AuctionConfig{});

    m.def("pointwise_estimate", &pointwise_estimate, py::arg("payoff"));

    py::class_<PmfConfig>(m, "PmfConfig")
        .def(py::init<>())
        .def_readwrite("kernel", &PmfConfig::kernel)
        .def_readwrite("max_iters", &PmfConfig::max_iters)
        .def_readwrite("stop_on_fixed_point", &PmfConfig::stop_on_fixed_point)
        .def_property(
            "solver",
            [](const PmfConfig& c) {
                return c.solver == SolverKind::Exact ? "exact" : "auction";
            },
            [](PmfConfig& c, const std::string& s) {
                if (s == "exact")
                    c.solver = SolverKind::Exact;
                else if (s == "auction")
                    c.solver = SolverKind::Auction;
                else
                    throw UsageError("solver must be 'exact' or 'auction'");
            })
        .def_readwrite("auction", &PmfConfig::auction)
        .def_readwrite("record_history", &PmfConfig::record_history)
        .def_readwrite("sigma_decay", &PmfConfig::sigma_decay)
        .def_readwrite("level_inner_iters", &PmfConfig::level_inner_iters);

    py::class_<WidenPolicy>(m, "WidenPolicy")
        .def_static("fail", &WidenPolicy::fail)
        .def_static("widen", &WidenPolicy::widen, py::arg("step") = 1.5,
                    py::arg("max_retries") = 3);

    py::class_<Widening>(m, "Widening")
        .def_readonly("level", &Widening::level)
        .def_readonly("factor", &Widening::factor);

    py::class_<PmfResult>(m, "PmfResult")
        .def_readonly("final", &PmfResult::final)
        .def_readonly("objective_trace", &PmfResult::objective_trace)
        .def_readonly("iterations_run", &PmfResult::iterations_run)
        .def_readonly("history", &PmfResult::history)
        .def_readonly("widenings", &PmfResult::widenings)
        .def_readonly("sigma_sq", &PmfResult::sigma_sq);

    m.def("pmf_single_scale", &pmf_single_scale, py::arg("space_x"), py::arg("space_y"),
          py::arg("init"), py::arg("config") = PmfConfig{});
    m.def("pmf_multiscale", &pmf_multiscale, py::arg("space_x"), py::arg("space_y"),
          py::arg("hier_x"), py::arg("hier_y"), py::arg("init"), py::arg("config") = PmfConfig{},
          py::arg("widen_policy") = WidenPolicy::fail());

    py::class_<ThreePointResult>(m, "ThreePointResult")
        .def_readonly("y_hat", &ThreePointResult::y_hat)
        .def_readonly("c_closed_form", &ThreePointResult::c_closed_form)
        .def_readonly("length_input", &ThreePointResult::length_input)
        .def_readonly("length_filtered", &ThreePointResult::length_filtered);
    m.def("three_point_1d", &three_point_1d, py::arg("a"), py::arg("b"), py::arg("delta"),
          py::arg("sigma"));

    m.def(
        "geodesic_errors",
        [](const py::object& map, const py::object& truth, const MetricSpace& space_y,
           double diameter) {
            const auto m1 = to_int_vector(map);
            const auto m2 = to_int_vector(truth);
            return geodesic_errors(m1, m2, space_y, diameter);
        },
        py::arg("map"), py::arg("truth"), py::arg("space_y"), py::arg("diameter"));
    m.def(
        "error_curve",
        [](const std::vector<double>& errors, const std::vector<double>& thresholds) {
            const auto c = error_curve(errors, thresholds);
            return py::make_tuple(c.thresholds, c.fractions);
        },
        py::arg("errors"), py::arg("thresholds"));
    m.def("default_thresholds", &default_thresholds);
    m.def("color_transfer_export", &color_transfer_export, py::arg("mesh_x"), py::arg("mesh_y"),
          py::arg("perm"), py::arg("path"));

    m.def("set_thread_count", &set_thread_count, py::arg("n"));
}
