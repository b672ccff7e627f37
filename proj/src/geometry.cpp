#include "pmf/geometry.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "pmf/errors.hpp"

namespace pmf {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

TriMesh::TriMesh(std::vector<Eigen::Vector3d> vertices,
                 std::vector<std::array<int, 3>> faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
    const int n = static_cast<int>(vertices_.size());
    if (n == 0) throw ValidationError("mesh has no vertices");

    std::map<std::pair<int, int>, double> edge_set;
    for (size_t f = 0; f < faces_.size(); ++f) {
        const auto& face = faces_[f];
        for (int c = 0; c < 3; ++c) {
            if (face[c] < 0 || face[c] >= n)
                throw ValidationError("face " + std::to_string(f) + " references vertex " +
                                      std::to_string(face[c]) + " of " + std::to_string(n));
        }
        if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2])
            throw ValidationError("face " + std::to_string(f) + " has a repeated vertex");
        for (int c = 0; c < 3; ++c) {
            int a = face[c], b = face[(c + 1) % 3];
            if (a > b) std::swap(a, b);
            const double len = (vertices_[a] - vertices_[b]).norm();
            if (len <= 0.0)
                throw ValidationError("zero-length edge (" + std::to_string(a) + "," +
                                      std::to_string(b) + ") in face " + std::to_string(f));
            edge_set.emplace(std::make_pair(a, b), len);
        }
    }

    edges_.reserve(edge_set.size());
    edge_lengths_.reserve(edge_set.size());
    for (const auto& [e, len] : edge_set) {
        edges_.push_back(e);
        edge_lengths_.push_back(len);
    }

    // CSR adjacency
    std::vector<int> degree(n, 0);
    for (const auto& [a, b] : edges_) {
        ++degree[a];
        ++degree[b];
    }
    adj_offsets_.assign(n + 1, 0);
    for (int i = 0; i < n; ++i) adj_offsets_[i + 1] = adj_offsets_[i] + degree[i];
    adj_targets_.resize(adj_offsets_[n]);
    adj_weights_.resize(adj_offsets_[n]);
    std::vector<int> cursor(adj_offsets_.begin(), adj_offsets_.end() - 1);
    for (size_t k = 0; k < edges_.size(); ++k) {
        const auto [a, b] = edges_[k];
        adj_targets_[cursor[a]] = b;
        adj_weights_[cursor[a]++] = edge_lengths_[k];
        adj_targets_[cursor[b]] = a;
        adj_weights_[cursor[b]++] = edge_lengths_[k];
    }

    // connectivity (BFS from vertex 0 over the edge graph)
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int reached = 1;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int it = adj_offsets_[u]; it < adj_offsets_[u + 1]; ++it) {
            const int v = adj_targets_[it];
            if (!seen[v]) {
                seen[v] = 1;
                ++reached;
                stack.push_back(v);
            }
        }
    }
    if (reached != n) {
        const int orphan =
            static_cast<int>(std::find(seen.begin(), seen.end(), 0) - seen.begin());
        throw ValidationError("mesh edge graph is disconnected: vertex " +
                              std::to_string(orphan) + " is unreachable from vertex 0 (" +
                              std::to_string(n - reached) + " of " + std::to_string(n) +
                              " vertices unreachable)");
    }
}

double mesh_area(const TriMesh& mesh) {
    double area = 0.0;
    const auto& v = mesh.vertices();
    for (const auto& f : mesh.faces())
        area += 0.5 * (v[f[1]] - v[f[0]]).cross(v[f[2]] - v[f[0]]).norm();
    return area;
}

namespace {

struct LineReader {
    explicit LineReader(std::istream& in) : in(in) {}
    std::istream& in;
    int line_no = 0;

    // next non-empty, non-comment line ('#' comments)
    bool next(std::string& out) {
        std::string line;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
            out = line;
            return true;
        }
        return false;
    }
};

[[noreturn]] void parse_fail(const std::filesystem::path& path, int line, const std::string& what) {
    throw ParseError(path.string() + ":" + std::to_string(line) + ": " + what);
}

TriMesh load_off(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    LineReader rd(in);
    std::string line;
    if (!rd.next(line)) parse_fail(path, rd.line_no, "empty OFF file");
    std::istringstream hdr(line);
    std::string magic;
    hdr >> magic;
    if (magic != "OFF") parse_fail(path, rd.line_no, "expected OFF header, got '" + magic + "'");

    long nv = -1, nf = -1, ne = -1;
    // counts may follow the magic on the same line
    if (!(hdr >> nv >> nf >> ne)) {
        if (!rd.next(line)) parse_fail(path, rd.line_no, "missing counts line");
        std::istringstream counts(line);
        if (!(counts >> nv >> nf >> ne)) parse_fail(path, rd.line_no, "malformed counts line");
    }
    if (nv <= 0 || nf < 0) parse_fail(path, rd.line_no, "invalid vertex/face counts");

    std::vector<Eigen::Vector3d> vertices;
    vertices.reserve(nv);
    for (long i = 0; i < nv; ++i) {
        if (!rd.next(line)) parse_fail(path, rd.line_no, "unexpected end of file in vertex list");
        std::istringstream vs(line);
        double x, y, z;
        if (!(vs >> x >> y >> z))
            parse_fail(path, rd.line_no, "malformed vertex line " + std::to_string(i));
        vertices.emplace_back(x, y, z);
    }
    std::vector<std::array<int, 3>> faces;
    faces.reserve(nf);
    for (long i = 0; i < nf; ++i) {
        if (!rd.next(line)) parse_fail(path, rd.line_no, "unexpected end of file in face list");
        std::istringstream fs(line);
        int cnt, a, b, c;
        if (!(fs >> cnt)) parse_fail(path, rd.line_no, "malformed face line " + std::to_string(i));
        if (cnt != 3)
            parse_fail(path, rd.line_no,
                       "face " + std::to_string(i) + " has " + std::to_string(cnt) +
                           " vertices; only triangles are supported");
        if (!(fs >> a >> b >> c))
            parse_fail(path, rd.line_no, "malformed face line " + std::to_string(i));
        faces.push_back({a, b, c});
    }
    return TriMesh(std::move(vertices), std::move(faces));
}

TriMesh load_ply(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::string line;
    int line_no = 0;
    auto getline_req = [&](const char* ctx) {
        if (!std::getline(in, line)) parse_fail(path, line_no, std::string("unexpected end of file in ") + ctx);
        ++line_no;
    };

    getline_req("header");
    if (line.rfind("ply", 0) != 0) parse_fail(path, line_no, "not a PLY file (missing 'ply' magic)");

    long n_vertices = -1, n_faces = -1;
    std::vector<std::string> vertex_props;
    bool in_vertex_element = false, in_face_element = false, has_face_list = false;
    bool format_seen = false;

    for (;;) {
        getline_req("header");
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "comment" || tok.empty()) continue;
        if (tok == "format") {
            std::string kind;
            ls >> kind;
            if (kind != "ascii")
                parse_fail(path, line_no,
                           "unsupported PLY format '" + kind + "'; only ascii 1.0 is accepted");
            format_seen = true;
        } else if (tok == "element") {
            std::string name;
            long count;
            if (!(ls >> name >> count)) parse_fail(path, line_no, "malformed element line");
            in_vertex_element = in_face_element = false;
            if (name == "vertex") {
                n_vertices = count;
                in_vertex_element = true;
            } else if (name == "face") {
                n_faces = count;
                in_face_element = true;
            }
        } else if (tok == "property") {
            if (in_vertex_element) {
                std::string type, name;
                ls >> type;
                if (type == "list") parse_fail(path, line_no, "list property on vertex element");
                ls >> name;
                vertex_props.push_back(name);
            } else if (in_face_element) {
                std::string maybe_list;
                ls >> maybe_list;
                if (maybe_list == "list") {
                    std::string t1, t2, name;
                    ls >> t1 >> t2 >> name;
                    if (name == "vertex_indices" || name == "vertex_index") has_face_list = true;
                }
            }
        } else if (tok == "end_header") {
            break;
        }
        // unknown header tokens are skipped
    }
    if (!format_seen) parse_fail(path, line_no, "missing 'format ascii 1.0' line");
    if (n_vertices <= 0) parse_fail(path, line_no, "missing vertex element");
    if (n_faces > 0 && !has_face_list)
        parse_fail(path, line_no, "face element lacks a vertex_indices list property");

    const auto find_prop = [&](const char* name) {
        const auto it = std::find(vertex_props.begin(), vertex_props.end(), name);
        if (it == vertex_props.end())
            parse_fail(path, line_no, std::string("vertex element lacks property '") + name + "'");
        return static_cast<int>(it - vertex_props.begin());
    };
    const int ix = find_prop("x"), iy = find_prop("y"), iz = find_prop("z");
    const int n_props = static_cast<int>(vertex_props.size());

    std::vector<Eigen::Vector3d> vertices;
    vertices.reserve(n_vertices);
    for (long i = 0; i < n_vertices; ++i) {
        getline_req("vertex list");
        std::istringstream vs(line);
        std::vector<double> vals(n_props);
        for (int p = 0; p < n_props; ++p)
            if (!(vs >> vals[p]))
                parse_fail(path, line_no, "malformed vertex line " + std::to_string(i));
        vertices.emplace_back(vals[ix], vals[iy], vals[iz]);
    }
    std::vector<std::array<int, 3>> faces;
    faces.reserve(std::max(0L, n_faces));
    for (long i = 0; i < n_faces; ++i) {
        getline_req("face list");
        std::istringstream fs(line);
        int cnt, a, b, c;
        if (!(fs >> cnt)) parse_fail(path, line_no, "malformed face line " + std::to_string(i));
        if (cnt != 3)
            parse_fail(path, line_no,
                       "face " + std::to_string(i) + " has " + std::to_string(cnt) +
                           " vertices; only triangles are supported");
        if (!(fs >> a >> b >> c))
            parse_fail(path, line_no, "malformed face line " + std::to_string(i));
        faces.push_back({a, b, c});
    }
    return TriMesh(std::move(vertices), std::move(faces));
}

MeshFormat infer_format(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".off") return MeshFormat::Off;
    if (ext == ".ply") return MeshFormat::PlyAscii;
    throw UsageError("cannot infer mesh format from extension '" + ext +
                     "' (expected .off or .ply): " + path.string());
}

}  // namespace

TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
    return format == MeshFormat::Off ? load_off(path) : load_ply(path);
}

TriMesh load_mesh(const std::filesystem::path& path) {
    return load_mesh(path, infer_format(path));
}

void write_mesh(const TriMesh& mesh, const std::filesystem::path& path, MeshFormat format) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    if (format == MeshFormat::Off) {
        out << "OFF\n"
            << mesh.vertex_count() << ' ' << mesh.face_count() << ' ' << mesh.edge_count()
            << '\n';
        for (const auto& v : mesh.vertices())
            out << fmt_double(v.x()) << ' ' << fmt_double(v.y()) << ' ' << fmt_double(v.z())
                << '\n';
        for (const auto& f : mesh.faces()) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    } else {
        out << "ply\nformat ascii 1.0\n"
            << "element vertex " << mesh.vertex_count() << '\n'
            << "property double x\nproperty double y\nproperty double z\n"
            << "element face " << mesh.face_count() << '\n'
            << "property list uchar int vertex_indices\nend_header\n";
        for (const auto& v : mesh.vertices())
            out << fmt_double(v.x()) << ' ' << fmt_double(v.y()) << ' ' << fmt_double(v.z())
                << '\n';
        for (const auto& f : mesh.faces()) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    }
    if (!out) throw Error("failed writing " + path.string());
}

}  // namespace pmf
