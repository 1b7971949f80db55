#include "stpf/mesh.hpp"

#include "stpf/error.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace stpf {

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) { return 0.5 * (b - a).cross(c - a).norm(); }

double TriangleMesh::area() const {
    double acc = 0.0;
    for (const auto& t : triangles) acc += triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
    return acc;
}

double TriangleMesh::signed_volume() const {
    double acc = 0.0;
    for (const auto& t : triangles) acc += vertices[t[0]].dot(vertices[t[1]].cross(vertices[t[2]]));
    return acc / 6.0;
}

MeshTopology mesh_topology(const TriangleMesh& mesh) {
    std::map<std::pair<int, int>, int> uses;
    std::set<int> referenced;
    for (const auto& t : mesh.triangles)
        for (int k = 0; k < 3; ++k) {
            const int a = t[k], b = t[(k + 1) % 3];
            ++uses[{std::min(a, b), std::max(a, b)}];
            referenced.insert(a);
        }
    MeshTopology topo;
    topo.edges = uses.size();
    for (const auto& [edge, n] : uses) {
        if (n == 1) ++topo.boundary_edges;
        if (n > 2) ++topo.nonmanifold_edges;
    }
    topo.euler = long(referenced.size()) - long(topo.edges) + long(mesh.triangles.size());
    return topo;
}

std::string format_obj(const TriangleMesh& mesh) {
    std::ostringstream os;
    os << "# stpf mesh: " << mesh.vertices.size() << " vertices, " << mesh.triangles.size() << " triangles\n";
    char buf[128];
    for (const Vec3& v : mesh.vertices) {
        std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
        os << buf;
    }
    for (const auto& t : mesh.triangles) os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    return os.str();
}

TriangleMesh parse_obj(const std::string& text) {
    TriangleMesh mesh;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::vector<std::array<long, 3>> faces;
    std::vector<int> face_lines;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z)) throw DataError("obj line " + std::to_string(lineno) + ": malformed vertex");
            mesh.vertices.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::vector<long> idx;
            for (std::string tok; ls >> tok;) {
                // Accept v, v/vt, v//vn, v/vt/vn.
                const std::string head = tok.substr(0, tok.find('/'));
                try {
                    std::size_t used = 0;
                    const long v = std::stol(head, &used);
                    if (used != head.size()) throw std::invalid_argument(head);
                    idx.push_back(v);
                } catch (const std::exception&) {
                    throw DataError("obj line " + std::to_string(lineno) + ": malformed face index '" + tok + "'");
                }
            }
            if (idx.size() < 3) throw DataError("obj line " + std::to_string(lineno) + ": face needs 3 indices");
            for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
                faces.push_back({idx[0], idx[k], idx[k + 1]});
                face_lines.push_back(lineno);
            }
        }
    }
    const long n = long(mesh.vertices.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
        std::array<int, 3> t{};
        for (int k = 0; k < 3; ++k) {
            long v = faces[f][std::size_t(k)];
            if (v < 0) v = n + v + 1;  // relative indices
            if (v < 1 || v > n)
                throw DataError("obj line " + std::to_string(face_lines[f]) + ": face index out of range");
            t[std::size_t(k)] = int(v - 1);
        }
        mesh.triangles.push_back(t);
    }
    return mesh;
}

void save_obj(const TriangleMesh& mesh, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << format_obj(mesh);
    if (!out) throw DataError("failed writing " + path);
}

TriangleMesh load_obj(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_obj(ss.str());
}

}  // namespace stpf
