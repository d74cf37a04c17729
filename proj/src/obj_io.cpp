#include "contactfit/obj_io.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "contactfit/errors.hpp"

namespace contactfit {

void save_obj(const std::filesystem::path& path, const Eigen::MatrixX3d& vertices,
              const Eigen::MatrixX3i& faces) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    char line[128];
    for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
        std::snprintf(line, sizeof line, "v %.6f %.6f %.6f\n", vertices(i, 0), vertices(i, 1),
                      vertices(i, 2));
        out << line;
    }
    for (Eigen::Index f = 0; f < faces.rows(); ++f) {
        out << "f " << faces(f, 0) + 1 << ' ' << faces(f, 1) + 1 << ' ' << faces(f, 2) + 1
            << '\n';
    }
    if (!out) throw ValidationError("failed writing " + path.string());
}

std::pair<Eigen::MatrixX3d, Eigen::MatrixX3i> load_obj(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read " + path.string());
    std::vector<std::array<double, 3>> verts;
    std::vector<std::array<int, 3>> tris;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag == "#") continue;
        if (tag == "v") {
            std::array<double, 3> v{};
            if (!(ss >> v[0] >> v[1] >> v[2])) {
                throw ParseError(path.string() + ":" + std::to_string(lineno) +
                                 ": malformed vertex");
            }
            verts.push_back(v);
        } else if (tag == "f") {
            std::array<int, 3> f{};
            for (int c = 0; c < 3; ++c) {
                std::string tok;
                if (!(ss >> tok)) {
                    throw ParseError(path.string() + ":" + std::to_string(lineno) +
                                     ": face needs three vertices");
                }
                // accept v, v/vt, v/vt/vn forms; only the position index matters
                f[c] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
                if (f[c] < 0) {
                    throw ParseError(path.string() + ":" + std::to_string(lineno) +
                                     ": face index out of range");
                }
            }
            std::string extra;
            if (ss >> extra) {
                throw ParseError(path.string() + ":" + std::to_string(lineno) +
                                 ": only triangles are supported");
            }
            tris.push_back(f);
        }
        // other tags (vn, vt, o, g, usemtl, ...) are ignored
    }
    Eigen::MatrixX3d v(static_cast<Eigen::Index>(verts.size()), 3);
    for (std::size_t i = 0; i < verts.size(); ++i) {
        for (int c = 0; c < 3; ++c) v(static_cast<Eigen::Index>(i), c) = verts[i][static_cast<std::size_t>(c)];
    }
    Eigen::MatrixX3i f(static_cast<Eigen::Index>(tris.size()), 3);
    for (std::size_t i = 0; i < tris.size(); ++i) {
        for (int c = 0; c < 3; ++c) {
            const int idx = tris[i][static_cast<std::size_t>(c)];
            if (idx >= static_cast<int>(verts.size())) {
                throw ParseError(path.string() + ": face references vertex " +
                                 std::to_string(idx + 1) + " of " + std::to_string(verts.size()));
            }
            f(static_cast<Eigen::Index>(i), c) = idx;
        }
    }
    return {std::move(v), std::move(f)};
}

}  // namespace contactfit
