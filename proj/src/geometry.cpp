#include "contactfit/geometry.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <queue>
#include <random>

namespace contactfit {

MinPairResult min_pair_distance(const Eigen::MatrixX3d& a, const Eigen::MatrixX3d& b) {
    if (a.rows() == 0 || b.rows() == 0) {
        throw ValidationError("minimum distance over an empty point set");
    }
    MinPairResult best;
    double best_sq = -1.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            const double sq = (a.row(i) - b.row(j)).squaredNorm();
            if (best_sq < 0.0 || sq < best_sq) {
                best_sq = sq;
                best.index_a = static_cast<int>(i);
                best.index_b = static_cast<int>(j);
            }
        }
    }
    best.distance = std::sqrt(best_sq);
    return best;
}

double winding_number(const Eigen::MatrixX3d& vertices, const Eigen::MatrixX3i& faces,
                      const Eigen::Vector3d& query) {
    double total = 0.0;
    for (Eigen::Index f = 0; f < faces.rows(); ++f) {
        const Eigen::Vector3d a = vertices.row(faces(f, 0)).transpose() - query;
        const Eigen::Vector3d b = vertices.row(faces(f, 1)).transpose() - query;
        const Eigen::Vector3d c = vertices.row(faces(f, 2)).transpose() - query;
        const double la = a.norm(), lb = b.norm(), lc = c.norm();
        const double num = a.dot(b.cross(c));
        const double den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
        total += 2.0 * std::atan2(num, den);
    }
    return total / (4.0 * std::numbers::pi);
}

std::vector<int> inside_mesh(const Eigen::MatrixX3d& points, const Eigen::MatrixX3d& vertices,
                             const Eigen::MatrixX3i& faces, std::vector<std::string>* warnings) {
    if (warnings && !is_closed_mesh(faces)) {
        warnings->push_back("winding-number containment on a non-closed mesh is approximate");
    }
    std::vector<int> inside;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        if (winding_number(vertices, faces, points.row(i).transpose()) > 0.5) {
            inside.push_back(static_cast<int>(i));
        }
    }
    return inside;
}

bool is_closed_mesh(const Eigen::MatrixX3i& faces) {
    // Count directed edges; closed orientable meshes pair each (u,v) with (v,u).
    std::map<std::pair<int, int>, int> directed;
    for (Eigen::Index f = 0; f < faces.rows(); ++f) {
        for (int c = 0; c < 3; ++c) {
            const int u = faces(f, c);
            const int v = faces(f, (c + 1) % 3);
            if (u == v) return false;
            if (++directed[{u, v}] > 1) return false;   // non-manifold duplication
        }
    }
    for (const auto& [edge, count] : directed) {
        (void)count;
        if (!directed.count({edge.second, edge.first})) return false;
    }
    return true;
}

ProcrustesResult procrustes_align(const Eigen::MatrixX3d& source, const Eigen::MatrixX3d& target) {
    if (source.rows() != target.rows()) {
        throw ValidationError("alignment: point sets differ in size");
    }
    const Eigen::Index n = source.rows();
    if (n < 3) throw AlignmentError("alignment needs at least 3 points");

    const Eigen::RowVector3d mu_s = source.colwise().mean();
    const Eigen::RowVector3d mu_t = target.colwise().mean();
    const Eigen::MatrixX3d xs = source.rowwise() - mu_s;
    const Eigen::MatrixX3d xt = target.rowwise() - mu_t;

    const double var_s = xs.squaredNorm() / static_cast<double>(n);
    const Eigen::Matrix3d cov = (xt.transpose() * xs) / static_cast<double>(n);

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d sv = svd.singularValues();
    if (sv(1) <= 1e-12 * std::max(1.0, sv(0)) || var_s <= 1e-24) {
        throw AlignmentError("alignment is degenerate: point set has rank < 2");
    }

    Eigen::Vector3d signs(1.0, 1.0, 1.0);
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) signs(2) = -1.0;

    ProcrustesResult res;
    res.rotation = svd.matrixU() * signs.asDiagonal() * svd.matrixV().transpose();
    res.scale = sv.dot(signs) / var_s;
    res.translation = mu_t.transpose() - res.scale * res.rotation * mu_s.transpose();
    res.aligned = (res.scale * (res.rotation * source.transpose())).transpose();
    res.aligned.rowwise() += res.translation.transpose();
    return res;
}

std::vector<int> subsample_region(const Region& region, int cap, std::uint64_t seed) {
    if (cap <= 0) throw ValidationError("subsample cap must be positive");
    const std::vector<int>& idx = region.vertex_indices;
    if (static_cast<int>(idx.size()) <= cap) return idx;

    // Partial Fisher-Yates with explicit modulo so draws are identical on
    // every platform.
    std::vector<int> pool = idx;
    std::mt19937_64 rng(seed);
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(cap));
    for (int k = 0; k < cap; ++k) {
        const std::size_t remaining = pool.size() - static_cast<std::size_t>(k);
        const std::size_t pick = static_cast<std::size_t>(k) + rng() % remaining;
        std::swap(pool[static_cast<std::size_t>(k)], pool[pick]);
        out.push_back(pool[static_cast<std::size_t>(k)]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::vector<std::pair<int, double>>> mesh_adjacency(const Eigen::MatrixX3d& vertices,
                                                                const Eigen::MatrixX3i& faces) {
    std::vector<std::vector<std::pair<int, double>>> adj(
        static_cast<std::size_t>(vertices.rows()));
    std::map<std::pair<int, int>, double> edges;
    for (Eigen::Index f = 0; f < faces.rows(); ++f) {
        for (int c = 0; c < 3; ++c) {
            int u = faces(f, c);
            int v = faces(f, (c + 1) % 3);
            if (u > v) std::swap(u, v);
            if (u == v) continue;
            edges[{u, v}] = (vertices.row(u) - vertices.row(v)).norm();
        }
    }
    for (const auto& [edge, len] : edges) {
        adj[static_cast<std::size_t>(edge.first)].emplace_back(edge.second, len);
        adj[static_cast<std::size_t>(edge.second)].emplace_back(edge.first, len);
    }
    return adj;
}

std::vector<double> multi_source_dijkstra(
    const std::vector<std::vector<std::pair<int, double>>>& adjacency,
    std::span<const int> sources) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(adjacency.size(), inf);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    for (const int s : sources) {
        dist[static_cast<std::size_t>(s)] = 0.0;
        queue.emplace(0.0, s);
    }
    while (!queue.empty()) {
        const auto [d, u] = queue.top();
        queue.pop();
        if (d > dist[static_cast<std::size_t>(u)]) continue;
        for (const auto& [v, w] : adjacency[static_cast<std::size_t>(u)]) {
            const double nd = d + w;
            if (nd < dist[static_cast<std::size_t>(v)]) {
                dist[static_cast<std::size_t>(v)] = nd;
                queue.emplace(nd, v);
            }
        }
    }
    return dist;
}

}  // namespace contactfit
