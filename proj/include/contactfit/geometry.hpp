#pragma once

// Mesh geometry kernels: exact pairwise minimum distances, generalized
// winding numbers for inside/outside tests, similarity (Procrustes)
// alignment, deterministic region subsampling, and small mesh/graph helpers.

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "contactfit/errors.hpp"
#include "contactfit/regions.hpp"
#include "contactfit/vec3.hpp"

namespace contactfit {

struct MinPairResult {
    double distance = 0.0;
    int index_a = -1;   // row into the first point set
    int index_b = -1;
};

// Exact brute-force minimum distance between two point sets.  Ties resolve
// to the lexicographically smallest (index_a, index_b).
MinPairResult min_pair_distance(const Eigen::MatrixX3d& a, const Eigen::MatrixX3d& b);

// Same scan over index subsets of templated vertex buffers.  Only reads
// scalar values (no tape growth); callers rebuild the winning pair as an
// expression when they need gradients.
template <class T>
MinPairResult argmin_pair_distance(const std::vector<Vec3<T>>& a, std::span<const int> ia,
                                   const std::vector<Vec3<T>>& b, std::span<const int> ib) {
    if (ia.empty() || ib.empty()) throw ValidationError("minimum distance over an empty point set");
    MinPairResult best;
    double best_sq = -1.0;
    for (const int i : ia) {
        const double ax = value_of(a[static_cast<std::size_t>(i)].x);
        const double ay = value_of(a[static_cast<std::size_t>(i)].y);
        const double az = value_of(a[static_cast<std::size_t>(i)].z);
        for (const int j : ib) {
            const double dx = ax - value_of(b[static_cast<std::size_t>(j)].x);
            const double dy = ay - value_of(b[static_cast<std::size_t>(j)].y);
            const double dz = az - value_of(b[static_cast<std::size_t>(j)].z);
            const double sq = dx * dx + dy * dy + dz * dz;
            if (best_sq < 0.0 || sq < best_sq) {
                best_sq = sq;
                best.index_a = i;
                best.index_b = j;
            }
        }
    }
    best.distance = std::sqrt(best_sq);
    return best;
}

// Euclidean norm with a zero subgradient at exactly zero, so touching
// vertices do not poison the tape with sqrt'(0).
template <class T>
T safe_norm(const Vec3<T>& d) {
    const T sq = squared_norm(d);
    if (value_of(sq) == 0.0) return T(0.0);
    using contactfit::sqrt;
    return sqrt(sq);
}

// Generalized winding number of a closed triangle mesh at a query point
// (van Oosterom-Strackee solid angles).  ~1 for inside, ~0 for outside.
double winding_number(const Eigen::MatrixX3d& vertices, const Eigen::MatrixX3i& faces,
                      const Eigen::Vector3d& query);

// Indices of rows of `points` strictly inside the mesh (winding > 0.5).
// Open meshes are handled best effort with a warning appended.
std::vector<int> inside_mesh(const Eigen::MatrixX3d& points, const Eigen::MatrixX3d& vertices,
                             const Eigen::MatrixX3i& faces,
                             std::vector<std::string>* warnings = nullptr);

// True when every undirected edge is shared by exactly two faces with
// opposite orientation.
bool is_closed_mesh(const Eigen::MatrixX3i& faces);

struct ProcrustesResult {
    double scale = 1.0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    Eigen::MatrixX3d aligned;   // scale * source * rotation^T + translation
};

// Least-squares similarity transform mapping `source` onto `target`.
// Throws AlignmentError for rank-deficient (collinear or coincident) sets.
ProcrustesResult procrustes_align(const Eigen::MatrixX3d& source, const Eigen::MatrixX3d& target);

// Deterministic subset of a region's vertices: identity when the region is
// within the cap, otherwise a seeded draw without replacement.  Output is
// sorted either way.
std::vector<int> subsample_region(const Region& region, int cap, std::uint64_t seed);

// Edge-weighted vertex adjacency of a triangle mesh (weights = edge lengths).
std::vector<std::vector<std::pair<int, double>>> mesh_adjacency(const Eigen::MatrixX3d& vertices,
                                                                const Eigen::MatrixX3i& faces);

// Shortest geodesic (edge-path) distance from any source vertex to every
// vertex; unreachable vertices get +infinity.
std::vector<double> multi_source_dijkstra(
    const std::vector<std::vector<std::pair<int, double>>>& adjacency,
    std::span<const int> sources);

}  // namespace contactfit
