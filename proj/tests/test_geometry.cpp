#include "doctest.h"

#include <cmath>
#include <queue>
#include <random>
#include <set>

#include <Eigen/Geometry>

#include "contactfit/geometry.hpp"
#include "contactfit/synth.hpp"

using namespace contactfit;

namespace {

Eigen::MatrixX3d random_points(std::mt19937& rng, int n, double scale = 1.0) {
    std::uniform_real_distribution<double> uni(-scale, scale);
    Eigen::MatrixX3d m(n, 3);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) m(i, c) = uni(rng);
    return m;
}

// independent oracle: double loop with std::hypot-free exact math
MinPairResult oracle_min_pair(const Eigen::MatrixX3d& a, const Eigen::MatrixX3d& b) {
    MinPairResult best;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < b.rows(); ++j) {
            const double d = (a.row(i) - b.row(j)).norm();
            if (d < best_d) {
                best_d = d;
                best.index_a = i;
                best.index_b = j;
            }
        }
    }
    best.distance = best_d;
    return best;
}

// ray-parity inside test (axis-aligned ray, count crossings); the query
// points are random so degenerate hits have measure zero
bool oracle_inside(const Eigen::MatrixX3d& v, const Eigen::MatrixX3i& f, const Eigen::Vector3d& q) {
    int crossings = 0;
    const Eigen::Vector3d dir(1.0, 0.0, 0.0);
    for (Eigen::Index t = 0; t < f.rows(); ++t) {
        const Eigen::Vector3d a = v.row(f(t, 0)), b = v.row(f(t, 1)), c = v.row(f(t, 2));
        // Moller-Trumbore
        const Eigen::Vector3d e1 = b - a, e2 = c - a;
        const Eigen::Vector3d p = dir.cross(e2);
        const double det = e1.dot(p);
        if (std::abs(det) < 1e-14) continue;
        const double inv = 1.0 / det;
        const Eigen::Vector3d s = q - a;
        const double u = s.dot(p) * inv;
        if (u < 0.0 || u > 1.0) continue;
        const Eigen::Vector3d qv = s.cross(e1);
        const double w = dir.dot(qv) * inv;
        if (w < 0.0 || u + w > 1.0) continue;
        const double dist = e2.dot(qv) * inv;
        if (dist > 0.0) ++crossings;
    }
    return (crossings % 2) == 1;
}

// icosphere-ish closed mesh: subdivide an octahedron and normalize
void octasphere(int levels, Eigen::MatrixX3d& v_out, Eigen::MatrixX3i& f_out,
                const Eigen::Vector3d& center = Eigen::Vector3d::Zero(), double radius = 1.0) {
    std::vector<Eigen::Vector3d> verts = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                          {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    std::vector<std::array<int, 3>> faces = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
                                             {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
    for (int l = 0; l < levels; ++l) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            verts.push_back((verts[a] + verts[b]).normalized());
            midpoint[key] = static_cast<int>(verts.size()) - 1;
            return midpoint[key];
        };
        std::vector<std::array<int, 3>> next;
        for (const auto& f : faces) {
            const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
    v_out.resize(static_cast<Eigen::Index>(verts.size()), 3);
    for (std::size_t i = 0; i < verts.size(); ++i)
        v_out.row(static_cast<Eigen::Index>(i)) = (center + radius * verts[i]).transpose();
    f_out.resize(static_cast<Eigen::Index>(faces.size()), 3);
    for (std::size_t i = 0; i < faces.size(); ++i)
        f_out.row(static_cast<Eigen::Index>(i)) << faces[i][0], faces[i][1], faces[i][2];
}

}  // namespace

TEST_CASE("min_pair_distance matches the oracle on random instances") {
    std::mt19937 rng(21);
    for (int rep = 0; rep < 50; ++rep) {
        const Eigen::MatrixX3d a = random_points(rng, 1 + rep % 40);
        const Eigen::MatrixX3d b = random_points(rng, 1 + (rep * 7) % 40);
        const MinPairResult got = min_pair_distance(a, b);
        const MinPairResult want = oracle_min_pair(a, b);
        CHECK(got.index_a == want.index_a);
        CHECK(got.index_b == want.index_b);
        CHECK(std::abs(got.distance - want.distance) <= 1e-9);
    }
}

TEST_CASE("min_pair_distance tie-breaks to the first pair") {
    Eigen::MatrixX3d a(2, 3), b(2, 3);
    a << 0, 0, 0, 1, 1, 1;
    b << 1, 1, 1, 0, 0, 0;  // both pairings realize distance 0
    const MinPairResult r = min_pair_distance(a, b);
    CHECK(r.distance == 0.0);
    CHECK(r.index_a == 0);
    CHECK(r.index_b == 1);
}

TEST_CASE("argmin_pair_distance over subsets agrees with dense scan") {
    std::mt19937 rng(31);
    const Eigen::MatrixX3d a = random_points(rng, 30);
    const Eigen::MatrixX3d b = random_points(rng, 25);
    std::vector<Vec3<double>> av, bv;
    for (int i = 0; i < a.rows(); ++i) av.push_back({a(i, 0), a(i, 1), a(i, 2)});
    for (int i = 0; i < b.rows(); ++i) bv.push_back({b(i, 0), b(i, 1), b(i, 2)});
    std::vector<int> ia = {3, 7, 11, 21}, ib = {0, 9, 24};
    const MinPairResult got = argmin_pair_distance<double>(av, ia, bv, ib);

    MinPairResult want;
    double best = std::numeric_limits<double>::infinity();
    for (int i : ia)
        for (int j : ib) {
            const double d = (a.row(i) - b.row(j)).norm();
            if (d < best) {
                best = d;
                want.index_a = i;
                want.index_b = j;
            }
        }
    CHECK(got.index_a == want.index_a);
    CHECK(got.index_b == want.index_b);
    CHECK(got.distance == doctest::Approx(best));

    CHECK_THROWS_AS(argmin_pair_distance<double>(av, std::span<const int>(), bv, ib),
                    ValidationError);
}

TEST_CASE("winding number inside tests match ray parity on random meshes") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> uni(-1.6, 1.6);
    Eigen::MatrixX3d v;
    Eigen::MatrixX3i f;
    int checked = 0;
    for (int rep = 0; rep < 50; ++rep) {
        const Eigen::Vector3d center(uni(rng) * 0.2, uni(rng) * 0.2, uni(rng) * 0.2);
        const double radius = 0.5 + 0.4 * std::abs(uni(rng));
        octasphere(1 + rep % 2, v, f, center, radius);
        const Eigen::Vector3d q(uni(rng), uni(rng), uni(rng));
        const bool inside_winding = winding_number(v, f, q) > 0.5;
        const bool inside_parity = oracle_inside(v, f, q);
        CHECK(inside_winding == inside_parity);
        ++checked;
    }
    CHECK(checked == 50);
}

TEST_CASE("inside_mesh returns exactly the interior points") {
    Eigen::MatrixX3d v;
    Eigen::MatrixX3i f;
    octasphere(2, v, f);
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> uni(-1.4, 1.4);
    Eigen::MatrixX3d pts(200, 3);
    for (int i = 0; i < pts.rows(); ++i)
        for (int c = 0; c < 3; ++c) pts(i, c) = uni(rng);
    const std::vector<int> got = inside_mesh(pts, v, f);
    std::vector<int> want;
    for (int i = 0; i < pts.rows(); ++i)
        if (oracle_inside(v, f, pts.row(i))) want.push_back(i);
    CHECK(got == want);
}

TEST_CASE("winding number is zero at a vertex of the mesh itself") {
    Eigen::MatrixX3d v;
    Eigen::MatrixX3i f;
    octasphere(1, v, f);
    // solid angle terms with a zero edge give atan2(0, 0) = 0: finite result
    const double w = winding_number(v, f, v.row(0));
    CHECK(std::isfinite(w));
}

TEST_CASE("open meshes are flagged") {
    Eigen::MatrixX3d v;
    Eigen::MatrixX3i f;
    octasphere(1, v, f);
    CHECK(is_closed_mesh(f));
    const Eigen::MatrixX3i open_faces = f.topRows(f.rows() - 1);
    CHECK_FALSE(is_closed_mesh(open_faces));

    std::vector<std::string> warnings;
    Eigen::MatrixX3d pts = random_points(*(new std::mt19937(1)), 5, 0.2);
    inside_mesh(pts, v, open_faces, &warnings);
    REQUIRE(!warnings.empty());
}

TEST_CASE("procrustes recovers random similarity transforms") {
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int rep = 0; rep < 100; ++rep) {
        const Eigen::MatrixX3d src = random_points(rng, 8 + rep % 20);
        const Eigen::Vector3d axis =
            Eigen::Vector3d(uni(rng), uni(rng), uni(rng)).normalized();
        const Eigen::Matrix3d R = Eigen::AngleAxisd(uni(rng) * M_PI, axis).toRotationMatrix();
        const double s = 0.3 + 2.0 * std::abs(uni(rng));
        const Eigen::Vector3d t(uni(rng), uni(rng), uni(rng));
        const Eigen::MatrixX3d dst = (s * (src * R.transpose())).rowwise() + t.transpose();

        const ProcrustesResult res = procrustes_align(src, dst);
        CHECK((res.aligned - dst).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(res.scale == doctest::Approx(s).epsilon(1e-9));
        CHECK((res.rotation - R).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(res.rotation.determinant() == doctest::Approx(1.0));
    }
}

TEST_CASE("procrustes matches the eigen umeyama oracle on noisy pairs") {
    std::mt19937 rng(78);
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::MatrixX3d src = random_points(rng, 12);
        const Eigen::MatrixX3d dst = random_points(rng, 12);  // unrelated: generic LSQ problem
        const ProcrustesResult res = procrustes_align(src, dst);
        const Eigen::Matrix4d T =
            Eigen::umeyama(src.transpose(), dst.transpose(), true);
        const Eigen::Matrix3d sR = T.topLeftCorner<3, 3>();
        const Eigen::Vector3d t = T.topRightCorner<3, 1>();
        CHECK((res.scale * res.rotation - sR).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((res.translation - t).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("procrustes rejects degenerate point sets") {
    Eigen::MatrixX3d line(3, 3);
    line << 0, 0, 0, 1, 0, 0, 2, 0, 0;  // collinear
    Eigen::MatrixX3d target(3, 3);
    target << 0, 0, 0, 0, 1, 0, 0, 2, 0;
    CHECK_THROWS_AS(procrustes_align(line, target), AlignmentError);
}

TEST_CASE("safe_norm has a zero subgradient at zero") {
    using contactfit::ad::Tape;
    using contactfit::ad::Value;
    Tape tape;
    Vec3<Value> d{Value::variable(tape, 0.0), Value::variable(tape, 0.0),
                  Value::variable(tape, 0.0)};
    const Value n = safe_norm(d);
    CHECK(n.value() == 0.0);
    std::vector<Value> in = {d.x, d.y, d.z};
    const auto g = contactfit::ad::gradient(n, in);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
    CHECK(g[2] == 0.0);
}

TEST_CASE("subsample_region is deterministic, sorted, and capped") {
    Region r;
    r.part = "test";
    for (int i = 0; i < 100; ++i) r.vertex_indices.push_back(i * 3);
    const std::vector<int> small = subsample_region(r, 200, 42);
    CHECK(small == r.vertex_indices);  // identity under the cap

    const std::vector<int> a = subsample_region(r, 10, 42);
    const std::vector<int> b = subsample_region(r, 10, 42);
    const std::vector<int> c = subsample_region(r, 10, 43);
    CHECK(a == b);
    CHECK(a.size() == 10);
    CHECK(std::is_sorted(a.begin(), a.end()));
    CHECK(a != c);  // different seed, different draw (overwhelmingly)
    const std::set<int> allowed(r.vertex_indices.begin(), r.vertex_indices.end());
    for (int v : a) CHECK(allowed.count(v) == 1);
}

TEST_CASE("dijkstra geodesics match a breadth-first oracle on a unit grid") {
    // 4x4 grid of unit squares split into triangles: geodesic = L1-ish path
    const int n = 5;
    Eigen::MatrixX3d v(n * n, 3);
    std::vector<std::array<int, 3>> fs;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) v.row(y * n + x) << x, y, 0;
    for (int y = 0; y + 1 < n; ++y)
        for (int x = 0; x + 1 < n; ++x) {
            const int a = y * n + x, b = a + 1, c = a + n, d = c + 1;
            fs.push_back({a, b, d});
            fs.push_back({a, d, c});
        }
    Eigen::MatrixX3i f(static_cast<Eigen::Index>(fs.size()), 3);
    for (std::size_t i = 0; i < fs.size(); ++i)
        f.row(static_cast<Eigen::Index>(i)) << fs[i][0], fs[i][1], fs[i][2];

    const auto adj = mesh_adjacency(v, f);
    std::vector<int> sources = {0};
    const std::vector<double> dist = multi_source_dijkstra(adj, sources);

    // oracle: dijkstra re-done with a simple priority queue over edge lengths
    std::vector<double> want(v.rows(), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    want[0] = 0;
    pq.push({0, 0});
    while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (d > want[u]) continue;
        for (auto [w, len] : adj[u])
            if (want[u] + len < want[w]) {
                want[w] = want[u] + len;
                pq.push({want[w], w});
            }
    }
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(dist[i] == doctest::Approx(want[i]));

    // disconnected component: unreachable stays infinite
    Eigen::MatrixX3d v2(v.rows() + 3, 3);
    v2 << v, Eigen::MatrixX3d::Ones(3, 3);
    auto adj2 = mesh_adjacency(v2, f);
    const std::vector<double> dist2 = multi_source_dijkstra(adj2, sources);
    CHECK(std::isinf(dist2[static_cast<std::size_t>(v2.rows()) - 1]));
}
