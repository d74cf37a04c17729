#include "doctest.h"

#include <algorithm>
#include <random>

#include "contactfit/losses.hpp"

using namespace contactfit;
using ad::Value;

namespace {

MeshVerts<double> random_cloud(std::mt19937_64& rng, int n, double spread = 1.0) {
    std::uniform_real_distribution<double> u(-spread, spread);
    MeshVerts<double> v;
    v.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v.push_back({u(rng), u(rng), u(rng)});
    return v;
}

MeshVerts<Value> lift(ad::Tape& tape, const MeshVerts<double>& v,
                      std::vector<Value>& leaves) {
    MeshVerts<Value> out;
    out.reserve(v.size());
    for (const auto& p : v) {
        const Value x = Value::variable(tape, p.x);
        const Value y = Value::variable(tape, p.y);
        const Value z = Value::variable(tape, p.z);
        leaves.push_back(x);
        leaves.push_back(y);
        leaves.push_back(z);
        out.push_back({x, y, z});
    }
    return out;
}

Region make_region(const std::string& part, std::vector<int> idx) {
    Region r;
    r.part = part;
    r.vertex_indices = std::move(idx);
    return r;
}

// central finite difference over the flattened coordinates of both clouds
template <class F>
void check_gradient_fd(const MeshVerts<double>& a, const MeshVerts<double>& b, F&& loss,
                       double h = 1e-6, double tol = 1e-5) {
    ad::Tape tape;
    std::vector<Value> leaves;
    MeshVerts<Value> av = lift(tape, a, leaves);
    MeshVerts<Value> bv = lift(tape, b, leaves);
    const Value root = loss(av, bv);
    const std::vector<double> grad = ad::gradient(root, leaves);

    auto eval = [&](const MeshVerts<double>& xa, const MeshVerts<double>& xb) {
        return loss(xa, xb);
    };
    const std::size_t coords = leaves.size();
    for (std::size_t k = 0; k < coords; ++k) {
        MeshVerts<double> pa = a, pb = b;
        auto bump = [&](double delta) {
            const std::size_t vi = k / 3;
            const std::size_t ci = k % 3;
            MeshVerts<double>& target = vi < a.size() ? pa : pb;
            const std::size_t row = vi < a.size() ? vi : vi - a.size();
            double* c = ci == 0 ? &target[row].x : ci == 1 ? &target[row].y : &target[row].z;
            *c += delta;
        };
        bump(h);
        const double up = eval(pa, pb);
        bump(-2 * h);
        const double dn = eval(pa, pb);
        bump(h);
        const double fd = (up - dn) / (2 * h);
        const double err = std::abs(fd - grad[k]);
        const double scale = std::max({1.0, std::abs(fd), std::abs(grad[k])});
        CHECK(err / scale < tol);
    }
}

}  // namespace

TEST_CASE("region pair distance equals the closest-pair norm") {
    std::mt19937_64 rng(100);
    for (int trial = 0; trial < 20; ++trial) {
        const MeshVerts<double> a = random_cloud(rng, 12);
        const MeshVerts<double> b = random_cloud(rng, 15);
        const Region ra = make_region("ra", {0, 2, 4, 6, 8, 10});
        const Region rb = make_region("rb", {1, 3, 5, 7, 9, 11, 13});
        RegionSampler sampler(64, 1);

        double expect = 1e18;
        for (const int i : ra.vertex_indices) {
            for (const int j : rb.vertex_indices) {
                expect = std::min(expect, norm(a[static_cast<std::size_t>(i)] -
                                               b[static_cast<std::size_t>(j)]));
            }
        }
        CHECK(region_pair_distance(a, ra, b, rb, sampler) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("region pair distance has the closest-pair gradient") {
    std::mt19937_64 rng(101);
    const MeshVerts<double> a = random_cloud(rng, 6);
    const MeshVerts<double> b = random_cloud(rng, 6);
    const Region ra = make_region("ra", {0, 1, 2});
    const Region rb = make_region("rb", {3, 4, 5});
    RegionSampler sampler(64, 1);
    check_gradient_fd(a, b, [&](const auto& va, const auto& vb) {
        return region_pair_distance(va, ra, vb, rb, sampler);
    });
}

TEST_CASE("constraint distance takes the min over every variant pair") {
    // left hand at origin is closest to the low target
    MeshVerts<double> a = {{0, 0, 0}, {10, 0, 0}};
    MeshVerts<double> b = {{0, 3, 0}, {0, 7, 0}};
    ContactConstraint c;
    c.side_a = {make_region("hand", {0}), make_region("hand2", {1})};
    c.side_b = {make_region("t1", {0}), make_region("t2", {1})};
    RegionSampler sampler(64, 1);
    CHECK(constraint_distance(a, b, c, sampler) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("a chirality group must use both limbs") {
    // both targets are nearest the left hand; the grouped solve may give it
    // only one of them, so the right hand's long reach enters the total
    MeshVerts<double> hands = {{0, 0, 0}, {10, 0, 0}};        // left, right
    MeshVerts<double> targets = {{0, 1, 0}, {0, 2, 0}};
    const std::vector<Region> hand_variants = {make_region("hand_l", {0}),
                                               make_region("hand_r", {1})};
    ConstraintSet set;
    for (int k = 0; k < 2; ++k) {
        ContactConstraint c;
        c.side_a = hand_variants;
        c.side_b = {make_region(k == 0 ? "t1" : "t2", {k})};
        c.group = "hand";
        c.group_side = 0;
        c.row = k;
        set.constraints.push_back(c);
    }
    RegionSampler sampler(64, 1);
    const double got = ordered_constraint_sum(hands, targets, set, sampler);

    const double l_t1 = 1.0, l_t2 = 2.0;
    const double r_t1 = std::sqrt(101.0), r_t2 = std::sqrt(104.0);
    const double expect = std::min(l_t1 + r_t2, r_t1 + l_t2);
    CHECK(got == doctest::Approx(expect).epsilon(1e-12));
    CHECK(got > l_t1 + l_t2);  // the independent minima would cheat with one limb

    // ungrouped versions of the same rows do use one limb twice
    for (auto& c : set.constraints) c.group.clear();
    CHECK(ordered_constraint_sum(hands, targets, set, sampler) ==
          doctest::Approx(l_t1 + l_t2).epsilon(1e-12));
}

TEST_CASE("groups of five or more fall back to independent minima") {
    MeshVerts<double> hands = {{0, 0, 0}, {10, 0, 0}};
    MeshVerts<double> targets = {{0, 1, 0}, {0, 2, 0}, {0, 3, 0}, {0, 4, 0}, {0, 5, 0}};
    const std::vector<Region> hand_variants = {make_region("hand_l", {0}),
                                               make_region("hand_r", {1})};
    ConstraintSet set;
    for (int k = 0; k < 5; ++k) {
        ContactConstraint c;
        c.side_a = hand_variants;
        c.side_b = {make_region("t" + std::to_string(k), {k})};
        c.group = "hand";
        c.group_side = 0;
        set.constraints.push_back(c);
    }
    RegionSampler sampler(64, 1);
    CHECK(ordered_constraint_sum(hands, targets, set, sampler) ==
          doctest::Approx(1.0 + 2.0 + 3.0 + 4.0 + 5.0).epsilon(1e-12));
}

TEST_CASE("dist_sum is invariant to swapping the person meshes") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 25; ++trial) {
        const MeshVerts<double> v0 = random_cloud(rng, 20);
        const MeshVerts<double> v1 = random_cloud(rng, 20);
        ConstraintSet set;
        std::uniform_int_distribution<int> nd(1, 4);
        const int n = nd(rng);
        std::uniform_int_distribution<int> vd(0, 19);
        for (int k = 0; k < n; ++k) {
            ContactConstraint c;
            c.side_a = {make_region("a" + std::to_string(k), {vd(rng), vd(rng), vd(rng)})};
            c.side_b = {make_region("b" + std::to_string(k), {vd(rng), vd(rng)})};
            set.constraints.push_back(c);
        }
        RegionSampler sampler(64, 5);
        const double fwd = dist_sum(v0, v1, set, sampler);
        const double rev = dist_sum(v1, v0, set, sampler);
        CHECK(fwd == rev);  // exact: same two ordered sums feed the min
    }
}

TEST_CASE("dist_sum of an empty set is exactly zero") {
    MeshVerts<double> v0 = {{0, 0, 0}};
    MeshVerts<double> v1 = {{5, 5, 5}};
    ConstraintSet empty;
    RegionSampler sampler(64, 1);
    CHECK(dist_sum(v0, v1, empty, sampler) == 0.0);
    CHECK(lmm_loss(v0, v1, std::vector<ConstraintSet>{}, sampler) == 0.0);
}

TEST_CASE("self-contact uses the single-mesh path") {
    std::mt19937_64 rng(8);
    const MeshVerts<double> v = random_cloud(rng, 10);
    ConstraintSet set;
    ContactConstraint c;
    c.side_a = {make_region("p", {0, 1})};
    c.side_b = {make_region("q", {8, 9})};
    set.constraints.push_back(c);
    RegionSampler sampler(64, 1);
    CHECK(dist_sum(v, v, set, sampler) == ordered_constraint_sum(v, v, set, sampler));
}

TEST_CASE("lmm loss is the mean and is exactly permutation invariant") {
    std::mt19937_64 rng(9);
    const MeshVerts<double> v0 = random_cloud(rng, 24);
    const MeshVerts<double> v1 = random_cloud(rng, 24);

    std::vector<ConstraintSet> sets;
    std::uniform_int_distribution<int> vd(0, 23);
    for (int s = 0; s < 8; ++s) {
        ConstraintSet set;
        set.sample_index = s;
        if (s % 3 != 0) {  // leave some sets empty
            for (int k = 0; k <= s % 2; ++k) {
                ContactConstraint c;
                c.side_a = {make_region("s" + std::to_string(s) + "a" + std::to_string(k),
                                        {vd(rng), vd(rng)})};
                c.side_b = {make_region("s" + std::to_string(s) + "b" + std::to_string(k),
                                        {vd(rng), vd(rng)})};
                set.constraints.push_back(c);
            }
        }
        sets.push_back(set);
    }

    RegionSampler sampler(64, 3);
    const double base = lmm_loss(v0, v1, sets, sampler);

    // mean of individual dist_sum values, accumulated smallest first
    std::vector<double> per;
    for (const auto& s : sets) per.push_back(dist_sum(v0, v1, s, sampler));
    std::sort(per.begin(), per.end());
    double mean = 0.0;
    for (const double d : per) mean += d;
    mean /= static_cast<double>(per.size());
    CHECK(base == mean);

    std::vector<ConstraintSet> shuffled = sets;
    for (int trial = 0; trial < 10; ++trial) {
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(lmm_loss(v0, v1, shuffled, sampler) == base);
    }
}

TEST_CASE("lmm loss gradient matches finite differences") {
    std::mt19937_64 rng(10);
    const MeshVerts<double> a = random_cloud(rng, 10);
    const MeshVerts<double> b = random_cloud(rng, 10);
    std::vector<ConstraintSet> sets(2);
    ContactConstraint c0;
    c0.side_a = {make_region("x", {0, 1, 2})};
    c0.side_b = {make_region("y", {3, 4})};
    sets[0].constraints.push_back(c0);
    ContactConstraint c1;
    c1.side_a = {make_region("u", {5, 6}), make_region("v", {7})};
    c1.side_b = {make_region("w", {8, 9})};
    sets[1].constraints.push_back(c1);

    RegionSampler sampler(64, 2);
    check_gradient_fd(a, b, [&](const auto& va, const auto& vb) {
        return lmm_loss(va, vb, sets, sampler);
    });
}

TEST_CASE("keypoint loss value and gradient, skipping zero confidence") {
    Camera cam;
    cam.fx = 500.0;
    cam.fy = 600.0;
    cam.cx = 320.0;
    cam.cy = 240.0;

    MeshVerts<double> joints = {{0.1, 0.2, 2.0}, {-0.3, 0.1, 3.0}, {0.5, -0.2, 2.5}};
    Keypoints2D kp;
    kp.points.resize(3, 2);
    kp.points << 350, 290, 260, 255, 400, 200;
    kp.confidence.resize(3);
    kp.confidence << 1.0, 0.0, 0.5;

    double expect = 0.0;
    for (int j = 0; j < 3; ++j) {
        if (kp.confidence[j] == 0.0) continue;
        const auto& p = joints[static_cast<std::size_t>(j)];
        const double u = cam.fx * p.x / p.z + cam.cx;
        const double v = cam.fy * p.y / p.z + cam.cy;
        expect += ((u - kp.points(j, 0)) * (u - kp.points(j, 0)) +
                   (v - kp.points(j, 1)) * (v - kp.points(j, 1))) *
                  kp.confidence[j];
    }
    CHECK(keypoint_loss(joints, cam, kp) == doctest::Approx(expect).epsilon(1e-12));

    ad::Tape tape;
    std::vector<Value> leaves;
    MeshVerts<Value> jv = lift(tape, joints, leaves);
    const Value root = keypoint_loss(jv, cam, kp);
    const std::vector<double> grad = ad::gradient(root, leaves);
    // joint 1 carries zero confidence: all three of its partials vanish
    CHECK(grad[3] == 0.0);
    CHECK(grad[4] == 0.0);
    CHECK(grad[5] == 0.0);
    CHECK(grad[0] != 0.0);

    Keypoints2D bad = kp;
    bad.points.resize(2, 2);
    CHECK_THROWS_AS(keypoint_loss(joints, cam, bad), ValidationError);
}

TEST_CASE("quadratic penalty terms") {
    const std::vector<double> x = {1.0, -2.0, 3.0};
    CHECK(squared_norm_loss<double>(x) == doctest::Approx(14.0).epsilon(1e-15));

    const std::vector<double> init = {0.5, -1.0, 2.0};
    CHECK(init_pose_loss<double>(x, init) == doctest::Approx(0.25 + 1.0 + 1.0).epsilon(1e-15));

    const std::vector<double> short_init = {0.5};
    CHECK_THROWS_AS(init_pose_loss<double>(x, short_init), ValidationError);
}

namespace {

// unit cube centered at `center` with edge `edge`, faces oriented outward
void cube(const Vec3<double>& center, double edge, MeshVerts<double>& verts,
          Eigen::MatrixX3i& faces) {
    const double h = edge / 2;
    verts.clear();
    for (const int dz : {-1, 1}) {
        for (const int dy : {-1, 1}) {
            for (const int dx : {-1, 1}) {
                verts.push_back({center.x + dx * h, center.y + dy * h, center.z + dz * h});
            }
        }
    }
    // index layout: bit0 = +x, bit1 = +y, bit2 = +z
    static const int f[12][3] = {{0, 2, 1}, {1, 2, 3},   // z-
                                 {4, 5, 6}, {5, 7, 6},   // z+
                                 {0, 1, 4}, {1, 5, 4},   // y-
                                 {2, 6, 3}, {3, 6, 7},   // y+
                                 {0, 4, 2}, {2, 4, 6},   // x-
                                 {1, 3, 5}, {3, 7, 5}};  // x+
    faces.resize(12, 3);
    for (int i = 0; i < 12; ++i) faces.row(i) << f[i][0], f[i][1], f[i][2];
}

LowresMap identity_lowres(std::size_t n, const Eigen::MatrixX3i& faces) {
    LowresMap m;
    m.vertices.resize(n);
    std::iota(m.vertices.begin(), m.vertices.end(), 0);
    m.faces = faces;
    return m;
}

}  // namespace

TEST_CASE("interpenetration of overlapping cubes has the analytic value") {
    MeshVerts<double> a, b;
    Eigen::MatrixX3i fa, fb;
    cube({0, 0, 0}, 1.0, a, fa);
    cube({0.5, 0, 0}, 0.8, b, fb);
    REQUIRE(is_closed_mesh(fa));

    const LowresMap lowres = identity_lowres(8, fa);
    // b's four x=0.1 corners sit inside a; their nearest a-corner is at
    // (0.5, +-0.5, +-0.5), squared distance 0.16 + 0.01 + 0.01 each
    const double expect = 4 * 0.18;
    CHECK(interpenetration_loss(a, b, lowres) == doctest::Approx(expect).epsilon(1e-12));

    check_gradient_fd(a, b, [&](const auto& va, const auto& vb) {
        return interpenetration_loss(va, vb, lowres);
    });
}

TEST_CASE("separated cubes do not interpenetrate") {
    MeshVerts<double> a, b;
    Eigen::MatrixX3i fa, fb;
    cube({0, 0, 0}, 1.0, a, fa);
    cube({5, 0, 0}, 1.0, b, fb);
    const LowresMap lowres = identity_lowres(8, fa);
    CHECK(interpenetration_loss(a, b, lowres) == 0.0);
}

TEST_CASE("coincident meshes contribute no interpenetration") {
    MeshVerts<double> a, b;
    Eigen::MatrixX3i fa, fb;
    cube({0.3, -0.2, 0.1}, 1.0, a, fa);
    cube({0.3, -0.2, 0.1}, 1.0, b, fb);
    const LowresMap lowres = identity_lowres(8, fa);
    CHECK(interpenetration_loss(a, a, lowres) == 0.0);  // same object
    CHECK(interpenetration_loss(a, b, lowres) == 0.0);  // equal copies
}

TEST_CASE("heuristic contact pulls the closest full-mesh pair") {
    std::mt19937_64 rng(12);
    const MeshVerts<double> a = random_cloud(rng, 18);
    const MeshVerts<double> b = random_cloud(rng, 18);
    double expect = 1e18;
    for (const auto& p : a)
        for (const auto& q : b) expect = std::min(expect, norm(p - q));
    RegionSampler sampler(256, 1);
    CHECK(heuristic_contact_loss(a, b, sampler) == doctest::Approx(expect).epsilon(1e-12));

    RegionSampler sampler2(256, 1);
    check_gradient_fd(a, b, [&](const auto& va, const auto& vb) {
        return heuristic_contact_loss(va, vb, sampler2);
    });
}

TEST_CASE("region sampler caps, caches, and derives per-region draws") {
    Region big = make_region("big", {});
    for (int i = 0; i < 100; ++i) big.vertex_indices.push_back(i);

    RegionSampler sampler(16, 42);
    const std::span<const int> s1 = sampler.sample(big);
    CHECK(s1.size() == 16);
    CHECK(std::is_sorted(s1.begin(), s1.end()));
    const std::span<const int> s2 = sampler.sample(big);
    CHECK(s1.data() == s2.data());  // cached, not redrawn

    RegionSampler same(16, 42);
    const std::span<const int> s3 = same.sample(big);
    CHECK(std::equal(s1.begin(), s1.end(), s3.begin()));

    RegionSampler other(16, 43);
    const std::span<const int> s4 = other.sample(big);
    CHECK(!std::equal(s1.begin(), s1.end(), s4.begin()));

    Region small = make_region("small", {3, 1, 2});
    CHECK(sampler.sample(small).size() == 3);
}

TEST_CASE("a min-count-one filter leaves the loss untouched") {
    std::mt19937_64 rng(13);
    const MeshVerts<double> v0 = random_cloud(rng, 20);
    const MeshVerts<double> v1 = random_cloud(rng, 20);
    std::vector<ConstraintSet> sets(3);
    std::uniform_int_distribution<int> vd(0, 19);
    for (int s = 0; s < 3; ++s) {
        ContactConstraint c;
        c.canon_a = "pa" + std::to_string(s);
        c.canon_b = "pb" + std::to_string(s);
        c.side_a = {make_region(c.canon_a, {vd(rng), vd(rng)})};
        c.side_b = {make_region(c.canon_b, {vd(rng)})};
        sets[static_cast<std::size_t>(s)].constraints.push_back(c);
    }
    RegionSampler sampler(64, 4);
    const double before = lmm_loss(v0, v1, sets, sampler);
    const AggregateResult agg = aggregate(sets, 1);
    CHECK(lmm_loss(v0, v1, agg.sets, sampler) == before);
}
