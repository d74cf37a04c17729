#include "doctest.h"

#include <cmath>
#include <random>

#include <Eigen/Geometry>

#include "contactfit/body_model.hpp"
#include "contactfit/errors.hpp"
#include "contactfit/synth.hpp"

using namespace contactfit;

TEST_CASE("stick16 model passes validation and has the documented shape") {
    const BodyModel m = make_stick16();
    CHECK(m.vertex_count() == 240);
    CHECK(m.joint_count() == 16);
    CHECK(m.faces.rows() == 420);
    CHECK(m.shape_dim() == 2);
    REQUIRE(m.lowres.has_value());
    CHECK(m.lowres->vertices.size() == 120);
    CHECK(m.lowres->faces.rows() == 180);
    CHECK_NOTHROW(m.validate());
}

TEST_CASE("every bone tube is watertight") {
    // closed orientable surface: each directed edge appears exactly once
    const BodyModel m = make_stick16();
    std::map<std::pair<int, int>, int> directed;
    for (Eigen::Index f = 0; f < m.faces.rows(); ++f) {
        for (int e = 0; e < 3; ++e) {
            const int a = m.faces(f, e), b = m.faces(f, (e + 1) % 3);
            directed[{a, b}]++;
        }
    }
    for (const auto& [edge, count] : directed) {
        CHECK(count == 1);
        CHECK(directed.count({edge.second, edge.first}) == 1);
    }
}

TEST_CASE("zero pose with zero shape reproduces the template") {
    const BodyModel m = make_stick16();
    PoseParams p = PoseParams::zero(m.joint_count(), m.shape_dim());
    const BodyModel::Posed posed = m.forward(p);
    CHECK((posed.vertices - m.template_vertices).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

    // regressor reproduces the rest joints exactly (ring-centred weights)
    const Eigen::MatrixX3d rest = m.joint_regressor * m.template_vertices;
    CHECK((posed.joints - rest).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("global translation and rotation act rigidly") {
    const BodyModel m = make_stick16();
    PoseParams p = PoseParams::zero(m.joint_count(), m.shape_dim());
    p.trans = Eigen::Vector3d(0.3, -0.2, 1.0);
    p.phi = Eigen::Vector3d(0.0, M_PI / 2, 0.0);
    const BodyModel::Posed posed = m.forward(p);

    const Eigen::Matrix3d R = rodrigues_matrix(p.phi);
    const Eigen::MatrixX3d expect =
        (m.template_vertices * R.transpose()).rowwise() + p.trans.transpose();
    CHECK((posed.vertices - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("shape coefficients displace along the blendshape directions") {
    const BodyModel m = make_stick16();
    PoseParams p = PoseParams::zero(m.joint_count(), m.shape_dim());
    p.beta[0] = 0.7;
    p.beta[1] = -0.4;
    const BodyModel::Posed posed = m.forward(p);
    const Eigen::MatrixX3d expect =
        m.template_vertices + 0.7 * m.shape_dirs[0] - 0.4 * m.shape_dirs[1];
    CHECK((posed.vertices - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("bending one joint moves its subtree and nothing else") {
    const BodyModel m = make_stick16();
    PoseParams rest = PoseParams::zero(m.joint_count(), m.shape_dim());
    PoseParams bent = rest;
    bent.theta(5, 0) = 1.0;  // left elbow
    const BodyModel::Posed a = m.forward(rest);
    const BodyModel::Posed b = m.forward(bent);
    int moved = 0;
    for (int v = 0; v < m.vertex_count(); ++v) {
        const double d = (a.vertices.row(v) - b.vertices.row(v)).norm();
        if (d > 1e-12) ++moved;
    }
    // forearm rings 0..3 skinned to elbow, plus the blended last upper-arm ring
    CHECK(moved >= 16);
    CHECK(moved <= 24);
}

TEST_CASE("rodrigues small angles agree with the closed form") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        Eigen::Vector3d w(uni(rng), uni(rng), uni(rng));
        if (i < 10) w *= 1e-6;  // exercise the series branch
        const Eigen::Matrix3d ours = rodrigues_matrix(w);
        const double angle = w.norm();
        Eigen::Matrix3d ref = Eigen::Matrix3d::Identity();
        if (angle > 0) ref = Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
        CHECK((ours - ref).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("json round trip is stable") {
    const BodyModel m = make_stick16();
    const nlohmann::json j = m.to_json();
    const BodyModel back = BodyModel::from_json(j);
    CHECK(back.to_json() == j);
    CHECK((back.template_vertices - m.template_vertices).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unknown top-level keys are rejected") {
    nlohmann::json j = make_stick16().to_json();
    j["extra"] = 1;
    CHECK_THROWS_AS(BodyModel::from_json(j), ParseError);
}

TEST_CASE("skinning rows must sum to one") {
    BodyModel m = make_stick16();
    m.skinning_weights(0, 0) -= 0.1;  // row now sums to 0.9
    CHECK_THROWS_WITH_AS(m.validate(),
                         doctest::Contains("skinning weights"), ValidationError);
}

TEST_CASE("kinematic tree validation rejects cycles and extra roots") {
    BodyModel m = make_stick16();
    m.parents[1] = 2;
    m.parents[2] = 1;  // 1 <-> 2 cycle
    CHECK_THROWS_AS(m.validate(), ValidationError);

    BodyModel two_roots = make_stick16();
    two_roots.parents[1] = -1;
    CHECK_THROWS_AS(two_roots.validate(), ValidationError);
}

TEST_CASE("forward rejects mismatched parameter shapes") {
    const BodyModel m = make_stick16();
    PoseParams p = PoseParams::zero(m.joint_count() + 1, m.shape_dim());
    CHECK_THROWS_AS(m.forward(p), ValidationError);
}

TEST_CASE("projection rejects points at or behind the camera") {
    Camera cam;
    cam.fx = cam.fy = 500;
    cam.cx = cam.cy = 100;
    Eigen::MatrixX3d pts(2, 3);
    pts << 0, 0, 2.0, 0, 0, -1.0;
    CHECK_THROWS_AS(project(pts, cam), ProjectionDomainError);
    pts(1, 2) = 1.0;
    const Eigen::MatrixX2d px = project(pts, cam);
    CHECK(px(0, 0) == doctest::Approx(100.0));
    CHECK(px(1, 1) == doctest::Approx(100.0));
}

TEST_CASE("templated pose_mesh agrees with forward") {
    const BodyModel m = make_stick16();
    std::mt19937 rng(9);
    std::normal_distribution<double> nrm(0.0, 0.4);
    PoseParams p = PoseParams::zero(m.joint_count(), m.shape_dim());
    for (Eigen::Index k = 0; k < p.theta.rows(); ++k)
        for (int c = 0; c < 3; ++c) p.theta(k, c) = nrm(rng);
    p.beta[0] = 0.3;
    p.phi = Eigen::Vector3d(0.2, -0.1, 0.4);
    p.trans = Eigen::Vector3d(0.1, 0.2, 2.0);

    const BodyModel::Posed ref = m.forward(p);

    std::vector<double> theta(p.theta.data(), p.theta.data() + p.theta.size());
    // Eigen stores column-major; flatten row-wise instead
    std::vector<double> theta_rows;
    for (Eigen::Index k = 0; k < p.theta.rows(); ++k)
        for (int c = 0; c < 3; ++c) theta_rows.push_back(p.theta(k, c));
    std::vector<double> beta(p.beta.data(), p.beta.data() + p.beta.size());
    std::vector<double> trans = {p.trans.x(), p.trans.y(), p.trans.z()};
    const PosedT<double> posed = m.pose_mesh<double>(theta_rows, beta, p.phi, trans);

    double worst = 0.0;
    for (int v = 0; v < m.vertex_count(); ++v) {
        worst = std::max(worst, std::abs(posed.vertices[v].x - ref.vertices(v, 0)));
        worst = std::max(worst, std::abs(posed.vertices[v].y - ref.vertices(v, 1)));
        worst = std::max(worst, std::abs(posed.vertices[v].z - ref.vertices(v, 2)));
    }
    CHECK(worst < 1e-12);
}
