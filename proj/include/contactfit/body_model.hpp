#pragma once

// Parametric body mesh: template vertices deformed by linear shape offsets,
// posed by linear blend skinning over a kinematic tree of axis-angle joints,
// then placed in the world by a global rotation and translation.  Joint
// locations come from a regressor over posed vertices.
//
// The forward pass is templated on the scalar type so the same code serves
// plain evaluation (double) and gradient builds (ad::Value).

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "contactfit/autodiff.hpp"
#include "contactfit/errors.hpp"
#include "contactfit/vec3.hpp"

namespace contactfit {

struct Camera {
    double fx = 1000.0;
    double fy = 1000.0;
    double cx = 0.0;
    double cy = 0.0;

    static Camera from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct PoseParams {
    Eigen::MatrixX3d theta;            // joint axis-angles, one row per joint
    Eigen::VectorXd beta;              // shape coefficients
    Eigen::Vector3d phi{0, 0, 0};      // global axis-angle (held fixed by the optimizer)
    Eigen::Vector3d trans{0, 0, 0};    // global translation

    static PoseParams zero(int joints, int shape_dim);
    static PoseParams from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Index map from a decimated proxy mesh into the full vertex set.
struct LowresMap {
    std::vector<int> vertices;   // full-mesh index per proxy vertex
    Eigen::MatrixX3i faces;      // triangles over proxy indices
};

// Detected 2D joints with per-joint confidence weights.
struct Keypoints2D {
    Eigen::MatrixX2d points;
    Eigen::VectorXd confidence;

    static Keypoints2D from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

template <class T>
struct PosedT {
    std::vector<Vec3<T>> vertices;
    std::vector<Vec3<T>> joints;
};

class BodyModel {
public:
    Eigen::MatrixX3d template_vertices;
    Eigen::MatrixX3i faces;
    std::vector<int> parents;                 // -1 marks the root
    Eigen::MatrixXd skinning_weights;         // vertices x joints
    std::vector<Eigen::MatrixX3d> shape_dirs; // one vertex-offset field per shape dim
    Eigen::MatrixXd joint_regressor;          // joints x vertices
    std::optional<LowresMap> lowres;

    static BodyModel load(const std::filesystem::path& path);
    static BodyModel from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    int vertex_count() const { return static_cast<int>(template_vertices.rows()); }
    int joint_count() const { return static_cast<int>(parents.size()); }
    int shape_dim() const { return static_cast<int>(shape_dirs.size()); }

    // Throws ValidationError on any structural or numeric violation.
    void validate() const;

    // Builds sparse per-row supports and the depth-sorted joint order.
    // Called by load/from_json; call manually after mutating fields.
    void finalize();

    struct Posed {
        Eigen::MatrixX3d vertices;
        Eigen::MatrixX3d joints;
    };
    Posed forward(const PoseParams& p) const;

    template <class T>
    PosedT<T> pose_mesh(std::span<const T> theta, std::span<const T> beta,
                        const Eigen::Vector3d& phi, std::span<const T> trans) const;

    const std::vector<int>& joint_order() const { return joint_order_; }

private:
    // Sparse views rebuilt by finalize().
    std::vector<std::vector<std::pair<int, double>>> vertex_weights_;   // per vertex: (joint, w)
    std::vector<std::vector<std::pair<int, double>>> regressor_rows_;   // per joint: (vertex, c)
    std::vector<int> joint_order_;                                      // parents before children
};

// Pinhole projection of 3D points to pixel coordinates.  Throws
// ProjectionDomainError naming the first row at or behind the camera.
Eigen::MatrixX2d project(const Eigen::MatrixX3d& points, const Camera& cam);

template <class T>
std::pair<T, T> project_point(const Vec3<T>& p, const Camera& cam, int index) {
    if (!(value_of(p.z) > 0.0)) {
        throw ProjectionDomainError(
            "projection undefined: point " + std::to_string(index) +
                " has depth " + std::to_string(value_of(p.z)),
            index);
    }
    return {p.x / p.z * cam.fx + cam.cx, p.y / p.z * cam.fy + cam.cy};
}

// Rotation matrix from an axis-angle vector.  Uses the series expansion of
// sin(t)/t and (1-cos(t))/t^2 near zero so the rest pose differentiates
// cleanly (no sqrt of zero on the tape).
template <class T>
Mat3<T> rodrigues(const T& rx, const T& ry, const T& rz) {
    const T s = rx * rx + ry * ry + rz * rz;  // squared angle
    T a, b;
    if (value_of(s) < 1e-8) {
        a = 1.0 - s * (1.0 / 6.0) + s * s * (1.0 / 120.0);
        b = 0.5 - s * (1.0 / 24.0) + s * s * (1.0 / 720.0);
    } else {
        const T t = sqrt(s);
        a = sin(t) / t;
        b = (1.0 - cos(t)) / s;
    }
    const T kxky = rx * ry, kxkz = rx * rz, kykz = ry * rz;
    const T kx2 = rx * rx, ky2 = ry * ry, kz2 = rz * rz;
    Mat3<T> r;
    r.m[0] = 1.0 - b * (ky2 + kz2);
    r.m[1] = b * kxky - a * rz;
    r.m[2] = b * kxkz + a * ry;
    r.m[3] = b * kxky + a * rz;
    r.m[4] = 1.0 - b * (kx2 + kz2);
    r.m[5] = b * kykz - a * rx;
    r.m[6] = b * kxkz - a * ry;
    r.m[7] = b * kykz + a * rx;
    r.m[8] = 1.0 - b * (kx2 + ky2);
    return r;
}

Eigen::Matrix3d rodrigues_matrix(const Eigen::Vector3d& axis_angle);

template <class T>
PosedT<T> BodyModel::pose_mesh(std::span<const T> theta, std::span<const T> beta,
                               const Eigen::Vector3d& phi, std::span<const T> trans) const {
    const int dv = vertex_count();
    const int dj = joint_count();
    if (static_cast<int>(theta.size()) != dj * 3) {
        throw ValidationError("pose vector has " + std::to_string(theta.size()) +
                              " entries, model expects " + std::to_string(dj * 3));
    }
    if (static_cast<int>(beta.size()) != shape_dim()) {
        throw ValidationError("shape vector has " + std::to_string(beta.size()) +
                              " entries, model expects " + std::to_string(shape_dim()));
    }
    if (trans.size() != 3) throw ValidationError("translation must have 3 entries");

    // Shape blend: offsets are linear in beta.
    std::vector<Vec3<T>> shaped(static_cast<std::size_t>(dv));
    for (int i = 0; i < dv; ++i) {
        Vec3<T> v(T(template_vertices(i, 0)), T(template_vertices(i, 1)),
                  T(template_vertices(i, 2)));
        for (int b = 0; b < shape_dim(); ++b) {
            const Eigen::MatrixX3d& d = shape_dirs[static_cast<std::size_t>(b)];
            if (d(i, 0) != 0.0) v.x += beta[static_cast<std::size_t>(b)] * d(i, 0);
            if (d(i, 1) != 0.0) v.y += beta[static_cast<std::size_t>(b)] * d(i, 1);
            if (d(i, 2) != 0.0) v.z += beta[static_cast<std::size_t>(b)] * d(i, 2);
        }
        shaped[static_cast<std::size_t>(i)] = v;
    }

    // Rest joints regressed from the shaped template.
    std::vector<Vec3<T>> rest(static_cast<std::size_t>(dj), Vec3<T>(T(0.0), T(0.0), T(0.0)));
    for (int k = 0; k < dj; ++k) {
        for (const auto& [vi, c] : regressor_rows_[static_cast<std::size_t>(k)]) {
            rest[static_cast<std::size_t>(k)] =
                rest[static_cast<std::size_t>(k)] + shaped[static_cast<std::size_t>(vi)] * c;
        }
    }

    // World transform per joint, parents first.
    std::vector<Mat3<T>> world_r(static_cast<std::size_t>(dj));
    std::vector<Vec3<T>> world_t(static_cast<std::size_t>(dj));
    for (int k : joint_order_) {
        const std::size_t ks = static_cast<std::size_t>(k);
        const Mat3<T> local =
            rodrigues(theta[ks * 3], theta[ks * 3 + 1], theta[ks * 3 + 2]);
        const int p = parents[ks];
        if (p < 0) {
            world_r[ks] = local;
            world_t[ks] = rest[ks];
        } else {
            const std::size_t ps = static_cast<std::size_t>(p);
            world_r[ks] = world_r[ps] * local;
            world_t[ks] = world_r[ps].apply(rest[ks] - rest[ps]) + world_t[ps];
        }
    }

    // Fold the rest-position offset into each joint transform once.
    std::vector<Vec3<T>> skin_t(static_cast<std::size_t>(dj));
    for (int k = 0; k < dj; ++k) {
        const std::size_t ks = static_cast<std::size_t>(k);
        skin_t[ks] = world_t[ks] - world_r[ks].apply(rest[ks]);
    }

    const Eigen::Matrix3d rphi = rodrigues_matrix(phi);
    const Vec3<T> tr(trans[0], trans[1], trans[2]);

    PosedT<T> out;
    out.vertices.resize(static_cast<std::size_t>(dv), Vec3<T>(T(0.0), T(0.0), T(0.0)));
    for (int i = 0; i < dv; ++i) {
        const std::size_t is = static_cast<std::size_t>(i);
        Vec3<T> acc(T(0.0), T(0.0), T(0.0));
        for (const auto& [k, w] : vertex_weights_[is]) {
            const std::size_t ks = static_cast<std::size_t>(k);
            const Vec3<T> moved = world_r[ks].apply(shaped[is]) + skin_t[ks];
            acc = acc + moved * w;
        }
        out.vertices[is] = apply_const(rphi, acc) + tr;
    }

    // Joints regressed from final world vertices.
    out.joints.resize(static_cast<std::size_t>(dj), Vec3<T>(T(0.0), T(0.0), T(0.0)));
    for (int k = 0; k < dj; ++k) {
        const std::size_t ks = static_cast<std::size_t>(k);
        for (const auto& [vi, c] : regressor_rows_[ks]) {
            out.joints[ks] = out.joints[ks] + out.vertices[static_cast<std::size_t>(vi)] * c;
        }
    }
    return out;
}

}  // namespace contactfit
