#include "contactfit/body_model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "contactfit/json_util.hpp"

namespace contactfit {

using nlohmann::json;

Camera Camera::from_json(const json& j) {
    require_keys(j, "camera", {"focal", "principal"});
    const Eigen::VectorXd f = vector_from_json(j.at("focal"), "camera.focal");
    const Eigen::VectorXd p = vector_from_json(j.at("principal"), "camera.principal");
    if (f.size() != 2 || p.size() != 2) {
        throw ParseError("camera: focal and principal must each have 2 entries");
    }
    Camera c;
    c.fx = f[0];
    c.fy = f[1];
    c.cx = p[0];
    c.cy = p[1];
    if (!(c.fx > 0.0) || !(c.fy > 0.0)) throw ValidationError("camera: focal lengths must be positive");
    return c;
}

json Camera::to_json() const {
    return json{{"focal", {fx, fy}}, {"principal", {cx, cy}}};
}

PoseParams PoseParams::zero(int joints, int shape_dim) {
    PoseParams p;
    p.theta = Eigen::MatrixX3d::Zero(joints, 3);
    p.beta = Eigen::VectorXd::Zero(shape_dim);
    return p;
}

PoseParams PoseParams::from_json(const json& j) {
    require_keys(j, "person", {"theta", "beta", "phi", "trans"});
    PoseParams p;
    p.theta = matrix_from_json(j.at("theta"), "person.theta", 3);
    p.beta = vector_from_json(j.at("beta"), "person.beta");
    p.phi = vec3_from_json(j.at("phi"), "person.phi");
    p.trans = vec3_from_json(j.at("trans"), "person.trans");
    return p;
}

json PoseParams::to_json() const {
    return json{{"theta", to_json_rows(theta)},
                {"beta", to_json_array(beta)},
                {"phi", to_json_array(phi)},
                {"trans", to_json_array(trans)}};
}

Keypoints2D Keypoints2D::from_json(const json& j) {
    require_keys(j, "keypoints", {"points", "confidence"});
    Keypoints2D kp;
    kp.points = matrix_from_json(j.at("points"), "keypoints.points", 2);
    kp.confidence = vector_from_json(j.at("confidence"), "keypoints.confidence");
    if (kp.confidence.size() != kp.points.rows()) {
        throw ValidationError("keypoints: confidence length does not match point count");
    }
    for (Eigen::Index i = 0; i < kp.confidence.size(); ++i) {
        if (kp.confidence[i] < 0.0) {
            throw ValidationError("keypoints: negative confidence at joint " + std::to_string(i));
        }
    }
    return kp;
}

json Keypoints2D::to_json() const {
    return json{{"points", to_json_rows(points)}, {"confidence", to_json_array(confidence)}};
}

BodyModel BodyModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("model file " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

BodyModel BodyModel::from_json(const json& j) {
    require_keys(j, "model",
                 {"template", "faces", "parents", "weights", "shape_dirs", "joint_regressor"},
                 {"lowres"});
    BodyModel m;
    m.template_vertices = matrix_from_json(j.at("template"), "model.template", 3);
    m.faces = int_matrix3_from_json(j.at("faces"), "model.faces");
    {
        const Eigen::VectorXd p = vector_from_json(j.at("parents"), "model.parents");
        m.parents.resize(static_cast<std::size_t>(p.size()));
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            if (p[i] != std::floor(p[i])) throw ParseError("model.parents: non-integer entry");
            m.parents[static_cast<std::size_t>(i)] = static_cast<int>(p[i]);
        }
    }
    m.skinning_weights = matrix_from_json(j.at("weights"), "model.weights");
    if (!j.at("shape_dirs").is_array()) throw ParseError("model.shape_dirs: expected an array");
    for (std::size_t b = 0; b < j.at("shape_dirs").size(); ++b) {
        m.shape_dirs.push_back(matrix_from_json(
            j.at("shape_dirs")[b], "model.shape_dirs[" + std::to_string(b) + "]", 3));
    }
    m.joint_regressor = matrix_from_json(j.at("joint_regressor"), "model.joint_regressor");
    if (j.contains("lowres")) {
        require_keys(j.at("lowres"), "model.lowres", {"vertices", "faces"});
        LowresMap lr;
        const Eigen::VectorXd v = vector_from_json(j.at("lowres").at("vertices"),
                                                   "model.lowres.vertices");
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (v[i] != std::floor(v[i])) throw ParseError("model.lowres.vertices: non-integer entry");
            lr.vertices.push_back(static_cast<int>(v[i]));
        }
        lr.faces = int_matrix3_from_json(j.at("lowres").at("faces"), "model.lowres.faces");
        m.lowres = std::move(lr);
    }
    m.validate();
    m.finalize();
    return m;
}

json BodyModel::to_json() const {
    json j{{"template", to_json_rows(template_vertices)},
           {"faces", to_json_rows(faces)},
           {"parents", parents},
           {"weights", to_json_rows(skinning_weights)},
           {"joint_regressor", to_json_rows(joint_regressor)}};
    json dirs = json::array();
    for (const auto& d : shape_dirs) dirs.push_back(to_json_rows(d));
    j["shape_dirs"] = std::move(dirs);
    if (lowres) {
        j["lowres"] = json{{"vertices", lowres->vertices}, {"faces", to_json_rows(lowres->faces)}};
    }
    return j;
}

void BodyModel::validate() const {
    const int dv = vertex_count();
    const int dj = joint_count();
    if (dv < 1) throw ValidationError("model: template has no vertices");
    if (dj < 1) throw ValidationError("model: no joints");
    if (!template_vertices.allFinite()) throw ValidationError("model: non-finite template vertex");

    for (Eigen::Index f = 0; f < faces.rows(); ++f) {
        for (int c = 0; c < 3; ++c) {
            const int idx = faces(f, c);
            if (idx < 0 || idx >= dv) {
                throw ValidationError("model: face " + std::to_string(f) +
                                      " index out of range: " + std::to_string(idx));
            }
        }
    }

    int roots = 0;
    for (std::size_t k = 0; k < parents.size(); ++k) {
        const int p = parents[k];
        if (p == -1) {
            ++roots;
        } else if (p < 0 || p >= dj) {
            throw ValidationError("model: parent of joint " + std::to_string(k) +
                                  " out of range: " + std::to_string(p));
        } else if (p == static_cast<int>(k)) {
            throw ValidationError("model: joint " + std::to_string(k) + " is its own parent");
        }
    }
    if (roots != 1) {
        throw ValidationError("model: kinematic tree must have exactly one root, found " +
                              std::to_string(roots));
    }
    for (std::size_t k = 0; k < parents.size(); ++k) {
        int cur = static_cast<int>(k);
        int steps = 0;
        while (parents[static_cast<std::size_t>(cur)] != -1) {
            cur = parents[static_cast<std::size_t>(cur)];
            if (++steps > dj) {
                throw ValidationError("model: cycle in kinematic tree at joint " +
                                      std::to_string(k));
            }
        }
    }

    if (skinning_weights.rows() != dv || skinning_weights.cols() != dj) {
        throw ValidationError("model: weights must be " + std::to_string(dv) + "x" +
                              std::to_string(dj) + ", got " +
                              std::to_string(skinning_weights.rows()) + "x" +
                              std::to_string(skinning_weights.cols()));
    }
    for (Eigen::Index r = 0; r < skinning_weights.rows(); ++r) {
        double sum = 0.0;
        for (Eigen::Index c = 0; c < skinning_weights.cols(); ++c) {
            const double w = skinning_weights(r, c);
            if (w < -1e-12 || !std::isfinite(w)) {
                throw ValidationError("model: negative skinning weight at vertex " +
                                      std::to_string(r));
            }
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-6) {
            throw ValidationError("model: skinning weights of vertex " + std::to_string(r) +
                                  " sum to " + std::to_string(sum));
        }
    }

    for (std::size_t b = 0; b < shape_dirs.size(); ++b) {
        if (shape_dirs[b].rows() != dv) {
            throw ValidationError("model: shape_dirs[" + std::to_string(b) +
                                  "] row count mismatch");
        }
        if (!shape_dirs[b].allFinite()) {
            throw ValidationError("model: non-finite entry in shape_dirs[" + std::to_string(b) + "]");
        }
    }

    if (joint_regressor.rows() != dj || joint_regressor.cols() != dv) {
        throw ValidationError("model: joint_regressor must be " + std::to_string(dj) + "x" +
                              std::to_string(dv));
    }
    for (Eigen::Index r = 0; r < joint_regressor.rows(); ++r) {
        const double sum = joint_regressor.row(r).sum();
        if (std::abs(sum - 1.0) > 1e-6) {
            throw ValidationError("model: joint_regressor row " + std::to_string(r) +
                                  " sums to " + std::to_string(sum));
        }
    }

    if (lowres) {
        for (std::size_t i = 0; i < lowres->vertices.size(); ++i) {
            const int v = lowres->vertices[i];
            if (v < 0 || v >= dv) {
                throw ValidationError("model: lowres vertex " + std::to_string(i) +
                                      " out of range: " + std::to_string(v));
            }
        }
        const int n = static_cast<int>(lowres->vertices.size());
        for (Eigen::Index f = 0; f < lowres->faces.rows(); ++f) {
            for (int c = 0; c < 3; ++c) {
                const int idx = lowres->faces(f, c);
                if (idx < 0 || idx >= n) {
                    throw ValidationError("model: lowres face " + std::to_string(f) +
                                          " index out of range");
                }
            }
        }
    }
}

void BodyModel::finalize() {
    const int dv = vertex_count();
    const int dj = joint_count();

    vertex_weights_.assign(static_cast<std::size_t>(dv), {});
    for (int i = 0; i < dv; ++i) {
        for (int k = 0; k < dj; ++k) {
            const double w = skinning_weights(i, k);
            if (w != 0.0) vertex_weights_[static_cast<std::size_t>(i)].emplace_back(k, w);
        }
    }

    regressor_rows_.assign(static_cast<std::size_t>(dj), {});
    for (int k = 0; k < dj; ++k) {
        for (int i = 0; i < dv; ++i) {
            const double c = joint_regressor(k, i);
            if (c != 0.0) regressor_rows_[static_cast<std::size_t>(k)].emplace_back(i, c);
        }
    }

    // Depth-sort so every parent precedes its children.
    std::vector<int> depth(static_cast<std::size_t>(dj), 0);
    for (int k = 0; k < dj; ++k) {
        int cur = k;
        int d = 0;
        while (parents[static_cast<std::size_t>(cur)] != -1) {
            cur = parents[static_cast<std::size_t>(cur)];
            ++d;
        }
        depth[static_cast<std::size_t>(k)] = d;
    }
    joint_order_.resize(static_cast<std::size_t>(dj));
    for (int k = 0; k < dj; ++k) joint_order_[static_cast<std::size_t>(k)] = k;
    std::stable_sort(joint_order_.begin(), joint_order_.end(), [&](int a, int b) {
        return depth[static_cast<std::size_t>(a)] < depth[static_cast<std::size_t>(b)];
    });
}

BodyModel::Posed BodyModel::forward(const PoseParams& p) const {
    if (p.theta.rows() != joint_count()) {
        throw ValidationError("pose has " + std::to_string(p.theta.rows()) +
                              " joint rows, model expects " + std::to_string(joint_count()));
    }
    std::vector<double> theta(static_cast<std::size_t>(p.theta.rows()) * 3);
    for (Eigen::Index k = 0; k < p.theta.rows(); ++k) {
        theta[static_cast<std::size_t>(k) * 3] = p.theta(k, 0);
        theta[static_cast<std::size_t>(k) * 3 + 1] = p.theta(k, 1);
        theta[static_cast<std::size_t>(k) * 3 + 2] = p.theta(k, 2);
    }
    std::vector<double> beta(p.beta.data(), p.beta.data() + p.beta.size());
    const std::vector<double> trans{p.trans.x(), p.trans.y(), p.trans.z()};

    const PosedT<double> posed = pose_mesh<double>(theta, beta, p.phi, trans);

    Posed out;
    out.vertices.resize(vertex_count(), 3);
    for (int i = 0; i < vertex_count(); ++i) {
        out.vertices.row(i) = to_eigen(posed.vertices[static_cast<std::size_t>(i)]);
    }
    out.joints.resize(joint_count(), 3);
    for (int k = 0; k < joint_count(); ++k) {
        out.joints.row(k) = to_eigen(posed.joints[static_cast<std::size_t>(k)]);
    }
    return out;
}

Eigen::Matrix3d rodrigues_matrix(const Eigen::Vector3d& axis_angle) {
    const double angle = axis_angle.norm();
    if (angle < 1e-12) return Eigen::Matrix3d::Identity();
    return Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
}

Eigen::MatrixX2d project(const Eigen::MatrixX3d& points, const Camera& cam) {
    Eigen::MatrixX2d out(points.rows(), 2);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const double z = points(i, 2);
        if (!(z > 0.0)) {
            throw ProjectionDomainError("projection undefined: point " + std::to_string(i) +
                                            " has depth " + std::to_string(z),
                                        static_cast<int>(i));
        }
        out(i, 0) = points(i, 0) / z * cam.fx + cam.cx;
        out(i, 1) = points(i, 1) / z * cam.fy + cam.cy;
    }
    return out;
}

}  // namespace contactfit
