#include "contactfit/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <set>
#include <utility>

#include "contactfit/default_prompts.hpp"
#include "contactfit/errors.hpp"
#include "contactfit/gateway.hpp"
#include "contactfit/metrics.hpp"
#include "contactfit/pipeline.hpp"
#include "contactfit/regions.hpp"

namespace contactfit {

namespace {

constexpr double kPi = 3.14159265358979323846;

enum Joint {
    J_PELVIS = 0, J_CHEST, J_NECK, J_HEAD,
    J_L_SHOULDER, J_L_ELBOW, J_L_WRIST,
    J_R_SHOULDER, J_R_ELBOW, J_R_WRIST,
    J_L_HIP, J_L_KNEE, J_L_ANKLE,
    J_R_HIP, J_R_KNEE, J_R_ANKLE,
};

constexpr int kJoints = 16;
constexpr int kBoneCount = 15;
constexpr int kRings = 4;
constexpr int kAz = 4;
constexpr int kVertsPerBone = kRings * kAz;

struct BoneDef {
    const char* name;
    int parent;   // joint at ring 0
    int child;    // joint at ring 3
    double r0;    // radius at the parent end
    double r1;    // radius at the child end
};

// clang-format off
const std::array<BoneDef, kBoneCount> kBones = {{
    {"spine",   J_PELVIS,     J_CHEST,   0.110, 0.100},
    {"neck",    J_CHEST,      J_NECK,    0.050, 0.035},
    {"head",    J_NECK,       J_HEAD,    0.055, 0.050},
    {"l_clav",  J_CHEST,      J_L_SHOULDER, 0.030, 0.036},
    {"l_uarm",  J_L_SHOULDER, J_L_ELBOW, 0.035, 0.030},
    {"l_farm",  J_L_ELBOW,    J_L_WRIST, 0.030, 0.025},
    {"r_clav",  J_CHEST,      J_R_SHOULDER, 0.030, 0.036},
    {"r_uarm",  J_R_SHOULDER, J_R_ELBOW, 0.035, 0.030},
    {"r_farm",  J_R_ELBOW,    J_R_WRIST, 0.030, 0.025},
    {"l_wing",  J_PELVIS,     J_L_HIP,   0.055, 0.050},
    {"l_thigh", J_L_HIP,      J_L_KNEE,  0.055, 0.045},
    {"l_shin",  J_L_KNEE,     J_L_ANKLE, 0.045, 0.035},
    {"r_wing",  J_PELVIS,     J_R_HIP,   0.055, 0.050},
    {"r_thigh", J_R_HIP,      J_R_KNEE,  0.055, 0.045},
    {"r_shin",  J_R_KNEE,     J_R_ANKLE, 0.045, 0.035},
}};
// clang-format on

Eigen::MatrixX3d rest_joints() {
    Eigen::MatrixX3d j(kJoints, 3);
    j.row(J_PELVIS)     << 0.00, 1.00, 0.0;
    j.row(J_CHEST)      << 0.00, 1.30, 0.0;
    j.row(J_NECK)       << 0.00, 1.45, 0.0;
    j.row(J_HEAD)       << 0.00, 1.62, 0.0;
    j.row(J_L_SHOULDER) << 0.18, 1.40, 0.0;
    j.row(J_L_ELBOW)    << 0.18, 1.13, 0.0;
    j.row(J_L_WRIST)    << 0.18, 0.86, 0.0;
    j.row(J_R_SHOULDER) << -0.18, 1.40, 0.0;
    j.row(J_R_ELBOW)    << -0.18, 1.13, 0.0;
    j.row(J_R_WRIST)    << -0.18, 0.86, 0.0;
    j.row(J_L_HIP)      << 0.10, 0.95, 0.0;
    j.row(J_L_KNEE)     << 0.10, 0.50, 0.0;
    j.row(J_L_ANKLE)    << 0.10, 0.05, 0.0;
    j.row(J_R_HIP)      << -0.10, 0.95, 0.0;
    j.row(J_R_KNEE)     << -0.10, 0.50, 0.0;
    j.row(J_R_ANKLE)    << -0.10, 0.05, 0.0;
    return j;
}

int bone_vert(int bone, int ring, int az) { return bone * kVertsPerBone + ring * kAz + az; }

// Orthonormal frame perpendicular to the bone axis; deterministic so the
// template is byte-stable.
void bone_frame(const Eigen::Vector3d& u, Eigen::Vector3d* e1, Eigen::Vector3d* e2) {
    const Eigen::Vector3d ref =
        std::abs(u.y()) > 0.9 ? Eigen::Vector3d(1, 0, 0) : Eigen::Vector3d(0, 1, 0);
    *e1 = u.cross(ref).normalized();
    *e2 = u.cross(*e1);
}

std::vector<int> all_bone_verts(int bone) {
    std::vector<int> out;
    for (int v = 0; v < kVertsPerBone; ++v) out.push_back(bone * kVertsPerBone + v);
    return out;
}

int bone_index(const std::string& name) {
    for (int b = 0; b < kBoneCount; ++b) {
        if (name == kBones[static_cast<std::size_t>(b)].name) return b;
    }
    return -1;
}

}  // namespace

BodyModel make_stick16() {
    BodyModel m;
    const Eigen::MatrixX3d joints = rest_joints();

    m.parents = {-1, J_PELVIS, J_CHEST, J_NECK,
                 J_CHEST, J_L_SHOULDER, J_L_ELBOW,
                 J_CHEST, J_R_SHOULDER, J_R_ELBOW,
                 J_PELVIS, J_L_HIP, J_L_KNEE,
                 J_PELVIS, J_R_HIP, J_R_KNEE};

    const int nv = kBoneCount * kVertsPerBone;
    m.template_vertices.resize(nv, 3);
    m.faces.resize(kBoneCount * 28, 3);

    // Azimuth directions: exact unit steps around the ring, no trigonometry.
    const std::array<std::pair<double, double>, kAz> az = {
        {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}}};

    int face_at = 0;
    for (int b = 0; b < kBoneCount; ++b) {
        const BoneDef& bone = kBones[static_cast<std::size_t>(b)];
        const Eigen::Vector3d p = joints.row(bone.parent);
        const Eigen::Vector3d c = joints.row(bone.child);
        const Eigen::Vector3d u = (c - p).normalized();
        Eigen::Vector3d e1, e2;
        bone_frame(u, &e1, &e2);

        for (int r = 0; r < kRings; ++r) {
            const double t = static_cast<double>(r) / (kRings - 1);
            const Eigen::Vector3d center = p + (c - p) * t;
            const double radius = bone.r0 + (bone.r1 - bone.r0) * t;
            for (int a = 0; a < kAz; ++a) {
                const Eigen::Vector3d v =
                    center + radius * (az[static_cast<std::size_t>(a)].first * e1 +
                                       az[static_cast<std::size_t>(a)].second * e2);
                m.template_vertices.row(bone_vert(b, r, a)) = v;
            }
        }

        // Side bands between consecutive rings, outward winding.
        for (int r = 0; r + 1 < kRings; ++r) {
            for (int a = 0; a < kAz; ++a) {
                const int a2 = (a + 1) % kAz;
                const int v00 = bone_vert(b, r, a), v01 = bone_vert(b, r, a2);
                const int v10 = bone_vert(b, r + 1, a), v11 = bone_vert(b, r + 1, a2);
                m.faces.row(face_at++) << v00, v01, v11;
                m.faces.row(face_at++) << v00, v11, v10;
            }
        }
        // End caps close the tube.
        m.faces.row(face_at++) << bone_vert(b, 0, 0), bone_vert(b, 0, 2), bone_vert(b, 0, 1);
        m.faces.row(face_at++) << bone_vert(b, 0, 0), bone_vert(b, 0, 3), bone_vert(b, 0, 2);
        m.faces.row(face_at++) << bone_vert(b, 3, 0), bone_vert(b, 3, 1), bone_vert(b, 3, 2);
        m.faces.row(face_at++) << bone_vert(b, 3, 0), bone_vert(b, 3, 2), bone_vert(b, 3, 3);
    }

    // Skinning: rings 0-2 follow the parent joint, the end ring blends into
    // the child so chains bend smoothly.
    m.skinning_weights = Eigen::MatrixXd::Zero(nv, kJoints);
    for (int b = 0; b < kBoneCount; ++b) {
        const BoneDef& bone = kBones[static_cast<std::size_t>(b)];
        for (int r = 0; r < kRings; ++r) {
            for (int a = 0; a < kAz; ++a) {
                const int v = bone_vert(b, r, a);
                if (r < kRings - 1) {
                    m.skinning_weights(v, bone.parent) = 1.0;
                } else {
                    m.skinning_weights(v, bone.parent) = 0.5;
                    m.skinning_weights(v, bone.child) = 0.5;
                }
            }
        }
    }

    // Joint regressor: each joint is the average of the four ring vertices
    // centered on it (ring 0 of its first child bone, or ring 3 of its own
    // bone for leaves).  Exact for the template and under skinning.
    m.joint_regressor = Eigen::MatrixXd::Zero(kJoints, nv);
    for (int j = 0; j < kJoints; ++j) {
        int bone = -1, ring = 0;
        for (int b = 0; b < kBoneCount; ++b) {
            if (kBones[static_cast<std::size_t>(b)].parent == j) {
                bone = b;
                ring = 0;
                break;
            }
        }
        if (bone < 0) {
            for (int b = 0; b < kBoneCount; ++b) {
                if (kBones[static_cast<std::size_t>(b)].child == j) {
                    bone = b;
                    ring = 3;
                    break;
                }
            }
        }
        for (int a = 0; a < kAz; ++a) m.joint_regressor(j, bone_vert(bone, ring, a)) = 0.25;
    }

    // Two shape axes: height (vertical stretch about the pelvis plane) and
    // girth (radial stretch about the vertical axis).
    m.shape_dirs.resize(2, Eigen::MatrixX3d::Zero(nv, 3));
    for (int v = 0; v < nv; ++v) {
        m.shape_dirs[0](v, 1) = (m.template_vertices(v, 1) - 1.0) * 0.10;
        m.shape_dirs[1](v, 0) = m.template_vertices(v, 0) * 0.08;
        m.shape_dirs[1](v, 2) = m.template_vertices(v, 2) * 0.08;
    }

    // Low-resolution proxy: the two end rings of each bone form a closed box.
    LowresMap lowres;
    lowres.vertices.reserve(kBoneCount * 8);
    lowres.faces.resize(kBoneCount * 12, 3);
    int lface = 0;
    for (int b = 0; b < kBoneCount; ++b) {
        for (int a = 0; a < kAz; ++a) lowres.vertices.push_back(bone_vert(b, 0, a));
        for (int a = 0; a < kAz; ++a) lowres.vertices.push_back(bone_vert(b, 3, a));
        const int p0 = b * 8;
        for (int a = 0; a < kAz; ++a) {
            const int a2 = (a + 1) % kAz;
            lowres.faces.row(lface++) << p0 + a, p0 + a2, p0 + 4 + a2;
            lowres.faces.row(lface++) << p0 + a, p0 + 4 + a2, p0 + 4 + a;
        }
        lowres.faces.row(lface++) << p0 + 0, p0 + 2, p0 + 1;
        lowres.faces.row(lface++) << p0 + 0, p0 + 3, p0 + 2;
        lowres.faces.row(lface++) << p0 + 4, p0 + 5, p0 + 6;
        lowres.faces.row(lface++) << p0 + 4, p0 + 6, p0 + 7;
    }
    m.lowres = std::move(lowres);

    m.finalize();
    m.validate();
    return m;
}

nlohmann::json stick16_regions_json() {
    const BodyModel model = make_stick16();
    const auto& verts = model.template_vertices;

    // Position-based facing test; tube frames differ per bone so azimuth
    // indices alone are not reliable.
    const auto is_front = [&](int v) { return verts(v, 2) > 1e-9; };
    const auto is_back = [&](int v) { return verts(v, 2) < -1e-9; };

    const auto ring_verts = [&](int bone, int ring) {
        std::vector<int> out;
        for (int a = 0; a < kAz; ++a) out.push_back(bone_vert(bone, ring, a));
        return out;
    };
    const auto filter = [](std::vector<int> v, auto pred) {
        v.erase(std::remove_if(v.begin(), v.end(), [&](int i) { return !pred(i); }), v.end());
        return v;
    };
    const auto concat = [](std::vector<int> a, const std::vector<int>& b) {
        a.insert(a.end(), b.begin(), b.end());
        std::sort(a.begin(), a.end());
        return a;
    };

    const int spine = bone_index("spine");
    const int l_clav = bone_index("l_clav"), r_clav = bone_index("r_clav");
    const int l_uarm = bone_index("l_uarm"), r_uarm = bone_index("r_uarm");
    const int l_farm = bone_index("l_farm"), r_farm = bone_index("r_farm");
    const int l_wing = bone_index("l_wing"), r_wing = bone_index("r_wing");
    const int l_thigh = bone_index("l_thigh"), r_thigh = bone_index("r_thigh");
    const int l_shin = bone_index("l_shin"), r_shin = bone_index("r_shin");

    const auto not_back = [&](int v) { return !is_back(v); };
    const auto not_front = [&](int v) { return !is_front(v); };

    nlohmann::json coarse;
    coarse["head"] = all_bone_verts(bone_index("head"));
    coarse["neck"] = all_bone_verts(bone_index("neck"));
    coarse["chest"] = filter(ring_verts(spine, 3), not_back);
    coarse["stomach"] = filter(ring_verts(spine, 2), not_back);
    coarse["back"] = concat(filter(ring_verts(spine, 2), is_back),
                            filter(ring_verts(spine, 3), is_back));
    coarse["waist (front)"] = concat(filter(ring_verts(spine, 1), not_back),
                                     concat(filter(all_bone_verts(l_wing), is_front),
                                            filter(all_bone_verts(r_wing), is_front)));
    coarse["waist (back)"] = filter(ring_verts(spine, 1), is_back);
    coarse["butt"] = concat(ring_verts(spine, 0),
                            concat(filter(all_bone_verts(l_wing), not_front),
                                   filter(all_bone_verts(r_wing), not_front)));
    coarse["shoulder (front)"] = {
        {"left", filter(all_bone_verts(l_clav), is_front)},
        {"right", filter(all_bone_verts(r_clav), is_front)}};
    coarse["shoulder (back)"] = {
        {"left", filter(all_bone_verts(l_clav), is_back)},
        {"right", filter(all_bone_verts(r_clav), is_back)}};
    coarse["arm"] = {
        {"left", concat(all_bone_verts(l_uarm),
                        concat(ring_verts(l_farm, 0),
                               concat(ring_verts(l_farm, 1), ring_verts(l_farm, 2))))},
        {"right", concat(all_bone_verts(r_uarm),
                         concat(ring_verts(r_farm, 0),
                                concat(ring_verts(r_farm, 1), ring_verts(r_farm, 2))))}};
    coarse["hand"] = {{"left", ring_verts(l_farm, 3)}, {"right", ring_verts(r_farm, 3)}};
    coarse["leg"] = {
        {"left", concat(all_bone_verts(l_thigh),
                        concat(ring_verts(l_shin, 0),
                               concat(ring_verts(l_shin, 1), ring_verts(l_shin, 2))))},
        {"right", concat(all_bone_verts(r_thigh),
                         concat(ring_verts(r_shin, 0),
                                concat(ring_verts(r_shin, 1), ring_verts(r_shin, 2))))}};
    coarse["foot"] = {{"left", ring_verts(l_shin, 3)}, {"right", ring_verts(r_shin, 3)}};

    nlohmann::json fine;
    for (int b = 0; b < kBoneCount; ++b) {
        for (int r = 0; r < kRings; ++r) {
            fine[std::string(kBones[static_cast<std::size_t>(b)].name) + "_r" +
                 std::to_string(r)] = ring_verts(b, r);
        }
    }

    return nlohmann::json{{"coarse", coarse}, {"fine", fine}};
}

GmmPrior make_stick16_gmm() {
    const int dim = kJoints * 3;
    Eigen::VectorXd weights(4);
    weights << 0.4, 0.3, 0.2, 0.1;

    std::vector<Eigen::VectorXd> means(4, Eigen::VectorXd::Zero(dim));
    means[1][J_L_ELBOW * 3] = -0.8;     // arms slightly bent
    means[1][J_R_ELBOW * 3] = -0.8;
    means[2][J_L_KNEE * 3] = -0.9;      // legs slightly bent
    means[2][J_R_KNEE * 3] = -0.9;

    std::vector<Eigen::MatrixXd> covs;
    const std::array<double, 4> var = {0.30, 0.25, 0.25, 1.50};
    for (int c = 0; c < 4; ++c) {
        covs.push_back(var[static_cast<std::size_t>(c)] *
                       Eigen::MatrixXd::Identity(dim, dim));
    }
    return GmmPrior::make(weights, means, covs);
}

const char* synth_kind_name(SynthKind k) {
    switch (k) {
        case SynthKind::handshake: return "handshake";
        case SynthKind::hug: return "hug";
        case SynthKind::self_touch: return "self-touch";
    }
    return "?";
}

SynthKind synth_kind_from_name(std::string_view s) {
    if (s == "handshake") return SynthKind::handshake;
    if (s == "hug") return SynthKind::hug;
    if (s == "self-touch" || s == "self_touch") return SynthKind::self_touch;
    throw ValidationError("unknown synthetic scene: " + std::string(s));
}

namespace {

// Portable deterministic noise: splitmix64 uniforms through Box-Muller.
struct Rng {
    std::uint64_t state;

    double uniform() {
        state += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        z ^= z >> 31;
        return static_cast<double>(z >> 11) * 0x1.0p-53;
    }

    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * uniform());
    }
};

std::vector<int> verts_of_rings(int bone, std::initializer_list<int> rings) {
    std::vector<int> out;
    for (const int r : rings) {
        for (int a = 0; a < kAz; ++a) out.push_back(bone_vert(bone, r, a));
    }
    return out;
}

double set_distance(const Eigen::MatrixX3d& va, const std::vector<int>& ia,
                    const Eigen::MatrixX3d& vb, const std::vector<int>& ib) {
    double best = std::numeric_limits<double>::infinity();
    for (const int a : ia) {
        for (const int b : ib) {
            best = std::min(best, (va.row(a) - vb.row(b)).norm());
        }
    }
    return best;
}

std::string table_two(const std::vector<std::pair<std::string, std::string>>& rows) {
    std::string t = "| Person 1 | Person 2 |\n|---|---|\n";
    for (const auto& [a, b] : rows) t += "| " + a + " | " + b + " |\n";
    return t;
}

std::string table_one(const std::vector<std::pair<std::string, std::string>>& rows) {
    std::string t = "| Body part | Body part |\n|---|---|\n";
    for (const auto& [a, b] : rows) t += "| " + a + " | " + b + " |\n";
    return t;
}

std::vector<RawResponse> handshake_responses() {
    std::vector<RawResponse> out;
    for (int i = 0; i < 20; ++i) {
        RawResponse r;
        r.sample_index = i;
        if (i == 5 || i == 13) {
            r.text = "The two people stand close together, but I cannot confidently "
                     "determine any specific contact points from this view.\n";
            out.push_back(std::move(r));
            continue;
        }
        std::string prose;
        if (i % 3 == 0) {
            prose = "Two people face each other and clasp hands in greeting.\n\n";
        }
        std::vector<std::pair<std::string, std::string>> rows = {
            {"right hand", "right hand"}};
        if (i == 7) rows.push_back({"right hand", "left hand"});
        if (i == 11) rows.push_back({"briefcase", "right hand"});
        r.text = prose + table_two(rows);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<RawResponse> hug_responses() {
    std::vector<RawResponse> out;
    for (int i = 0; i < 20; ++i) {
        RawResponse r;
        r.sample_index = i;
        if (i == 9) {
            r.text = "The people are embracing; the exact contact points are occluded.\n";
            out.push_back(std::move(r));
            continue;
        }
        std::string prose;
        if (i % 4 == 1) prose = "The two people embrace tightly, chest to chest.\n\n";
        std::vector<std::pair<std::string, std::string>> rows = {{"chest", "chest"}};
        if (i == 4) {
            rows.push_back({"left hand / right hand", "back"});
        } else if (i % 2 == 0) {
            rows.push_back({"right hand", "back"});
        } else {
            rows.push_back({"left hand", "back"});
        }
        r.text = prose + table_two(rows);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<RawResponse> self_touch_responses() {
    std::vector<RawResponse> out;
    for (int i = 0; i < 20; ++i) {
        RawResponse r;
        r.sample_index = i;
        if (i == 3 || i == 17) {
            r.text = "A single person balancing on one leg; no clear self-contact.\n";
            out.push_back(std::move(r));
            continue;
        }
        std::string prose;
        if (i % 5 == 0) prose = "The person reaches down and grabs their raised foot.\n\n";
        std::vector<std::pair<std::string, std::string>> rows = {{"hand", "foot"}};
        if (i % 4 == 1) rows.push_back({"foot", "ground"});
        if (i % 5 == 2) rows.push_back({"arm", "leg"});
        if (i == 8) rows.push_back({"halo", "head"});
        r.text = prose + table_one(rows);
        out.push_back(std::move(r));
    }
    return out;
}

// Minimizes fn over a 3-axis grid, then refines around the best cell.
template <class Fn>
std::array<double, 3> scan3(Fn&& fn, std::array<double, 3> lo, std::array<double, 3> hi,
                            std::array<int, 3> steps, int rounds) {
    std::array<double, 3> best = {lo[0], lo[1], lo[2]};
    double best_val = std::numeric_limits<double>::infinity();
    for (int round = 0; round < rounds; ++round) {
        for (int i0 = 0; i0 < steps[0]; ++i0) {
            for (int i1 = 0; i1 < steps[1]; ++i1) {
                for (int i2 = 0; i2 < steps[2]; ++i2) {
                    const std::array<int, 3> idx = {i0, i1, i2};
                    std::array<double, 3> at;
                    for (int d = 0; d < 3; ++d) {
                        at[static_cast<std::size_t>(d)] =
                            steps[static_cast<std::size_t>(d)] == 1
                                ? lo[static_cast<std::size_t>(d)]
                                : lo[static_cast<std::size_t>(d)] +
                                      (hi[static_cast<std::size_t>(d)] -
                                       lo[static_cast<std::size_t>(d)]) *
                                          idx[static_cast<std::size_t>(d)] /
                                          (steps[static_cast<std::size_t>(d)] - 1);
                    }
                    const double v = fn(at);
                    if (v < best_val) {
                        best_val = v;
                        best = at;
                    }
                }
            }
        }
        // Shrink the window around the current best.
        for (int d = 0; d < 3; ++d) {
            const std::size_t ds = static_cast<std::size_t>(d);
            const double half = (hi[ds] - lo[ds]) / 6.0;
            lo[ds] = best[ds] - half;
            hi[ds] = best[ds] + half;
        }
    }
    return best;
}

// Drops self-contact pairs between fine regions of bones that share a
// joint: tube ends meeting at a joint sit close in space but are not a
// contact in any meaningful sense (the mesh components are disconnected,
// so the geodesic test cannot reject them).
ContactMap filter_adjacent_bones(const ContactMap& map) {
    const auto bone_of = [](const std::string& fine_name) {
        const auto pos = fine_name.rfind("_r");
        return bone_index(fine_name.substr(0, pos));
    };
    ContactMap out;
    for (const auto& [a, b] : map) {
        const int ba = bone_of(a), bb = bone_of(b);
        if (ba < 0 || bb < 0) continue;
        const BoneDef& da = kBones[static_cast<std::size_t>(ba)];
        const BoneDef& db = kBones[static_cast<std::size_t>(bb)];
        const std::set<int> ja = {da.parent, da.child};
        if (ba == bb || ja.count(db.parent) || ja.count(db.child)) continue;
        out.emplace_back(a, b);
    }
    return out;
}

// Gaussian noise on the joint rotations only; shape, translation, and the
// global orientation stay exact so refinement difficulty is pose noise alone.
PoseParams noised(const PoseParams& gt, Rng& rng, double theta_sigma) {
    PoseParams p = gt;
    for (Eigen::Index k = 0; k < p.theta.rows(); ++k) {
        for (int c = 0; c < 3; ++c) p.theta(k, c) += theta_sigma * rng.normal();
    }
    return p;
}

// The joints taking part in the contact are treated as occluded by it: the
// detector would have nothing reliable there, so their confidence is zero and
// only the contact description can pin them down.
Keypoints2D keypoints_from(const Eigen::MatrixX3d& joints, const Camera& cam,
                           std::initializer_list<int> occluded = {}) {
    Keypoints2D kp;
    kp.points = project(joints, cam);
    kp.confidence = Eigen::VectorXd::Ones(joints.rows());
    for (int j : occluded) kp.confidence[j] = 0.0;
    return kp;
}

}  // namespace

std::string make_test_ppm(int width, int height) {
    std::string img = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            img.push_back(static_cast<char>((x * 255) / std::max(1, width - 1)));
            img.push_back(static_cast<char>((y * 255) / std::max(1, height - 1)));
            img.push_back(static_cast<char>((x ^ y) & 0xff));
        }
    }
    return img;
}

SynthBundle make_synth_scene(SynthKind kind, std::uint64_t seed, double theta_sigma) {
    const BodyModel model = make_stick16();
    const RegionRegistry registry =
        RegionRegistry::from_json(stick16_regions_json(), model.vertex_count());

    if (theta_sigma < 0) {
        theta_sigma = kind == SynthKind::handshake ? 0.3 : kind == SynthKind::hug ? 0.15 : 0.2;
    }

    // Long lens: keeps pixel-space gradients competitive with the metric
    // contact losses so neither term drowns the other.
    Camera cam;
    cam.fx = cam.fy = 2500.0;
    cam.cx = cam.cy = 720.0;

    SynthBundle bundle;
    Scene& scene = bundle.scene;
    scene.camera = cam;

    Rng rng{seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(kind)};

    if (kind == SynthKind::handshake) {
        scene.id = "synth-handshake";

        PoseParams a = PoseParams::zero(kJoints, model.shape_dim());
        a.theta(J_R_SHOULDER, 0) = -kPi / 2;    // right arm straight ahead
        a.phi = Eigen::Vector3d(0, kPi / 2, 0); // facing +x
        a.trans = Eigen::Vector3d(-0.54, -1.0, 2.5);

        PoseParams b = a;
        b.phi = Eigen::Vector3d(0, -kPi / 2, 0);
        b.trans.setZero();

        // Place the second person so one right-hand vertex of each body
        // lands on the same point: exact contact by construction.
        const int hand_v = bone_vert(bone_index("r_farm"), 3, 0);
        const BodyModel::Posed pa = model.forward(a);
        const BodyModel::Posed pb0 = model.forward(b);
        b.trans = (pa.vertices.row(hand_v) - pb0.vertices.row(hand_v)).transpose();

        const BodyModel::Posed pb = model.forward(b);
        bundle.gt_params = {a, b};

        SceneGroundTruth gt;
        gt.joints = {pa.joints, pb.joints};
        gt.contact_map = pseudo_contact_map_pair(pa.vertices, pb.vertices, registry);
        scene.gt = std::move(gt);

        scene.keypoints = {keypoints_from(pa.joints, cam, {J_R_ELBOW, J_R_WRIST}),
                           keypoints_from(pb.joints, cam, {J_R_ELBOW, J_R_WRIST})};
        scene.persons = {noised(a, rng, theta_sigma), noised(b, rng, theta_sigma)};
        scene.responses = handshake_responses();
    } else if (kind == SynthKind::hug) {
        scene.id = "synth-hug";

        PoseParams a = PoseParams::zero(kJoints, model.shape_dim());
        a.theta(J_L_SHOULDER, 0) = -kPi / 2;
        a.theta(J_R_SHOULDER, 0) = -kPi / 2;
        a.theta(J_L_ELBOW, 1) = 1.1;
        a.theta(J_R_ELBOW, 1) = -1.1;
        a.phi = Eigen::Vector3d(0, kPi / 2, 0);
        a.trans = Eigen::Vector3d(-0.22, -1.0, 2.6);

        PoseParams b = a;
        b.phi = Eigen::Vector3d(0, -kPi / 2, 0);
        b.trans.setZero();

        // Chest-to-chest exact contact; torso vertices ignore the arm pose,
        // so the placement survives the arm scans below.
        const int chest_v = bone_vert(bone_index("spine"), 3, 2);
        {
            const BodyModel::Posed pa = model.forward(a);
            const BodyModel::Posed pb0 = model.forward(b);
            b.trans = (pa.vertices.row(chest_v) - pb0.vertices.row(chest_v)).transpose();
        }

        // Wrap each arm so the hand lands on the partner's back: scan
        // shoulder pitch, shoulder roll, and elbow yaw.
        const std::vector<int> back_verts = {bone_vert(bone_index("spine"), 2, 0),
                                             bone_vert(bone_index("spine"), 3, 0)};
        const auto tune_arm = [&](PoseParams& self, const PoseParams& partner, int shoulder,
                                  int elbow, double elbow_sign) {
            const BodyModel::Posed posed_partner = model.forward(partner);
            const std::vector<int> hand =
                verts_of_rings(shoulder == J_L_SHOULDER ? bone_index("l_farm")
                                                        : bone_index("r_farm"),
                               {2, 3});
            const auto objective = [&](const std::array<double, 3>& p) {
                PoseParams trial = self;
                trial.theta(shoulder, 0) = p[0];
                trial.theta(shoulder, 2) = p[1];
                trial.theta(elbow, 1) = elbow_sign * p[2];
                const BodyModel::Posed posed = model.forward(trial);
                return set_distance(posed.vertices, hand, posed_partner.vertices, back_verts);
            };
            const std::array<double, 3> best = scan3(
                objective, {-2.4, -0.9, 0.2}, {-0.7, 0.9, 2.2}, {14, 11, 13}, 3);
            self.theta(shoulder, 0) = best[0];
            self.theta(shoulder, 2) = best[1];
            self.theta(elbow, 1) = elbow_sign * best[2];
        };
        tune_arm(a, b, J_L_SHOULDER, J_L_ELBOW, 1.0);
        tune_arm(a, b, J_R_SHOULDER, J_R_ELBOW, -1.0);
        tune_arm(b, a, J_L_SHOULDER, J_L_ELBOW, 1.0);
        tune_arm(b, a, J_R_SHOULDER, J_R_ELBOW, -1.0);

        const BodyModel::Posed pa = model.forward(a);
        const BodyModel::Posed pb = model.forward(b);
        bundle.gt_params = {a, b};

        SceneGroundTruth gt;
        gt.joints = {pa.joints, pb.joints};
        gt.contact_map = pseudo_contact_map_pair(pa.vertices, pb.vertices, registry);
        scene.gt = std::move(gt);

        scene.keypoints = {keypoints_from(pa.joints, cam, {J_L_WRIST, J_R_WRIST}),
                           keypoints_from(pb.joints, cam, {J_L_WRIST, J_R_WRIST})};
        scene.persons = {noised(a, rng, theta_sigma), noised(b, rng, theta_sigma)};
        scene.responses = hug_responses();
    } else {
        scene.id = "synth-selftouch";

        PoseParams p = PoseParams::zero(kJoints, model.shape_dim());
        p.theta(J_L_HIP, 0) = -0.9;     // left leg raised forward
        p.theta(J_L_KNEE, 0) = -2.2;    // shin folded up
        p.theta(J_R_ELBOW, 0) = -0.3;
        p.trans = Eigen::Vector3d(0.0, -1.0, 2.3);

        // Bring the left hand to the raised left foot.
        const std::vector<int> hand = verts_of_rings(bone_index("l_farm"), {2, 3});
        const std::vector<int> foot = verts_of_rings(bone_index("l_shin"), {2, 3});
        const auto objective = [&](const std::array<double, 3>& s) {
            PoseParams trial = p;
            trial.theta(J_L_SHOULDER, 0) = s[0];
            trial.theta(J_L_SHOULDER, 2) = s[1];
            trial.theta(J_L_ELBOW, 0) = s[2];
            const BodyModel::Posed posed = model.forward(trial);
            return set_distance(posed.vertices, hand, posed.vertices, foot);
        };
        const std::array<double, 3> best =
            scan3(objective, {-2.4, -1.2, -1.6}, {-0.4, 1.2, 0.1}, {15, 13, 11}, 3);
        p.theta(J_L_SHOULDER, 0) = best[0];
        p.theta(J_L_SHOULDER, 2) = best[1];
        p.theta(J_L_ELBOW, 0) = best[2];

        const BodyModel::Posed posed = model.forward(p);
        bundle.gt_params = {p};

        SceneGroundTruth gt;
        gt.joints = {posed.joints};
        gt.contact_map =
            filter_adjacent_bones(pseudo_contact_map_self(posed.vertices, model.faces, registry));
        scene.gt = std::move(gt);

        scene.keypoints = {keypoints_from(posed.joints, cam, {J_L_WRIST, J_L_ANKLE})};
        scene.persons = {noised(p, rng, theta_sigma)};
        scene.responses = self_touch_responses();
    }

    return bundle;
}

SynthBundle write_synth_bundle(const std::filesystem::path& out_dir, SynthKind kind,
                               std::uint64_t seed, double theta_sigma) {
    SynthBundle bundle = make_synth_scene(kind, seed, theta_sigma);
    std::filesystem::create_directories(out_dir);

    auto dump = [&](const char* name, const std::string& text) {
        std::ofstream out(out_dir / name, std::ios::binary);
        if (!out) throw ValidationError("cannot write " + (out_dir / name).string());
        out << text;
    };

    dump("model.json", make_stick16().to_json().dump(2) + "\n");
    dump("regions.json", stick16_regions_json().dump(2) + "\n");
    dump("gmm.json", make_stick16_gmm().to_json().dump(2) + "\n");
    dump("image.ppm", make_test_ppm());

    bundle.scene.image = ImageRef{"image.ppm", std::nullopt};
    bundle.scene.save(out_dir / "scene.json");

    // Seed a replay cache matching the default gateway query for this scene,
    // so `optimize --replay` works on the bundle without any network.
    QuerySpec spec;
    spec.image_bytes = make_test_ppm();
    spec.prompt.system_text =
        bundle.scene.mode() == Mode::one_person ? prompts::kOnePerson : prompts::kTwoPerson;
    spec.prompt.n_samples = static_cast<int>(bundle.scene.responses.size());
    const std::filesystem::path key_dir = out_dir / "cache" / cache_key(spec);
    std::filesystem::create_directories(key_dir);
    for (std::size_t i = 0; i < bundle.scene.responses.size(); ++i) {
        std::ofstream out(key_dir / ("sample_" + std::to_string(i) + ".txt"), std::ios::binary);
        out << bundle.scene.responses[i].text;
    }

    PipelineConfig config;
    config.prior = "gmm.json";
    dump("config.json", config.to_json().dump(2) + "\n");

    nlohmann::json gt = nlohmann::json::object();
    gt["persons"] = nlohmann::json::array();
    for (const PoseParams& p : bundle.gt_params) gt["persons"].push_back(p.to_json());
    dump("gt_params.json", gt.dump(2) + "\n");

    return bundle;
}

}  // namespace contactfit
