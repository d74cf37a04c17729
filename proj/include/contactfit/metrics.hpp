#pragma once

// Evaluation metrics: Procrustes-aligned joint error and contact
// correctness over a fine region partition, plus pseudo ground-truth
// contact maps derived from mesh geometry.

#include <Eigen/Core>

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "contactfit/geometry.hpp"
#include "contactfit/regions.hpp"

namespace contactfit {

// Ground-truth contact as pairs of fine region names; the first name lives
// on the first mesh, the second on the second (same mesh for self-contact).
using ContactMap = std::vector<std::pair<std::string, std::string>>;

nlohmann::json contact_map_to_json(const ContactMap& map);
ContactMap contact_map_from_json(const nlohmann::json& j);

enum class PaMode {
    per_person,   // align each person independently, average the errors
    joint         // one alignment over the concatenated joints
};

// Procrustes-aligned mean per-joint position error in millimeters.
double pa_mpjpe(const std::vector<Eigen::MatrixX3d>& predicted,
                const std::vector<Eigen::MatrixX3d>& ground_truth, PaMode mode);

struct PccResult {
    std::map<int, double> per_radius;   // radius in mm -> fraction of pairs in contact
    double average = 0.0;
    int pair_count = 0;
};

// Fraction of ground-truth contact pairs whose fine regions come within
// each radius.  Distances compare squared against squared thresholds, so a
// pair sitting exactly on a radius counts as in contact.
PccResult pcc(const Eigen::MatrixX3d& verts_a, const Eigen::MatrixX3d& verts_b,
              const ContactMap& contact, const RegionRegistry& registry,
              std::span<const int> radii_mm);

// 0, 5, ..., 95 millimeters.
const std::vector<int>& default_pcc_radii();

// Fine-region pairs of one mesh that touch in space (Euclidean min distance
// <= euclid_max_m) but are far along the surface (geodesic >= geodesic_min_m),
// i.e. genuine self-contact rather than adjacency.  Pairs are unordered and
// sorted; regions disconnected on the mesh count as infinitely far apart.
ContactMap pseudo_contact_map_self(const Eigen::MatrixX3d& verts, const Eigen::MatrixX3i& faces,
                                   const RegionRegistry& registry, double euclid_max_m = 0.020,
                                   double geodesic_min_m = 0.100);

// Fine-region pairs across two meshes within the Euclidean threshold.
ContactMap pseudo_contact_map_pair(const Eigen::MatrixX3d& verts_a,
                                   const Eigen::MatrixX3d& verts_b,
                                   const RegionRegistry& registry, double euclid_max_m = 0.020);

struct MetricsReport {
    double pa_mpjpe_per_person_mm = 0.0;
    double pa_mpjpe_joint_mm = 0.0;
    bool has_pcc = false;
    std::map<int, double> pcc_per_radius;
    double pcc_average = 0.0;

    nlohmann::json to_json() const;
};

}  // namespace contactfit
