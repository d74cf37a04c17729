#include "contactfit/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "contactfit/json_util.hpp"

namespace contactfit {

using nlohmann::json;

json contact_map_to_json(const ContactMap& map) {
    json out = json::array();
    for (const auto& [a, b] : map) out.push_back(json::array({a, b}));
    return out;
}

ContactMap contact_map_from_json(const json& j) {
    if (!j.is_array()) throw ParseError("contact map: expected an array of pairs");
    ContactMap map;
    for (const auto& e : j) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
            throw ParseError("contact map: each entry must be a pair of region names");
        }
        map.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }
    return map;
}

double pa_mpjpe(const std::vector<Eigen::MatrixX3d>& predicted,
                const std::vector<Eigen::MatrixX3d>& ground_truth, PaMode mode) {
    if (predicted.empty() || predicted.size() != ground_truth.size()) {
        throw ValidationError("joint error: person count mismatch");
    }
    for (std::size_t p = 0; p < predicted.size(); ++p) {
        if (predicted[p].rows() != ground_truth[p].rows() || predicted[p].rows() == 0) {
            throw ValidationError("joint error: joint count mismatch for person " +
                                  std::to_string(p));
        }
    }

    const auto mean_error = [](const Eigen::MatrixX3d& a, const Eigen::MatrixX3d& b) {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < a.rows(); ++i) sum += (a.row(i) - b.row(i)).norm();
        return sum / static_cast<double>(a.rows());
    };

    if (mode == PaMode::per_person) {
        double total = 0.0;
        for (std::size_t p = 0; p < predicted.size(); ++p) {
            const ProcrustesResult res = procrustes_align(predicted[p], ground_truth[p]);
            total += mean_error(res.aligned, ground_truth[p]);
        }
        return total / static_cast<double>(predicted.size()) * 1000.0;
    }

    Eigen::Index rows = 0;
    for (const auto& m : predicted) rows += m.rows();
    Eigen::MatrixX3d pred(rows, 3), gt(rows, 3);
    Eigen::Index at = 0;
    for (std::size_t p = 0; p < predicted.size(); ++p) {
        pred.middleRows(at, predicted[p].rows()) = predicted[p];
        gt.middleRows(at, predicted[p].rows()) = ground_truth[p];
        at += predicted[p].rows();
    }
    const ProcrustesResult res = procrustes_align(pred, gt);
    return mean_error(res.aligned, gt) * 1000.0;
}

namespace {

Eigen::MatrixX3d gather(const Eigen::MatrixX3d& verts, const std::vector<int>& idx) {
    Eigen::MatrixX3d out(static_cast<Eigen::Index>(idx.size()), 3);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = verts.row(idx[i]);
    }
    return out;
}

const Region& fine_or_throw(const RegionRegistry& registry, const std::string& name) {
    const Region* r = registry.fine_region(name);
    if (!r) throw ValidationError("contact map names unknown fine region \"" + name + "\"");
    return *r;
}

}  // namespace

PccResult pcc(const Eigen::MatrixX3d& verts_a, const Eigen::MatrixX3d& verts_b,
              const ContactMap& contact, const RegionRegistry& registry,
              std::span<const int> radii_mm) {
    if (radii_mm.empty()) throw ValidationError("contact correctness needs at least one radius");
    PccResult result;
    result.pair_count = static_cast<int>(contact.size());

    std::vector<double> squared;   // min squared distance per gt pair
    squared.reserve(contact.size());
    for (const auto& [name_a, name_b] : contact) {
        const Region& ra = fine_or_throw(registry, name_a);
        const Region& rb = fine_or_throw(registry, name_b);
        double best = -1.0;
        for (const int ia : ra.vertex_indices) {
            for (const int ib : rb.vertex_indices) {
                const double sq = (verts_a.row(ia) - verts_b.row(ib)).squaredNorm();
                if (best < 0.0 || sq < best) best = sq;
            }
        }
        squared.push_back(best);
    }

    double sum = 0.0;
    for (const int r : radii_mm) {
        double frac = 1.0;   // vacuously correct with no ground-truth pairs
        if (!squared.empty()) {
            const double threshold = (static_cast<double>(r) / 1000.0) *
                                     (static_cast<double>(r) / 1000.0);
            int hits = 0;
            for (const double sq : squared) {
                if (sq <= threshold) ++hits;
            }
            frac = static_cast<double>(hits) / static_cast<double>(squared.size());
        }
        result.per_radius[r] = frac;
        sum += frac;
    }
    result.average = sum / static_cast<double>(radii_mm.size());
    return result;
}

const std::vector<int>& default_pcc_radii() {
    static const std::vector<int> radii = [] {
        std::vector<int> r;
        for (int mm = 0; mm < 100; mm += 5) r.push_back(mm);
        return r;
    }();
    return radii;
}

ContactMap pseudo_contact_map_self(const Eigen::MatrixX3d& verts, const Eigen::MatrixX3i& faces,
                                   const RegionRegistry& registry, double euclid_max_m,
                                   double geodesic_min_m) {
    const auto adjacency = mesh_adjacency(verts, faces);
    ContactMap map;

    // One multi-source sweep per region gives surface distances to all others.
    std::map<std::string, std::vector<double>> geodesic;
    for (const auto& [name, region] : registry.fine()) {
        geodesic.emplace(name, multi_source_dijkstra(adjacency, region.vertex_indices));
    }

    const double euclid_sq = euclid_max_m * euclid_max_m;
    for (auto ia = registry.fine().begin(); ia != registry.fine().end(); ++ia) {
        for (auto ib = std::next(ia); ib != registry.fine().end(); ++ib) {
            double geo = std::numeric_limits<double>::infinity();
            const std::vector<double>& from_a = geodesic.at(ia->first);
            for (const int v : ib->second.vertex_indices) {
                geo = std::min(geo, from_a[static_cast<std::size_t>(v)]);
            }
            if (geo < geodesic_min_m) continue;

            double best = -1.0;
            for (const int va : ia->second.vertex_indices) {
                for (const int vb : ib->second.vertex_indices) {
                    const double sq = (verts.row(va) - verts.row(vb)).squaredNorm();
                    if (best < 0.0 || sq < best) best = sq;
                }
            }
            if (best <= euclid_sq) map.emplace_back(ia->first, ib->first);
        }
    }
    return map;
}

ContactMap pseudo_contact_map_pair(const Eigen::MatrixX3d& verts_a,
                                   const Eigen::MatrixX3d& verts_b,
                                   const RegionRegistry& registry, double euclid_max_m) {
    ContactMap map;
    const double euclid_sq = euclid_max_m * euclid_max_m;
    for (const auto& [name_a, ra] : registry.fine()) {
        for (const auto& [name_b, rb] : registry.fine()) {
            double best = -1.0;
            for (const int va : ra.vertex_indices) {
                for (const int vb : rb.vertex_indices) {
                    const double sq = (verts_a.row(va) - verts_b.row(vb)).squaredNorm();
                    if (best < 0.0 || sq < best) best = sq;
                }
            }
            if (best <= euclid_sq) map.emplace_back(name_a, name_b);
        }
    }
    return map;
}

json MetricsReport::to_json() const {
    json j{{"pa_mpjpe_per_person_mm", pa_mpjpe_per_person_mm},
           {"pa_mpjpe_joint_mm", pa_mpjpe_joint_mm}};
    if (has_pcc) {
        json radii = json::object();
        for (const auto& [mm, frac] : pcc_per_radius) radii[std::to_string(mm)] = frac;
        j["pcc"] = json{{"average", pcc_average}, {"per_radius", std::move(radii)}};
    }
    return j;
}

}  // namespace contactfit
