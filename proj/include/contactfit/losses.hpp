#pragma once

// Differentiable loss terms over posed meshes.  All functions are templated
// on the scalar so one implementation serves plain evaluation and gradient
// builds.  Discrete choices (which vertex pair is closest, which limb
// assignment wins, which vertices are interpenetrating) are made on values
// only; expressions are built just for the winners, so tapes stay small and
// the gradient is the subgradient at the selected branch.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "contactfit/body_model.hpp"
#include "contactfit/constraints.hpp"
#include "contactfit/geometry.hpp"
#include "contactfit/gmm_prior.hpp"

namespace contactfit {

struct LossWeights {
    double lmm = 1000.0;
    double gmm = 0.01;
    double beta = 0.01;
    double theta = 0.1;
    double kp2d = 0.001;
    double penetration = 1.0;
    double heuristic = 1.0;
};

template <class T>
using MeshVerts = std::vector<Vec3<T>>;

// Caches one deterministic vertex draw per region id for a whole run, so
// every loss evaluation sees identical subsets.
class RegionSampler {
public:
    RegionSampler(int cap, std::uint64_t run_seed) : cap_(cap), run_seed_(run_seed) {}

    std::span<const int> sample(const Region& region) {
        const auto it = cache_.find(region.id());
        if (it != cache_.end()) return it->second;
        // Per-region seed: FNV-1a over the id, folded with the run seed.
        std::uint64_t h = 14695981039346656037ull ^ run_seed_;
        for (const char c : region.id()) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        return cache_.emplace(region.id(), subsample_region(region, cap_, h)).first->second;
    }

    int cap() const { return cap_; }

private:
    int cap_;
    std::uint64_t run_seed_;
    std::map<std::string, std::vector<int>> cache_;
};

// Minimum distance between two sampled regions, as an expression on the
// winning vertex pair.
template <class T>
T region_pair_distance(const MeshVerts<T>& va, const Region& ra, const MeshVerts<T>& vb,
                       const Region& rb, RegionSampler& sampler) {
    const std::span<const int> ia = sampler.sample(ra);
    const std::span<const int> ib = sampler.sample(rb);
    const MinPairResult best = argmin_pair_distance(va, ia, vb, ib);
    return safe_norm(va[static_cast<std::size_t>(best.index_a)] -
                     vb[static_cast<std::size_t>(best.index_b)]);
}

// Minimum over region variants of one side.
template <class T>
T side_min_distance(const MeshVerts<T>& va, const Region& ra, const MeshVerts<T>& vb,
                    const std::vector<Region>& side_b, RegionSampler& sampler) {
    T best = region_pair_distance(va, ra, vb, side_b.front(), sampler);
    for (std::size_t i = 1; i < side_b.size(); ++i) {
        best = min(best, region_pair_distance(va, ra, vb, side_b[i], sampler));
    }
    return best;
}

// Ungrouped constraint distance: min over every variant pair.
template <class T>
T constraint_distance(const MeshVerts<T>& va, const MeshVerts<T>& vb,
                      const ContactConstraint& c, RegionSampler& sampler) {
    T best = side_min_distance(va, c.side_a.front(), vb, c.side_b, sampler);
    for (std::size_t i = 1; i < c.side_a.size(); ++i) {
        best = min(best, side_min_distance(va, c.side_a[i], vb, c.side_b, sampler));
    }
    return best;
}

namespace detail {

// Distance for one grouped constraint with the grouped side pinned to a
// specific variant; the free side still takes its min.
template <class T>
T pinned_distance(const MeshVerts<T>& va, const MeshVerts<T>& vb, const ContactConstraint& c,
                  std::size_t variant, RegionSampler& sampler) {
    if (c.group_side == 0) {
        return side_min_distance(va, c.side_a[variant], vb, c.side_b, sampler);
    }
    // Grouped on side B: pin B's variant, min over side A.
    T best = region_pair_distance(va, c.side_a.front(), vb, c.side_b[variant], sampler);
    for (std::size_t i = 1; i < c.side_a.size(); ++i) {
        best = min(best, region_pair_distance(va, c.side_a[i], vb, c.side_b[variant], sampler));
    }
    return best;
}

}  // namespace detail

// Sum of constraint distances for one person ordering.  Chirality groups
// with 2..4 members are solved by enumerating left/right assignments that
// use both limbs at least once; larger or degenerate groups fall back to
// independent minima.
template <class T>
T ordered_constraint_sum(const MeshVerts<T>& va, const MeshVerts<T>& vb,
                         const ConstraintSet& set, RegionSampler& sampler) {
    T total = T(0.0);

    std::map<std::string, std::vector<const ContactConstraint*>> groups;
    for (const ContactConstraint& c : set.constraints) {
        if (!c.group.empty()) {
            groups[c.group].push_back(&c);
        } else {
            total += constraint_distance(va, vb, c, sampler);
        }
    }

    for (const auto& [name, slots] : groups) {
        (void)name;
        const std::size_t k = slots.size();
        bool enumerable = k >= 2 && k <= 4;
        for (const ContactConstraint* c : slots) {
            const auto& grouped = c->group_side == 0 ? c->side_a : c->side_b;
            if (grouped.size() != 2) enumerable = false;
        }

        if (!enumerable) {
            for (const ContactConstraint* c : slots) {
                total += constraint_distance(va, vb, *c, sampler);
            }
            continue;
        }

        // Per-slot distances with the grouped side pinned left (0) or right (1).
        std::vector<std::array<T, 2>> pinned;
        pinned.reserve(k);
        for (const ContactConstraint* c : slots) {
            pinned.push_back({detail::pinned_distance(va, vb, *c, 0, sampler),
                              detail::pinned_distance(va, vb, *c, 1, sampler)});
        }

        bool have = false;
        T best = T(0.0);
        const unsigned full = (1u << k) - 1u;
        for (unsigned mask = 1u; mask < full; ++mask) {   // skip all-left / all-right
            T sum = pinned[0][mask & 1u];
            for (std::size_t s = 1; s < k; ++s) sum += pinned[s][(mask >> s) & 1u];
            if (!have || value_of(sum) < value_of(best)) {
                best = sum;
                have = true;
            }
        }
        total += best;
    }
    return total;
}

// Constraint-set distance: minimum over the two person orderings.  With a
// single mesh (self-contact) the orderings coincide and one pass suffices.
template <class T>
T dist_sum(const MeshVerts<T>& v0, const MeshVerts<T>& v1, const ConstraintSet& set,
           RegionSampler& sampler) {
    if (set.constraints.empty()) return T(0.0);
    const T fwd = ordered_constraint_sum(v0, v1, set, sampler);
    if (&v0 == &v1) return fwd;
    return min(fwd, ordered_constraint_sum(v1, v0, set, sampler));
}

// Mean constraint-set distance over all response sets.  Per-set values are
// accumulated in ascending value order, which makes the result exactly
// invariant to permutations of the sets.
template <class T>
T lmm_loss(const MeshVerts<T>& v0, const MeshVerts<T>& v1,
           std::span<const ConstraintSet> sets, RegionSampler& sampler) {
    if (sets.empty()) return T(0.0);
    std::vector<T> per_set;
    per_set.reserve(sets.size());
    for (const ConstraintSet& s : sets) per_set.push_back(dist_sum(v0, v1, s, sampler));

    std::vector<std::size_t> order(per_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return value_of(per_set[a]) < value_of(per_set[b]);
    });
    T sum = T(0.0);
    for (const std::size_t i : order) sum += per_set[i];
    return sum / static_cast<double>(sets.size());
}

// Confidence-weighted squared pixel error of projected joints.
// Zero-confidence joints are skipped entirely.
template <class T>
T keypoint_loss(const std::vector<Vec3<T>>& joints, const Camera& cam, const Keypoints2D& kp) {
    if (static_cast<Eigen::Index>(joints.size()) != kp.points.rows()) {
        throw ValidationError("keypoint loss: joint count mismatch");
    }
    T sum = T(0.0);
    for (std::size_t j = 0; j < joints.size(); ++j) {
        const double conf = kp.confidence[static_cast<Eigen::Index>(j)];
        if (conf == 0.0) continue;
        const auto [u, v] = project_point(joints[j], cam, static_cast<int>(j));
        const T du = u - kp.points(static_cast<Eigen::Index>(j), 0);
        const T dv = v - kp.points(static_cast<Eigen::Index>(j), 1);
        sum += (du * du + dv * dv) * conf;
    }
    return sum;
}

template <class T>
T squared_norm_loss(std::span<const T> x) {
    T sum = T(0.0);
    for (const T& v : x) sum += v * v;
    return sum;
}

template <class T>
T init_pose_loss(std::span<const T> theta, std::span<const double> theta_init) {
    if (theta.size() != theta_init.size()) {
        throw ValidationError("pose deviation loss: dimension mismatch");
    }
    T sum = T(0.0);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const T d = theta[i] - theta_init[i];
        sum += d * d;
    }
    return sum;
}

// Squared distance from each interpenetrating proxy vertex to the nearest
// proxy vertex of the other mesh, both directions.  Membership (winding
// number > 0.5) is decided on values and held constant for the gradient.
// Identical meshes contribute nothing: every vertex has a coincident
// counterpart at distance zero.
template <class T>
T interpenetration_loss(const MeshVerts<T>& v0, const MeshVerts<T>& v1, const LowresMap& lowres,
                        std::vector<std::string>* warnings = nullptr) {
    if (&v0 == &v1) return T(0.0);

    const std::size_t n = lowres.vertices.size();
    const auto proxy_values = [&](const MeshVerts<T>& v) {
        Eigen::MatrixX3d m(static_cast<Eigen::Index>(n), 3);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3<T>& p = v[static_cast<std::size_t>(lowres.vertices[i])];
            m(static_cast<Eigen::Index>(i), 0) = value_of(p.x);
            m(static_cast<Eigen::Index>(i), 1) = value_of(p.y);
            m(static_cast<Eigen::Index>(i), 2) = value_of(p.z);
        }
        return m;
    };
    const Eigen::MatrixX3d p0 = proxy_values(v0);
    const Eigen::MatrixX3d p1 = proxy_values(v1);

    T total = T(0.0);
    const auto one_direction = [&](const Eigen::MatrixX3d& pa, const MeshVerts<T>& va,
                                   const Eigen::MatrixX3d& pb, const MeshVerts<T>& vb) {
        const std::vector<int> inside = inside_mesh(pa, pb, lowres.faces, warnings);
        for (const int i : inside) {
            Eigen::Index nearest = 0;
            double best = (pa.row(i) - pb.row(0)).squaredNorm();
            for (Eigen::Index j = 1; j < pb.rows(); ++j) {
                const double sq = (pa.row(i) - pb.row(j)).squaredNorm();
                if (sq < best) {
                    best = sq;
                    nearest = j;
                }
            }
            const Vec3<T>& a = va[static_cast<std::size_t>(lowres.vertices[static_cast<std::size_t>(i)])];
            const Vec3<T>& b = vb[static_cast<std::size_t>(lowres.vertices[static_cast<std::size_t>(nearest)])];
            total += squared_distance(a, b);
        }
    };
    one_direction(p0, v0, p1, v1);
    one_direction(p1, v1, p0, v0);
    return total;
}

// Backoff replacement for missing contact tables: pull the closest pair of
// full-mesh samples together.
template <class T>
T heuristic_contact_loss(const MeshVerts<T>& v0, const MeshVerts<T>& v1,
                         RegionSampler& sampler) {
    Region whole;
    whole.part = "__mesh__";
    whole.vertex_indices.resize(v0.size());
    std::iota(whole.vertex_indices.begin(), whole.vertex_indices.end(), 0);
    return region_pair_distance(v0, whole, v1, whole, sampler);
}

}  // namespace contactfit
