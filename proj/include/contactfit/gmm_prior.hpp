#pragma once

// Gaussian-mixture prior over flattened joint rotations.  The loss is the
// negative log-likelihood of the full mixture, computed with a shifted
// log-sum-exp so well-separated components stay numerically sane.

#include <Eigen/Core>

#include <cmath>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"

#include "contactfit/autodiff.hpp"
#include "contactfit/errors.hpp"

namespace contactfit {

class GmmPrior {
public:
    static GmmPrior load(const std::filesystem::path& path);
    static GmmPrior from_json(const nlohmann::json& j);
    static GmmPrior make(const Eigen::VectorXd& weights,
                         const std::vector<Eigen::VectorXd>& means,
                         const std::vector<Eigen::MatrixXd>& covariances);
    nlohmann::json to_json() const;

    int dim() const { return dim_; }
    int components() const { return static_cast<int>(comps_.size()); }

    template <class T>
    T nll(std::span<const T> x) const {
        if (static_cast<int>(x.size()) != dim_) {
            throw ValidationError("prior expects dimension " + std::to_string(dim_) +
                                  ", got " + std::to_string(x.size()));
        }
        std::vector<T> comp_log;
        comp_log.reserve(comps_.size());
        std::vector<T> dx(static_cast<std::size_t>(dim_), T(0.0));
        for (const Component& c : comps_) {
            for (int i = 0; i < dim_; ++i) {
                dx[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] - c.mean[i];
            }
            T q = T(0.0);
            for (int i = 0; i < dim_; ++i) {
                T s = T(0.0);
                bool any = false;
                for (int j = 0; j < dim_; ++j) {
                    const double p = c.precision(i, j);
                    if (p == 0.0) continue;   // diagonal priors stay cheap
                    s += dx[static_cast<std::size_t>(j)] * p;
                    any = true;
                }
                if (any) q += dx[static_cast<std::size_t>(i)] * s;
            }
            comp_log.push_back(c.log_weight_norm - 0.5 * q);
        }
        double shift = value_of(comp_log[0]);
        for (const T& c : comp_log) shift = std::max(shift, value_of(c));
        T sum = T(0.0);
        using contactfit::exp;
        using contactfit::log;
        for (const T& c : comp_log) sum += exp(c - shift);
        return -(shift + log(sum));
    }

private:
    struct Component {
        double log_weight_norm = 0.0;   // log w - 0.5 * (d log 2pi + log det C)
        Eigen::VectorXd mean;
        Eigen::MatrixXd precision;
        Eigen::MatrixXd covariance;     // kept for serialization
        double weight = 0.0;
    };

    int dim_ = 0;
    std::vector<Component> comps_;
};

}  // namespace contactfit
