#include "contactfit/gmm_prior.hpp"

#include <Eigen/Cholesky>

#include <fstream>
#include <numbers>

#include "contactfit/json_util.hpp"

namespace contactfit {

using nlohmann::json;

GmmPrior GmmPrior::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open prior file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("prior file " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

GmmPrior GmmPrior::from_json(const json& j) {
    require_keys(j, "prior", {"weights", "means", "covariances"});
    const Eigen::VectorXd weights = vector_from_json(j.at("weights"), "prior.weights");
    if (!j.at("means").is_array() || !j.at("covariances").is_array()) {
        throw ParseError("prior: means and covariances must be arrays");
    }
    std::vector<Eigen::VectorXd> means;
    for (std::size_t k = 0; k < j.at("means").size(); ++k) {
        means.push_back(
            vector_from_json(j.at("means")[k], "prior.means[" + std::to_string(k) + "]"));
    }
    std::vector<Eigen::MatrixXd> covs;
    for (std::size_t k = 0; k < j.at("covariances").size(); ++k) {
        covs.push_back(matrix_from_json(j.at("covariances")[k],
                                        "prior.covariances[" + std::to_string(k) + "]"));
    }
    return make(weights, means, covs);
}

GmmPrior GmmPrior::make(const Eigen::VectorXd& weights, const std::vector<Eigen::VectorXd>& means,
                        const std::vector<Eigen::MatrixXd>& covariances) {
    const int k = static_cast<int>(weights.size());
    if (k < 1) throw ValidationError("prior: needs at least one component");
    if (static_cast<int>(means.size()) != k || static_cast<int>(covariances.size()) != k) {
        throw ValidationError("prior: weights, means, covariances must have the same length");
    }
    if (std::abs(weights.sum() - 1.0) > 1e-6) {
        throw ValidationError("prior: weights sum to " + std::to_string(weights.sum()));
    }

    GmmPrior prior;
    prior.dim_ = static_cast<int>(means[0].size());
    if (prior.dim_ < 1) throw ValidationError("prior: zero-dimensional mean");

    for (int c = 0; c < k; ++c) {
        if (weights[c] <= 0.0) {
            throw ValidationError("prior: component " + std::to_string(c) +
                                  " has non-positive weight");
        }
        if (static_cast<int>(means[static_cast<std::size_t>(c)].size()) != prior.dim_) {
            throw ValidationError("prior: mean " + std::to_string(c) + " dimension mismatch");
        }
        const Eigen::MatrixXd& cov = covariances[static_cast<std::size_t>(c)];
        if (cov.rows() != prior.dim_ || cov.cols() != prior.dim_) {
            throw ValidationError("prior: covariance " + std::to_string(c) + " shape mismatch");
        }
        if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
            throw ValidationError("prior: covariance " + std::to_string(c) + " is not symmetric");
        }
        const Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
        Eigen::LLT<Eigen::MatrixXd> llt(sym);
        if (llt.info() != Eigen::Success) {
            throw ValidationError("prior: covariance " + std::to_string(c) +
                                  " is not positive definite");
        }
        double log_det = 0.0;
        const Eigen::MatrixXd l = llt.matrixL();
        for (int i = 0; i < prior.dim_; ++i) log_det += 2.0 * std::log(l(i, i));

        Component comp;
        comp.weight = weights[c];
        comp.mean = means[static_cast<std::size_t>(c)];
        comp.covariance = sym;
        comp.precision =
            llt.solve(Eigen::MatrixXd::Identity(prior.dim_, prior.dim_));
        // Exact zeros in the covariance's off-diagonals can come back as
        // denormal noise; snap them so the nll loop can skip them.
        for (int i = 0; i < prior.dim_; ++i) {
            for (int jj = 0; jj < prior.dim_; ++jj) {
                if (std::abs(comp.precision(i, jj)) < 1e-300) comp.precision(i, jj) = 0.0;
            }
        }
        comp.log_weight_norm =
            std::log(weights[c]) -
            0.5 * (prior.dim_ * std::log(2.0 * std::numbers::pi) + log_det);
        prior.comps_.push_back(std::move(comp));
    }
    return prior;
}

json GmmPrior::to_json() const {
    json weights = json::array();
    json means = json::array();
    json covs = json::array();
    for (const Component& c : comps_) {
        weights.push_back(c.weight);
        means.push_back(to_json_array(c.mean));
        covs.push_back(to_json_rows(c.covariance));
    }
    return json{{"weights", std::move(weights)},
                {"means", std::move(means)},
                {"covariances", std::move(covs)}};
}

}  // namespace contactfit
