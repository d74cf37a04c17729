#include "doctest.h"

#include <random>

#include <Eigen/Dense>

#include "contactfit/gmm_prior.hpp"
#include "contactfit/synth.hpp"

using namespace contactfit;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

GmmPrior two_component_2d() {
    VectorXd w(2);
    w << 0.6, 0.4;
    VectorXd m1(2), m2(2);
    m1 << 0.5, -0.25;
    m2 << -1.0, 2.0;
    MatrixXd c1(2, 2), c2(2, 2);
    c1 << 1.0, 0.3, 0.3, 0.5;
    c2 << 2.0, -0.4, -0.4, 1.5;
    return GmmPrior::make(w, {m1, m2}, {c1, c2});
}

// direct mixture density, no log-sum-exp tricks
double oracle_nll(const VectorXd& x) {
    VectorXd w(2);
    w << 0.6, 0.4;
    std::vector<VectorXd> means(2, VectorXd(2));
    means[0] << 0.5, -0.25;
    means[1] << -1.0, 2.0;
    std::vector<MatrixXd> covs(2, MatrixXd(2, 2));
    covs[0] << 1.0, 0.3, 0.3, 0.5;
    covs[1] << 2.0, -0.4, -0.4, 1.5;
    double density = 0.0;
    for (int k = 0; k < 2; ++k) {
        const VectorXd d = x - means[k];
        const double q = d.dot(covs[static_cast<std::size_t>(k)].inverse() * d);
        const double norm = std::pow(2 * M_PI, -1.0) *
                            std::pow(covs[static_cast<std::size_t>(k)].determinant(), -0.5);
        density += w[k] * norm * std::exp(-0.5 * q);
    }
    return -std::log(density);
}

}  // namespace

TEST_CASE("mixture nll matches the direct density") {
    const GmmPrior prior = two_component_2d();
    CHECK(prior.dim() == 2);
    CHECK(prior.components() == 2);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        VectorXd x(2);
        x << u(rng), u(rng);
        const std::vector<double> xs = {x[0], x[1]};
        CHECK(prior.nll<double>(xs) == doctest::Approx(oracle_nll(x)).epsilon(1e-10));
    }
}

TEST_CASE("mixture nll gradient matches finite differences") {
    const GmmPrior prior = two_component_2d();
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 10; ++trial) {
        const std::vector<double> at = {u(rng), u(rng)};

        ad::Tape tape;
        std::vector<ad::Value> xs = {ad::Value::variable(tape, at[0]),
                                     ad::Value::variable(tape, at[1])};
        const ad::Value root = prior.nll<ad::Value>(xs);
        const std::vector<double> g = ad::gradient(root, xs);

        const double h = 1e-6;
        for (int k = 0; k < 2; ++k) {
            std::vector<double> up = at, dn = at;
            up[static_cast<std::size_t>(k)] += h;
            dn[static_cast<std::size_t>(k)] -= h;
            const double fd = (prior.nll<double>(up) - prior.nll<double>(dn)) / (2 * h);
            CHECK(std::abs(fd - g[static_cast<std::size_t>(k)]) < 1e-6);
        }
    }
}

TEST_CASE("the prior survives a json round trip") {
    const GmmPrior prior = two_component_2d();
    const GmmPrior back = GmmPrior::from_json(prior.to_json());
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 10; ++trial) {
        const std::vector<double> x = {u(rng), u(rng)};
        CHECK(back.nll<double>(x) == doctest::Approx(prior.nll<double>(x)).epsilon(1e-12));
    }
}

TEST_CASE("prior validation") {
    VectorXd bad_w(2);
    bad_w << 0.6, 0.6;  // sums to 1.2
    VectorXd m(2);
    m << 0.0, 0.0;
    MatrixXd c = MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(GmmPrior::make(bad_w, {m, m}, {c, c}), ValidationError);

    MatrixXd asym(2, 2);
    asym << 1.0, 0.5, 0.1, 1.0;
    VectorXd w1(1);
    w1 << 1.0;
    CHECK_THROWS_AS(GmmPrior::make(w1, {m}, {asym}), ValidationError);

    const GmmPrior prior = two_component_2d();
    const std::vector<double> wrong_dim = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(prior.nll<double>(wrong_dim), ValidationError);

    CHECK_THROWS_AS(GmmPrior::load("/nonexistent/prior.json"), ParseError);
}

TEST_CASE("the synthetic 48-dim prior prefers its own means") {
    const GmmPrior prior = make_stick16_gmm();
    CHECK(prior.dim() == 48);
    CHECK(prior.components() >= 2);

    // a pose near the mixture bulk scores better than a wild one
    const std::vector<double> zero(48, 0.0);
    std::vector<double> wild(48, 0.0);
    for (std::size_t i = 0; i < wild.size(); ++i) wild[i] = (i % 2 == 0) ? 2.5 : -2.5;
    CHECK(prior.nll<double>(zero) < prior.nll<double>(wild));
}
