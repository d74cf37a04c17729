#pragma once

// Two-stage Adam refinement of person parameters under the weighted
// objective.  Stage 1 optimizes rotations, shape, and translation; stage 2
// continues with shape frozen.  The global orientation never moves.
//
// AssembledObjective packs persons into one flat vector
// [theta | beta | trans] per person and evaluates the objective either on
// doubles (fast path, used for traces and finite differences) or on the
// autodiff tape (gradients).

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "contactfit/autodiff.hpp"
#include "contactfit/gmm_prior.hpp"
#include "contactfit/losses.hpp"
#include "contactfit/scene.hpp"

namespace contactfit {

enum class LossTerm { lmm, gmm, beta, theta, kp2d, penetration, heuristic };
const char* loss_term_name(LossTerm term);

struct OptimizerConfig {
    double learning_rate = 0.01;
    int max_steps_per_stage = 1000;
    double convergence_tol = 1e-7;
    int convergence_patience = 10;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    LossWeights weights;
    Mode mode = Mode::two_person;
    bool backoff = false;
    std::uint64_t seed = 0;
    int sample_cap = 128;
};

// Active terms and their effective weights for a mode/backoff combination.
// One-person runs double the pose-deviation weight and drop the mixture
// prior; backoff swaps the contact term for the heuristic pull (two-person)
// or drops it (one-person).
std::vector<std::pair<LossTerm, double>> select_objective(Mode mode, bool backoff,
                                                          const LossWeights& weights);

struct StageTrace {
    int steps = 0;            // parameter updates applied
    bool converged = false;
    std::vector<double> total;                          // objective before each step + final
    std::map<std::string, std::vector<double>> terms;   // raw (unweighted) term values
};

struct OptimizationReport {
    Mode mode = Mode::two_person;
    bool backoff = false;
    std::vector<std::string> term_names;
    std::vector<StageTrace> stages;
    std::vector<PoseParams> final_params;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
};

// Raised when the objective or gradient turns non-finite, or projection
// leaves its domain mid-run; carries the progress made so far.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& msg, OptimizationReport report)
        : Error(msg), report_(std::move(report)) {}
    const OptimizationReport& report() const { return report_; }

private:
    OptimizationReport report_;
};

class AssembledObjective {
public:
    AssembledObjective(const Scene& scene, const BodyModel& model,
                       std::vector<ConstraintSet> sets, const OptimizerConfig& config,
                       const GmmPrior* prior);
    ~AssembledObjective();
    AssembledObjective(AssembledObjective&&) noexcept;
    AssembledObjective& operator=(AssembledObjective&&) noexcept;

    int dim() const;
    int person_count() const;
    std::vector<double> pack_initial() const;
    std::vector<PoseParams> unpack(std::span<const double> x) const;
    // Indices of shape coefficients inside the flat vector (frozen in stage 2).
    std::vector<int> beta_indices() const;

    double value(std::span<const double> x) const;
    std::vector<std::pair<std::string, double>> term_values(std::span<const double> x) const;
    std::vector<double> gradient(std::span<const double> x) const;
    const std::vector<std::pair<LossTerm, double>>& terms() const;
    const std::vector<std::string>& warnings() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Gradient of an arbitrary scalar tape program at a point.
using ScalarObjective = std::function<ad::Value(ad::Tape&, std::span<const ad::Value>)>;
std::vector<double> gradient_of(const ScalarObjective& f, std::span<const double> at);

OptimizationReport run_two_stage(const Scene& scene, const BodyModel& model,
                                 const std::vector<ConstraintSet>& sets,
                                 const OptimizerConfig& config, const GmmPrior* prior);

}  // namespace contactfit
