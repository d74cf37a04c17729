#pragma once

// End-to-end refinement: parse responses, aggregate constraints, decide
// backoff, optimize, and measure.  Output writing is separated so callers
// can run in memory (tests) or publish a scene directory (CLI).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "contactfit/metrics.hpp"
#include "contactfit/optimizer.hpp"

namespace contactfit {

struct PipelineConfig {
    double learning_rate = 0.01;
    int max_steps_per_stage = 1000;
    double convergence_tol = 1e-7;
    int convergence_patience = 10;
    std::uint64_t seed = 0;
    int sample_cap = 128;
    std::string mode = "auto";       // "auto" | "two-person" | "one-person"
    std::string backoff = "auto";    // "auto" | "on" | "off"
    int min_count = 2;               // frequency filter threshold
    int empty_threshold = -1;        // backoff when this many sets are empty; -1 = all
    double lambda_lmm = -1.0;        // negative = by mode (1000 two-person, 10000 one-person)
    LossWeights weights;             // remaining term weights (lmm member unused)
    std::filesystem::path prior;     // optional pose prior path, resolved by the caller

    static PipelineConfig load(const std::filesystem::path& path);
    static PipelineConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    double effective_lambda_lmm(Mode mode) const;
};

MetricsReport compute_metrics(const std::vector<PoseParams>& params, const Scene& scene,
                              const BodyModel& model, const RegionRegistry& registry);

struct PipelineResult {
    Mode mode = Mode::two_person;
    bool backoff = false;
    AggregateResult aggregate;
    OptimizationReport report;
    bool diverged = false;
    std::string divergence_message;
    std::optional<MetricsReport> initial_metrics;
    std::optional<MetricsReport> refined_metrics;
    std::vector<std::string> warnings;
};

PipelineResult run_pipeline(const Scene& scene, const BodyModel& model,
                            const RegionRegistry& registry, const PipelineConfig& config,
                            const GmmPrior* prior);

// Writes out_root/<scene-id>/{params.json, person<i>.obj, report.json,
// metrics.json, warnings.log}, plus a FAILED marker when the run diverged.
// Content is deterministic: no timestamps, no environment state.
void write_outputs(const std::filesystem::path& out_root, const Scene& scene,
                   const BodyModel& model, const PipelineResult& result);

}  // namespace contactfit
