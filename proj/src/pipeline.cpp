#include "contactfit/pipeline.hpp"

#include <fstream>

#include "contactfit/json_util.hpp"
#include "contactfit/obj_io.hpp"

namespace contactfit {

using nlohmann::json;

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("config " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

PipelineConfig PipelineConfig::from_json(const json& j) {
    require_keys(j, "config", {},
                 {"learning_rate", "max_steps_per_stage", "convergence_tol",
                  "convergence_patience", "seed", "sample_cap", "mode", "backoff", "min_count",
                  "empty_threshold", "weights", "prior"});
    PipelineConfig c;
    if (j.contains("learning_rate")) c.learning_rate = number_from_json(j["learning_rate"], "config.learning_rate");
    if (j.contains("max_steps_per_stage")) {
        c.max_steps_per_stage = j["max_steps_per_stage"].get<int>();
        if (c.max_steps_per_stage < 1) throw ValidationError("config.max_steps_per_stage must be positive");
    }
    if (j.contains("convergence_tol")) c.convergence_tol = number_from_json(j["convergence_tol"], "config.convergence_tol");
    if (j.contains("convergence_patience")) {
        c.convergence_patience = j["convergence_patience"].get<int>();
        if (c.convergence_patience < 1) throw ValidationError("config.convergence_patience must be positive");
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_integer() || j["seed"].get<std::int64_t>() < 0) {
            throw ValidationError("config.seed must be a non-negative integer");
        }
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("sample_cap")) {
        c.sample_cap = j["sample_cap"].get<int>();
        if (c.sample_cap < 1) throw ValidationError("config.sample_cap must be positive");
    }
    if (j.contains("mode")) {
        c.mode = j["mode"].get<std::string>();
        if (c.mode != "auto") mode_from_name(c.mode);   // validates
    }
    if (j.contains("backoff")) {
        c.backoff = j["backoff"].get<std::string>();
        if (c.backoff != "auto" && c.backoff != "on" && c.backoff != "off") {
            throw ValidationError("config.backoff must be \"auto\", \"on\", or \"off\"");
        }
    }
    if (j.contains("min_count")) c.min_count = j["min_count"].get<int>();
    if (j.contains("empty_threshold")) {
        const json& t = j["empty_threshold"];
        if (t.is_string() && t.get<std::string>() == "auto") {
            c.empty_threshold = -1;
        } else if (t.is_number_integer() && t.get<int>() >= 0) {
            c.empty_threshold = t.get<int>();
        } else {
            throw ValidationError("config.empty_threshold must be \"auto\" or a non-negative integer");
        }
    }
    if (j.contains("weights")) {
        const json& w = j["weights"];
        require_keys(w, "config.weights", {},
                     {"lambda_lmm", "lambda_gmm", "lambda_beta", "lambda_theta", "lambda_kp2d",
                      "lambda_penetration", "lambda_heuristic"});
        if (w.contains("lambda_lmm")) {
            const json& l = w["lambda_lmm"];
            if (l.is_string() && l.get<std::string>() == "auto") {
                c.lambda_lmm = -1.0;
            } else {
                c.lambda_lmm = number_from_json(l, "config.weights.lambda_lmm");
                if (c.lambda_lmm < 0) throw ValidationError("config.weights.lambda_lmm must be >= 0");
            }
        }
        if (w.contains("lambda_gmm")) c.weights.gmm = number_from_json(w["lambda_gmm"], "config.weights.lambda_gmm");
        if (w.contains("lambda_beta")) c.weights.beta = number_from_json(w["lambda_beta"], "config.weights.lambda_beta");
        if (w.contains("lambda_theta")) c.weights.theta = number_from_json(w["lambda_theta"], "config.weights.lambda_theta");
        if (w.contains("lambda_kp2d")) c.weights.kp2d = number_from_json(w["lambda_kp2d"], "config.weights.lambda_kp2d");
        if (w.contains("lambda_penetration")) {
            c.weights.penetration = number_from_json(w["lambda_penetration"], "config.weights.lambda_penetration");
        }
        if (w.contains("lambda_heuristic")) {
            c.weights.heuristic = number_from_json(w["lambda_heuristic"], "config.weights.lambda_heuristic");
        }
    }
    if (j.contains("prior")) c.prior = j["prior"].get<std::string>();
    return c;
}

json PipelineConfig::to_json() const {
    json w;
    if (lambda_lmm < 0) {
        w["lambda_lmm"] = "auto";
    } else {
        w["lambda_lmm"] = lambda_lmm;
    }
    w["lambda_gmm"] = weights.gmm;
    w["lambda_beta"] = weights.beta;
    w["lambda_theta"] = weights.theta;
    w["lambda_kp2d"] = weights.kp2d;
    w["lambda_penetration"] = weights.penetration;
    w["lambda_heuristic"] = weights.heuristic;

    json j;
    j["learning_rate"] = learning_rate;
    j["max_steps_per_stage"] = max_steps_per_stage;
    j["convergence_tol"] = convergence_tol;
    j["convergence_patience"] = convergence_patience;
    j["seed"] = seed;
    j["sample_cap"] = sample_cap;
    j["mode"] = mode;
    j["backoff"] = backoff;
    j["min_count"] = min_count;
    if (empty_threshold < 0) {
        j["empty_threshold"] = "auto";
    } else {
        j["empty_threshold"] = empty_threshold;
    }
    j["weights"] = std::move(w);
    if (!prior.empty()) j["prior"] = prior.string();
    return j;
}

double PipelineConfig::effective_lambda_lmm(Mode m) const {
    if (lambda_lmm >= 0) return lambda_lmm;
    return m == Mode::two_person ? 1000.0 : 10000.0;
}

MetricsReport compute_metrics(const std::vector<PoseParams>& params, const Scene& scene,
                              const BodyModel& model, const RegionRegistry& registry) {
    if (!scene.gt) throw ValidationError("scene has no ground truth to measure against");
    if (params.size() != scene.gt->joints.size()) {
        throw ValidationError("person count mismatch between parameters and ground truth");
    }

    std::vector<BodyModel::Posed> posed;
    std::vector<Eigen::MatrixX3d> predicted_joints;
    for (const PoseParams& p : params) {
        posed.push_back(model.forward(p));
        predicted_joints.push_back(posed.back().joints);
    }

    MetricsReport report;
    report.pa_mpjpe_per_person_mm =
        pa_mpjpe(predicted_joints, scene.gt->joints, PaMode::per_person);
    report.pa_mpjpe_joint_mm = pa_mpjpe(predicted_joints, scene.gt->joints, PaMode::joint);

    if (!scene.gt->contact_map.empty()) {
        const Eigen::MatrixX3d& va = posed.front().vertices;
        const Eigen::MatrixX3d& vb = posed.back().vertices;
        const PccResult r =
            pcc(va, vb, scene.gt->contact_map, registry, default_pcc_radii());
        report.has_pcc = true;
        report.pcc_per_radius = r.per_radius;
        report.pcc_average = r.average;
    }
    return report;
}

PipelineResult run_pipeline(const Scene& scene, const BodyModel& model,
                            const RegionRegistry& registry, const PipelineConfig& config,
                            const GmmPrior* prior) {
    PipelineResult result;

    if (config.mode == "auto") {
        result.mode = scene.mode();
    } else {
        result.mode = mode_from_name(config.mode);
        if (result.mode != scene.mode()) {
            throw ValidationError("config requests " + std::string(mode_name(result.mode)) +
                                  " mode but the scene has " +
                                  std::to_string(scene.persons.size()) + " person(s)");
        }
    }

    std::vector<ConstraintSet> sets;
    sets.reserve(scene.responses.size());
    for (const RawResponse& r : scene.responses) {
        sets.push_back(parse_response(r, registry, result.mode));
    }
    result.aggregate = aggregate(std::move(sets), config.min_count);

    if (config.backoff == "on") {
        result.backoff = true;
    } else if (config.backoff == "off") {
        result.backoff = false;
    } else {
        const int threshold = config.empty_threshold < 0
                                  ? static_cast<int>(scene.responses.size())
                                  : config.empty_threshold;
        result.backoff = should_backoff(result.aggregate.empty_count, threshold);
    }

    OptimizerConfig oc;
    oc.learning_rate = config.learning_rate;
    oc.max_steps_per_stage = config.max_steps_per_stage;
    oc.convergence_tol = config.convergence_tol;
    oc.convergence_patience = config.convergence_patience;
    oc.seed = config.seed;
    oc.sample_cap = config.sample_cap;
    oc.mode = result.mode;
    oc.backoff = result.backoff;
    oc.weights = config.weights;
    oc.weights.lmm = config.effective_lambda_lmm(result.mode);

    if (scene.gt) {
        result.initial_metrics = compute_metrics(scene.persons, scene, model, registry);
    }

    try {
        result.report = run_two_stage(scene, model, result.aggregate.sets, oc, prior);
    } catch (const DivergenceError& e) {
        result.report = e.report();
        result.diverged = true;
        result.divergence_message = e.what();
    }

    if (scene.gt && !result.report.final_params.empty()) {
        result.refined_metrics =
            compute_metrics(result.report.final_params, scene, model, registry);
    }

    for (const ConstraintSet& s : result.aggregate.sets) {
        for (const std::string& w : s.warnings) {
            result.warnings.push_back("sample " + std::to_string(s.sample_index) + ": " + w);
        }
    }
    for (const std::string& sig : result.aggregate.removed_pairs) {
        result.warnings.push_back("filtered rare contact pair: " + sig);
    }
    for (const std::string& w : result.report.warnings) result.warnings.push_back(w);
    if (result.diverged) result.warnings.push_back(result.divergence_message);

    return result;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << content;
}

}  // namespace

void write_outputs(const std::filesystem::path& out_root, const Scene& scene,
                   const BodyModel& model, const PipelineResult& result) {
    const std::filesystem::path dir = out_root / scene.id;
    std::filesystem::create_directories(dir);

    json params = json::array();
    for (const PoseParams& p : result.report.final_params) params.push_back(p.to_json());
    write_text(dir / "params.json", json{{"persons", params}}.dump(2) + "\n");

    for (std::size_t i = 0; i < result.report.final_params.size(); ++i) {
        const BodyModel::Posed posed = model.forward(result.report.final_params[i]);
        save_obj(dir / ("person" + std::to_string(i) + ".obj"), posed.vertices, model.faces);
    }

    json report;
    report["scene"] = scene.id;
    report["mode"] = mode_name(result.mode);
    report["backoff"] = result.backoff;
    report["diverged"] = result.diverged;
    report["empty_responses"] = result.aggregate.empty_count;
    report["removed_pairs"] = result.aggregate.removed_pairs;
    report["constraints"] = constraint_sets_to_json(result.aggregate.sets);
    report["optimization"] = result.report.to_json();
    write_text(dir / "report.json", report.dump(2) + "\n");

    json metrics;
    if (result.initial_metrics) metrics["initial"] = result.initial_metrics->to_json();
    if (result.refined_metrics) metrics["refined"] = result.refined_metrics->to_json();
    write_text(dir / "metrics.json", metrics.dump(2) + "\n");

    std::string log;
    for (const std::string& w : result.warnings) log += w + "\n";
    write_text(dir / "warnings.log", log);

    if (result.diverged) {
        write_text(dir / "FAILED", result.divergence_message + "\n");
    }
}

}  // namespace contactfit
