// contactfit command line front end.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "contactfit/body_model.hpp"
#include "contactfit/constraints.hpp"
#include "contactfit/default_prompts.hpp"
#include "contactfit/errors.hpp"
#include "contactfit/gateway.hpp"
#include "contactfit/gmm_prior.hpp"
#include "contactfit/json_util.hpp"
#include "contactfit/metrics.hpp"
#include "contactfit/obj_io.hpp"
#include "contactfit/optimizer.hpp"
#include "contactfit/pipeline.hpp"
#include "contactfit/regions.hpp"
#include "contactfit/scene.hpp"
#include "contactfit/synth.hpp"

namespace fs = std::filesystem;
using namespace contactfit;
using nlohmann::json;

namespace {

std::string read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write file: " + path.string());
    out << text;
}

CropRect parse_crop(const std::string& text) {
    CropRect crop;
    char extra = 0;
    const int got = std::sscanf(text.c_str(), "%d,%d,%d,%d%c", &crop.x, &crop.y, &crop.w, &crop.h, &extra);
    if (got != 4) throw ValidationError("bad --crop, expected x,y,w,h: " + text);
    return crop;
}

// Resolves the prompt for a gateway query: explicit file wins, otherwise the
// built-in text for the scene's mode.
std::string prompt_text_for(const std::string& prompt_path, Mode mode) {
    if (!prompt_path.empty()) return read_file_bytes(prompt_path);
    return mode == Mode::one_person ? prompts::kOnePerson : prompts::kTwoPerson;
}

struct GatewayFlags {
    bool replay = false;
    bool record = false;
    std::string cache_dir;
    std::string prompt_path;
    int n_samples = 20;
    double temperature = 0.7;
    std::string detail = "high";
};

void add_gateway_flags(CLI::App* cmd, GatewayFlags& g) {
    cmd->add_flag("--replay", g.replay, "serve LMM responses from the cache, never hit the network");
    cmd->add_flag("--record", g.record, "query the LMM endpoint and store responses in the cache");
    cmd->add_option("--cache", g.cache_dir, "response cache directory (default: <scene dir>/cache)");
    cmd->add_option("--prompt", g.prompt_path, "prompt text file (default: built-in for the scene mode)");
    cmd->add_option("--n", g.n_samples, "number of samples to request")->check(CLI::PositiveNumber);
    cmd->add_option("--temperature", g.temperature, "sampling temperature");
    cmd->add_option("--detail", g.detail, "image detail level sent to the endpoint");
}

// Fills scene.responses through the gateway when --replay/--record was given.
void maybe_fetch_responses(Scene& scene, const fs::path& scene_path, const GatewayFlags& g) {
    if (!g.replay && !g.record) return;
    if (g.replay && g.record) throw ValidationError("--replay and --record are mutually exclusive");
    if (!scene.image) throw ValidationError("scene has no image reference; gateway modes need one");

    fs::path cache = g.cache_dir.empty() ? scene_path.parent_path() / "cache" : fs::path(g.cache_dir);
    GatewayOptions opts = GatewayOptions::from_env(g.replay ? GatewayMode::replay : GatewayMode::record, cache);

    PromptTemplate prompt;
    prompt.system_text = prompt_text_for(g.prompt_path, scene.mode());
    prompt.temperature = g.temperature;
    prompt.n_samples = g.n_samples;
    prompt.detail = g.detail;

    QuerySpec spec;
    spec.image_bytes = read_file_bytes(scene.image->path);
    spec.crop = scene.image->crop;
    spec.prompt = prompt;

    LmmGateway gateway(opts);
    scene.responses = gateway.sample(spec);
}

std::shared_ptr<GmmPrior> load_prior_for(const PipelineConfig& config, const fs::path& config_dir) {
    if (config.prior.empty()) return nullptr;
    fs::path p = config.prior;
    if (p.is_relative()) p = config_dir / p;
    return std::make_shared<GmmPrior>(GmmPrior::load(p));
}

struct SceneRunInputs {
    BodyModel model;
    RegionRegistry registry;
    PipelineConfig config;
    std::shared_ptr<GmmPrior> prior;
};

SceneRunInputs load_run_inputs(const std::string& model_path, const std::string& regions_path,
                               const std::string& config_path) {
    SceneRunInputs in;
    in.model = BodyModel::load(model_path);
    in.registry = RegionRegistry::load(regions_path, in.model);
    if (!config_path.empty()) in.config = PipelineConfig::load(config_path);
    const fs::path config_dir = config_path.empty() ? fs::current_path() : fs::path(config_path).parent_path();
    in.prior = load_prior_for(in.config, config_dir);
    return in;
}

// Runs the pipeline for one scene and writes the output directory.
// Returns the process exit code contribution (0 ok, 4 diverged).
int run_one_scene(const fs::path& scene_path, const SceneRunInputs& in, const GatewayFlags& g,
                  const fs::path& out_root, std::string* summary) {
    Scene scene = Scene::load(scene_path);
    scene.validate_against(in.model);
    maybe_fetch_responses(scene, scene_path, g);

    PipelineResult result = run_pipeline(scene, in.model, in.registry, in.config, in.prior.get());
    write_outputs(out_root, scene, in.model, result);

    std::ostringstream ss;
    ss << scene.id << ": mode=" << (result.mode == Mode::one_person ? "one-person" : "two-person")
       << " backoff=" << (result.backoff ? "yes" : "no");
    if (result.diverged) {
        ss << " DIVERGED (" << result.divergence_message << ")";
    } else if (result.refined_metrics) {
        ss << " pa_mpjpe=" << result.refined_metrics->pa_mpjpe_joint_mm << "mm";
    }
    *summary = ss.str();
    return result.diverged ? 4 : 0;
}

int cmd_optimize(const std::string& scene_path, const std::string& model_path, const std::string& regions_path,
                 const std::string& config_path, const std::string& out_dir, const GatewayFlags& g) {
    SceneRunInputs in = load_run_inputs(model_path, regions_path, config_path);
    std::string summary;
    const int code = run_one_scene(scene_path, in, g, out_dir, &summary);
    std::cout << summary << "\n";
    return code;
}

int cmd_query_lmm(const std::string& image_path, const std::string& crop_text, const std::string& prompt_path,
                  int n, double temperature, const std::string& detail, const std::string& cache_dir,
                  bool replay, const std::string& dump_path) {
    PromptTemplate prompt;
    prompt.system_text = prompt_path.empty() ? std::string(prompts::kTwoPerson) : read_file_bytes(prompt_path);
    prompt.temperature = temperature;
    prompt.n_samples = n;
    prompt.detail = detail;

    QuerySpec spec;
    spec.image_bytes = read_file_bytes(image_path);
    if (!crop_text.empty()) spec.crop = parse_crop(crop_text);
    spec.prompt = prompt;

    GatewayOptions opts = GatewayOptions::from_env(replay ? GatewayMode::replay : GatewayMode::record, cache_dir);
    LmmGateway gateway(opts);
    std::vector<RawResponse> responses = gateway.sample(spec);

    std::cout << "cache key: " << cache_key(spec) << "\n";
    std::cout << "samples: " << responses.size() << "\n";
    if (!dump_path.empty()) save_responses_jsonl(dump_path, responses);
    return 0;
}

int cmd_parse(const std::string& responses_path, const std::string& mode_text, const std::string& model_path,
              const std::string& regions_path, int min_count, const std::string& out_path) {
    const Mode mode = mode_from_name(mode_text);
    BodyModel model = BodyModel::load(model_path);
    RegionRegistry registry = RegionRegistry::load(regions_path, model);

    std::vector<RawResponse> responses = load_responses_jsonl(responses_path);
    std::vector<ConstraintSet> sets;
    sets.reserve(responses.size());
    for (const RawResponse& r : responses) sets.push_back(parse_response(r, registry, mode));
    AggregateResult agg = aggregate(sets, min_count);

    json out;
    out["mode"] = mode_name(mode);
    out["empty_count"] = agg.empty_count;
    out["removed_pairs"] = agg.removed_pairs;
    out["sets"] = constraint_sets_to_json(agg.sets);
    const std::string text = canonical_dump(out);
    if (out_path.empty()) {
        std::cout << text;
    } else {
        write_file(out_path, text);
    }
    return 0;
}

int cmd_evaluate(const std::string& pred_dir, const std::string& gt_path, const std::string& model_path,
                 const std::string& regions_path, const std::string& out_path) {
    BodyModel model = BodyModel::load(model_path);
    RegionRegistry registry = RegionRegistry::load(regions_path, model);
    Scene scene = Scene::load(gt_path);
    scene.validate_against(model);
    if (!scene.gt) throw ValidationError("scene has no ground truth block: " + gt_path);

    const fs::path params_path = fs::path(pred_dir) / "params.json";
    json params_json = load_json_file(params_path);
    require_keys(params_json, "params", {"persons"});
    std::vector<PoseParams> params;
    for (const json& p : params_json.at("persons")) params.push_back(PoseParams::from_json(p));
    if (params.size() != scene.persons.size())
        throw ValidationError("prediction/scene person count mismatch");

    MetricsReport report = compute_metrics(params, scene, model, registry);
    const std::string text = report.to_json().dump(2);
    if (out_path.empty()) {
        std::cout << text << "\n";
    } else {
        write_file(out_path, text + "\n");
    }
    return 0;
}

int cmd_synth(const std::string& kind_text, double noise, uint64_t seed, const std::string& out_dir) {
    write_synth_bundle(out_dir, synth_kind_from_name(kind_text), seed, noise);
    std::cout << "wrote " << kind_text << " bundle to " << out_dir << "\n";
    return 0;
}

int cmd_export_obj(const std::string& model_path, const std::string& params_path, const std::string& out_dir) {
    BodyModel model = BodyModel::load(model_path);
    json params_json = load_json_file(params_path);
    require_keys(params_json, "params", {"persons"});
    const fs::path out(out_dir);
    fs::create_directories(out);
    int i = 0;
    for (const json& p : params_json.at("persons")) {
        PoseParams params = PoseParams::from_json(p);
        BodyModel::Posed posed = model.forward(params);
        char name[32];
        std::snprintf(name, sizeof(name), "person%d.obj", i);
        save_obj(out / name, posed.vertices, model.faces);
        ++i;
    }
    std::cout << "wrote " << i << " mesh(es) to " << out.string() << "\n";
    return 0;
}

int cmd_batch(const std::vector<std::string>& scene_paths, const std::string& model_path,
              const std::string& regions_path, const std::string& config_path, const std::string& out_dir,
              int jobs, const GatewayFlags& g) {
    if (g.record) throw ValidationError("batch supports --replay only, not --record");
    SceneRunInputs in = load_run_inputs(model_path, regions_path, config_path);

    std::vector<int> codes(scene_paths.size(), 0);
    std::vector<std::string> lines(scene_paths.size());
    std::atomic<size_t> next{0};
    std::mutex io_mutex;

    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= scene_paths.size()) return;
            try {
                codes[i] = run_one_scene(scene_paths[i], in, g, out_dir, &lines[i]);
            } catch (const NetworkError& e) {
                codes[i] = 3;
                lines[i] = scene_paths[i] + ": network error: " + e.what();
            } catch (const std::exception& e) {
                codes[i] = 2;
                lines[i] = scene_paths[i] + ": error: " + e.what();
            }
            std::lock_guard<std::mutex> lock(io_mutex);
            std::cout << lines[i] << "\n";
        }
    };

    const int n_threads = std::max(1, std::min<int>(jobs, (int)scene_paths.size()));
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    for (int c : codes)
        if (c != 0) return c;  // first failing scene decides the exit code
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pose refinement from language-model contact descriptions"};
    app.require_subcommand(1);
    int exit_code = 0;

    // optimize
    std::string opt_scene, opt_model, opt_regions, opt_config, opt_out;
    GatewayFlags opt_gw;
    CLI::App* optimize = app.add_subcommand("optimize", "refine poses for one scene");
    optimize->add_option("--scene", opt_scene, "scene json")->required();
    optimize->add_option("--model", opt_model, "body model json")->required();
    optimize->add_option("--regions", opt_regions, "region registry json")->required();
    optimize->add_option("--config", opt_config, "pipeline config json");
    optimize->add_option("--out", opt_out, "output directory")->required();
    add_gateway_flags(optimize, opt_gw);
    optimize->callback([&]() { exit_code = cmd_optimize(opt_scene, opt_model, opt_regions, opt_config, opt_out, opt_gw); });

    // query-lmm
    std::string q_image, q_crop, q_prompt, q_cache, q_dump;
    int q_n = 20;
    double q_temperature = 0.7;
    std::string q_detail = "high";
    bool q_replay = false;
    CLI::App* query = app.add_subcommand("query-lmm", "sample contact descriptions for one image");
    query->add_option("--image", q_image, "image file (binary ppm/pgm)")->required();
    query->add_option("--crop", q_crop, "crop rectangle x,y,w,h");
    query->add_option("--prompt", q_prompt, "prompt text file (default: built-in two-person prompt)");
    query->add_option("--n", q_n, "number of samples")->check(CLI::PositiveNumber);
    query->add_option("--temperature", q_temperature, "sampling temperature");
    query->add_option("--detail", q_detail, "image detail level");
    query->add_option("--out", q_cache, "response cache directory")->required();
    query->add_flag("--replay", q_replay, "read from the cache instead of querying the endpoint");
    query->add_option("--dump", q_dump, "also write the responses as jsonl");
    query->callback([&]() {
        exit_code = cmd_query_lmm(q_image, q_crop, q_prompt, q_n, q_temperature, q_detail, q_cache, q_replay, q_dump);
    });

    // parse
    std::string p_responses, p_mode, p_model, p_regions, p_out;
    int p_min_count = 1;
    CLI::App* parse = app.add_subcommand("parse", "parse raw responses into constraint sets");
    parse->add_option("--responses", p_responses, "responses jsonl")->required();
    parse->add_option("--mode", p_mode, "two-person or one-person")->required();
    parse->add_option("--model", p_model, "body model json")->required();
    parse->add_option("--regions", p_regions, "region registry json")->required();
    parse->add_option("--min-count", p_min_count, "frequency filter threshold")->check(CLI::PositiveNumber);
    parse->add_option("--out", p_out, "output json (default: stdout)");
    parse->callback([&]() { exit_code = cmd_parse(p_responses, p_mode, p_model, p_regions, p_min_count, p_out); });

    // evaluate
    std::string e_pred, e_gt, e_model, e_regions, e_out;
    CLI::App* evaluate = app.add_subcommand("evaluate", "compute metrics for a prediction directory");
    evaluate->add_option("--pred", e_pred, "prediction directory containing params.json")->required();
    evaluate->add_option("--gt", e_gt, "ground-truth scene json")->required();
    evaluate->add_option("--model", e_model, "body model json")->required();
    evaluate->add_option("--regions", e_regions, "region registry json")->required();
    evaluate->add_option("--out", e_out, "output json (default: stdout)");
    evaluate->callback([&]() { exit_code = cmd_evaluate(e_pred, e_gt, e_model, e_regions, e_out); });

    // synth
    std::string s_kind, s_out;
    double s_noise = -1.0;
    uint64_t s_seed = 7;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic scene bundle");
    synth->add_option("--kind", s_kind, "handshake, hug, or self-touch")->required();
    synth->add_option("--noise", s_noise, "stddev of the angle noise in radians (default: per kind)");
    synth->add_option("--seed", s_seed, "noise seed");
    synth->add_option("--out", s_out, "output directory")->required();
    synth->callback([&]() { exit_code = cmd_synth(s_kind, s_noise, s_seed, s_out); });

    // export-obj
    std::string x_model, x_params, x_out;
    CLI::App* export_obj = app.add_subcommand("export-obj", "write posed meshes as wavefront obj");
    export_obj->add_option("--model", x_model, "body model json")->required();
    export_obj->add_option("--params", x_params, "params json (persons array)")->required();
    export_obj->add_option("--out", x_out, "output directory")->required();
    export_obj->callback([&]() { exit_code = cmd_export_obj(x_model, x_params, x_out); });

    // batch
    std::vector<std::string> b_scenes;
    std::string b_model, b_regions, b_config, b_out;
    int b_jobs = 1;
    GatewayFlags b_gw;
    CLI::App* batch = app.add_subcommand("batch", "refine poses for many scenes");
    batch->add_option("--scenes", b_scenes, "scene json files")->required()->expected(-1);
    batch->add_option("--model", b_model, "body model json")->required();
    batch->add_option("--regions", b_regions, "region registry json")->required();
    batch->add_option("--config", b_config, "pipeline config json");
    batch->add_option("--out", b_out, "output directory")->required();
    batch->add_option("--jobs", b_jobs, "worker thread count")->check(CLI::PositiveNumber);
    add_gateway_flags(batch, b_gw);
    batch->callback([&]() { exit_code = cmd_batch(b_scenes, b_model, b_regions, b_config, b_out, b_jobs, b_gw); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // help/version exit cleanly, usage errors are validation errors
    } catch (const NetworkError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const DivergenceError& e) {
        std::cerr << "error: optimization diverged: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return exit_code;
}
