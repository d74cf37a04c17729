#include "contactfit/optimizer.hpp"

#include <cmath>
#include <cstddef>

#include "contactfit/json_util.hpp"

namespace contactfit {

const char* loss_term_name(LossTerm term) {
    switch (term) {
        case LossTerm::lmm: return "lmm";
        case LossTerm::gmm: return "gmm";
        case LossTerm::beta: return "beta";
        case LossTerm::theta: return "theta";
        case LossTerm::kp2d: return "kp2d";
        case LossTerm::penetration: return "penetration";
        case LossTerm::heuristic: return "heuristic";
    }
    return "?";
}

std::vector<std::pair<LossTerm, double>> select_objective(Mode mode, bool backoff,
                                                          const LossWeights& w) {
    std::vector<std::pair<LossTerm, double>> terms;
    const auto add = [&](LossTerm t, double weight) {
        if (weight != 0.0) terms.emplace_back(t, weight);
    };
    if (mode == Mode::two_person) {
        if (!backoff) add(LossTerm::lmm, w.lmm);
        add(LossTerm::gmm, w.gmm);
        add(LossTerm::beta, w.beta);
        add(LossTerm::theta, w.theta);
        add(LossTerm::kp2d, w.kp2d);
        add(LossTerm::penetration, w.penetration);
        if (backoff) add(LossTerm::heuristic, w.heuristic);
    } else {
        // One-person: no mixture prior, pose deviation counts double, and
        // backoff simply drops the contact term.
        if (!backoff) add(LossTerm::lmm, w.lmm);
        add(LossTerm::beta, w.beta);
        add(LossTerm::theta, 2.0 * w.theta);
        add(LossTerm::kp2d, w.kp2d);
        add(LossTerm::penetration, w.penetration);
    }
    return terms;
}

nlohmann::json OptimizationReport::to_json() const {
    nlohmann::json j;
    j["mode"] = mode_name(mode);
    j["backoff"] = backoff;
    j["terms"] = term_names;
    nlohmann::json stages_json = nlohmann::json::array();
    for (const StageTrace& s : stages) {
        nlohmann::json sj;
        sj["steps"] = s.steps;
        sj["converged"] = s.converged;
        sj["total"] = s.total;
        nlohmann::json tj = nlohmann::json::object();
        for (const auto& [name, values] : s.terms) tj[name] = values;
        sj["term_values"] = tj;
        stages_json.push_back(std::move(sj));
    }
    j["stages"] = std::move(stages_json);
    nlohmann::json params = nlohmann::json::array();
    for (const PoseParams& p : final_params) params.push_back(p.to_json());
    j["final_params"] = std::move(params);
    j["warnings"] = warnings;
    return j;
}

struct AssembledObjective::Impl {
    const BodyModel* model = nullptr;
    Camera camera;
    std::vector<PoseParams> initial;
    std::vector<Keypoints2D> keypoints;
    std::vector<ConstraintSet> sets;
    OptimizerConfig config;
    const GmmPrior* prior = nullptr;
    std::vector<std::pair<LossTerm, double>> terms;
    LowresMap lowres;
    std::vector<std::vector<double>> theta_init;   // flattened per person
    int theta_dim = 0;
    int beta_dim = 0;

    mutable ad::Tape tape;
    mutable RegionSampler sampler{128, 0};
    mutable std::vector<std::string> warnings;
    mutable bool collected_mesh_warnings = false;

    int persons() const { return static_cast<int>(initial.size()); }
    int per_person_dim() const { return theta_dim + beta_dim + 3; }

    bool uses(LossTerm t) const {
        for (const auto& [term, w] : terms) {
            if (term == t) return true;
        }
        return false;
    }

    template <class T>
    T evaluate(std::span<const T> x, std::vector<std::pair<std::string, double>>* raw) const {
        const int np = persons();
        const int ppd = per_person_dim();
        if (static_cast<int>(x.size()) != np * ppd) {
            throw ValidationError("objective expects " + std::to_string(np * ppd) +
                                  " variables, got " + std::to_string(x.size()));
        }

        std::vector<PosedT<T>> posed;
        posed.reserve(static_cast<std::size_t>(np));
        std::vector<std::span<const T>> theta_spans, beta_spans;
        for (int p = 0; p < np; ++p) {
            const std::size_t base = static_cast<std::size_t>(p * ppd);
            const auto theta = x.subspan(base, static_cast<std::size_t>(theta_dim));
            const auto beta = x.subspan(base + static_cast<std::size_t>(theta_dim),
                                        static_cast<std::size_t>(beta_dim));
            const auto trans =
                x.subspan(base + static_cast<std::size_t>(theta_dim + beta_dim), 3);
            posed.push_back(model->pose_mesh(theta, beta,
                                             initial[static_cast<std::size_t>(p)].phi, trans));
            theta_spans.push_back(theta);
            beta_spans.push_back(beta);
        }
        const MeshVerts<T>& v0 = posed.front().vertices;
        const MeshVerts<T>& v1 = posed.back().vertices;   // == v0 for one person

        std::vector<std::string>* mesh_warn =
            collected_mesh_warnings ? nullptr : &warnings;

        T total = T(0.0);
        for (const auto& [term, weight] : terms) {
            T value = T(0.0);
            switch (term) {
                case LossTerm::lmm:
                    value = lmm_loss(v0, v1, std::span<const ConstraintSet>(sets), sampler);
                    break;
                case LossTerm::gmm:
                    for (int p = 0; p < np; ++p) {
                        value += prior->nll(theta_spans[static_cast<std::size_t>(p)]);
                    }
                    break;
                case LossTerm::beta:
                    for (int p = 0; p < np; ++p) {
                        value += squared_norm_loss(beta_spans[static_cast<std::size_t>(p)]);
                    }
                    break;
                case LossTerm::theta:
                    for (int p = 0; p < np; ++p) {
                        value += init_pose_loss<T>(theta_spans[static_cast<std::size_t>(p)],
                                                   theta_init[static_cast<std::size_t>(p)]);
                    }
                    break;
                case LossTerm::kp2d:
                    for (int p = 0; p < np; ++p) {
                        value += keypoint_loss(posed[static_cast<std::size_t>(p)].joints, camera,
                                               keypoints[static_cast<std::size_t>(p)]);
                    }
                    break;
                case LossTerm::penetration:
                    value = interpenetration_loss(v0, v1, lowres, mesh_warn);
                    break;
                case LossTerm::heuristic:
                    value = heuristic_contact_loss(v0, v1, sampler);
                    break;
            }
            if (raw) raw->emplace_back(loss_term_name(term), value_of(value));
            total += value * weight;
        }
        collected_mesh_warnings = true;
        return total;
    }
};

AssembledObjective::AssembledObjective(const Scene& scene, const BodyModel& model,
                                       std::vector<ConstraintSet> sets,
                                       const OptimizerConfig& config, const GmmPrior* prior)
    : impl_(std::make_unique<Impl>()) {
    scene.validate_against(model);
    if (scene.mode() != config.mode) {
        throw ValidationError("scene has " + std::to_string(scene.persons.size()) +
                              " person(s) but the optimizer is configured for " +
                              std::string(mode_name(config.mode)) + " mode");
    }

    Impl& im = *impl_;
    im.model = &model;
    im.camera = scene.camera;
    im.initial = scene.persons;
    im.keypoints = scene.keypoints;
    im.sets = std::move(sets);
    im.config = config;
    im.prior = prior;
    im.terms = select_objective(config.mode, config.backoff, config.weights);
    im.theta_dim = model.joint_count() * 3;
    im.beta_dim = model.shape_dim();
    im.sampler = RegionSampler(config.sample_cap, config.seed);

    if (im.uses(LossTerm::gmm)) {
        if (!prior) {
            throw ValidationError("objective includes the pose prior but none was supplied");
        }
        if (prior->dim() != im.theta_dim) {
            throw ValidationError("pose prior covers " + std::to_string(prior->dim()) +
                                  " dims, pose has " + std::to_string(im.theta_dim));
        }
    }
    if (im.uses(LossTerm::lmm) && im.sets.empty()) {
        throw ValidationError("objective includes the contact term but no constraint sets");
    }

    if (model.lowres) {
        im.lowres = *model.lowres;
    } else {
        im.lowres.vertices.resize(static_cast<std::size_t>(model.vertex_count()));
        for (int i = 0; i < model.vertex_count(); ++i) {
            im.lowres.vertices[static_cast<std::size_t>(i)] = i;
        }
        im.lowres.faces = model.faces;
        im.warnings.push_back(
            "model has no low-resolution proxy; interpenetration uses the full mesh");
    }

    for (const PoseParams& p : im.initial) {
        std::vector<double> flat(static_cast<std::size_t>(im.theta_dim));
        for (int k = 0; k < p.theta.rows(); ++k) {
            for (int c = 0; c < 3; ++c) flat[static_cast<std::size_t>(k * 3 + c)] = p.theta(k, c);
        }
        im.theta_init.push_back(std::move(flat));
    }
}

AssembledObjective::~AssembledObjective() = default;
AssembledObjective::AssembledObjective(AssembledObjective&&) noexcept = default;
AssembledObjective& AssembledObjective::operator=(AssembledObjective&&) noexcept = default;

int AssembledObjective::dim() const { return impl_->persons() * impl_->per_person_dim(); }
int AssembledObjective::person_count() const { return impl_->persons(); }

std::vector<double> AssembledObjective::pack_initial() const {
    const Impl& im = *impl_;
    std::vector<double> x(static_cast<std::size_t>(dim()));
    for (int p = 0; p < im.persons(); ++p) {
        const PoseParams& params = im.initial[static_cast<std::size_t>(p)];
        std::size_t at = static_cast<std::size_t>(p * im.per_person_dim());
        for (int k = 0; k < params.theta.rows(); ++k) {
            for (int c = 0; c < 3; ++c) x[at++] = params.theta(k, c);
        }
        for (int b = 0; b < params.beta.size(); ++b) x[at++] = params.beta[b];
        for (int c = 0; c < 3; ++c) x[at++] = params.trans[c];
    }
    return x;
}

std::vector<PoseParams> AssembledObjective::unpack(std::span<const double> x) const {
    const Impl& im = *impl_;
    if (static_cast<int>(x.size()) != dim()) {
        throw ValidationError("parameter vector has wrong size");
    }
    std::vector<PoseParams> out;
    for (int p = 0; p < im.persons(); ++p) {
        PoseParams params = im.initial[static_cast<std::size_t>(p)];
        std::size_t at = static_cast<std::size_t>(p * im.per_person_dim());
        for (int k = 0; k < params.theta.rows(); ++k) {
            for (int c = 0; c < 3; ++c) params.theta(k, c) = x[at++];
        }
        for (int b = 0; b < params.beta.size(); ++b) params.beta[b] = x[at++];
        for (int c = 0; c < 3; ++c) params.trans[c] = x[at++];
        out.push_back(std::move(params));
    }
    return out;
}

std::vector<int> AssembledObjective::beta_indices() const {
    const Impl& im = *impl_;
    std::vector<int> idx;
    for (int p = 0; p < im.persons(); ++p) {
        const int base = p * im.per_person_dim() + im.theta_dim;
        for (int b = 0; b < im.beta_dim; ++b) idx.push_back(base + b);
    }
    return idx;
}

double AssembledObjective::value(std::span<const double> x) const {
    return impl_->evaluate<double>(x, nullptr);
}

std::vector<std::pair<std::string, double>> AssembledObjective::term_values(
    std::span<const double> x) const {
    std::vector<std::pair<std::string, double>> raw;
    impl_->evaluate<double>(x, &raw);
    return raw;
}

std::vector<double> AssembledObjective::gradient(std::span<const double> x) const {
    Impl& im = *impl_;
    im.tape.reset();
    std::vector<ad::Value> xs;
    xs.reserve(x.size());
    for (const double v : x) xs.push_back(ad::Value::variable(im.tape, v));
    const ad::Value total = im.evaluate<ad::Value>(std::span<const ad::Value>(xs), nullptr);
    return ad::gradient(total, xs);
}

const std::vector<std::pair<LossTerm, double>>& AssembledObjective::terms() const {
    return impl_->terms;
}

const std::vector<std::string>& AssembledObjective::warnings() const {
    return impl_->warnings;
}

std::vector<double> gradient_of(const ScalarObjective& f, std::span<const double> at) {
    ad::Tape tape;
    std::vector<ad::Value> xs;
    xs.reserve(at.size());
    for (const double v : at) xs.push_back(ad::Value::variable(tape, v));
    const ad::Value y = f(tape, xs);
    return ad::gradient(y, xs);
}

namespace {

bool all_finite(std::span<const double> v) {
    for (const double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

double weighted_total(const AssembledObjective& obj,
                      const std::vector<std::pair<std::string, double>>& raw) {
    double total = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) total += raw[i].second * obj.terms()[i].second;
    return total;
}

}  // namespace

OptimizationReport run_two_stage(const Scene& scene, const BodyModel& model,
                                 const std::vector<ConstraintSet>& sets,
                                 const OptimizerConfig& config, const GmmPrior* prior) {
    AssembledObjective obj(scene, model, sets, config, prior);

    OptimizationReport report;
    report.mode = config.mode;
    report.backoff = config.backoff;
    for (const auto& [term, w] : obj.terms()) report.term_names.push_back(loss_term_name(term));

    std::vector<double> x = obj.pack_initial();
    std::vector<char> frozen(x.size(), 0);
    const std::vector<int> betas = obj.beta_indices();

    const auto fail = [&](const std::string& why, StageTrace trace) -> void {
        report.stages.push_back(std::move(trace));
        report.final_params = obj.unpack(x);
        report.warnings = obj.warnings();
        throw DivergenceError("optimization diverged: " + why, report);
    };

    for (int stage = 0; stage < 2; ++stage) {
        if (stage == 1) {
            for (const int i : betas) frozen[static_cast<std::size_t>(i)] = 1;
        }

        StageTrace trace;
        const auto record = [&](const std::vector<std::pair<std::string, double>>& raw,
                                double total) {
            trace.total.push_back(total);
            for (const auto& [name, v] : raw) trace.terms[name].push_back(v);
        };

        std::vector<std::pair<std::string, double>> raw;
        try {
            raw = obj.term_values(x);
        } catch (const ProjectionDomainError& e) {
            fail(e.what(), std::move(trace));
        }
        double prev = weighted_total(obj, raw);
        if (!std::isfinite(prev)) fail("objective is not finite", std::move(trace));
        record(raw, prev);

        std::vector<double> m(x.size(), 0.0), v(x.size(), 0.0);
        int streak = 0;
        for (int step = 1; step <= config.max_steps_per_stage; ++step) {
            std::vector<double> g;
            try {
                g = obj.gradient(x);
            } catch (const ProjectionDomainError& e) {
                fail(e.what(), std::move(trace));
            }
            if (!all_finite(g)) fail("gradient is not finite", std::move(trace));

            const double c1 = 1.0 - std::pow(config.adam_beta1, step);
            const double c2 = 1.0 - std::pow(config.adam_beta2, step);
            for (std::size_t i = 0; i < x.size(); ++i) {
                if (frozen[i]) continue;
                m[i] = config.adam_beta1 * m[i] + (1.0 - config.adam_beta1) * g[i];
                v[i] = config.adam_beta2 * v[i] + (1.0 - config.adam_beta2) * g[i] * g[i];
                x[i] -= config.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.adam_eps);
            }
            trace.steps = step;

            try {
                raw = obj.term_values(x);
            } catch (const ProjectionDomainError& e) {
                fail(e.what(), std::move(trace));
            }
            const double total = weighted_total(obj, raw);
            if (!std::isfinite(total)) fail("objective is not finite", std::move(trace));
            record(raw, total);

            streak = std::abs(total - prev) < config.convergence_tol ? streak + 1 : 0;
            prev = total;
            if (streak >= config.convergence_patience) {
                trace.converged = true;
                break;
            }
        }
        report.stages.push_back(std::move(trace));
    }

    report.final_params = obj.unpack(x);
    report.warnings = obj.warnings();
    return report;
}

}  // namespace contactfit
