#include "contactfit/scene.hpp"

#include <fstream>

#include "contactfit/json_util.hpp"

namespace contactfit {

using nlohmann::json;

Scene Scene::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scene file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("scene file " + path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

Scene Scene::from_json(const json& j, const std::filesystem::path& base_dir) {
    require_keys(j, "scene", {"camera", "persons", "keypoints", "responses"},
                 {"id", "image", "gt"});
    Scene s;
    if (j.contains("id")) {
        if (!j.at("id").is_string()) throw ParseError("scene.id: expected a string");
        s.id = j.at("id").get<std::string>();
        if (s.id.empty() || s.id.find('/') != std::string::npos) {
            throw ValidationError("scene.id must be a non-empty name without '/'");
        }
    }
    s.camera = Camera::from_json(j.at("camera"));

    if (!j.at("persons").is_array() || j.at("persons").empty() || j.at("persons").size() > 2) {
        throw ValidationError("scene.persons must hold one or two entries");
    }
    for (const json& p : j.at("persons")) s.persons.push_back(PoseParams::from_json(p));

    if (!j.at("keypoints").is_array() || j.at("keypoints").size() != s.persons.size()) {
        throw ValidationError("scene.keypoints must hold one entry per person");
    }
    for (const json& k : j.at("keypoints")) s.keypoints.push_back(Keypoints2D::from_json(k));

    if (j.contains("image")) {
        require_keys(j.at("image"), "scene.image", {"path"}, {"crop"});
        ImageRef img;
        img.path = (base_dir / j.at("image").at("path").get<std::string>()).string();
        if (j.at("image").contains("crop")) {
            const Eigen::VectorXd c = vector_from_json(j.at("image").at("crop"),
                                                       "scene.image.crop");
            if (c.size() != 4) throw ParseError("scene.image.crop: expected [x, y, w, h]");
            img.crop = CropRect{static_cast<int>(c[0]), static_cast<int>(c[1]),
                                static_cast<int>(c[2]), static_cast<int>(c[3])};
        }
        s.image = std::move(img);
    }

    const json& resp = j.at("responses");
    if (resp.is_string()) {
        s.responses = load_responses_jsonl(base_dir / resp.get<std::string>());
    } else if (resp.is_array()) {
        for (const json& r : resp) {
            require_keys(r, "scene.responses entry", {"sample_index", "text"});
            s.responses.push_back(RawResponse{r.at("sample_index").get<int>(),
                                              r.at("text").get<std::string>()});
        }
    } else {
        throw ParseError("scene.responses: expected a file path or an inline array");
    }

    if (j.contains("gt")) {
        require_keys(j.at("gt"), "scene.gt", {"joints"}, {"contact_map"});
        SceneGroundTruth gt;
        const json& joints = j.at("gt").at("joints");
        if (!joints.is_array() || joints.size() != s.persons.size()) {
            throw ValidationError("scene.gt.joints must hold one entry per person");
        }
        for (std::size_t p = 0; p < joints.size(); ++p) {
            gt.joints.push_back(Eigen::MatrixX3d(matrix_from_json(
                joints[p], "scene.gt.joints[" + std::to_string(p) + "]", 3)));
        }
        if (j.at("gt").contains("contact_map")) {
            gt.contact_map = contact_map_from_json(j.at("gt").at("contact_map"));
        }
        s.gt = std::move(gt);
    }
    return s;
}

json Scene::to_json() const {
    json persons = json::array();
    for (const PoseParams& p : this->persons) persons.push_back(p.to_json());
    json keypoints = json::array();
    for (const Keypoints2D& k : this->keypoints) keypoints.push_back(k.to_json());
    json responses = json::array();
    for (const RawResponse& r : this->responses) {
        responses.push_back(json{{"sample_index", r.sample_index}, {"text", r.text}});
    }
    json j{{"id", id},
           {"camera", camera.to_json()},
           {"persons", std::move(persons)},
           {"keypoints", std::move(keypoints)},
           {"responses", std::move(responses)}};
    if (image) {
        json img{{"path", image->path}};
        if (image->crop) {
            img["crop"] = json::array({image->crop->x, image->crop->y, image->crop->w,
                                       image->crop->h});
        }
        j["image"] = std::move(img);
    }
    if (gt) {
        json joints = json::array();
        for (const auto& m : gt->joints) joints.push_back(to_json_rows(m));
        j["gt"] = json{{"joints", std::move(joints)},
                       {"contact_map", contact_map_to_json(gt->contact_map)}};
    }
    return j;
}

void Scene::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write scene file: " + path.string());
    out << to_json().dump(2) << "\n";
}

void Scene::validate_against(const BodyModel& model) const {
    for (std::size_t p = 0; p < persons.size(); ++p) {
        const PoseParams& params = persons[p];
        if (params.theta.rows() != model.joint_count()) {
            throw ValidationError("scene person " + std::to_string(p) + " has " +
                                  std::to_string(params.theta.rows()) +
                                  " joint rows, model expects " +
                                  std::to_string(model.joint_count()));
        }
        if (params.beta.size() != model.shape_dim()) {
            throw ValidationError("scene person " + std::to_string(p) +
                                  " shape dimension mismatch");
        }
        if (keypoints[p].points.rows() != model.joint_count()) {
            throw ValidationError("scene person " + std::to_string(p) +
                                  " keypoint count does not match model joints");
        }
    }
    if (gt) {
        for (std::size_t p = 0; p < gt->joints.size(); ++p) {
            if (gt->joints[p].rows() != model.joint_count()) {
                throw ValidationError("scene gt joints for person " + std::to_string(p) +
                                      " do not match model joint count");
            }
        }
    }
}

}  // namespace contactfit
