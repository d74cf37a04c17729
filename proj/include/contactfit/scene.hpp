#pragma once

// A scene bundles everything one refinement run needs: camera, initial
// person parameters, detected 2D keypoints, the image reference (for
// gateway queries), the sampled responses, and optional ground truth for
// evaluation.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "contactfit/body_model.hpp"
#include "contactfit/gateway.hpp"
#include "contactfit/metrics.hpp"

namespace contactfit {

struct ImageRef {
    std::string path;                // resolved relative to the scene file
    std::optional<CropRect> crop;
};

struct SceneGroundTruth {
    std::vector<Eigen::MatrixX3d> joints;   // per person
    ContactMap contact_map;
};

struct Scene {
    std::string id = "scene";
    Camera camera;
    std::vector<PoseParams> persons;
    std::vector<Keypoints2D> keypoints;     // one per person
    std::optional<ImageRef> image;
    std::vector<RawResponse> responses;
    std::optional<SceneGroundTruth> gt;

    Mode mode() const { return persons.size() == 1 ? Mode::one_person : Mode::two_person; }

    static Scene load(const std::filesystem::path& path);
    static Scene from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
    nlohmann::json to_json() const;   // responses written inline
    void save(const std::filesystem::path& path) const;

    // Shape checks that need the model: joint counts, prior dimensions.
    void validate_against(const BodyModel& model) const;
};

}  // namespace contactfit
