#pragma once

// Minimal Wavefront OBJ support: triangle meshes, positions only.

#include <Eigen/Core>

#include <filesystem>
#include <utility>

namespace contactfit {

void save_obj(const std::filesystem::path& path, const Eigen::MatrixX3d& vertices,
              const Eigen::MatrixX3i& faces);

std::pair<Eigen::MatrixX3d, Eigen::MatrixX3i> load_obj(const std::filesystem::path& path);

}  // namespace contactfit
