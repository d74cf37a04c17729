#pragma once

// Deterministic synthetic assets: a 16-joint stick-figure body model built
// from closed box tubes, a matching region file and pose prior, and three
// posed scenes (handshake, hug, self-touch) with ground truth, keypoints,
// and canned response texts.  Everything is seeded and reproducible, so
// tests and examples need no external data.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "contactfit/body_model.hpp"
#include "contactfit/gmm_prior.hpp"
#include "contactfit/scene.hpp"

namespace contactfit {

// 16 joints, 15 bones, 240 vertices (4 rings of 4 per bone), 420 faces.
// Every bone is a closed tube; the low-resolution proxy keeps the end rings
// (120 vertices, 180 faces).
BodyModel make_stick16();

// Region file covering the full contact vocabulary plus a fine partition of
// one region per bone ring.
nlohmann::json stick16_regions_json();

// Four-component diagonal mixture over the 48-dim pose vector.
GmmPrior make_stick16_gmm();

enum class SynthKind { handshake, hug, self_touch };
const char* synth_kind_name(SynthKind k);
SynthKind synth_kind_from_name(std::string_view s);

struct SynthBundle {
    Scene scene;                         // noised initial estimate + responses + ground truth
    std::vector<PoseParams> gt_params;   // exact parameters behind the ground truth
};

// Ground truth is posed analytically (contact points coincide to machine
// precision where possible, otherwise via a coarse-to-fine joint-angle
// scan).  The scene's starting parameters add seeded Gaussian noise to the
// joint rotations only; shape and translation stay exact.  theta_sigma < 0
// picks a per-scene default (0.3 rad for the handshake, less for the others).
SynthBundle make_synth_scene(SynthKind kind, std::uint64_t seed = 7, double theta_sigma = -1.0);

// Small deterministic binary-PPM test image (P6), used as the scene image
// for gateway-backed runs.
std::string make_test_ppm(int width = 64, int height = 48);

// Writes a self-contained scene directory: model.json, regions.json,
// gmm.json, image.ppm, scene.json (image ref set), config.json (prior wired
// up), and gt_params.json.  Returns the bundle it wrote.
SynthBundle write_synth_bundle(const std::filesystem::path& out_dir, SynthKind kind,
                               std::uint64_t seed = 7, double theta_sigma = -1.0);

}  // namespace contactfit
