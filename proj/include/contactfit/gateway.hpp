#pragma once

// Record/replay gateway for vision-language chat completions.  Queries are
// content-addressed: a SHA-256 key over the (cropped) image bytes and the
// prompt parameters names a cache directory holding one text file per
// sampled response.  Replay mode never touches the network; record mode
// posts a chat request and fills the cache.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "contactfit/constraints.hpp"
#include "contactfit/errors.hpp"

namespace contactfit {

struct CropRect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
};

struct PromptTemplate {
    std::string system_text;
    double temperature = 0.7;
    int n_samples = 20;
    std::string detail = "high";
};

struct QuerySpec {
    std::string image_bytes;
    std::optional<CropRect> crop;
    PromptTemplate prompt;
};

// Pixel-exact crop of binary PPM (P6) / PGM (P5) images; other formats
// raise ValidationError, since decoding them is out of scope here.
std::string crop_image(const std::string& bytes, const CropRect& rect);

// Hex SHA-256 over the length-prefixed effective image bytes and prompt
// fields.  Two specs share a key exactly when the upstream request would be
// byte-identical.
std::string cache_key(const QuerySpec& spec);

enum class GatewayMode { record, replay };

struct GatewayOptions {
    GatewayMode mode = GatewayMode::replay;
    std::filesystem::path cache_dir;
    std::string endpoint;       // full URL, e.g. https://host:443/v1/chat/completions
    std::string api_key;
    int max_attempts = 3;
    double initial_backoff_s = 1.0;

    // Fills endpoint/api_key from LMM_ENDPOINT / LMM_API_KEY.
    static GatewayOptions from_env(GatewayMode mode, std::filesystem::path cache_dir);
};

class LmmGateway {
public:
    explicit LmmGateway(GatewayOptions options);

    // Replay: read sample_<i>.txt files under the key, demanding exactly n.
    // Record: POST, retry with exponential backoff, then write the cache.
    std::vector<RawResponse> sample(const QuerySpec& spec) const;

private:
    std::vector<std::string> fetch(const QuerySpec& spec, const std::string& effective_image) const;

    GatewayOptions options_;
};

}  // namespace contactfit
