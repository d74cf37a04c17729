#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "contactfit/gateway.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace contactfit {

using nlohmann::json;

namespace {

std::string sha256_hex(const std::string& data) {
    unsigned char digest[SHA256_DIGEST_LENGTH];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string base64(const std::string& data) {
    std::string out(4 * ((data.size() + 2) / 3) + 1, '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(data.data()),
                                  static_cast<int>(data.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

void append_field(std::string& buf, const std::string& field) {
    std::uint64_t len = field.size();
    for (int i = 0; i < 8; ++i) {
        buf.push_back(static_cast<char>(len & 0xFF));
        len >>= 8;
    }
    buf += field;
}

struct PnmHeader {
    std::string magic;
    int width = 0;
    int height = 0;
    int maxval = 0;
    std::size_t data_offset = 0;
    int channels = 0;
};

// Parses a binary PNM header (P5/P6), honoring '#' comments.
std::optional<PnmHeader> parse_pnm(const std::string& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        return std::nullopt;
    }
    PnmHeader h;
    h.magic = bytes.substr(0, 2);
    h.channels = bytes[1] == '6' ? 3 : 1;
    std::size_t pos = 2;
    int fields[3] = {0, 0, 0};
    for (int f = 0; f < 3; ++f) {
        // Skip whitespace and comments.
        while (pos < bytes.size()) {
            if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
        int v = 0;
        bool any = false;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
            v = v * 10 + (bytes[pos] - '0');
            ++pos;
            any = true;
        }
        if (!any) return std::nullopt;
        fields[f] = v;
    }
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        return std::nullopt;
    }
    ++pos;   // single whitespace byte before raster data
    h.width = fields[0];
    h.height = fields[1];
    h.maxval = fields[2];
    h.data_offset = pos;
    return h;
}

std::string image_mime(const std::string& bytes) {
    if (bytes.rfind("P6", 0) == 0) return "image/x-portable-pixmap";
    if (bytes.rfind("P5", 0) == 0) return "image/x-portable-graymap";
    if (bytes.size() > 8 && std::memcmp(bytes.data(), "\x89PNG\r\n\x1a\n", 8) == 0) {
        return "image/png";
    }
    if (bytes.size() > 2 && std::memcmp(bytes.data(), "\xFF\xD8", 2) == 0) return "image/jpeg";
    return "application/octet-stream";
}

}  // namespace

std::string crop_image(const std::string& bytes, const CropRect& rect) {
    const std::optional<PnmHeader> h = parse_pnm(bytes);
    if (!h) {
        throw ValidationError("cropping requires a binary PPM (P6) or PGM (P5) image");
    }
    if (h->maxval <= 0 || h->maxval > 255) {
        throw ValidationError("crop: only 8-bit images are supported (maxval " +
                              std::to_string(h->maxval) + ")");
    }
    if (rect.w <= 0 || rect.h <= 0 || rect.x < 0 || rect.y < 0 || rect.x + rect.w > h->width ||
        rect.y + rect.h > h->height) {
        throw ValidationError("crop rectangle " + std::to_string(rect.x) + "," +
                              std::to_string(rect.y) + "," + std::to_string(rect.w) + "," +
                              std::to_string(rect.h) + " outside image " +
                              std::to_string(h->width) + "x" + std::to_string(h->height));
    }
    const std::size_t row_bytes = static_cast<std::size_t>(h->width) * h->channels;
    if (h->data_offset + row_bytes * static_cast<std::size_t>(h->height) > bytes.size()) {
        throw ValidationError("crop: image data truncated");
    }

    std::string out = h->magic + "\n" + std::to_string(rect.w) + " " + std::to_string(rect.h) +
                      "\n" + std::to_string(h->maxval) + "\n";
    for (int r = 0; r < rect.h; ++r) {
        const std::size_t src = h->data_offset +
                                (static_cast<std::size_t>(rect.y + r) * h->width +
                                 static_cast<std::size_t>(rect.x)) *
                                    h->channels;
        out.append(bytes, src, static_cast<std::size_t>(rect.w) * h->channels);
    }
    return out;
}

std::string cache_key(const QuerySpec& spec) {
    const std::string image = spec.crop ? crop_image(spec.image_bytes, *spec.crop)
                                        : spec.image_bytes;
    char temp[64];
    std::snprintf(temp, sizeof temp, "%.17g", spec.prompt.temperature);

    std::string buf;
    append_field(buf, image);
    append_field(buf, spec.prompt.system_text);
    append_field(buf, temp);
    append_field(buf, std::to_string(spec.prompt.n_samples));
    append_field(buf, spec.prompt.detail);
    return sha256_hex(buf);
}

GatewayOptions GatewayOptions::from_env(GatewayMode mode, std::filesystem::path cache_dir) {
    GatewayOptions opt;
    opt.mode = mode;
    opt.cache_dir = std::move(cache_dir);
    if (const char* e = std::getenv("LMM_ENDPOINT")) opt.endpoint = e;
    if (const char* k = std::getenv("LMM_API_KEY")) opt.api_key = k;
    return opt;
}

LmmGateway::LmmGateway(GatewayOptions options) : options_(std::move(options)) {
    if (options_.cache_dir.empty()) throw ValidationError("gateway: cache directory not set");
}

std::vector<RawResponse> LmmGateway::sample(const QuerySpec& spec) const {
    if (spec.prompt.n_samples < 1) throw ValidationError("gateway: n_samples must be positive");
    const std::string effective =
        spec.crop ? crop_image(spec.image_bytes, *spec.crop) : spec.image_bytes;
    const std::string key = cache_key(spec);
    const std::filesystem::path dir = options_.cache_dir / key;

    std::vector<std::string> texts;
    if (options_.mode == GatewayMode::replay) {
        if (!std::filesystem::is_directory(dir)) {
            throw CacheMissError("replay cache miss: no entry for key " + key);
        }
        for (int i = 0; i < spec.prompt.n_samples; ++i) {
            const std::filesystem::path file = dir / ("sample_" + std::to_string(i) + ".txt");
            std::ifstream in(file, std::ios::binary);
            if (!in) {
                throw CacheMissError("replay cache miss: key " + key + " lacks " +
                                     file.filename().string());
            }
            std::ostringstream ss;
            ss << in.rdbuf();
            texts.push_back(ss.str());
        }
        // Extra files mean the cache was written with different parameters.
        const std::filesystem::path extra =
            dir / ("sample_" + std::to_string(spec.prompt.n_samples) + ".txt");
        if (std::filesystem::exists(extra)) {
            throw CacheMissError("replay cache miss: key " + key + " holds more than " +
                                 std::to_string(spec.prompt.n_samples) + " samples");
        }
    } else {
        texts = fetch(spec, effective);
        std::filesystem::create_directories(dir);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            std::ofstream out(dir / ("sample_" + std::to_string(i) + ".txt"), std::ios::binary);
            out << texts[i];
        }
    }

    std::vector<RawResponse> responses;
    responses.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        responses.push_back(RawResponse{static_cast<int>(i), std::move(texts[i])});
    }
    return responses;
}

std::vector<std::string> LmmGateway::fetch(const QuerySpec& spec,
                                           const std::string& effective_image) const {
    if (options_.endpoint.empty()) {
        throw ValidationError("gateway: endpoint not configured (set LMM_ENDPOINT)");
    }
    const std::size_t scheme_end = options_.endpoint.find("://");
    if (scheme_end == std::string::npos) {
        throw ValidationError("gateway: endpoint must be a full URL: " + options_.endpoint);
    }
    const std::size_t path_start = options_.endpoint.find('/', scheme_end + 3);
    const std::string origin = path_start == std::string::npos
                                   ? options_.endpoint
                                   : options_.endpoint.substr(0, path_start);
    const std::string path =
        path_start == std::string::npos ? "/" : options_.endpoint.substr(path_start);

    const std::string data_url =
        "data:" + image_mime(effective_image) + ";base64," + base64(effective_image);
    const json body{
        {"messages",
         json::array(
             {json{{"role", "system"}, {"content", spec.prompt.system_text}},
              json{{"role", "user"},
                   {"content",
                    json::array({json{{"type", "image_url"},
                                      {"image_url", json{{"url", data_url},
                                                         {"detail", spec.prompt.detail}}}}})}}})},
        {"temperature", spec.prompt.temperature},
        {"n", spec.prompt.n_samples}};
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
        if (attempt > 1) {
            const double seconds =
                options_.initial_backoff_s * static_cast<double>(1 << (attempt - 2));
            std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
        }
        httplib::Client client(origin);
        client.set_read_timeout(120, 0);
        httplib::Headers headers;
        if (!options_.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + options_.api_key);
        }
        httplib::Result res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        try {
            const json reply = json::parse(res->body);
            const json& choices = reply.at("choices");
            if (!choices.is_array() ||
                static_cast<int>(choices.size()) != spec.prompt.n_samples) {
                last_error = "response held " + std::to_string(choices.size()) +
                             " choices, expected " + std::to_string(spec.prompt.n_samples);
                continue;
            }
            std::vector<std::string> texts;
            for (const json& c : choices) {
                texts.push_back(c.at("message").at("content").get<std::string>());
            }
            return texts;
        } catch (const json::exception& e) {
            last_error = std::string("malformed response: ") + e.what();
            continue;
        }
    }
    throw NetworkError("request to " + options_.endpoint + " failed: " + last_error,
                       options_.max_attempts);
}

}  // namespace contactfit
