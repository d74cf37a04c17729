#pragma once

// Named vertex regions over the body mesh.  Coarse regions back the contact
// vocabulary used by the constraint parser (with left/right variants for
// paired parts); fine regions form a disjoint partition used for contact
// metrics.  Resolution from free-text surface names to regions is mode
// dependent: the one-person vocabulary is smaller and knows the special
// "ground" surface, which carries no geometry.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "contactfit/errors.hpp"

namespace contactfit {

class BodyModel;

enum class Mode { two_person, one_person };

inline const char* mode_name(Mode m) {
    return m == Mode::two_person ? "two-person" : "one-person";
}
Mode mode_from_name(std::string_view s);

enum class Chirality { none, left, right };

struct Region {
    std::string part;                  // base part name, e.g. "hand" or "waist (front)"
    Chirality chirality = Chirality::none;
    std::vector<int> vertex_indices;   // sorted, unique
    bool ground = false;               // sentinel surface without geometry

    std::string id() const;            // "hand/left", "waist (front)", "ground"
};

// Outcome of resolving one surface name.
struct SurfaceResolution {
    std::string canon;             // canonical key ("hand", "hand/left", "waist"); empty if unknown
    std::vector<Region> regions;   // candidate regions; loss takes the min over them
    bool ground = false;
    bool paired_bare = false;      // a left/right part mentioned without a side
};

// Lowercases, trims, and collapses internal whitespace.
std::string normalize_surface(std::string_view s);

class RegionRegistry {
public:
    static RegionRegistry load(const std::filesystem::path& path, const BodyModel& model);
    static RegionRegistry from_json(const nlohmann::json& j, int vertex_count);

    // Candidate regions for a surface name; empty if outside the vocabulary.
    std::vector<Region> resolve_part(std::string_view surface,
                                     Mode mode = Mode::two_person) const;
    SurfaceResolution resolve_surface(std::string_view surface, Mode mode) const;

    const std::map<std::string, std::vector<Region>>& coarse() const { return coarse_; }
    const std::map<std::string, Region>& fine() const { return fine_; }
    const Region* fine_region(const std::string& name) const;

    // Fraction of mesh vertices covered by at least one fine region.
    double fine_coverage(int vertex_count) const;

    // Part names accepted in each mode, aliases excluded.
    static const std::vector<std::string>& two_person_parts();
    static const std::vector<std::string>& one_person_parts();

private:
    const std::vector<Region>* variants(const std::string& part) const;

    std::map<std::string, std::vector<Region>> coarse_;   // part -> 1 flat or 2 sided variants
    std::map<std::string, Region> fine_;
    std::vector<Region> shoulder_merged_;                 // [left, right] = front + back union
};

}  // namespace contactfit
