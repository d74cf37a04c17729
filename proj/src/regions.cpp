#include "contactfit/regions.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "contactfit/body_model.hpp"
#include "contactfit/json_util.hpp"

namespace contactfit {

using nlohmann::json;

Mode mode_from_name(std::string_view s) {
    if (s == "two-person" || s == "two_person") return Mode::two_person;
    if (s == "one-person" || s == "one_person") return Mode::one_person;
    throw ValidationError("unknown mode: " + std::string(s));
}

std::string Region::id() const {
    if (ground) return "ground";
    switch (chirality) {
        case Chirality::left: return part + "/left";
        case Chirality::right: return part + "/right";
        default: return part;
    }
}

std::string normalize_surface(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (const char ch : s) {
        const unsigned char u = static_cast<unsigned char>(ch);
        if (std::isspace(u)) {
            if (!out.empty()) pending_space = true;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(u)));
    }
    return out;
}

namespace {

// Parts accepted in contact tables.  Sided parts get left/right variants in
// the region file; the bare name means "either side".
const std::vector<std::string> kTwoPersonParts = {
    "head", "neck", "shoulder (front)", "shoulder (back)", "chest",
    "stomach", "back", "waist (front)", "waist (back)", "butt",
    "arm", "hand", "leg", "foot"};

const std::vector<std::string> kOnePersonParts = {
    "head", "back", "shoulder", "arm", "hand",
    "leg", "foot", "stomach", "butt", "ground"};

const std::set<std::string> kSidedParts = {
    "hand", "arm", "leg", "foot", "shoulder (front)", "shoulder (back)"};

// Parts a "left "/"right " prefix may attach to.
const std::set<std::string> kSidedAliasTargets = {
    "hand", "arm", "foot", "leg", "shoulder", "shoulder (front)", "shoulder (back)"};

std::vector<int> indices_from_json(const json& j, const std::string& what, int vertex_count) {
    if (!j.is_array()) throw ParseError(what + ": expected an array of vertex indices");
    std::vector<int> out;
    out.reserve(j.size());
    for (const auto& e : j) {
        if (!e.is_number_integer()) throw ParseError(what + ": non-integer vertex index");
        const int v = e.get<int>();
        if (v < 0 || v >= vertex_count) {
            throw ValidationError(what + ": vertex index out of range: " + std::to_string(v));
        }
        out.push_back(v);
    }
    std::sort(out.begin(), out.end());
    if (std::adjacent_find(out.begin(), out.end()) != out.end()) {
        throw ValidationError(what + ": duplicate vertex index");
    }
    if (out.empty()) throw ValidationError(what + ": region is empty");
    return out;
}

std::vector<int> union_sorted(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

}  // namespace

const std::vector<std::string>& RegionRegistry::two_person_parts() { return kTwoPersonParts; }
const std::vector<std::string>& RegionRegistry::one_person_parts() { return kOnePersonParts; }

RegionRegistry RegionRegistry::load(const std::filesystem::path& path, const BodyModel& model) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open region file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("region file " + path.string() + ": " + e.what());
    }
    return from_json(j, model.vertex_count());
}

RegionRegistry RegionRegistry::from_json(const json& j, int vertex_count) {
    require_keys(j, "regions", {"coarse", "fine"});
    RegionRegistry reg;

    const json& coarse = j.at("coarse");
    if (!coarse.is_object()) throw ParseError("regions.coarse: expected an object");
    for (const auto& [name, body] : coarse.items()) {
        const std::string what = "regions.coarse." + name;
        std::vector<Region> vars;
        if (body.is_object()) {
            require_keys(body, what, {"left", "right"});
            Region l{name, Chirality::left,
                     indices_from_json(body.at("left"), what + ".left", vertex_count), false};
            Region r{name, Chirality::right,
                     indices_from_json(body.at("right"), what + ".right", vertex_count), false};
            std::vector<int> overlap;
            std::set_intersection(l.vertex_indices.begin(), l.vertex_indices.end(),
                                  r.vertex_indices.begin(), r.vertex_indices.end(),
                                  std::back_inserter(overlap));
            if (!overlap.empty()) {
                throw ValidationError(what + ": left/right variants share vertex " +
                                      std::to_string(overlap.front()));
            }
            vars.push_back(std::move(l));
            vars.push_back(std::move(r));
        } else {
            vars.push_back(
                Region{name, Chirality::none, indices_from_json(body, what, vertex_count), false});
        }
        reg.coarse_.emplace(name, std::move(vars));
    }

    for (const std::string& part : kTwoPersonParts) {
        const auto it = reg.coarse_.find(part);
        if (it == reg.coarse_.end()) {
            throw ValidationError("regions: missing required part \"" + part + "\"");
        }
        const bool sided = kSidedParts.count(part) > 0;
        if (sided && it->second.size() != 2) {
            throw ValidationError("regions: part \"" + part + "\" must have left/right variants");
        }
        if (!sided && it->second.size() != 1) {
            throw ValidationError("regions: part \"" + part + "\" must be unsided");
        }
    }

    // Merged shoulder = front + back union per side; used by "left shoulder"
    // and the bare one-person "shoulder".
    const auto& front = reg.coarse_.at("shoulder (front)");
    const auto& back = reg.coarse_.at("shoulder (back)");
    reg.shoulder_merged_ = {
        Region{"shoulder", Chirality::left,
               union_sorted(front[0].vertex_indices, back[0].vertex_indices), false},
        Region{"shoulder", Chirality::right,
               union_sorted(front[1].vertex_indices, back[1].vertex_indices), false}};

    const json& fine = j.at("fine");
    if (!fine.is_object()) throw ParseError("regions.fine: expected an object");
    for (const auto& [name, body] : fine.items()) {
        reg.fine_.emplace(name, Region{name, Chirality::none,
                                       indices_from_json(body, "regions.fine." + name,
                                                         vertex_count),
                                       false});
    }
    if (reg.fine_.empty()) throw ValidationError("regions: fine partition is empty");

    return reg;
}

const std::vector<Region>* RegionRegistry::variants(const std::string& part) const {
    const auto it = coarse_.find(part);
    return it == coarse_.end() ? nullptr : &it->second;
}

const Region* RegionRegistry::fine_region(const std::string& name) const {
    const auto it = fine_.find(name);
    return it == fine_.end() ? nullptr : &it->second;
}

SurfaceResolution RegionRegistry::resolve_surface(std::string_view surface, Mode mode) const {
    const std::string s = normalize_surface(surface);
    SurfaceResolution res;

    if (mode == Mode::one_person && s == "ground") {
        res.canon = "ground";
        res.ground = true;
        res.regions.push_back(Region{"ground", Chirality::none, {}, true});
        return res;
    }

    // "left X" / "right X" aliases for sided parts.
    for (const auto& [prefix, side] :
         {std::pair{std::string("left "), Chirality::left},
          std::pair{std::string("right "), Chirality::right}}) {
        if (s.rfind(prefix, 0) != 0) continue;
        const std::string base = s.substr(prefix.size());
        if (!kSidedAliasTargets.count(base)) return res;
        const std::size_t vi = side == Chirality::left ? 0 : 1;
        if (base == "shoulder") {
            res.regions.push_back(shoulder_merged_[vi]);
        } else {
            const std::vector<Region>* vars = variants(base);
            if (!vars || vars->size() != 2) return res;
            res.regions.push_back((*vars)[vi]);
        }
        res.canon = base + (side == Chirality::left ? "/left" : "/right");
        return res;
    }

    if (s == "waist") {
        res.canon = "waist";
        res.regions.push_back(coarse_.at("waist (front)")[0]);
        res.regions.push_back(coarse_.at("waist (back)")[0]);
        return res;
    }

    const auto& vocab = mode == Mode::two_person ? kTwoPersonParts : kOnePersonParts;
    if (std::find(vocab.begin(), vocab.end(), s) == vocab.end()) return res;

    if (s == "shoulder") {  // one-person vocabulary only
        res.canon = s;
        res.regions = shoulder_merged_;
        res.paired_bare = true;
        return res;
    }
    const std::vector<Region>* vars = variants(s);
    if (!vars) return res;
    res.canon = s;
    res.regions = *vars;
    res.paired_bare = vars->size() == 2;
    return res;
}

std::vector<Region> RegionRegistry::resolve_part(std::string_view surface, Mode mode) const {
    return resolve_surface(surface, mode).regions;
}

double RegionRegistry::fine_coverage(int vertex_count) const {
    if (vertex_count <= 0) return 0.0;
    std::vector<char> seen(static_cast<std::size_t>(vertex_count), 0);
    for (const auto& [name, region] : fine_) {
        (void)name;
        for (const int v : region.vertex_indices) seen[static_cast<std::size_t>(v)] = 1;
    }
    const auto covered = std::count(seen.begin(), seen.end(), char(1));
    return static_cast<double>(covered) / static_cast<double>(vertex_count);
}

}  // namespace contactfit
