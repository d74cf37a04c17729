#include "contactfit/constraints.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "contactfit/json_util.hpp"

namespace contactfit {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Cells of one pipe row; the text before the first '|' and an empty tail
// after the last '|' are not cells.
std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = line.find('|');
    if (start == std::string::npos) return cells;
    ++start;
    while (start <= line.size()) {
        const std::size_t next = line.find('|', start);
        if (next == std::string::npos) {
            const std::string tail = trim(line.substr(start));
            if (!tail.empty()) cells.push_back(tail);
            break;
        }
        cells.push_back(trim(line.substr(start, next - start)));
        start = next + 1;
    }
    return cells;
}

bool is_separator_row(const std::vector<std::string>& cells) {
    if (cells.empty()) return false;
    for (const std::string& c : cells) {
        bool dash = false;
        for (const char ch : c) {
            if (ch == '-') {
                dash = true;
            } else if (ch != ':' && ch != ' ') {
                return false;
            }
        }
        if (!dash) return false;
    }
    return true;
}

std::vector<std::string> split_fragments(const std::string& cell) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= cell.size()) {
        const std::size_t next = cell.find('/', start);
        const std::string frag =
            trim(next == std::string::npos ? cell.substr(start) : cell.substr(start, next - start));
        if (!frag.empty()) out.push_back(frag);
        if (next == std::string::npos) break;
        start = next + 1;
    }
    return out;
}

}  // namespace

std::vector<TableRow> extract_table(std::string_view text, std::vector<std::string>* warnings) {
    // Group consecutive pipe-prefixed lines into candidate runs.
    std::vector<std::vector<std::string>> runs;
    std::istringstream stream{std::string(text)};
    std::string line;
    bool in_run = false;
    while (std::getline(stream, line)) {
        const std::string t = trim(line);
        if (!t.empty() && t.front() == '|') {
            if (!in_run) {
                runs.emplace_back();
                in_run = true;
            }
            runs.back().push_back(t);
        } else {
            in_run = false;
        }
    }

    // A run is well formed when a separator row follows the header.
    for (auto it = runs.rbegin(); it != runs.rend(); ++it) {
        const std::vector<std::string>& run = *it;
        if (run.size() < 2) continue;
        if (!is_separator_row(split_row(run[1]))) continue;

        std::vector<TableRow> rows;
        bool warned_extra = false;
        for (std::size_t i = 2; i < run.size(); ++i) {
            std::vector<std::string> cells = split_row(run[i]);
            if (cells.size() < 2) {
                if (warnings) {
                    warnings->push_back("table row " + std::to_string(i - 2) +
                                       " has fewer than 2 columns; skipped");
                }
                continue;
            }
            if (cells.size() > 2 && warnings && !warned_extra) {
                warnings->push_back("table has more than 2 columns; extras ignored");
                warned_extra = true;
            }
            rows.push_back(TableRow{cells[0], cells[1]});
        }
        return rows;
    }

    if (warnings) warnings->push_back("no contact table found in response");
    return {};
}

std::string ContactConstraint::signature() const {
    return canon_a <= canon_b ? canon_a + "|" + canon_b : canon_b + "|" + canon_a;
}

ConstraintSet parse_response(const RawResponse& response, const RegionRegistry& registry,
                             Mode mode) {
    ConstraintSet set;
    set.sample_index = response.sample_index;

    const std::vector<TableRow> rows = extract_table(response.text, &set.warnings);

    // Rows in which each bare paired part occurs; two or more opens a group.
    std::map<std::string, std::set<int>> paired_rows;

    struct Pending {
        ContactConstraint c;
        bool paired_a = false;
        bool paired_b = false;
    };
    std::vector<Pending> pending;

    for (std::size_t r = 0; r < rows.size(); ++r) {
        const int row = static_cast<int>(r);
        struct Resolved {
            std::string fragment;
            SurfaceResolution res;
        };
        auto resolve_cell = [&](const std::string& cell) {
            std::vector<Resolved> out;
            for (const std::string& frag : split_fragments(cell)) {
                SurfaceResolution res = registry.resolve_surface(frag, mode);
                if (res.canon.empty()) {
                    set.warnings.push_back("row " + std::to_string(row) + ": unknown surface \"" +
                                          normalize_surface(frag) + "\"; skipped");
                    continue;
                }
                out.push_back(Resolved{normalize_surface(frag), std::move(res)});
            }
            return out;
        };

        const std::vector<Resolved> res_a = resolve_cell(rows[r].col_a);
        const std::vector<Resolved> res_b = resolve_cell(rows[r].col_b);
        if (res_a.empty() || res_b.empty()) {
            if (!res_a.empty() || !res_b.empty()) {
                set.warnings.push_back("row " + std::to_string(row) +
                                      ": one side resolved to nothing; row skipped");
            }
            continue;
        }

        for (const Resolved& ra : res_a) {
            for (const Resolved& rb : res_b) {
                if (ra.res.ground || rb.res.ground) {
                    ++set.dropped_ground;
                    set.warnings.push_back("row " + std::to_string(row) +
                                          ": ground contact dropped");
                    continue;
                }
                Pending p;
                p.c.surface_a = ra.fragment;
                p.c.surface_b = rb.fragment;
                p.c.canon_a = ra.res.canon;
                p.c.canon_b = rb.res.canon;
                p.c.side_a = ra.res.regions;
                p.c.side_b = rb.res.regions;
                p.c.row = row;
                p.paired_a = ra.res.paired_bare;
                p.paired_b = rb.res.paired_bare;
                if (ra.res.paired_bare) paired_rows[ra.res.canon].insert(row);
                if (rb.res.paired_bare) paired_rows[rb.res.canon].insert(row);
                pending.push_back(std::move(p));
            }
        }
    }

    for (Pending& p : pending) {
        // When both sides could carry a group, side A wins; the choice only
        // needs to be deterministic.
        if (p.paired_a && paired_rows[p.c.canon_a].size() >= 2) {
            p.c.group = p.c.canon_a;
            p.c.group_side = 0;
        } else if (p.paired_b && paired_rows[p.c.canon_b].size() >= 2) {
            p.c.group = p.c.canon_b;
            p.c.group_side = 1;
        }
        set.constraints.push_back(std::move(p.c));
    }
    return set;
}

AggregateResult aggregate(std::vector<ConstraintSet> sets, int min_count) {
    AggregateResult result;
    for (const ConstraintSet& s : sets) {
        if (s.empty()) ++result.empty_count;
    }
    if (min_count > 1) {
        std::map<std::string, int> presence;
        for (const ConstraintSet& s : sets) {
            std::set<std::string> seen;
            for (const ContactConstraint& c : s.constraints) seen.insert(c.signature());
            for (const std::string& sig : seen) ++presence[sig];
        }
        std::set<std::string> removed;
        for (ConstraintSet& s : sets) {
            std::erase_if(s.constraints, [&](const ContactConstraint& c) {
                const std::string sig = c.signature();
                if (presence[sig] < min_count) {
                    removed.insert(sig);
                    return true;
                }
                return false;
            });
        }
        result.removed_pairs.assign(removed.begin(), removed.end());
    }
    result.sets = std::move(sets);
    return result;
}

bool should_backoff(int empty_count, int threshold) { return empty_count >= threshold; }

namespace {

json side_to_json(const std::string& surface, const std::string& canon,
                  const std::vector<Region>& regions) {
    json ids = json::array();
    for (const Region& r : regions) ids.push_back(r.id());
    return json{{"surface", surface}, {"canon", canon}, {"regions", std::move(ids)}};
}

}  // namespace

json constraint_set_to_json(const ConstraintSet& set) {
    json constraints = json::array();
    for (const ContactConstraint& c : set.constraints) {
        json jc{{"a", side_to_json(c.surface_a, c.canon_a, c.side_a)},
                {"b", side_to_json(c.surface_b, c.canon_b, c.side_b)},
                {"row", c.row}};
        if (!c.group.empty()) {
            jc["group"] = c.group;
            jc["group_side"] = c.group_side;
        }
        constraints.push_back(std::move(jc));
    }
    return json{{"sample_index", set.sample_index},
                {"constraints", std::move(constraints)},
                {"dropped_ground", set.dropped_ground},
                {"warnings", set.warnings}};
}

json constraint_sets_to_json(const std::vector<ConstraintSet>& sets) {
    json out = json::array();
    for (const ConstraintSet& s : sets) out.push_back(constraint_set_to_json(s));
    return out;
}

std::string canonical_dump(const json& j) {
    // nlohmann objects iterate in key order, so dump(2) is already canonical.
    return j.dump(2) + "\n";
}

std::vector<RawResponse> load_responses_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open responses file: " + path.string());
    std::vector<RawResponse> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
        }
        require_keys(j, "response", {"sample_index", "text"});
        if (!j.at("sample_index").is_number_integer() || !j.at("text").is_string()) {
            throw ParseError(path.string() + " line " + std::to_string(lineno) +
                             ": bad field types");
        }
        out.push_back(RawResponse{j.at("sample_index").get<int>(), j.at("text").get<std::string>()});
    }
    return out;
}

void save_responses_jsonl(const std::filesystem::path& path,
                          const std::vector<RawResponse>& responses) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write responses file: " + path.string());
    for (const RawResponse& r : responses) {
        out << json{{"sample_index", r.sample_index}, {"text", r.text}}.dump() << "\n";
    }
}

}  // namespace contactfit
