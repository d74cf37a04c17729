#pragma once

// Turns free-text model responses into structured contact constraints.
//
// A response is expected to end with a two-column Markdown table whose rows
// name touching surfaces.  Parsing is as forgiving as the vocabulary allows:
// unknown surfaces are skipped with a warning, "/"-separated alternatives in
// one cell fan out into separate constraints, and (in one-person mode)
// ground contacts are counted and dropped.  A bare paired part ("hand")
// mentioned across two or more rows opens a chirality group: the loss must
// later place both the left and the right limb.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "contactfit/regions.hpp"

namespace contactfit {

struct RawResponse {
    int sample_index = 0;
    std::string text;
};

struct TableRow {
    std::string col_a;
    std::string col_b;
};

// Rows of the last well-formed two-column table in `text` (header and
// separator dropped, cells trimmed).  No table -> empty with a warning.
std::vector<TableRow> extract_table(std::string_view text,
                                    std::vector<std::string>* warnings = nullptr);

struct ContactConstraint {
    std::string surface_a;          // normalized source fragment
    std::string surface_b;
    std::string canon_a;            // canonical vocabulary key
    std::string canon_b;
    std::vector<Region> side_a;     // candidate regions; loss takes the min
    std::vector<Region> side_b;
    std::string group;              // chirality group key, empty when ungrouped
    int group_side = -1;            // 0 = side_a carries the group, 1 = side_b
    int row = -1;                   // source table row (0-based over data rows)

    // Unordered canonical pair, e.g. "hand|head"; used for frequency counts.
    std::string signature() const;
};

struct ConstraintSet {
    int sample_index = 0;
    std::vector<ContactConstraint> constraints;
    std::vector<std::string> warnings;
    int dropped_ground = 0;

    bool empty() const { return constraints.empty(); }
};

ConstraintSet parse_response(const RawResponse& response, const RegionRegistry& registry,
                             Mode mode);

struct AggregateResult {
    std::vector<ConstraintSet> sets;          // same order as input, rare pairs removed
    int empty_count = 0;                      // sets empty before filtering
    std::vector<std::string> removed_pairs;   // signatures below min_count
};

// Keeps only contact pairs present in at least `min_count` of the sets
// (presence per set, not occurrence count).  min_count <= 1 filters nothing.
AggregateResult aggregate(std::vector<ConstraintSet> sets, int min_count);

bool should_backoff(int empty_count, int threshold);

// Canonical serialization: sorted keys, two-space indent, constraints in
// table order, regions by id.  Byte-stable for golden comparisons.
nlohmann::json constraint_set_to_json(const ConstraintSet& set);
nlohmann::json constraint_sets_to_json(const std::vector<ConstraintSet>& sets);
std::string canonical_dump(const nlohmann::json& j);

// JSONL fixtures: one {"sample_index": i, "text": "..."} object per line.
std::vector<RawResponse> load_responses_jsonl(const std::filesystem::path& path);
void save_responses_jsonl(const std::filesystem::path& path,
                          const std::vector<RawResponse>& responses);

}  // namespace contactfit
