#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "contactfit/constraints.hpp"
#include "contactfit/synth.hpp"

using namespace contactfit;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string corpus_json(Mode mode, const fs::path& jsonl) {
    static RegionRegistry registry = RegionRegistry::from_json(stick16_regions_json(), 240);
    std::vector<RawResponse> responses = load_responses_jsonl(jsonl);
    std::vector<ConstraintSet> sets;
    for (const RawResponse& r : responses) sets.push_back(parse_response(r, registry, mode));
    AggregateResult agg = aggregate(std::move(sets), 1);
    nlohmann::json out;
    out["mode"] = mode_name(mode);
    out["empty_count"] = agg.empty_count;
    out["removed_pairs"] = agg.removed_pairs;
    out["sets"] = constraint_sets_to_json(agg.sets);
    return canonical_dump(out);
}

}  // namespace

TEST_CASE("two-person corpus parses byte-identically to the golden file") {
    const fs::path dir = fs::path(TEST_DATA_DIR) / "corpus";
    CHECK(corpus_json(Mode::two_person, dir / "two_person.jsonl") ==
          slurp(dir / "two_person.expected.json"));
}

TEST_CASE("one-person corpus parses byte-identically to the golden file") {
    const fs::path dir = fs::path(TEST_DATA_DIR) / "corpus";
    CHECK(corpus_json(Mode::one_person, dir / "one_person.jsonl") ==
          slurp(dir / "one_person.expected.json"));
}

TEST_CASE("the corpus holds at least 25 fixtures") {
    const fs::path dir = fs::path(TEST_DATA_DIR) / "corpus";
    const std::size_t total = load_responses_jsonl(dir / "two_person.jsonl").size() +
                              load_responses_jsonl(dir / "one_person.jsonl").size();
    CHECK(total >= 25);
}

TEST_CASE("the parse subcommand reproduces the golden bytes") {
    const fs::path tmp = fs::temp_directory_path() / "corpus_cli";
    fs::remove_all(tmp);
    write_synth_bundle(tmp / "bundle", SynthKind::handshake);

    const fs::path dir = fs::path(TEST_DATA_DIR) / "corpus";
    const fs::path out = tmp / "parsed.json";
    std::ostringstream cmd;
    cmd << CLI_PATH << " parse --responses " << (dir / "two_person.jsonl")
        << " --mode two-person --model " << (tmp / "bundle" / "model.json")
        << " --regions " << (tmp / "bundle" / "regions.json") << " --out " << out;
    REQUIRE(std::system(cmd.str().c_str()) == 0);
    CHECK(slurp(out) == slurp(dir / "two_person.expected.json"));
    fs::remove_all(tmp);
}
