#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "lprisma/errors.hpp"
#include "lprisma/hash.hpp"
#include "lprisma/jsonutil.hpp"
#include "lprisma/manifest.hpp"

using namespace lprisma;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("lprisma_manifest_" +
                                                  std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name, const std::string& content) const {
        auto p = (path / name).string();
        atomic_write(p, content);
        return p;
    }
};

ManifestInputs fixture_inputs(const TempDir& dir) {
    ManifestInputs in;
    in.tool_version = "0.1.0";
    in.created_at = "2025-08-12T09:00:00Z";
    QuerySpec q;
    q.database = "IEEE";
    q.query = "semantic AND similarity";
    q.scope_label = "With Educational Domain Constraint";
    q.executed_on = "2025-08-01";
    q.reported_count = 24;
    in.queries = {q};
    in.intent.text = "semantic similarity scoring applied to short answers";
    in.provider.kind = ProviderKind::Builtin;
    in.provider.model_id = "builtin-hash-v1";
    in.gmm.K = 2;
    in.gmm.weights = {0.6, 0.4};
    in.gmm.means = {0.3, 0.7};
    in.gmm.stddevs = {0.05, 0.04};
    in.gmm.loglik = 123.456;
    in.gmm.converged = true;
    in.rule = TwoSigmaOverlap{};
    in.cutoffs.lower = 0.4;
    in.cutoffs.upper = 0.62;
    in.cutoffs.rule = TwoSigmaOverlap{};
    in.triage_counts = {10, 25, 5};
    in.prompt_template_hashes = {sha256_hex("t1"), sha256_hex("t2")};
    in.master_seed = 42;
    in.input_files = {
        {"records.jsonl", dir.file("records.jsonl", "{\"id\":\"a\"}\n")},
        {"scores.csv", dir.file("scores.csv", "record_id,cosine,s,provider\na,0.2,0.6,m\n")},
    };
    return in;
}

}  // namespace

TEST_CASE("build, serialize, deserialize, re-serialize is byte identical") {
    TempDir dir;
    auto m = build_manifest(fixture_inputs(dir));
    auto bytes = m.serialize();
    auto round = RunManifest::deserialize(bytes);
    CHECK(round.serialize() == bytes);
    CHECK(round.self_hash == m.self_hash);
    CHECK(round.input_hashes == m.input_hashes);
    CHECK(bytes.back() == '\n');
}

TEST_CASE("two builds over identical inputs are byte identical") {
    TempDir dir;
    auto in = fixture_inputs(dir);
    CHECK(build_manifest(in).serialize() == build_manifest(in).serialize());
}

TEST_CASE("input hashes match an independent recomputation") {
    TempDir dir;
    auto in = fixture_inputs(dir);
    auto m = build_manifest(in);
    for (const auto& [name, path] : in.input_files)
        CHECK(m.input_hashes.at(name) == sha256_hex(read_file(path)));
}

TEST_CASE("missing stage artifacts are rejected at build time") {
    TempDir dir;
    auto in = fixture_inputs(dir);
    SUBCASE("absent input file") {
        in.input_files["ghost.csv"] = (dir.path / "ghost.csv").string();
        CHECK_THROWS_AS(build_manifest(in), MissingStage);
    }
    SUBCASE("no fitted model") {
        in.gmm = GmmParams{};
        CHECK_THROWS_AS(build_manifest(in), MissingStage);
    }
    SUBCASE("no intent") {
        in.intent.text.clear();
        CHECK_THROWS_AS(build_manifest(in), MissingStage);
    }
}

TEST_CASE("verify passes on an untouched artifact set") {
    TempDir dir;
    auto m = build_manifest(fixture_inputs(dir));
    auto manifest_path = dir.file("lprisma-manifest.json", m.serialize());
    auto report = verify_manifest(manifest_path, dir.path.string());
    CHECK(report.all_pass());
    // self_hash plus one entry per input file
    CHECK(report.entries.size() == 3);
}

TEST_CASE("a single flipped byte in any artifact is pinpointed by name") {
    TempDir dir;
    auto in = fixture_inputs(dir);
    auto m = build_manifest(in);
    auto manifest_path = dir.file("lprisma-manifest.json", m.serialize());
    for (const auto& [name, path] : in.input_files) {
        auto original = read_file(path);
        auto corrupted = original;
        corrupted[corrupted.size() / 2] ^= 0x01;
        atomic_write(path, corrupted);
        auto report = verify_manifest(manifest_path, dir.path.string());
        CHECK(!report.all_pass());
        for (const auto& e : report.entries) {
            if (e.name == name)
                CHECK(e.status == "fail");
            else
                CHECK(e.status == "pass");
        }
        atomic_write(path, original);
    }
    CHECK(verify_manifest(manifest_path, dir.path.string()).all_pass());
}

TEST_CASE("tampering with the manifest body fails the self-hash check") {
    TempDir dir;
    auto m = build_manifest(fixture_inputs(dir));
    auto bytes = m.serialize();
    auto pos = bytes.find("\"master_seed\":42");
    REQUIRE(pos != std::string::npos);
    bytes.replace(pos, 16, "\"master_seed\":43");
    auto manifest_path = dir.file("lprisma-manifest.json", bytes);
    auto report = verify_manifest(manifest_path, dir.path.string());
    bool self_hash_failed = false;
    for (const auto& e : report.entries)
        if (e.name == "self_hash" && e.status == "fail") self_hash_failed = true;
    CHECK(self_hash_failed);
}

TEST_CASE("a deleted artifact reports absent, not fail") {
    TempDir dir;
    auto in = fixture_inputs(dir);
    auto m = build_manifest(in);
    auto manifest_path = dir.file("lprisma-manifest.json", m.serialize());
    fs::remove(in.input_files.at("scores.csv"));
    auto report = verify_manifest(manifest_path, dir.path.string());
    CHECK(!report.all_pass());
    bool found = false;
    for (const auto& e : report.entries)
        if (e.name == "scores.csv") {
            CHECK(e.status == "absent");
            found = true;
        }
    CHECK(found);
}

TEST_CASE("missing or unparsable manifest file degrades gracefully") {
    TempDir dir;
    auto absent = verify_manifest((dir.path / "nope.json").string(), dir.path.string());
    REQUIRE(absent.entries.size() == 1);
    CHECK(absent.entries[0].status == "absent");
    auto bad_path = dir.file("bad.json", "not json at all");
    auto bad = verify_manifest(bad_path, dir.path.string());
    REQUIRE(bad.entries.size() == 1);
    CHECK(bad.entries[0].status == "fail");
}

TEST_CASE("canonical serialization is injective over field changes") {
    TempDir dir;
    auto in = fixture_inputs(dir);
    auto base = build_manifest(in).serialize();
    auto mutate = [&](auto&& f) {
        auto copy = in;
        f(copy);
        CHECK(build_manifest(copy).serialize() != base);
    };
    mutate([](ManifestInputs& x) { x.master_seed = 7; });
    mutate([](ManifestInputs& x) { x.cutoffs.upper = 0.63; });
    mutate([](ManifestInputs& x) { x.gmm.means[0] = 0.30000001; });
    mutate([](ManifestInputs& x) { x.intent.text += "!"; });
    mutate([](ManifestInputs& x) { x.created_at = "2025-08-13T09:00:00Z"; });
    mutate([](ManifestInputs& x) { x.rule = Quantile{0.1, 0.9}; });
}

TEST_CASE("optional llm block survives the round trip") {
    TempDir dir;
    auto in = fixture_inputs(dir);
    LlmConfig llm;
    llm.endpoint = "http://127.0.0.1:9/v1/chat/completions";
    llm.model_id = "screen-model";
    llm.temperature = 0.0;
    in.llm = llm;
    auto m = build_manifest(in);
    auto round = RunManifest::deserialize(m.serialize());
    REQUIRE(round.llm.has_value());
    CHECK(round.llm->model_id == "screen-model");
}
