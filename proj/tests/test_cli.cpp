#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>

#include "doctest.h"
#include "json.hpp"
#include "lprisma/jsonutil.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    std::string cmd = std::string(LPRISMA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag)
        : path(fs::temp_directory_path() / ("lprisma_cli_" + tag + "_" +
                                            std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string write_config(const fs::path& dir, const fs::path& run_dir,
                         const nlohmann::json& extra = {}) {
    nlohmann::json cfg = {
        {"run_dir", run_dir.string()},
        {"inputs",
         nlohmann::json::array(
             {{{"format", "csv"},
               {"path", std::string(LPRISMA_FIXTURE_DIR) + "/synthetic60.csv"},
               {"query",
                {{"database", "Synthetic"},
                 {"query", "semantic AND screening"},
                 {"scope_label", "synthetic corpus"},
                 {"executed_on", "2025-08-01"},
                 {"reported_count", 65}}}}})},
        {"intent", "semantic similarity scoring for automated screening of student answers"},
        {"K", 2},
        {"rule", "quantile:0.15:0.95"},
        {"master_seed", 42},
        {"created_at", "2025-08-12T00:00:00Z"},
        {"dry_run", true},
    };
    for (const auto& [k, v] : extra.items()) cfg[k] = v;
    auto path = (dir / "config.json").string();
    lprisma::atomic_write(path, cfg.dump(2));
    return path;
}

}  // namespace

TEST_CASE("end-to-end run over the synthetic corpus exits 0 and verifies") {
    TempDir dir("all");
    auto run_dir = dir.path / "run";
    auto cfg = write_config(dir.path, run_dir);
    CHECK(run_cli("all --config " + cfg) == 0);
    for (const char* name : {"queries.json", "records.jsonl", "dedupe-report.json", "scores.csv",
                             "model.json", "pdf-curve.csv", "cutoffs.json", "triage.json",
                             "triage.csv", "flow.json", "flow.mmd", "flow.dot", "flow.txt",
                             "histogram.csv", "lprisma-manifest.json"})
        CHECK(fs::exists(run_dir / name));
    auto mmd = lprisma::read_file((run_dir / "flow.mmd").string());
    CHECK(mmd.rfind("flowchart TD", 0) == 0);
    auto report = nlohmann::json::parse(lprisma::read_file((run_dir / "dedupe-report.json").string()));
    CHECK(report["input_count"] == 65);
    CHECK(report["unique_count"] == 60);
    CHECK(run_cli("verify --config " + cfg) == 0);
}

TEST_CASE("two runs from the same config produce byte-identical artifacts") {
    TempDir dir("repro");
    auto cfg_a = write_config(dir.path, dir.path / "a");
    auto second = dir.path / "second";
    fs::create_directories(second);
    auto cfg_b = write_config(second, dir.path / "b");
    REQUIRE(run_cli("all --config " + cfg_a) == 0);
    REQUIRE(run_cli("all --config " + cfg_b) == 0);
    for (const char* name : {"records.jsonl", "scores.csv", "model.json", "cutoffs.json",
                             "triage.json", "flow.mmd", "histogram.csv",
                             "lprisma-manifest.json"})
        CHECK(lprisma::read_file((dir.path / "a" / name).string()) ==
              lprisma::read_file((dir.path / "b" / name).string()));
}

TEST_CASE("running a stage before its prerequisite exits 2") {
    TempDir dir("order");
    auto cfg = write_config(dir.path, dir.path / "run");
    CHECK(run_cli("partition --config " + cfg) == 2);
    CHECK(run_cli("fit --config " + cfg) == 2);
    REQUIRE(run_cli("ingest --config " + cfg) == 0);
    CHECK(run_cli("score --config " + cfg) == 2);  // dedupe still missing
    REQUIRE(run_cli("dedupe --config " + cfg) == 0);
    CHECK(run_cli("score --config " + cfg) == 0);
}

TEST_CASE("invalid configuration exits 1") {
    TempDir dir("badcfg");
    auto cfg = write_config(dir.path, dir.path / "run", {{"K", 0}});
    CHECK(run_cli("all --config " + cfg) == 1);
    auto bad_rule = write_config(dir.path, dir.path / "run2", {{"rule", "sigma:3"}});
    CHECK(run_cli("all --config " + bad_rule) == 1);
    CHECK(run_cli("frobnicate") == 1);
    CHECK(run_cli("") == 1);  // a subcommand is required
}

TEST_CASE("inconsistent screening tallies exit 3 at the flow stage") {
    TempDir dir("recon");
    auto run_dir = dir.path / "run";
    auto cfg = write_config(dir.path, run_dir);
    REQUIRE(run_cli("all --config " + cfg) == 0);
    nlohmann::json tallies = {{"manual_screened", 1}, {"genai_screened", 1}};
    auto tallies_path = (dir.path / "tallies.json").string();
    lprisma::atomic_write(tallies_path, tallies.dump());
    auto bad = write_config(dir.path, run_dir, {{"screening_file", tallies_path}});
    CHECK(run_cli("flow --config " + bad) == 3);
}

TEST_CASE("a held run lock makes stages fail rather than interleave") {
    TempDir dir("lock");
    auto run_dir = dir.path / "run";
    auto cfg = write_config(dir.path, run_dir);
    fs::create_directories(run_dir);
    lprisma::atomic_write((run_dir / ".lprisma.lock").string(), "");
    CHECK(run_cli("ingest --config " + cfg) == 2);
    fs::remove(run_dir / ".lprisma.lock");
    CHECK(run_cli("ingest --config " + cfg) == 0);
}
