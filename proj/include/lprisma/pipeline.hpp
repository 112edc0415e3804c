#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lprisma/embed.hpp"
#include "lprisma/mixture.hpp"
#include "lprisma/records.hpp"
#include "lprisma/screenai.hpp"

namespace lprisma {

inline constexpr const char* kToolVersion = "0.1.0";

struct InputSpec {
    std::string format;  // csv | bibtex | ris
    std::string path;
    QuerySpec query;
};

struct RunConfig {
    std::string run_dir = ".";
    std::vector<InputSpec> inputs;
    IntentStatement intent;
    ProviderConfig provider;
    std::size_t K = 2;
    double tol = 1e-8;
    std::size_t max_iter = 500;
    std::size_t restarts = 1;
    std::string rule_spec = "two-sigma";
    std::size_t bins = 40;
    std::uint64_t master_seed = 0;
    std::optional<LlmConfig> llm;
    std::optional<std::string> criteria_file;
    std::optional<std::string> screening_file;  // JSON ScreeningTallies
    std::string created_at;  // declared run date; recorded verbatim in the manifest
    bool dry_run = true;

    void validate() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::string& path);
};

// Stage file names inside the run directory.
namespace stage_files {
inline constexpr const char* kQueries = "queries.json";
inline constexpr const char* kRawRecords = "records.raw.jsonl";
inline constexpr const char* kRecords = "records.jsonl";
inline constexpr const char* kDedupeReport = "dedupe-report.json";
inline constexpr const char* kScores = "scores.csv";
inline constexpr const char* kModel = "model.json";
inline constexpr const char* kPdfCurve = "pdf-curve.csv";
inline constexpr const char* kCutoffs = "cutoffs.json";
inline constexpr const char* kTriage = "triage.json";
inline constexpr const char* kTriageCsv = "triage.csv";
inline constexpr const char* kOverrides = "overrides.jsonl";
inline constexpr const char* kFlow = "flow.json";
inline constexpr const char* kFlowMermaid = "flow.mmd";
inline constexpr const char* kFlowDot = "flow.dot";
inline constexpr const char* kFlowText = "flow.txt";
inline constexpr const char* kHistogram = "histogram.csv";
inline constexpr const char* kVerdicts = "verdicts.jsonl";
inline constexpr const char* kManifest = "lprisma-manifest.json";
}  // namespace stage_files

// One pipeline per run directory; acquired at stage entry, released on exit.
class RunLock {
  public:
    explicit RunLock(const std::string& run_dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

  private:
    std::string path_;
};

// Stage entry points; each enforces its prerequisites and writes outputs
// atomically into the run directory.
void stage_ingest(const RunConfig& cfg);
void stage_dedupe(const RunConfig& cfg);
void stage_score(const RunConfig& cfg);
void stage_fit(const RunConfig& cfg);
void stage_cutoffs(const RunConfig& cfg);
void stage_partition(const RunConfig& cfg);
void stage_flow(const RunConfig& cfg);
void stage_screen(const RunConfig& cfg);
void stage_manifest(const RunConfig& cfg);
// Returns true when every manifest entry verifies.
bool stage_verify(const RunConfig& cfg, std::string* report_text = nullptr);
void run_all(const RunConfig& cfg);

}  // namespace lprisma
