#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lprisma/embed.hpp"
#include "lprisma/flow.hpp"
#include "lprisma/mixture.hpp"
#include "lprisma/screenai.hpp"
#include "lprisma/triage.hpp"

namespace lprisma {

struct RunManifest {
    std::string tool_version;
    std::string created_at;
    std::vector<QuerySpec> queries;
    IntentStatement intent;
    ProviderConfig provider;
    GmmParams gmm;
    BoundaryRule rule = TwoSigmaOverlap{};
    Cutoffs cutoffs;
    TriageCounts triage_counts;
    std::optional<LlmConfig> llm;
    std::vector<std::string> prompt_template_hashes;
    std::map<std::string, std::string> input_hashes;  // filename -> sha256
    std::uint64_t master_seed = 0;
    std::string self_hash;  // hash of the canonical serialization minus this field

    // Canonical bytes (sorted keys, 12 significant digits, UTF-8, LF) with
    // the self-hash filled in.
    std::string serialize() const;
    static RunManifest deserialize(const std::string& text);
};

struct ManifestInputs {
    std::string tool_version;
    std::string created_at;
    std::vector<QuerySpec> queries;
    IntentStatement intent;
    ProviderConfig provider;
    GmmParams gmm;
    BoundaryRule rule = TwoSigmaOverlap{};
    Cutoffs cutoffs;
    TriageCounts triage_counts;
    std::optional<LlmConfig> llm;
    std::vector<std::string> prompt_template_hashes;
    std::map<std::string, std::string> input_files;  // logical name -> path on disk
    std::uint64_t master_seed = 0;
};

// Populates every field from actual run state; throws MissingStage when a
// required stage artifact is absent.
RunManifest build_manifest(const ManifestInputs& inputs);

struct VerificationEntry {
    std::string name;
    std::string status;  // "pass", "fail", or "absent"
};

struct VerificationReport {
    std::vector<VerificationEntry> entries;
    bool all_pass() const;
};

// Recomputes every input hash and the manifest self-hash against the files
// in artifact_dir. Failures are report entries, never exceptions.
VerificationReport verify_manifest(const std::string& manifest_path,
                                   const std::string& artifact_dir);

}  // namespace lprisma
