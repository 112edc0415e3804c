#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "lprisma/records.hpp"

namespace lprisma {

struct IntentStatement {
    std::string text;
    std::vector<std::tuple<std::string, std::string, std::string>>
        refinement_log;  // (tool_name, prompt, resulting_text)
};

struct EmbeddingVector {
    std::vector<double> values;
    std::size_t dim = 0;
    bool unit_norm = false;
};

enum class ScoreMapping { Affine, Clamp };

ScoreMapping parse_mapping_name(const std::string& name);
std::string mapping_name(ScoreMapping m);

enum class ProviderKind { Builtin, Http };

struct ProviderConfig {
    ProviderKind kind = ProviderKind::Builtin;
    std::string model_id = "hash-embed-v1";
    std::optional<std::string> endpoint;
    std::size_t dim = 256;
    std::uint64_t seed = 0;
    ScoreMapping score_mapping = ScoreMapping::Affine;
    std::optional<std::string> cache_dir;  // embedding cache, content-addressed

    void validate() const;  // throws ConfigInvalid
    nlohmann::json to_json() const;
    static ProviderConfig from_json(const nlohmann::json& j);
};

struct SimilarityScore {
    std::string record_id;
    double cosine = 0.0;
    double s = 0.0;
    std::string provider;
};

// Deterministic builtin embedder: lowercase, split on non-alphanumerics,
// signed feature-hash each token into dim buckets (seeded 64-bit hash, sign
// from one hash bit), term-frequency weights, L2-normalized.
EmbeddingVector embed_builtin(const std::string& text, std::size_t dim, std::uint64_t seed);

// Dispatches to the configured provider, consulting the cache first.
EmbeddingVector embed(const ProviderConfig& cfg, const std::string& text);

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

double map_score(double cosine_value, ScoreMapping mapping);

struct ScoreCorpusResult {
    std::vector<SimilarityScore> scores;                       // sorted by record_id
    std::vector<std::pair<std::string, std::string>> failures; // (record_id, error)
};

// Scores every record against the intent statement. Record text is
// title + " " + abstract when the abstract is present.
ScoreCorpusResult score_corpus(const ProviderConfig& cfg, const IntentStatement& intent,
                               const std::vector<Record>& records);

// Score file: CSV "record_id,cosine,s,provider" with 12 significant digits.
std::string scores_to_csv(const std::vector<SimilarityScore>& scores);
std::vector<SimilarityScore> scores_from_csv(const std::string& text);

}  // namespace lprisma
