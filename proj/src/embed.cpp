#include "lprisma/embed.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "httplib.h"
#include "lprisma/errors.hpp"
#include "lprisma/hash.hpp"
#include "lprisma/jsonutil.hpp"

namespace lprisma {

namespace {

constexpr std::size_t kHttpTextLimit = 8192;

bool is_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c); });
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

std::string cache_key(const std::string& model_id, const std::string& text) {
    return sha256_hex(model_id + "\x1f" + text);
}

std::optional<EmbeddingVector> cache_load(const std::string& dir, const std::string& key) {
    namespace fs = std::filesystem;
    fs::path p = fs::path(dir) / (key + ".json");
    if (!fs::exists(p)) return std::nullopt;
    auto j = nlohmann::json::parse(read_file(p.string()));
    EmbeddingVector v;
    v.values = j.at("values").get<std::vector<double>>();
    v.dim = j.at("dim").get<std::size_t>();
    v.unit_norm = j.at("unit_norm").get<bool>();
    return v;
}

void cache_store(const std::string& dir, const std::string& key, const std::string& model_id,
                 const EmbeddingVector& v) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json j;
    j["model_id"] = model_id;
    j["dim"] = v.dim;
    j["unit_norm"] = v.unit_norm;
    // full-precision doubles so cache hits are bitwise-equal to the computation
    nlohmann::json values = nlohmann::json::array();
    for (double x : v.values) values.push_back(x);
    j["values"] = values;
    atomic_write((fs::path(dir) / (key + ".json")).string(), j.dump());
}

// splits "http://host:port" from the path part
std::pair<std::string, std::string> split_endpoint(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigInvalid("endpoint missing scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

EmbeddingVector embed_http(const ProviderConfig& cfg, const std::string& text) {
    std::string truncated = text.size() > kHttpTextLimit ? text.substr(0, kHttpTextLimit) : text;
    auto [base, path] = split_endpoint(*cfg.endpoint);
    httplib::Client client(base);
    client.set_read_timeout(60, 0);
    httplib::Headers headers;
    if (const char* token = std::getenv("LPRISMA_EMBED_TOKEN"))
        headers.emplace("Authorization", std::string("Bearer ") + token);
    nlohmann::json body = {{"model", cfg.model_id}, {"input", {truncated}}};
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) throw HttpError(0, "no response from " + *cfg.endpoint);
    if (res->status != 200) throw HttpError(res->status, res->body.substr(0, 200));
    auto j = nlohmann::json::parse(res->body);
    const auto& data = j.at("data");
    if (data.empty()) throw HttpError(res->status, "empty data array");
    EmbeddingVector v;
    v.values = data.at(0).at("embedding").get<std::vector<double>>();
    v.dim = cfg.dim;
    if (v.values.size() != cfg.dim)
        throw DimensionMismatch("endpoint returned dim " + std::to_string(v.values.size()) +
                                ", expected " + std::to_string(cfg.dim));
    double norm = 0.0;
    for (double x : v.values) norm += x * x;
    v.unit_norm = std::abs(std::sqrt(norm) - 1.0) < 1e-9;
    return v;
}

}  // namespace

ScoreMapping parse_mapping_name(const std::string& name) {
    if (name == "affine") return ScoreMapping::Affine;
    if (name == "clamp") return ScoreMapping::Clamp;
    throw ConfigInvalid("unknown score mapping: " + name);
}

std::string mapping_name(ScoreMapping m) {
    return m == ScoreMapping::Affine ? "affine" : "clamp";
}

void ProviderConfig::validate() const {
    if (dim == 0) throw ConfigInvalid("provider dim must be positive");
    if (kind == ProviderKind::Http && (!endpoint || model_id.empty()))
        throw ConfigInvalid("http provider requires endpoint and model_id");
}

nlohmann::json ProviderConfig::to_json() const {
    nlohmann::json j;
    j["kind"] = kind == ProviderKind::Builtin ? "builtin" : "http";
    j["model_id"] = model_id;
    j["endpoint"] = endpoint ? nlohmann::json(*endpoint) : nlohmann::json(nullptr);
    j["dim"] = dim;
    j["seed"] = seed;
    j["score_mapping"] = mapping_name(score_mapping);
    return j;
}

ProviderConfig ProviderConfig::from_json(const nlohmann::json& j) {
    ProviderConfig cfg;
    std::string kind = j.value("kind", "builtin");
    if (kind == "builtin")
        cfg.kind = ProviderKind::Builtin;
    else if (kind == "http")
        cfg.kind = ProviderKind::Http;
    else
        throw ConfigInvalid("unknown provider kind: " + kind);
    cfg.model_id = j.value("model_id", std::string("hash-embed-v1"));
    if (j.contains("endpoint") && !j.at("endpoint").is_null())
        cfg.endpoint = j.at("endpoint").get<std::string>();
    cfg.dim = j.value("dim", std::size_t{256});
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.score_mapping = parse_mapping_name(j.value("score_mapping", "affine"));
    if (j.contains("cache_dir") && !j.at("cache_dir").is_null())
        cfg.cache_dir = j.at("cache_dir").get<std::string>();
    cfg.validate();
    return cfg;
}

EmbeddingVector embed_builtin(const std::string& text, std::size_t dim, std::uint64_t seed) {
    EmbeddingVector v;
    v.dim = dim;
    v.values.assign(dim, 0.0);
    auto tokens = tokenize(text);
    for (const auto& tok : tokens) {
        std::uint64_t h = seeded_hash64(tok, seed);
        std::size_t bucket = static_cast<std::size_t>(h % dim);
        double sign = (h >> 63) ? -1.0 : 1.0;
        v.values[bucket] += sign;  // term-frequency weight, one unit per occurrence
    }
    double norm_sq = 0.0;
    for (double x : v.values) norm_sq += x * x;
    if (norm_sq > 0.0) {
        double norm = std::sqrt(norm_sq);
        for (double& x : v.values) x /= norm;
        v.unit_norm = true;
    } else {
        v.unit_norm = false;  // all tokens cancelled or no tokens; flagged, not an error
    }
    return v;
}

EmbeddingVector embed(const ProviderConfig& cfg, const std::string& text) {
    cfg.validate();
    if (is_blank(text)) throw EmptyText("cannot embed empty text");
    std::string key;
    if (cfg.cache_dir) {
        key = cache_key(cfg.model_id, text);
        if (auto hit = cache_load(*cfg.cache_dir, key)) return *hit;
    }
    EmbeddingVector v = cfg.kind == ProviderKind::Builtin
                            ? embed_builtin(text, cfg.dim, cfg.seed)
                            : embed_http(cfg, text);
    if (cfg.cache_dir) cache_store(*cfg.cache_dir, key, cfg.model_id, v);
    return v;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim != b.dim)
        throw DimensionMismatch("cosine: dim " + std::to_string(a.dim) + " vs " +
                                std::to_string(b.dim));
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) throw ZeroVector("cosine undefined for a zero vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double map_score(double cosine_value, ScoreMapping mapping) {
    if (cosine_value < -1.0 || cosine_value > 1.0)
        throw OutOfRangeInput("cosine out of [-1,1]: " + format_sig12(cosine_value));
    double s = mapping == ScoreMapping::Affine ? (cosine_value + 1.0) / 2.0
                                               : std::max(0.0, cosine_value);
    return std::clamp(s, 0.0, 1.0);
}

ScoreCorpusResult score_corpus(const ProviderConfig& cfg, const IntentStatement& intent,
                               const std::vector<Record>& records) {
    if (is_blank(intent.text)) throw EmptyText("intent statement is empty");
    ScoreCorpusResult result;
    EmbeddingVector intent_vec = embed(cfg, intent.text);  // failure here aborts

    for (const auto& rec : records) {
        std::string text = rec.title;
        if (rec.abstract) text += " " + *rec.abstract;
        try {
            EmbeddingVector v = embed(cfg, text);
            SimilarityScore score;
            score.record_id = rec.id;
            score.cosine = cosine(intent_vec, v);
            score.s = map_score(score.cosine, cfg.score_mapping);
            score.provider = cfg.model_id;
            result.scores.push_back(std::move(score));
        } catch (const Error& e) {
            result.failures.emplace_back(rec.id, e.what());
        }
    }
    std::sort(result.scores.begin(), result.scores.end(),
              [](const SimilarityScore& a, const SimilarityScore& b) {
                  return a.record_id < b.record_id;
              });
    return result;
}

std::string scores_to_csv(const std::vector<SimilarityScore>& scores) {
    std::string out = "record_id,cosine,s,provider\n";
    for (const auto& sc : scores) {
        out += sc.record_id;
        out += ',';
        out += format_sig12(sc.cosine);
        out += ',';
        out += format_sig12(sc.s);
        out += ',';
        out += sc.provider;
        out += '\n';
    }
    return out;
}

std::vector<SimilarityScore> scores_from_csv(const std::string& text) {
    std::vector<SimilarityScore> out;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::istringstream ls(line);
        SimilarityScore sc;
        std::string cosine_s, s_s;
        if (!std::getline(ls, sc.record_id, ',') || !std::getline(ls, cosine_s, ',') ||
            !std::getline(ls, s_s, ','))
            throw MalformedInput("score csv: bad line: " + line);
        std::getline(ls, sc.provider);
        sc.cosine = std::stod(cosine_s);
        sc.s = std::stod(s_s);
        out.push_back(std::move(sc));
    }
    return out;
}

}  // namespace lprisma
