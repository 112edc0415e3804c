#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace lprisma {

struct QuerySpec {
    std::string database;
    std::string query;
    std::string scope_label;
    std::string executed_on;  // ISO-8601 date
    std::uint64_t reported_count = 0;

    nlohmann::json to_json() const;
    static QuerySpec from_json(const nlohmann::json& j);
};

struct RawRecord {
    std::string source_db;
    std::string query_id;
    std::string title;
    std::optional<std::string> abstract;
    std::vector<std::string> authors;
    std::optional<int> year;
    std::optional<std::string> venue;
    std::optional<std::string> doi;
    std::map<std::string, std::string> extra;
};

struct Record {
    std::string id;  // 16-byte content hash, lowercase hex
    std::string title_norm;
    std::string title;
    std::optional<std::string> abstract;
    std::optional<std::string> doi_norm;
    std::vector<std::pair<std::string, std::string>> provenance;  // (source_db, query_id)

    nlohmann::json to_json() const;
    static Record from_json(const nlohmann::json& j);
};

struct DuplicateReport {
    std::uint64_t input_count = 0;
    std::uint64_t unique_count = 0;
    std::uint64_t duplicates_removed = 0;
    std::vector<std::pair<std::string, std::string>> merge_log;  // (kept_id, dropped_source)

    nlohmann::json to_json() const;
    static DuplicateReport from_json(const nlohmann::json& j);
};

enum class InputFormat { Csv, Bibtex, Ris };

InputFormat parse_format_name(const std::string& name);  // throws UnknownFormat

// Stable identifier for a query spec (hash of its defining fields).
std::string query_id(const QuerySpec& q);

struct ParseResult {
    std::vector<RawRecord> records;
    std::uint64_t skipped_missing_title = 0;
    std::vector<std::string> warnings;
};

// Parses a database export into raw records. Entries without a title are
// skipped and counted; an input with headers/structure but zero entries is a
// warning, a fully empty byte stream is an EmptyInput error.
ParseResult parse(InputFormat format, const std::string& source, const QuerySpec& query);

// Normalization rules: title lowercased with non-alphanumeric runs collapsed
// to single spaces; DOI lowercased with resolver prefixes stripped; id is a
// content hash of doi_norm when present, else title_norm.
std::string normalize_title(const std::string& title);
std::string normalize_doi(const std::string& doi);
Record normalize(const RawRecord& raw);

// First-seen-wins dedup, DOI match before normalized-title match. Provenance
// of dropped duplicates is merged into the keeper.
std::pair<std::vector<Record>, DuplicateReport> dedupe(const std::vector<Record>& records);

// Canonical record store: one JSON object per line, UTF-8, LF.
std::string records_to_jsonl(const std::vector<Record>& records);
std::vector<Record> records_from_jsonl(const std::string& text);

}  // namespace lprisma
