#include "lprisma/records.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <unordered_map>

#include "lprisma/errors.hpp"
#include "lprisma/hash.hpp"
#include "lprisma/jsonutil.hpp"

namespace lprisma {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::vector<std::string> split_authors(const std::string& s, const std::string& sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t next = s.find(sep, pos);
        std::string part = trim(next == std::string::npos ? s.substr(pos)
                                                          : s.substr(pos, next - pos));
        if (!part.empty()) out.push_back(part);
        if (next == std::string::npos) break;
        pos = next + sep.size();
    }
    return out;
}

std::optional<int> parse_year(const std::string& s) {
    std::string t = trim(s);
    // RIS PY can look like "2024//"; take the leading digits
    std::size_t i = 0;
    while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
    if (i < 4) return std::nullopt;
    int y = std::stoi(t.substr(0, i));
    if (y < 1900 || y > 2100) return std::nullopt;
    return y;
}

// RFC 4180 style CSV: quoted fields may contain commas, quotes ("") and newlines.
std::vector<std::vector<std::string>> parse_csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t i = 0;
    auto end_field = [&] {
        row.push_back(field);
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(row);
        row.clear();
    };
    while (i < text.size()) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() || !row.empty() || field_started) end_row();
        } else if (c == '\r') {
            // swallow; \r\n handled by the \n branch
        } else {
            field.push_back(c);
            field_started = true;
        }
        ++i;
    }
    if (!field.empty() || !row.empty() || field_started) end_row();
    if (in_quotes) throw MalformedInput("csv: unterminated quoted field at end of input");
    return rows;
}

ParseResult parse_csv(const std::string& source, const QuerySpec& query) {
    ParseResult result;
    auto rows = parse_csv_rows(source);
    if (rows.empty()) throw EmptyInput("csv: no header row");
    const auto& header = rows[0];
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[trim(header[i])] = i;

    auto get = [&](const std::vector<std::string>& r, const std::string& name) -> std::string {
        auto it = col.find(name);
        if (it == col.end() || it->second >= r.size()) return "";
        return trim(r[it->second]);
    };

    const std::string qid = query_id(query);
    for (std::size_t ri = 1; ri < rows.size(); ++ri) {
        const auto& r = rows[ri];
        RawRecord rec;
        rec.source_db = query.database;
        rec.query_id = qid;
        rec.title = get(r, "Document Title");
        if (rec.title.empty()) {
            ++result.skipped_missing_title;
            continue;
        }
        std::string abs = get(r, "Abstract");
        if (!abs.empty()) rec.abstract = abs;
        std::string authors = get(r, "Authors");
        if (!authors.empty()) rec.authors = split_authors(authors, ";");
        rec.year = parse_year(get(r, "Publication Year"));
        std::string venue = get(r, "Publication Title");
        if (!venue.empty()) rec.venue = venue;
        std::string doi = get(r, "DOI");
        if (!doi.empty()) rec.doi = doi;
        for (const auto& [name, idx] : col) {
            static const char* known[] = {"Document Title", "Abstract",          "Authors",
                                          "Publication Year", "Publication Title", "DOI"};
            bool is_known = false;
            for (const char* k : known)
                if (name == k) is_known = true;
            if (!is_known && idx < r.size() && !trim(r[idx]).empty())
                rec.extra[name] = trim(r[idx]);
        }
        result.records.push_back(std::move(rec));
    }
    if (result.records.empty() && result.skipped_missing_title == 0)
        result.warnings.push_back("csv: header only, no data rows");
    return result;
}

// Minimal BibTeX reader: @type{key, field = {...} | "..." | bare, ...}
struct BibEntry {
    std::string type;
    std::map<std::string, std::string> fields;
};

std::vector<BibEntry> parse_bibtex_entries(const std::string& text) {
    std::vector<BibEntry> entries;
    std::size_t i = 0;
    const std::size_t n = text.size();
    auto skip_ws = [&] {
        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    };
    while (i < n) {
        while (i < n && text[i] != '@') ++i;
        if (i >= n) break;
        ++i;  // '@'
        std::string type;
        while (i < n && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_'))
            type.push_back(text[i++]);
        skip_ws();
        if (i >= n || text[i] != '{')
            throw MalformedInput("bibtex: expected '{' after @" + type);
        ++i;
        BibEntry entry;
        entry.type = lower(type);
        if (entry.type == "comment" || entry.type == "preamble" || entry.type == "string") {
            // skip to matching close brace
            int depth = 1;
            while (i < n && depth > 0) {
                if (text[i] == '{') ++depth;
                if (text[i] == '}') --depth;
                ++i;
            }
            continue;
        }
        // citation key
        while (i < n && text[i] != ',' && text[i] != '}') ++i;
        if (i < n && text[i] == ',') ++i;
        // fields
        while (true) {
            skip_ws();
            if (i >= n) throw MalformedInput("bibtex: unterminated entry @" + entry.type);
            if (text[i] == '}') {
                ++i;
                break;
            }
            if (text[i] == ',') {
                ++i;
                continue;
            }
            std::string name;
            while (i < n && text[i] != '=' && text[i] != '}' && text[i] != ',')
                name.push_back(text[i++]);
            name = lower(trim(name));
            skip_ws();
            if (i >= n || text[i] != '=') {
                if (name.empty()) continue;
                throw MalformedInput("bibtex: field '" + name + "' missing '='");
            }
            ++i;
            skip_ws();
            std::string value;
            if (i < n && text[i] == '{') {
                int depth = 1;
                ++i;
                while (i < n && depth > 0) {
                    if (text[i] == '{') ++depth;
                    if (text[i] == '}') --depth;
                    if (depth > 0) value.push_back(text[i]);
                    ++i;
                }
            } else if (i < n && text[i] == '"') {
                ++i;
                while (i < n && text[i] != '"') value.push_back(text[i++]);
                if (i < n) ++i;
            } else {
                while (i < n && text[i] != ',' && text[i] != '}') value.push_back(text[i++]);
            }
            if (!name.empty()) entry.fields[name] = trim(value);
        }
        entries.push_back(std::move(entry));
    }
    return entries;
}

ParseResult parse_bibtex(const std::string& source, const QuerySpec& query) {
    ParseResult result;
    auto entries = parse_bibtex_entries(source);
    const std::string qid = query_id(query);
    for (auto& e : entries) {
        RawRecord rec;
        rec.source_db = query.database;
        rec.query_id = qid;
        auto take = [&](const char* name) -> std::string {
            auto it = e.fields.find(name);
            return it == e.fields.end() ? "" : it->second;
        };
        rec.title = trim(take("title"));
        if (rec.title.empty()) {
            ++result.skipped_missing_title;
            continue;
        }
        std::string abs = take("abstract");
        if (!abs.empty()) rec.abstract = abs;
        std::string authors = take("author");
        if (!authors.empty()) rec.authors = split_authors(authors, " and ");
        rec.year = parse_year(take("year"));
        std::string venue = take("booktitle");
        if (venue.empty()) venue = take("journal");
        if (!venue.empty()) rec.venue = venue;
        std::string doi = take("doi");
        if (!doi.empty()) rec.doi = doi;
        for (const auto& [k, v] : e.fields) {
            if (k != "title" && k != "abstract" && k != "author" && k != "year" &&
                k != "booktitle" && k != "journal" && k != "doi" && !v.empty())
                rec.extra[k] = v;
        }
        result.records.push_back(std::move(rec));
    }
    if (entries.empty()) result.warnings.push_back("bibtex: no entries found");
    return result;
}

ParseResult parse_ris(const std::string& source, const QuerySpec& query) {
    ParseResult result;
    const std::string qid = query_id(query);
    std::istringstream in(source);
    std::string line;
    RawRecord rec;
    bool any_tag = false;
    bool in_record = false;
    std::size_t entry_count = 0;

    auto flush = [&] {
        ++entry_count;
        if (trim(rec.title).empty()) {
            ++result.skipped_missing_title;
        } else {
            rec.title = trim(rec.title);
            result.records.push_back(rec);
        }
        rec = RawRecord{};
        rec.source_db = query.database;
        rec.query_id = qid;
        in_record = false;
    };

    rec.source_db = query.database;
    rec.query_id = qid;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.size() < 2) continue;
        std::string tag = line.substr(0, 2);
        std::string value = line.size() > 6 ? trim(line.substr(6)) : "";
        if (tag == "ER") {
            if (in_record) flush();
            continue;
        }
        if (!std::isupper(static_cast<unsigned char>(tag[0]))) continue;
        any_tag = true;
        in_record = true;
        if (tag == "TI") {
            rec.title = value;
        } else if (tag == "AB") {
            if (!value.empty()) rec.abstract = value;
        } else if (tag == "AU") {
            if (!value.empty()) rec.authors.push_back(value);
        } else if (tag == "PY") {
            rec.year = parse_year(value);
        } else if (tag == "T2") {
            if (!value.empty()) rec.venue = value;
        } else if (tag == "DO") {
            if (!value.empty()) rec.doi = value;
        } else if (tag != "TY") {
            if (!value.empty()) rec.extra[tag] = value;
        }
    }
    if (in_record) flush();  // tolerate a missing final ER tag
    if (!any_tag) result.warnings.push_back("ris: no tag lines found");
    return result;
}

}  // namespace

std::string query_id(const QuerySpec& q) {
    return sha256_hex16(q.database + "\x1f" + q.query + "\x1f" + q.scope_label + "\x1f" +
                        q.executed_on);
}

InputFormat parse_format_name(const std::string& name) {
    if (name == "csv") return InputFormat::Csv;
    if (name == "bibtex" || name == "bib") return InputFormat::Bibtex;
    if (name == "ris") return InputFormat::Ris;
    throw UnknownFormat("unknown input format: " + name);
}

ParseResult parse(InputFormat format, const std::string& source, const QuerySpec& query) {
    if (trim(query.query).empty()) throw ConfigInvalid("query string must be non-empty");
    if (trim(source).empty()) throw EmptyInput("input is empty");
    switch (format) {
        case InputFormat::Csv: return parse_csv(source, query);
        case InputFormat::Bibtex: return parse_bibtex(source, query);
        case InputFormat::Ris: return parse_ris(source, query);
    }
    throw UnknownFormat("unknown input format");
}

std::string normalize_title(const std::string& title) {
    std::string out;
    out.reserve(title.size());
    bool pending_space = false;
    for (unsigned char c : title) {
        if (std::isalnum(c)) {
            if (pending_space && !out.empty()) out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        } else {
            pending_space = true;
        }
    }
    return out;
}

std::string normalize_doi(const std::string& doi) {
    std::string d = lower(trim(doi));
    static const char* prefixes[] = {"https://doi.org/", "http://doi.org/",
                                     "https://dx.doi.org/", "http://dx.doi.org/", "doi:"};
    bool stripped = true;
    while (stripped) {
        stripped = false;
        for (const char* p : prefixes) {
            std::string pre(p);
            if (d.rfind(pre, 0) == 0) {
                d = d.substr(pre.size());
                stripped = true;
            }
        }
    }
    return d;
}

Record normalize(const RawRecord& raw) {
    std::string title = trim(raw.title);
    if (title.empty()) throw MalformedInput("normalize: record title is empty");
    Record rec;
    rec.title = title;
    rec.title_norm = normalize_title(title);
    rec.abstract = raw.abstract;
    if (raw.doi && !normalize_doi(*raw.doi).empty()) rec.doi_norm = normalize_doi(*raw.doi);
    rec.id = rec.doi_norm ? sha256_hex16("doi:" + *rec.doi_norm)
                          : sha256_hex16("title:" + rec.title_norm);
    rec.provenance.emplace_back(raw.source_db, raw.query_id);
    return rec;
}

std::pair<std::vector<Record>, DuplicateReport> dedupe(const std::vector<Record>& records) {
    std::vector<Record> kept;
    DuplicateReport report;
    report.input_count = records.size();
    std::unordered_map<std::string, std::size_t> by_doi;    // doi_norm -> index in kept
    std::unordered_map<std::string, std::size_t> by_title;  // title_norm -> index in kept

    for (const auto& rec : records) {
        std::size_t target = kept.size();
        bool found = false;
        if (rec.doi_norm) {
            auto it = by_doi.find(*rec.doi_norm);
            if (it != by_doi.end()) {
                target = it->second;
                found = true;
            }
        }
        if (!found) {
            auto it = by_title.find(rec.title_norm);
            if (it != by_title.end()) {
                target = it->second;
                found = true;
            }
        }
        if (found) {
            auto& keeper = kept[target];
            for (const auto& prov : rec.provenance) {
                if (std::find(keeper.provenance.begin(), keeper.provenance.end(), prov) ==
                    keeper.provenance.end())
                    keeper.provenance.push_back(prov);
            }
            if (!keeper.doi_norm && rec.doi_norm) keeper.doi_norm = rec.doi_norm;
            // register the dropped record's keys so later duplicates of it
            // still collapse into the same keeper
            if (rec.doi_norm) by_doi.emplace(*rec.doi_norm, target);
            by_title.emplace(rec.title_norm, target);
            std::string dropped_source =
                rec.provenance.empty() ? std::string() : rec.provenance.front().first;
            report.merge_log.emplace_back(keeper.id, dropped_source);
            ++report.duplicates_removed;
        } else {
            std::size_t idx = kept.size();
            kept.push_back(rec);
            if (rec.doi_norm) by_doi.emplace(*rec.doi_norm, idx);
            by_title.emplace(rec.title_norm, idx);
        }
    }
    report.unique_count = kept.size();
    return {kept, report};
}

nlohmann::json QuerySpec::to_json() const {
    return {{"database", database},
            {"query", query},
            {"scope_label", scope_label},
            {"executed_on", executed_on},
            {"reported_count", reported_count}};
}

QuerySpec QuerySpec::from_json(const nlohmann::json& j) {
    QuerySpec q;
    q.database = j.at("database").get<std::string>();
    q.query = j.at("query").get<std::string>();
    q.scope_label = j.value("scope_label", "");
    q.executed_on = j.value("executed_on", "");
    q.reported_count = j.value("reported_count", std::uint64_t{0});
    if (trim(q.query).empty()) throw ConfigInvalid("query string must be non-empty");
    return q;
}

nlohmann::json Record::to_json() const {
    nlohmann::json j;
    j["id"] = id;
    j["title"] = title;
    j["title_norm"] = title_norm;
    j["abstract"] = abstract ? nlohmann::json(*abstract) : nlohmann::json(nullptr);
    j["doi_norm"] = doi_norm ? nlohmann::json(*doi_norm) : nlohmann::json(nullptr);
    nlohmann::json prov = nlohmann::json::array();
    for (const auto& [db, qid] : provenance) prov.push_back({{"source_db", db}, {"query_id", qid}});
    j["provenance"] = prov;
    return j;
}

Record Record::from_json(const nlohmann::json& j) {
    Record r;
    r.id = j.at("id").get<std::string>();
    r.title = j.at("title").get<std::string>();
    r.title_norm = j.at("title_norm").get<std::string>();
    if (!j.at("abstract").is_null()) r.abstract = j.at("abstract").get<std::string>();
    if (!j.at("doi_norm").is_null()) r.doi_norm = j.at("doi_norm").get<std::string>();
    for (const auto& p : j.at("provenance"))
        r.provenance.emplace_back(p.at("source_db").get<std::string>(),
                                  p.at("query_id").get<std::string>());
    return r;
}

nlohmann::json DuplicateReport::to_json() const {
    nlohmann::json j;
    j["input_count"] = input_count;
    j["unique_count"] = unique_count;
    j["duplicates_removed"] = duplicates_removed;
    nlohmann::json log = nlohmann::json::array();
    for (const auto& [kept, dropped] : merge_log)
        log.push_back({{"kept_id", kept}, {"dropped_source", dropped}});
    j["merge_log"] = log;
    return j;
}

DuplicateReport DuplicateReport::from_json(const nlohmann::json& j) {
    DuplicateReport r;
    r.input_count = j.at("input_count").get<std::uint64_t>();
    r.unique_count = j.at("unique_count").get<std::uint64_t>();
    r.duplicates_removed = j.at("duplicates_removed").get<std::uint64_t>();
    for (const auto& e : j.at("merge_log"))
        r.merge_log.emplace_back(e.at("kept_id").get<std::string>(),
                                 e.at("dropped_source").get<std::string>());
    return r;
}

std::string records_to_jsonl(const std::vector<Record>& records) {
    std::string out;
    for (const auto& r : records) {
        out += dump_canonical(r.to_json());
        out += '\n';
    }
    return out;
}

std::vector<Record> records_from_jsonl(const std::string& text) {
    std::vector<Record> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        out.push_back(Record::from_json(nlohmann::json::parse(line)));
    }
    return out;
}

}  // namespace lprisma
