#include "lprisma/flow.hpp"

#include <sstream>

#include "lprisma/errors.hpp"
#include "lprisma/jsonutil.hpp"

namespace lprisma {

namespace {

void check(const std::string& stage, std::uint64_t expected, std::uint64_t actual) {
    if (expected != actual)
        throw ReconciliationError(stage, static_cast<long long>(expected),
                                  static_cast<long long>(actual));
}

void check_invariants(const FlowCounts& c) {
    std::uint64_t identified = 0;
    for (const auto& e : c.identification) identified += e.count;
    check("identification - duplicates = scored", identified,
          c.scored + c.duplicates_removed);
    check("excluded + genai + human = scored",
          c.excluded_by_threshold + c.genai_bin + c.human_bin, c.scored);
    check("manual_screened = human_bin", c.human_bin, c.manual_screened);
    check("genai_screened = genai_bin", c.genai_bin, c.genai_screened);
    if (c.included_human_studies > c.manual_screened)
        throw ReconciliationError("included.human_studies <= manual_screened",
                                  static_cast<long long>(c.manual_screened),
                                  static_cast<long long>(c.included_human_studies));
    if (c.included_genai_studies > c.genai_screened)
        throw ReconciliationError("included.genai_studies <= genai_screened",
                                  static_cast<long long>(c.genai_screened),
                                  static_cast<long long>(c.included_genai_studies));
}

std::string escape_label(const std::string& s) {
    std::string out;
    for (char ch : s) {
        if (ch == '"')
            out += "\\\"";
        else if (ch == '\n')
            out += ' ';
        else
            out += ch;
    }
    return out;
}

}  // namespace

FlowCounts build_flow(const std::vector<QuerySpec>& queries, const DuplicateReport& dup,
                      const TriageResult& triage, const ScreeningTallies& screening) {
    FlowCounts c;
    for (const auto& q : queries)
        c.identification.push_back({q.database, q.scope_label, q.reported_count});
    c.duplicates_removed = dup.duplicates_removed;
    c.scored = triage.counts.n_excluded + triage.counts.n_genai + triage.counts.n_human;
    c.excluded_by_threshold = triage.counts.n_excluded;
    c.genai_bin = triage.counts.n_genai;
    c.human_bin = triage.counts.n_human;
    c.manual_screened = screening.manual_screened;
    c.manual_excluded = screening.manual_excluded;
    c.genai_screened = screening.genai_screened;
    c.reports_sought = screening.reports_sought;
    c.reports_not_retrieved = screening.reports_not_retrieved;
    c.included_human_studies = screening.included_human_studies;
    c.included_genai_studies = screening.included_genai_studies;
    check_invariants(c);
    return c;
}

FlowFormat parse_flow_format(const std::string& name) {
    if (name == "mermaid") return FlowFormat::Mermaid;
    if (name == "dot") return FlowFormat::Dot;
    if (name == "text") return FlowFormat::Text;
    throw ConfigInvalid("unknown flow format: " + name);
}

std::string render_flow(const FlowCounts& c, FlowFormat format) {
    try {
        check_invariants(c);
    } catch (const ReconciliationError& e) {
        throw UnreconciledCounts(e.what());
    }

    std::ostringstream out;
    std::uint64_t manual_excluded_total = 0;
    for (const auto& [reason, n] : c.manual_excluded) manual_excluded_total += n;

    if (format == FlowFormat::Text) {
        out << "Identification\n";
        for (const auto& e : c.identification)
            out << "  " << e.database << " (" << e.scope_label << "): n = " << e.count << "\n";
        out << "  Duplicate records removed: n = " << c.duplicates_removed << "\n";
        out << "Pre-Screening\n";
        out << "  Records scored: n = " << c.scored << "\n";
        out << "  Excluded by threshold: n = " << c.excluded_by_threshold << "\n";
        out << "  GenAI-review bin: n = " << c.genai_bin << "\n";
        out << "  Human-review bin: n = " << c.human_bin << "\n";
        out << "Screening\n";
        out << "  Records screened manually: n = " << c.manual_screened << "\n";
        for (const auto& [reason, n] : c.manual_excluded)
            out << "    Excluded (" << reason << "): n = " << n << "\n";
        out << "  Records screened by GenAI: n = " << c.genai_screened << "\n";
        out << "  Reports sought: n = " << c.reports_sought << "\n";
        out << "  Reports not retrieved: n = " << c.reports_not_retrieved << "\n";
        out << "Included\n";
        out << "  Studies included (human review): n = " << c.included_human_studies << "\n";
        out << "  Studies included (GenAI review): n = " << c.included_genai_studies << "\n";
        return out.str();
    }

    if (format == FlowFormat::Mermaid) {
        out << "flowchart TD\n";
        for (std::size_t i = 0; i < c.identification.size(); ++i) {
            const auto& e = c.identification[i];
            out << "    id" << i << "[\"Identification: " << escape_label(e.database) << " ("
                << escape_label(e.scope_label) << "): n = " << e.count << "\"]\n";
        }
        out << "    dup[\"Duplicate records removed: n = " << c.duplicates_removed << "\"]\n";
        out << "    pre[\"Pre-Screening: records scored: n = " << c.scored << "\"]\n";
        out << "    excl[\"Excluded by threshold: n = " << c.excluded_by_threshold << "\"]\n";
        out << "    genai[\"GenAI-review bin: n = " << c.genai_bin << "\"]\n";
        out << "    human[\"Human-review bin: n = " << c.human_bin << "\"]\n";
        out << "    scrh[\"Screening (manual): n = " << c.manual_screened
            << "; excluded: n = " << manual_excluded_total << "\"]\n";
        out << "    scrg[\"Screening (GenAI): n = " << c.genai_screened << "\"]\n";
        out << "    rep[\"Reports sought: n = " << c.reports_sought
            << "; not retrieved: n = " << c.reports_not_retrieved << "\"]\n";
        out << "    inc[\"Included: human studies: n = " << c.included_human_studies
            << "; GenAI studies: n = " << c.included_genai_studies << "\"]\n";
        for (std::size_t i = 0; i < c.identification.size(); ++i)
            out << "    id" << i << " --> dup\n";
        out << "    dup --> pre\n";
        out << "    pre --> excl\n";
        out << "    pre --> genai\n";
        out << "    pre --> human\n";
        out << "    human --> scrh\n";
        out << "    genai --> scrg\n";
        out << "    scrh --> rep\n";
        out << "    scrg --> rep\n";
        out << "    rep --> inc\n";
        return out.str();
    }

    // DOT
    out << "digraph lprisma_flow {\n";
    out << "    rankdir=TB;\n";
    out << "    node [shape=box];\n";
    for (std::size_t i = 0; i < c.identification.size(); ++i) {
        const auto& e = c.identification[i];
        out << "    id" << i << " [label=\"Identification: " << escape_label(e.database) << " ("
            << escape_label(e.scope_label) << "): n = " << e.count << "\"];\n";
    }
    out << "    dup [label=\"Duplicate records removed: n = " << c.duplicates_removed << "\"];\n";
    out << "    pre [label=\"Pre-Screening: records scored: n = " << c.scored << "\"];\n";
    out << "    excl [label=\"Excluded by threshold: n = " << c.excluded_by_threshold << "\"];\n";
    out << "    genai [label=\"GenAI-review bin: n = " << c.genai_bin << "\"];\n";
    out << "    human [label=\"Human-review bin: n = " << c.human_bin << "\"];\n";
    out << "    scrh [label=\"Screening (manual): n = " << c.manual_screened
        << "; excluded: n = " << manual_excluded_total << "\"];\n";
    out << "    scrg [label=\"Screening (GenAI): n = " << c.genai_screened << "\"];\n";
    out << "    rep [label=\"Reports sought: n = " << c.reports_sought
        << "; not retrieved: n = " << c.reports_not_retrieved << "\"];\n";
    out << "    inc [label=\"Included: human studies: n = " << c.included_human_studies
        << "; GenAI studies: n = " << c.included_genai_studies << "\"];\n";
    for (std::size_t i = 0; i < c.identification.size(); ++i)
        out << "    id" << i << " -> dup;\n";
    out << "    dup -> pre;\n    pre -> excl;\n    pre -> genai;\n    pre -> human;\n";
    out << "    human -> scrh;\n    genai -> scrg;\n    scrh -> rep;\n    scrg -> rep;\n";
    out << "    rep -> inc;\n";
    out << "}\n";
    return out.str();
}

std::string export_histogram(const std::vector<double>& scores, const GmmParams& params,
                             const Cutoffs& cutoffs, std::size_t bins) {
    Histogram h = histogram(scores, bins);
    const double n = static_cast<double>(scores.size());
    std::string out = "bin_left,bin_right,density,pdf,lower_cutoff,upper_cutoff\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        double left = h.edges[i];
        double right = h.edges[i + 1];
        double width = right - left;
        double density = n > 0.0 ? static_cast<double>(h.counts[i]) / (n * width) : 0.0;
        double mid = 0.5 * (left + right);
        out += format_sig12(left);
        out += ',';
        out += format_sig12(right);
        out += ',';
        out += format_sig12(density);
        out += ',';
        out += format_sig12(pdf_eval(params, mid));
        out += ',';
        out += format_sig12(cutoffs.lower);
        out += ',';
        out += format_sig12(cutoffs.upper);
        out += '\n';
    }
    return out;
}

nlohmann::json ScreeningTallies::to_json() const {
    nlohmann::json j;
    j["manual_screened"] = manual_screened;
    nlohmann::json me = nlohmann::json::array();
    for (const auto& [reason, n] : manual_excluded)
        me.push_back({{"reason", reason}, {"count", n}});
    j["manual_excluded"] = me;
    j["genai_screened"] = genai_screened;
    j["reports_sought"] = reports_sought;
    j["reports_not_retrieved"] = reports_not_retrieved;
    j["included_human_studies"] = included_human_studies;
    j["included_genai_studies"] = included_genai_studies;
    return j;
}

ScreeningTallies ScreeningTallies::from_json(const nlohmann::json& j) {
    ScreeningTallies t;
    t.manual_screened = j.value("manual_screened", std::uint64_t{0});
    if (j.contains("manual_excluded"))
        for (const auto& e : j.at("manual_excluded"))
            t.manual_excluded.emplace_back(e.at("reason").get<std::string>(),
                                           e.at("count").get<std::uint64_t>());
    t.genai_screened = j.value("genai_screened", std::uint64_t{0});
    t.reports_sought = j.value("reports_sought", std::uint64_t{0});
    t.reports_not_retrieved = j.value("reports_not_retrieved", std::uint64_t{0});
    t.included_human_studies = j.value("included_human_studies", std::uint64_t{0});
    t.included_genai_studies = j.value("included_genai_studies", std::uint64_t{0});
    return t;
}

nlohmann::json FlowCounts::to_json() const {
    nlohmann::json j;
    nlohmann::json ident = nlohmann::json::array();
    for (const auto& e : identification)
        ident.push_back({{"database", e.database}, {"scope_label", e.scope_label},
                         {"count", e.count}});
    j["identification"] = ident;
    j["duplicates_removed"] = duplicates_removed;
    j["scored"] = scored;
    j["excluded_by_threshold"] = excluded_by_threshold;
    j["genai_bin"] = genai_bin;
    j["human_bin"] = human_bin;
    j["manual_screened"] = manual_screened;
    nlohmann::json me = nlohmann::json::array();
    for (const auto& [reason, n] : manual_excluded)
        me.push_back({{"reason", reason}, {"count", n}});
    j["manual_excluded"] = me;
    j["genai_screened"] = genai_screened;
    j["reports_sought"] = reports_sought;
    j["reports_not_retrieved"] = reports_not_retrieved;
    j["included_human_studies"] = included_human_studies;
    j["included_genai_studies"] = included_genai_studies;
    return j;
}

FlowCounts FlowCounts::from_json(const nlohmann::json& j) {
    FlowCounts c;
    for (const auto& e : j.at("identification"))
        c.identification.push_back({e.at("database").get<std::string>(),
                                    e.at("scope_label").get<std::string>(),
                                    e.at("count").get<std::uint64_t>()});
    c.duplicates_removed = j.at("duplicates_removed").get<std::uint64_t>();
    c.scored = j.at("scored").get<std::uint64_t>();
    c.excluded_by_threshold = j.at("excluded_by_threshold").get<std::uint64_t>();
    c.genai_bin = j.at("genai_bin").get<std::uint64_t>();
    c.human_bin = j.at("human_bin").get<std::uint64_t>();
    c.manual_screened = j.at("manual_screened").get<std::uint64_t>();
    for (const auto& e : j.at("manual_excluded"))
        c.manual_excluded.emplace_back(e.at("reason").get<std::string>(),
                                       e.at("count").get<std::uint64_t>());
    c.genai_screened = j.at("genai_screened").get<std::uint64_t>();
    c.reports_sought = j.at("reports_sought").get<std::uint64_t>();
    c.reports_not_retrieved = j.at("reports_not_retrieved").get<std::uint64_t>();
    c.included_human_studies = j.at("included_human_studies").get<std::uint64_t>();
    c.included_genai_studies = j.at("included_genai_studies").get<std::uint64_t>();
    return c;
}

}  // namespace lprisma
