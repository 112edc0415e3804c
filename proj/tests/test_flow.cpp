#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "doctest.h"
#include "lprisma/errors.hpp"
#include "lprisma/flow.hpp"
#include "lprisma/jsonutil.hpp"

using namespace lprisma;

namespace {

std::vector<QuerySpec> survey_queries() {
    auto make = [](const std::string& db, const std::string& scope, std::uint64_t n) {
        QuerySpec q;
        q.database = db;
        q.query = "semantic OR similarity";
        q.scope_label = scope;
        q.executed_on = "2025-08-01";
        q.reported_count = n;
        return q;
    };
    return {make("IEEE", "With Educational Domain Constraint", 24),
            make("ACM", "With Educational Domain Constraint", 48),
            make("IEEE", "Without Education Domain Constraint", 362),
            make("ACM", "Without Education Domain Constraint", 869)};
}

TriageResult make_triage(std::uint64_t excluded, std::uint64_t genai, std::uint64_t human) {
    TriageResult t;
    t.counts = {excluded, genai, human};
    t.cutoffs.lower = 0.35;
    t.cutoffs.upper = 0.62;
    return t;
}

DuplicateReport make_dup(std::uint64_t input, std::uint64_t unique) {
    DuplicateReport d;
    d.input_count = input;
    d.unique_count = unique;
    d.duplicates_removed = input - unique;
    return d;
}

ScreeningTallies tallies_for(const TriageResult& t) {
    ScreeningTallies s;
    s.manual_screened = t.counts.n_human;
    s.genai_screened = t.counts.n_genai;
    return s;
}

}  // namespace

TEST_CASE("full-scale survey fixture reconciles: 1303 identified, 72 duplicates, 1231 scored") {
    auto triage = make_triage(182, 989, 60);
    auto counts = build_flow(survey_queries(), make_dup(1303, 1231), triage, tallies_for(triage));
    CHECK(counts.scored == 1231);
    CHECK(counts.excluded_by_threshold == 182);
    CHECK(counts.genai_bin == 989);
    CHECK(counts.human_bin == 60);
    CHECK(counts.duplicates_removed == 72);
}

TEST_CASE("zero-record run is a valid diagram") {
    auto triage = make_triage(0, 0, 0);
    auto counts = build_flow({}, DuplicateReport{}, triage, ScreeningTallies{});
    CHECK(counts.scored == 0);
    CHECK_NOTHROW(render_flow(counts, FlowFormat::Text));
}

TEST_CASE("build_flow raises ReconciliationError naming the failing equation") {
    auto triage = make_triage(182, 989, 60);
    SUBCASE("identification mismatch") {
        try {
            build_flow(survey_queries(), make_dup(1303, 1200), triage, tallies_for(triage));
            FAIL("expected ReconciliationError");
        } catch (const ReconciliationError& e) {
            CHECK(e.stage == "identification - duplicates = scored");
        }
    }
    SUBCASE("screening tallies must mirror the bins") {
        ScreeningTallies bad = tallies_for(triage);
        bad.manual_screened = 59;
        CHECK_THROWS_AS(build_flow(survey_queries(), make_dup(1303, 1231), triage, bad),
                        ReconciliationError);
    }
    SUBCASE("included cannot exceed screened") {
        ScreeningTallies bad = tallies_for(triage);
        bad.included_human_studies = 61;
        CHECK_THROWS_AS(build_flow(survey_queries(), make_dup(1303, 1231), triage, bad),
                        ReconciliationError);
    }
}

TEST_CASE("fuzzed consistent tallies always reconcile, violated ones never do") {
    std::mt19937_64 rng(555);
    for (int trial = 0; trial < 100; ++trial) {
        std::uint64_t excluded = rng() % 500, genai = rng() % 500, human = rng() % 100;
        std::uint64_t scored = excluded + genai + human;
        std::uint64_t dups = rng() % 50;
        QuerySpec q;
        q.database = "DB";
        q.query = "q";
        q.reported_count = scored + dups;
        auto triage = make_triage(excluded, genai, human);
        DuplicateReport dup;
        dup.input_count = scored + dups;
        dup.unique_count = scored;
        dup.duplicates_removed = dups;
        auto tallies = tallies_for(triage);
        tallies.included_human_studies = human ? rng() % human : 0;
        tallies.included_genai_studies = genai ? rng() % genai : 0;
        CHECK_NOTHROW(build_flow({q}, dup, triage, tallies));
        // perturb one tally: must fail
        auto bad = tallies;
        bad.genai_screened += 1;
        CHECK_THROWS_AS(build_flow({q}, dup, triage, bad), ReconciliationError);
    }
}

TEST_CASE("text render has each phase header exactly once") {
    auto triage = make_triage(182, 989, 60);
    auto counts = build_flow(survey_queries(), make_dup(1303, 1231), triage, tallies_for(triage));
    auto text = render_flow(counts, FlowFormat::Text);
    for (const std::string header : {"Identification", "Pre-Screening", "Screening",
                                     "Included"}) {
        std::istringstream in(text);
        std::string line;
        int occurrences = 0;
        while (std::getline(in, line))
            if (line == header) ++occurrences;
        CHECK(occurrences == 1);
    }
}

TEST_CASE("renders are deterministic") {
    auto triage = make_triage(10, 20, 5);
    QuerySpec q;
    q.database = "DB";
    q.query = "q";
    q.reported_count = 40;
    auto counts = build_flow({q}, make_dup(40, 35), triage, tallies_for(triage));
    for (auto fmt : {FlowFormat::Mermaid, FlowFormat::Dot, FlowFormat::Text})
        CHECK(render_flow(counts, fmt) == render_flow(counts, fmt));
}

TEST_CASE("mermaid render matches the golden file byte-exactly") {
    auto triage = make_triage(182, 989, 60);
    auto counts = build_flow(survey_queries(), make_dup(1303, 1231), triage, tallies_for(triage));
    auto rendered = render_flow(counts, FlowFormat::Mermaid);
    auto golden = read_file(std::string(LPRISMA_FIXTURE_DIR) + "/golden_flow.mmd");
    CHECK(rendered == golden);
}

TEST_CASE("render_flow rejects unreconciled counts") {
    FlowCounts c;
    c.scored = 10;  // nothing else set: equations cannot hold
    c.excluded_by_threshold = 1;
    CHECK_THROWS_AS(render_flow(c, FlowFormat::Text), UnreconciledCounts);
}

TEST_CASE("flow counts json round trip") {
    auto triage = make_triage(182, 989, 60);
    auto tallies = tallies_for(triage);
    tallies.manual_excluded = {{"out of scope", 12}, {"no full text", 3}};
    tallies.reports_sought = 1049;
    tallies.reports_not_retrieved = 17;
    tallies.included_human_studies = 45;
    tallies.included_genai_studies = 700;
    auto counts = build_flow(survey_queries(), make_dup(1303, 1231), triage, tallies);
    auto round = FlowCounts::from_json(counts.to_json());
    CHECK(dump_canonical(round.to_json()) == dump_canonical(counts.to_json()));
    CHECK(render_flow(round, FlowFormat::Mermaid) == render_flow(counts, FlowFormat::Mermaid));
}

TEST_CASE("export_histogram columns are consistent") {
    GmmParams p;
    p.K = 2;
    p.weights = {0.7, 0.3};
    p.means = {0.3, 0.8};
    p.stddevs = {0.06, 0.05};
    auto scores = sample(p, 2000, 13);
    Cutoffs cuts;
    cuts.lower = 0.42;
    cuts.upper = 0.68;
    auto csv = export_histogram(scores, p, cuts, 40);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "bin_left,bin_right,density,pdf,lower_cutoff,upper_cutoff");
    double density_mass = 0.0;
    int rows = 0;
    while (std::getline(in, line)) {
        double col[6];
        std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &col[0], &col[1], &col[2], &col[3],
                    &col[4], &col[5]);
        density_mass += col[2] * (col[1] - col[0]);
        CHECK(std::abs(col[3] - pdf_eval(p, 0.5 * (col[0] + col[1]))) <
              1e-11 * std::max(1.0, col[3]));
        CHECK(col[4] == 0.42);
        CHECK(col[5] == 0.68);
        ++rows;
    }
    CHECK(rows == 40);
    CHECK(std::abs(density_mass - 1.0) < 1e-9);
}
