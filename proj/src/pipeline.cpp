#include "lprisma/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <filesystem>

#include "lprisma/errors.hpp"
#include "lprisma/flow.hpp"
#include "lprisma/hash.hpp"
#include "lprisma/jsonutil.hpp"
#include "lprisma/manifest.hpp"
#include "lprisma/triage.hpp"

namespace lprisma {

namespace fs = std::filesystem;

namespace {

fs::path stage_path(const RunConfig& cfg, const char* name) {
    return fs::path(cfg.run_dir) / name;
}

void require_stage(const RunConfig& cfg, const char* file, const std::string& stage) {
    if (!fs::exists(stage_path(cfg, file)))
        throw MissingPrerequisite("stage '" + stage + "' has not produced " + file +
                                  " yet; run it first");
}

std::string embed_cache_dir(const RunConfig& cfg) {
    return (fs::path(cfg.run_dir) / "cache" / "embeddings").string();
}

ProviderConfig effective_provider(const RunConfig& cfg) {
    ProviderConfig p = cfg.provider;
    if (p.kind == ProviderKind::Builtin && p.seed == 0) p.seed = cfg.master_seed;
    if (!p.cache_dir) p.cache_dir = embed_cache_dir(cfg);
    return p;
}

std::vector<double> load_score_values(const RunConfig& cfg) {
    auto scores = scores_from_csv(read_file(stage_path(cfg, stage_files::kScores).string()));
    std::vector<double> values;
    values.reserve(scores.size());
    for (const auto& sc : scores) values.push_back(sc.s);
    return values;
}

}  // namespace

void RunConfig::validate() const {
    if (run_dir.empty()) throw ConfigInvalid("run_dir must be set");
    if (K < 1) throw ConfigInvalid("K must be >= 1");
    if (tol <= 0.0) throw ConfigInvalid("tol must be positive");
    if (max_iter < 1) throw ConfigInvalid("max_iter must be >= 1");
    if (restarts < 1) throw ConfigInvalid("restarts must be >= 1");
    if (bins < 1) throw ConfigInvalid("bins must be >= 1");
    parse_rule_spec(rule_spec);
    provider.validate();
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig cfg;
    cfg.run_dir = j.value("run_dir", std::string("."));
    if (j.contains("inputs")) {
        for (const auto& in : j.at("inputs")) {
            InputSpec spec;
            spec.format = in.at("format").get<std::string>();
            spec.path = in.at("path").get<std::string>();
            spec.query = QuerySpec::from_json(in.at("query"));
            cfg.inputs.push_back(std::move(spec));
        }
    }
    if (j.contains("intent")) {
        const auto& it = j.at("intent");
        if (it.is_string()) {
            cfg.intent.text = it.get<std::string>();
        } else {
            cfg.intent.text = it.at("text").get<std::string>();
            if (it.contains("refinement_log"))
                for (const auto& r : it.at("refinement_log"))
                    cfg.intent.refinement_log.emplace_back(
                        r.at("tool_name").get<std::string>(), r.at("prompt").get<std::string>(),
                        r.at("resulting_text").get<std::string>());
        }
    }
    if (j.contains("provider")) cfg.provider = ProviderConfig::from_json(j.at("provider"));
    cfg.K = j.value("K", std::size_t{2});
    cfg.tol = j.value("tol", 1e-8);
    cfg.max_iter = j.value("max_iter", std::size_t{500});
    cfg.restarts = j.value("restarts", std::size_t{1});
    cfg.rule_spec = j.value("rule", std::string("two-sigma"));
    cfg.bins = j.value("bins", std::size_t{40});
    cfg.master_seed = j.value("master_seed", std::uint64_t{0});
    if (j.contains("llm") && !j.at("llm").is_null()) cfg.llm = LlmConfig::from_json(j.at("llm"));
    if (j.contains("criteria_file") && !j.at("criteria_file").is_null())
        cfg.criteria_file = j.at("criteria_file").get<std::string>();
    if (j.contains("screening_file") && !j.at("screening_file").is_null())
        cfg.screening_file = j.at("screening_file").get<std::string>();
    cfg.created_at = j.value("created_at", std::string());
    cfg.dry_run = j.value("dry_run", true);
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    return from_json(nlohmann::json::parse(read_file(path)));
}

RunLock::RunLock(const std::string& run_dir) {
    fs::create_directories(run_dir);
    path_ = (fs::path(run_dir) / ".lprisma.lock").string();
    int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) throw Error("run directory is locked by another pipeline: " + path_);
    ::close(fd);
}

RunLock::~RunLock() { ::unlink(path_.c_str()); }

void stage_ingest(const RunConfig& cfg) {
    if (cfg.inputs.empty()) throw ConfigInvalid("ingest: no inputs configured");
    RunLock lock(cfg.run_dir);

    std::vector<Record> all;
    nlohmann::json queries = nlohmann::json::array();
    for (const auto& input : cfg.inputs) {
        InputFormat format = parse_format_name(input.format);
        ParseResult parsed = parse(format, read_file(input.path), input.query);
        for (const auto& raw : parsed.records) all.push_back(normalize(raw));
        queries.push_back(input.query.to_json());
    }
    atomic_write(stage_path(cfg, stage_files::kQueries).string(),
                 dump_canonical(queries) + "\n");
    atomic_write(stage_path(cfg, stage_files::kRawRecords).string(), records_to_jsonl(all));
}

void stage_dedupe(const RunConfig& cfg) {
    require_stage(cfg, stage_files::kRawRecords, "ingest");
    RunLock lock(cfg.run_dir);
    auto all = records_from_jsonl(read_file(stage_path(cfg, stage_files::kRawRecords).string()));
    auto [unique, report] = dedupe(all);
    atomic_write(stage_path(cfg, stage_files::kRecords).string(), records_to_jsonl(unique));
    atomic_write(stage_path(cfg, stage_files::kDedupeReport).string(),
                 dump_canonical(report.to_json()) + "\n");
}

void stage_score(const RunConfig& cfg) {
    require_stage(cfg, stage_files::kRecords, "dedupe");
    if (cfg.intent.text.empty()) throw ConfigInvalid("score: intent statement not configured");
    RunLock lock(cfg.run_dir);
    auto records = records_from_jsonl(read_file(stage_path(cfg, stage_files::kRecords).string()));
    auto result = score_corpus(effective_provider(cfg), cfg.intent, records);
    atomic_write(stage_path(cfg, stage_files::kScores).string(), scores_to_csv(result.scores));
    if (!result.failures.empty()) {
        std::string failures;
        for (const auto& [id, err] : result.failures) failures += id + "," + err + "\n";
        atomic_write((fs::path(cfg.run_dir) / "score-failures.csv").string(), failures);
    }
}

void stage_fit(const RunConfig& cfg) {
    require_stage(cfg, stage_files::kScores, "score");
    RunLock lock(cfg.run_dir);
    FitOptions opts;
    opts.K = cfg.K;
    opts.tol = cfg.tol;
    opts.max_iter = cfg.max_iter;
    opts.restarts = cfg.restarts;
    opts.seed = cfg.master_seed;
    GmmParams params = fit_em(load_score_values(cfg), opts);
    atomic_write(stage_path(cfg, stage_files::kModel).string(),
                 dump_canonical(params.to_json()) + "\n");
    atomic_write(stage_path(cfg, stage_files::kPdfCurve).string(), pdf_curve_csv(params));
}

void stage_cutoffs(const RunConfig& cfg) {
    require_stage(cfg, stage_files::kModel, "fit");
    RunLock lock(cfg.run_dir);
    GmmParams params = GmmParams::from_json(
        nlohmann::json::parse(read_file(stage_path(cfg, stage_files::kModel).string())));
    Cutoffs cuts = derive_cutoffs(params, load_score_values(cfg), parse_rule_spec(cfg.rule_spec));
    atomic_write(stage_path(cfg, stage_files::kCutoffs).string(),
                 dump_canonical(cuts.to_json()) + "\n");
}

void stage_partition(const RunConfig& cfg) {
    require_stage(cfg, stage_files::kCutoffs, "cutoffs");
    require_stage(cfg, stage_files::kScores, "score");
    RunLock lock(cfg.run_dir);
    Cutoffs cuts = Cutoffs::from_json(
        nlohmann::json::parse(read_file(stage_path(cfg, stage_files::kCutoffs).string())));
    auto scores = scores_from_csv(read_file(stage_path(cfg, stage_files::kScores).string()));
    TriageResult result = partition(scores, cuts);
    atomic_write(stage_path(cfg, stage_files::kTriage).string(),
                 dump_canonical(result.to_json()) + "\n");
    atomic_write(stage_path(cfg, stage_files::kTriageCsv).string(), triage_to_csv(result));
    atomic_write(stage_path(cfg, stage_files::kOverrides).string(),
                 overrides_to_jsonl(result.overrides));
}

void stage_flow(const RunConfig& cfg) {
    require_stage(cfg, stage_files::kQueries, "ingest");
    require_stage(cfg, stage_files::kDedupeReport, "dedupe");
    require_stage(cfg, stage_files::kTriage, "partition");
    require_stage(cfg, stage_files::kModel, "fit");
    RunLock lock(cfg.run_dir);
    std::vector<QuerySpec> queries;
    for (const auto& q :
         nlohmann::json::parse(read_file(stage_path(cfg, stage_files::kQueries).string())))
        queries.push_back(QuerySpec::from_json(q));
    DuplicateReport dup = DuplicateReport::from_json(
        nlohmann::json::parse(read_file(stage_path(cfg, stage_files::kDedupeReport).string())));
    TriageResult triage = TriageResult::from_json(
        nlohmann::json::parse(read_file(stage_path(cfg, stage_files::kTriage).string())));

    ScreeningTallies tallies;
    if (cfg.screening_file) {
        tallies = ScreeningTallies::from_json(nlohmann::json::parse(read_file(*cfg.screening_file)));
    } else {
        tallies.manual_screened = triage.counts.n_human;
        tallies.genai_screened = triage.counts.n_genai;
    }
    FlowCounts counts = build_flow(queries, dup, triage, tallies);
    atomic_write(stage_path(cfg, stage_files::kFlow).string(),
                 dump_canonical(counts.to_json()) + "\n");
    atomic_write(stage_path(cfg, stage_files::kFlowMermaid).string(),
                 render_flow(counts, FlowFormat::Mermaid));
    atomic_write(stage_path(cfg, stage_files::kFlowDot).string(),
                 render_flow(counts, FlowFormat::Dot));
    atomic_write(stage_path(cfg, stage_files::kFlowText).string(),
                 render_flow(counts, FlowFormat::Text));

    GmmParams params = GmmParams::from_json(
        nlohmann::json::parse(read_file(stage_path(cfg, stage_files::kModel).string())));
    atomic_write(stage_path(cfg, stage_files::kHistogram).string(),
                 export_histogram(load_score_values(cfg), params, triage.cutoffs, cfg.bins));
}

void stage_screen(const RunConfig& cfg) {
    require_stage(cfg, stage_files::kTriage, "partition");
    require_stage(cfg, stage_files::kRecords, "dedupe");
    if (!cfg.criteria_file) throw ConfigInvalid("screen: criteria_file not configured");
    RunLock lock(cfg.run_dir);

    EligibilityCriteria criteria =
        EligibilityCriteria::from_json(nlohmann::json::parse(read_file(*cfg.criteria_file)));
    TriageResult triage = TriageResult::from_json(
        nlohmann::json::parse(read_file(stage_path(cfg, stage_files::kTriage).string())));
    auto records = records_from_jsonl(read_file(stage_path(cfg, stage_files::kRecords).string()));

    LlmConfig llm;
    if (cfg.llm) llm = *cfg.llm;
    llm.dry_run = cfg.dry_run || !cfg.llm;
    if (!llm.cache_dir) llm.cache_dir = (fs::path(cfg.run_dir) / "cache" / "llm").string();

    fs::path prompt_dir = fs::path(cfg.run_dir) / "prompts";
    fs::create_directories(prompt_dir);

    std::vector<ScreeningVerdict> verdicts;
    for (const auto& rec : records) {  // records.jsonl order is deterministic
        auto it = triage.assignments.find(rec.id);
        if (it == triage.assignments.end() || it->second != Bin::GenAIReview) continue;
        PromptBundle bundle = render_prompt(rec, criteria, "screening-v1");
        atomic_write((prompt_dir / (rec.id + ".txt")).string(), bundle.rendered);
        verdicts.push_back(screen_record(llm, bundle));
    }
    std::sort(verdicts.begin(), verdicts.end(),
              [](const ScreeningVerdict& a, const ScreeningVerdict& b) {
                  return a.record_id < b.record_id;
              });
    atomic_write(stage_path(cfg, stage_files::kVerdicts).string(), verdicts_to_jsonl(verdicts));
}

void stage_manifest(const RunConfig& cfg) {
    require_stage(cfg, stage_files::kQueries, "ingest");
    require_stage(cfg, stage_files::kModel, "fit");
    require_stage(cfg, stage_files::kCutoffs, "cutoffs");
    require_stage(cfg, stage_files::kTriage, "partition");
    RunLock lock(cfg.run_dir);

    ManifestInputs inputs;
    inputs.tool_version = kToolVersion;
    inputs.created_at = cfg.created_at;
    for (const auto& q :
         nlohmann::json::parse(read_file(stage_path(cfg, stage_files::kQueries).string())))
        inputs.queries.push_back(QuerySpec::from_json(q));
    inputs.intent = cfg.intent;
    inputs.provider = effective_provider(cfg);
    inputs.gmm = GmmParams::from_json(
        nlohmann::json::parse(read_file(stage_path(cfg, stage_files::kModel).string())));
    inputs.rule = parse_rule_spec(cfg.rule_spec);
    inputs.cutoffs = Cutoffs::from_json(
        nlohmann::json::parse(read_file(stage_path(cfg, stage_files::kCutoffs).string())));
    TriageResult triage = TriageResult::from_json(
        nlohmann::json::parse(read_file(stage_path(cfg, stage_files::kTriage).string())));
    inputs.triage_counts = triage.counts;
    if (cfg.llm && !cfg.dry_run) inputs.llm = cfg.llm;
    inputs.prompt_template_hashes = {sha256_hex(template_text("screening-v1")),
                                     sha256_hex(template_text("summary-v1"))};
    inputs.master_seed = cfg.master_seed;

    static const char* hashed_files[] = {
        stage_files::kQueries,   stage_files::kRawRecords, stage_files::kRecords,
        stage_files::kDedupeReport, stage_files::kScores,  stage_files::kModel,
        stage_files::kPdfCurve,  stage_files::kCutoffs,    stage_files::kTriage,
        stage_files::kTriageCsv, stage_files::kOverrides,  stage_files::kFlow,
        stage_files::kFlowMermaid, stage_files::kFlowDot,  stage_files::kFlowText,
        stage_files::kHistogram, stage_files::kVerdicts};
    for (const char* name : hashed_files) {
        fs::path p = stage_path(cfg, name);
        if (fs::exists(p)) inputs.input_files[name] = p.string();
    }
    RunManifest manifest = build_manifest(inputs);
    atomic_write(stage_path(cfg, stage_files::kManifest).string(), manifest.serialize());
}

bool stage_verify(const RunConfig& cfg, std::string* report_text) {
    require_stage(cfg, stage_files::kManifest, "manifest");
    VerificationReport report =
        verify_manifest(stage_path(cfg, stage_files::kManifest).string(), cfg.run_dir);
    if (report_text) {
        for (const auto& e : report.entries) *report_text += e.status + " " + e.name + "\n";
    }
    return report.all_pass();
}

void run_all(const RunConfig& cfg) {
    stage_ingest(cfg);
    stage_dedupe(cfg);
    stage_score(cfg);
    stage_fit(cfg);
    stage_cutoffs(cfg);
    stage_partition(cfg);
    stage_flow(cfg);
    if (cfg.criteria_file) stage_screen(cfg);
    stage_manifest(cfg);
}

}  // namespace lprisma
