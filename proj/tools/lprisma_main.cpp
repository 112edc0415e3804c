#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lprisma/errors.hpp"
#include "lprisma/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitStageFailure = 2;
constexpr int kExitReconciliation = 3;

struct CliOptions {
    std::string run_dir;  // empty: keep the config file's run_dir
    std::string config_path;
    std::string provider_kind;
    std::string model;
    std::string endpoint;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t k = 0;
    std::string rule;
    std::size_t bins = 0;
    bool dry_run = false;
    std::string format = "mermaid";
    std::string intent_text;
    std::vector<std::string> inputs;  // format:path entries for ad-hoc ingest
};

lprisma::RunConfig make_config(const CliOptions& opts) {
    lprisma::RunConfig cfg;
    if (!opts.config_path.empty()) cfg = lprisma::RunConfig::load(opts.config_path);
    if (!opts.run_dir.empty()) cfg.run_dir = opts.run_dir;
    if (!opts.provider_kind.empty()) {
        if (opts.provider_kind == "builtin")
            cfg.provider.kind = lprisma::ProviderKind::Builtin;
        else if (opts.provider_kind == "http")
            cfg.provider.kind = lprisma::ProviderKind::Http;
        else
            throw lprisma::ConfigInvalid("unknown provider: " + opts.provider_kind);
    }
    if (!opts.model.empty()) cfg.provider.model_id = opts.model;
    if (!opts.endpoint.empty()) cfg.provider.endpoint = opts.endpoint;
    if (opts.seed_set) cfg.master_seed = opts.seed;
    if (opts.k > 0) cfg.K = opts.k;
    if (!opts.rule.empty()) cfg.rule_spec = opts.rule;
    if (opts.bins > 0) cfg.bins = opts.bins;
    if (opts.dry_run) cfg.dry_run = true;
    if (!opts.intent_text.empty()) cfg.intent.text = opts.intent_text;
    cfg.validate();
    return cfg;
}

int dispatch(const std::string& name, const lprisma::RunConfig& cfg) {
    using namespace lprisma;
    if (name == "ingest")
        stage_ingest(cfg);
    else if (name == "dedupe")
        stage_dedupe(cfg);
    else if (name == "score")
        stage_score(cfg);
    else if (name == "fit")
        stage_fit(cfg);
    else if (name == "cutoffs")
        stage_cutoffs(cfg);
    else if (name == "partition")
        stage_partition(cfg);
    else if (name == "flow")
        stage_flow(cfg);
    else if (name == "screen")
        stage_screen(cfg);
    else if (name == "manifest")
        stage_manifest(cfg);
    else if (name == "verify") {
        std::string report;
        bool ok = stage_verify(cfg, &report);
        std::cout << report;
        return ok ? kExitOk : kExitStageFailure;
    } else if (name == "all") {
        run_all(cfg);
    } else {
        return kExitUsage;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"L-PRISMA pre-screening pipeline"};
    app.require_subcommand(1);

    CliOptions opts;
    const std::vector<std::string> subcommands = {"ingest", "dedupe", "score",  "fit",
                                                  "cutoffs", "partition", "flow", "screen",
                                                  "manifest", "verify", "all"};
    for (const auto& name : subcommands) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--run-dir", opts.run_dir, "run directory");
        sub->add_option("--config", opts.config_path, "JSON config file");
        sub->add_option("--provider", opts.provider_kind, "builtin|http");
        sub->add_option("--model", opts.model, "embedding model id");
        sub->add_option("--endpoint", opts.endpoint, "http provider endpoint");
        sub->add_option("--seed", opts.seed, "master seed")
            ->each([&](const std::string&) { opts.seed_set = true; });
        sub->add_option("--k", opts.k, "mixture component count");
        sub->add_option("--rule", opts.rule,
                        "two-sigma | quantile:ql:qh | manual:lo:hi | posterior:tau");
        sub->add_option("--bins", opts.bins, "histogram bin count");
        sub->add_flag("--dry-run", opts.dry_run, "no network calls in the GenAI stage");
        sub->add_option("--format", opts.format, "flow render format: mermaid|dot|text");
        sub->add_option("--intent", opts.intent_text, "review intent statement");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    std::string name = app.get_subcommands().front()->get_name();
    try {
        lprisma::RunConfig cfg = make_config(opts);
        return dispatch(name, cfg);
    } catch (const lprisma::ReconciliationError& e) {
        std::cerr << name << ": " << e.what() << "\n";
        return kExitReconciliation;
    } catch (const lprisma::UnreconciledCounts& e) {
        std::cerr << name << ": " << e.what() << "\n";
        return kExitReconciliation;
    } catch (const lprisma::ConfigInvalid& e) {
        std::cerr << name << ": " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << name << ": " << e.what() << "\n";
        return kExitStageFailure;
    }
}
