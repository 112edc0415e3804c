#include "lprisma/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "lprisma/errors.hpp"
#include "lprisma/hash.hpp"
#include "lprisma/jsonutil.hpp"

namespace lprisma {

namespace {

constexpr double kVarianceFloor = 1e-6;

double uniform01(std::mt19937_64& rng) {
    // 53-bit mantissa draw in [0,1)
    return static_cast<double>(rng() >> 11) * 0x1p-53;
}

double gaussian_draw(std::mt19937_64& rng) {
    // Box-Muller, one deviate per call for a platform-stable stream
    double u1 = 1.0 - uniform01(rng);  // (0,1]
    double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

struct Component {
    double weight;
    double mean;
    double var;
};

double log_gaussian(double x, double mean, double var) {
    double d = x - mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

// One full EM run from the given initialization.
GmmParams run_em(const std::vector<double>& sorted_scores, std::vector<Component> comps,
                 const FitOptions& opts) {
    const std::size_t n = sorted_scores.size();
    const std::size_t K = comps.size();
    std::vector<double> resp(n * K);
    GmmParams out;
    out.K = K;
    out.seed = opts.seed;

    double prev_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t iter = 1; iter <= opts.max_iter; ++iter) {
        // E-step with log-sum-exp
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double maxlog = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < K; ++k) {
                double lg = std::log(comps[k].weight) +
                            log_gaussian(sorted_scores[i], comps[k].mean, comps[k].var);
                resp[i * K + k] = lg;
                maxlog = std::max(maxlog, lg);
            }
            double sum = 0.0;
            for (std::size_t k = 0; k < K; ++k) sum += std::exp(resp[i * K + k] - maxlog);
            double log_p = maxlog + std::log(sum);
            ll += log_p;
            for (std::size_t k = 0; k < K; ++k)
                resp[i * K + k] = std::exp(resp[i * K + k] - log_p);
        }
        out.loglik_trace.push_back(ll);
        out.iterations = iter;

        // M-step
        for (std::size_t k = 0; k < K; ++k) {
            double nk = 0.0, sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                nk += resp[i * K + k];
                sum += resp[i * K + k] * sorted_scores[i];
            }
            nk = std::max(nk, 1e-300);
            double mean = sum / nk;
            double ss = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double d = sorted_scores[i] - mean;
                ss += resp[i * K + k] * d * d;
            }
            comps[k].weight = nk / static_cast<double>(n);
            comps[k].mean = mean;
            comps[k].var = std::max(ss / nk, kVarianceFloor);
        }
        // renormalize weights against accumulated round-off
        double wsum = 0.0;
        for (auto& c : comps) wsum += c.weight;
        for (auto& c : comps) c.weight /= wsum;

        out.loglik = ll;
        if (std::isfinite(prev_ll) &&
            std::abs(ll - prev_ll) <= opts.tol * (std::abs(prev_ll) + 1e-12)) {
            out.converged = true;
            break;
        }
        prev_ll = ll;
    }

    std::sort(comps.begin(), comps.end(),
              [](const Component& a, const Component& b) { return a.mean < b.mean; });
    for (const auto& c : comps) {
        out.weights.push_back(c.weight);
        out.means.push_back(c.mean);
        out.stddevs.push_back(std::sqrt(c.var));
    }
    return out;
}

}  // namespace

double empirical_quantile(std::vector<double> xs, double q) {
    if (xs.empty()) throw TooFewPoints("quantile of empty data");
    std::sort(xs.begin(), xs.end());
    if (q <= 0.0) return xs.front();
    if (q >= 1.0) return xs.back();
    double h = static_cast<double>(xs.size() - 1) * q;
    std::size_t lo = static_cast<std::size_t>(h);
    double frac = h - static_cast<double>(lo);
    if (lo + 1 >= xs.size()) return xs.back();
    return xs[lo] + frac * (xs[lo + 1] - xs[lo]);
}

GmmParams fit_em(const std::vector<double>& scores, const FitOptions& opts) {
    if (opts.K < 1) throw ConfigInvalid("K must be >= 1");
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());

    std::size_t distinct = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i)
        if (i == 0 || sorted[i] != sorted[i - 1]) ++distinct;
    if (!sorted.empty() && distinct == 1) throw DegenerateData("all scores are equal");
    if (distinct < 2 * opts.K)
        throw TooFewPoints("need at least " + std::to_string(2 * opts.K) +
                           " distinct scores, got " + std::to_string(distinct));

    const std::size_t n = sorted.size();
    double mean_all = 0.0;
    for (double x : sorted) mean_all += x;
    mean_all /= static_cast<double>(n);
    double var_all = 0.0;
    for (double x : sorted) var_all += (x - mean_all) * (x - mean_all);
    var_all = std::max(var_all / static_cast<double>(n), kVarianceFloor);

    GmmParams best;
    bool have_best = false;
    for (std::size_t r = 0; r < std::max<std::size_t>(opts.restarts, 1); ++r) {
        std::vector<Component> comps(opts.K);
        for (std::size_t k = 0; k < opts.K; ++k) {
            double q = (static_cast<double>(k) + 0.5) / static_cast<double>(opts.K);
            comps[k].weight = 1.0 / static_cast<double>(opts.K);
            comps[k].mean = empirical_quantile(sorted, q);
            comps[k].var = var_all;
        }
        if (r > 0) {
            // seeded perturbation of the deterministic quantile init
            std::mt19937_64 rng(opts.seed + 0x9e3779b97f4a7c15ULL * r);
            double spread = std::sqrt(var_all);
            for (auto& c : comps) c.mean += (uniform01(rng) - 0.5) * spread;
        }
        GmmParams fit = run_em(sorted, comps, opts);
        if (!have_best || fit.loglik > best.loglik) {
            best = std::move(fit);
            have_best = true;
        }
    }
    best.scores_hash = scores_hash(scores);
    return best;
}

double gaussian_pdf(double x, double mean, double stddev) {
    double d = (x - mean) / stddev;
    return std::exp(-0.5 * d * d) / (stddev * std::sqrt(2.0 * std::numbers::pi));
}

double pdf_eval(const GmmParams& params, double s) {
    double p = 0.0;
    for (std::size_t k = 0; k < params.K; ++k)
        p += params.weights[k] * gaussian_pdf(s, params.means[k], params.stddevs[k]);
    return p;
}

std::vector<double> responsibilities(const GmmParams& params, double s) {
    // log-space Bayes rule; ZeroDensity only when every term underflows
    std::vector<double> logs(params.K);
    double maxlog = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < params.K; ++k) {
        double d = (s - params.means[k]) / params.stddevs[k];
        logs[k] = std::log(params.weights[k]) - 0.5 * d * d -
                  std::log(params.stddevs[k] * std::sqrt(2.0 * std::numbers::pi));
        maxlog = std::max(maxlog, logs[k]);
    }
    if (!std::isfinite(maxlog)) throw ZeroDensity("mixture density is zero at s");
    double sum = 0.0;
    for (double& l : logs) {
        l = std::exp(l - maxlog);
        sum += l;
    }
    for (double& l : logs) l /= sum;
    return logs;
}

std::string params_hash(const GmmParams& params) {
    return sha256_hex(dump_canonical(params.to_json()));
}

std::string scores_hash(const std::vector<double>& scores) {
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    std::string buf;
    buf.reserve(sorted.size() * 13);
    for (double x : sorted) {
        buf += format_sig12(x);
        buf += '\n';
    }
    return sha256_hex(buf);
}

void validate_rule(const BoundaryRule& rule) {
    if (const auto* q = std::get_if<Quantile>(&rule)) {
        if (!(q->q_low > 0.0 && q->q_low < 1.0 && q->q_high > 0.0 && q->q_high < 1.0 &&
              q->q_low < q->q_high))
            throw ConfigInvalid("quantile rule requires 0 < q_low < q_high < 1");
    } else if (const auto* m = std::get_if<Manual>(&rule)) {
        if (!(m->lower >= 0.0 && m->lower <= m->upper && m->upper <= 1.0))
            throw ConfigInvalid("manual rule requires 0 <= lower <= upper <= 1");
    } else if (const auto* p = std::get_if<PosteriorOdds>(&rule)) {
        if (!(p->tau >= 1.0)) throw ConfigInvalid("posterior-odds rule requires tau >= 1");
    }
}

std::string rule_name(const BoundaryRule& rule) {
    if (std::holds_alternative<TwoSigmaOverlap>(rule)) return "two-sigma";
    if (std::holds_alternative<Quantile>(rule)) return "quantile";
    if (std::holds_alternative<Manual>(rule)) return "manual";
    return "posterior";
}

nlohmann::json rule_to_json(const BoundaryRule& rule) {
    nlohmann::json j;
    j["name"] = rule_name(rule);
    if (const auto* q = std::get_if<Quantile>(&rule)) {
        j["q_low"] = q->q_low;
        j["q_high"] = q->q_high;
    } else if (const auto* m = std::get_if<Manual>(&rule)) {
        j["lower"] = m->lower;
        j["upper"] = m->upper;
    } else if (const auto* p = std::get_if<PosteriorOdds>(&rule)) {
        j["tau"] = p->tau;
    }
    return j;
}

BoundaryRule rule_from_json(const nlohmann::json& j) {
    std::string name = j.at("name").get<std::string>();
    BoundaryRule rule;
    if (name == "two-sigma")
        rule = TwoSigmaOverlap{};
    else if (name == "quantile")
        rule = Quantile{j.at("q_low").get<double>(), j.at("q_high").get<double>()};
    else if (name == "manual")
        rule = Manual{j.at("lower").get<double>(), j.at("upper").get<double>()};
    else if (name == "posterior")
        rule = PosteriorOdds{j.at("tau").get<double>()};
    else
        throw ConfigInvalid("unknown boundary rule: " + name);
    validate_rule(rule);
    return rule;
}

BoundaryRule parse_rule_spec(const std::string& spec) {
    std::vector<std::string> parts;
    std::istringstream in(spec);
    std::string part;
    while (std::getline(in, part, ':')) parts.push_back(part);
    if (parts.empty()) throw ConfigInvalid("empty rule spec");
    BoundaryRule rule;
    try {
        if (parts[0] == "two-sigma" && parts.size() == 1)
            rule = TwoSigmaOverlap{};
        else if (parts[0] == "quantile" && parts.size() == 3)
            rule = Quantile{std::stod(parts[1]), std::stod(parts[2])};
        else if (parts[0] == "manual" && parts.size() == 3)
            rule = Manual{std::stod(parts[1]), std::stod(parts[2])};
        else if (parts[0] == "posterior" && parts.size() == 2)
            rule = PosteriorOdds{std::stod(parts[1])};
        else
            throw ConfigInvalid("bad rule spec: " + spec);
    } catch (const std::invalid_argument&) {
        throw ConfigInvalid("bad rule spec: " + spec);
    }
    validate_rule(rule);
    return rule;
}

namespace {

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// log posterior-odds of the highest- vs lowest-mean component
double log_odds_high_low(const GmmParams& p, double s) {
    std::size_t lo = 0, hi = p.K - 1;
    auto term = [&](std::size_t k) {
        double d = (s - p.means[k]) / p.stddevs[k];
        return std::log(p.weights[k]) - 0.5 * d * d - std::log(p.stddevs[k]);
    };
    return term(hi) - term(lo);
}

// smallest s in [0,1] with log_odds >= target (odds treated as monotone in s)
double bisect_odds_threshold(const GmmParams& p, double target) {
    double f0 = log_odds_high_low(p, 0.0);
    double f1 = log_odds_high_low(p, 1.0);
    if (f0 >= target) return 0.0;
    if (f1 < target) return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (log_odds_high_low(p, mid) >= target)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

// point of equal posterior between the lowest- and highest-mean components
double equal_posterior_point(const GmmParams& p, double bracket_lo, double bracket_hi) {
    auto f = [&](double s) { return log_odds_high_low(p, s); };
    double lo = bracket_lo, hi = bracket_hi;
    if (!(f(lo) <= 0.0 && f(hi) >= 0.0)) {
        // widen to the component means
        lo = p.means.front();
        hi = p.means.back();
        if (!(f(lo) <= 0.0 && f(hi) >= 0.0)) return clamp01(0.5 * (lo + hi));
    }
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (f(mid) >= 0.0)
            hi = mid;
        else
            lo = mid;
    }
    return clamp01(0.5 * (lo + hi));
}

}  // namespace

Cutoffs derive_cutoffs(const GmmParams& params, const std::vector<double>& scores,
                       const BoundaryRule& rule) {
    validate_rule(rule);
    const bool needs_two = std::holds_alternative<TwoSigmaOverlap>(rule) ||
                           std::holds_alternative<PosteriorOdds>(rule);
    if (needs_two && params.K < 2)
        throw RuleRequiresTwoComponents(rule_name(rule) + " needs K >= 2");
    if (!std::holds_alternative<Manual>(rule) && !params.scores_hash.empty()) {
        if (params.scores_hash != scores_hash(scores))
            throw HashMismatch("cutoff scores differ from the fitted data");
    }

    Cutoffs cuts;
    cuts.rule = rule;
    cuts.params_hash = params_hash(params);

    if (std::holds_alternative<TwoSigmaOverlap>(rule)) {
        std::size_t lo_k = 0, hi_k = params.K - 1;
        double lower = clamp01(params.means[hi_k] - 2.0 * params.stddevs[hi_k]);
        double upper = clamp01(params.means[lo_k] + 2.0 * params.stddevs[lo_k]);
        if (lower > upper) {
            double collapse = equal_posterior_point(params, upper, lower);
            lower = upper = collapse;  // middle bin collapses
        }
        cuts.lower = lower;
        cuts.upper = upper;
    } else if (const auto* q = std::get_if<Quantile>(&rule)) {
        if (scores.empty()) throw TooFewPoints("quantile rule needs scores");
        cuts.lower = clamp01(empirical_quantile(scores, q->q_low));
        cuts.upper = clamp01(empirical_quantile(scores, q->q_high));
        if (cuts.lower > cuts.upper) std::swap(cuts.lower, cuts.upper);
    } else if (const auto* m = std::get_if<Manual>(&rule)) {
        cuts.lower = m->lower;
        cuts.upper = m->upper;
    } else {
        const auto& p = std::get<PosteriorOdds>(rule);
        double lower = bisect_odds_threshold(params, -std::log(p.tau));
        double upper = bisect_odds_threshold(params, std::log(p.tau));
        cuts.lower = std::min(lower, upper);
        cuts.upper = std::max(lower, upper);
    }
    return cuts;
}

std::vector<double> sample(const GmmParams& params, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double u = uniform01(rng);
        std::size_t k = 0;
        double acc = 0.0;
        for (; k < params.K; ++k) {
            acc += params.weights[k];
            if (u < acc) break;
        }
        if (k >= params.K) k = params.K - 1;
        double x = params.means[k] + params.stddevs[k] * gaussian_draw(rng);
        out.push_back(std::clamp(x, 0.0, 1.0));
    }
    return out;
}

Histogram histogram(const std::vector<double>& scores, std::size_t bins) {
    if (bins < 1) throw ConfigInvalid("bins must be >= 1");
    Histogram h;
    h.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i)
        h.edges[i] = static_cast<double>(i) / static_cast<double>(bins);
    h.counts.assign(bins, 0);
    for (double s : scores) {
        double clamped = std::clamp(s, 0.0, 1.0);
        std::size_t idx = static_cast<std::size_t>(clamped * static_cast<double>(bins));
        if (idx >= bins) idx = bins - 1;  // right edge inclusive in last bin
        ++h.counts[idx];
    }
    return h;
}

std::string pdf_curve_csv(const GmmParams& params) {
    std::string out = "s,p(s)\n";
    for (int i = 0; i < 512; ++i) {
        double s = static_cast<double>(i) / 511.0;
        out += format_sig12(s);
        out += ',';
        out += format_sig12(pdf_eval(params, s));
        out += '\n';
    }
    return out;
}

nlohmann::json GmmParams::to_json() const {
    nlohmann::json j;
    j["K"] = K;
    j["weights"] = weights;
    j["means"] = means;
    j["stddevs"] = stddevs;
    j["loglik"] = loglik;
    j["iterations"] = iterations;
    j["converged"] = converged;
    j["seed"] = seed;
    j["scores_hash"] = scores_hash;
    return j;
}

GmmParams GmmParams::from_json(const nlohmann::json& j) {
    GmmParams p;
    p.K = j.at("K").get<std::size_t>();
    p.weights = j.at("weights").get<std::vector<double>>();
    p.means = j.at("means").get<std::vector<double>>();
    p.stddevs = j.at("stddevs").get<std::vector<double>>();
    p.loglik = j.at("loglik").get<double>();
    p.iterations = j.at("iterations").get<std::size_t>();
    p.converged = j.at("converged").get<bool>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.scores_hash = j.value("scores_hash", "");
    return p;
}

nlohmann::json Cutoffs::to_json() const {
    nlohmann::json j;
    j["lower"] = lower;
    j["upper"] = upper;
    j["rule"] = rule_to_json(rule);
    j["params_hash"] = params_hash;
    return j;
}

Cutoffs Cutoffs::from_json(const nlohmann::json& j) {
    Cutoffs c;
    c.lower = j.at("lower").get<double>();
    c.upper = j.at("upper").get<double>();
    c.rule = rule_from_json(j.at("rule"));
    c.params_hash = j.at("params_hash").get<std::string>();
    return c;
}

}  // namespace lprisma
