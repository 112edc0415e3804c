#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace lprisma {

struct GmmParams {
    std::size_t K = 2;
    std::vector<double> weights;   // sum to 1
    std::vector<double> means;     // sorted ascending; index 0 = low-relevance
    std::vector<double> stddevs;   // each >= sqrt(variance floor)
    double loglik = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    std::uint64_t seed = 0;
    std::string scores_hash;            // hash of the sorted fitting data
    std::vector<double> loglik_trace;   // per-iteration log-likelihood (not serialized)

    nlohmann::json to_json() const;
    static GmmParams from_json(const nlohmann::json& j);
};

// Hash binding Cutoffs to the GmmParams they were derived from.
std::string params_hash(const GmmParams& params);

// Hash of a score list (order-normalized by sorting).
std::string scores_hash(const std::vector<double>& scores);

struct TwoSigmaOverlap {};
struct Quantile {
    double q_low;
    double q_high;
};
struct Manual {
    double lower;
    double upper;
};
struct PosteriorOdds {
    double tau;
};

using BoundaryRule = std::variant<TwoSigmaOverlap, Quantile, Manual, PosteriorOdds>;

void validate_rule(const BoundaryRule& rule);  // throws ConfigInvalid on bad parameters
std::string rule_name(const BoundaryRule& rule);
nlohmann::json rule_to_json(const BoundaryRule& rule);
BoundaryRule rule_from_json(const nlohmann::json& j);
// CLI syntax: "two-sigma" | "quantile:ql:qh" | "manual:lo:hi" | "posterior:tau"
BoundaryRule parse_rule_spec(const std::string& spec);

struct Cutoffs {
    double lower = 0.0;
    double upper = 1.0;
    BoundaryRule rule = TwoSigmaOverlap{};
    std::string params_hash;

    nlohmann::json to_json() const;
    static Cutoffs from_json(const nlohmann::json& j);
};

struct FitOptions {
    std::size_t K = 2;
    double tol = 1e-8;          // relative log-likelihood change
    std::size_t max_iter = 500;
    std::size_t restarts = 1;   // 1 deterministic quantile init + (restarts-1) perturbations
    std::uint64_t seed = 0;
};

// EM fit of a 1-D Gaussian mixture. Initialization: means at the (i+0.5)/K
// sample quantiles, equal weights, pooled sample standard deviation. Variance
// floor 1e-6 applied each M-step. Best restart chosen by (loglik, restart
// index). Components returned sorted ascending by mean.
GmmParams fit_em(const std::vector<double>& scores, const FitOptions& opts = {});

double gaussian_pdf(double x, double mean, double stddev);
double pdf_eval(const GmmParams& params, double s);
std::vector<double> responsibilities(const GmmParams& params, double s);

Cutoffs derive_cutoffs(const GmmParams& params, const std::vector<double>& scores,
                       const BoundaryRule& rule);

// Seed-deterministic sampler (component choice by weight, then a Box-Muller
// Gaussian draw), clamped to [0,1].
std::vector<double> sample(const GmmParams& params, std::size_t n, std::uint64_t seed);

struct Histogram {
    std::vector<double> edges;       // bins+1 edges over [0,1]
    std::vector<std::uint64_t> counts;
};

// Equal-width bins over [0,1]; half-open bins, right edge inclusive in the last.
Histogram histogram(const std::vector<double>& scores, std::size_t bins);

// Type-7 (linear interpolation) empirical quantile of a sorted copy of xs.
double empirical_quantile(std::vector<double> xs, double q);

// PDF-curve export: CSV "s,p(s)" at 512 evenly spaced points in [0,1].
std::string pdf_curve_csv(const GmmParams& params);

}  // namespace lprisma
