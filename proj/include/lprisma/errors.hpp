#pragma once

#include <stdexcept>
#include <string>

namespace lprisma {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// records
struct UnknownFormat : Error { using Error::Error; };
struct MalformedInput : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };

// embed
struct EmptyText : Error { using Error::Error; };
struct HttpError : Error {
    int status;
    HttpError(int status_, const std::string& excerpt)
        : Error("http error " + std::to_string(status_) + ": " + excerpt), status(status_) {}
};
struct DimensionMismatch : Error { using Error::Error; };
struct ZeroVector : Error { using Error::Error; };
struct OutOfRangeInput : Error { using Error::Error; };

// mixture
struct TooFewPoints : Error { using Error::Error; };
struct DegenerateData : Error { using Error::Error; };
struct ZeroDensity : Error { using Error::Error; };
struct RuleRequiresTwoComponents : Error { using Error::Error; };
struct HashMismatch : Error { using Error::Error; };

// triage
struct EmptyScores : Error { using Error::Error; };
struct UnknownRecord : Error { using Error::Error; };
struct EmptyReason : Error { using Error::Error; };

// flow
struct ReconciliationError : Error {
    std::string stage;
    long long expected;
    long long actual;
    ReconciliationError(std::string stage_, long long expected_, long long actual_)
        : Error("reconciliation failed at " + stage_ + ": expected " + std::to_string(expected_) +
                ", got " + std::to_string(actual_)),
          stage(std::move(stage_)), expected(expected_), actual(actual_) {}
};
struct UnreconciledCounts : Error { using Error::Error; };

// screenai
struct UnknownTemplate : Error { using Error::Error; };
struct Timeout : Error { using Error::Error; };
struct RateLimited : Error { using Error::Error; };

// manifest / pipeline
struct MissingStage : Error { using Error::Error; };
struct MissingPrerequisite : Error { using Error::Error; };
struct ConfigInvalid : Error { using Error::Error; };

}  // namespace lprisma
