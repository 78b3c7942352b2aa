// Shared primitives for the cognitive kernel: identifiers, literals,
// error codes, hashing and small string helpers.
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace ck {

using Id = std::string;
using Timestamp = std::int64_t;

// ---------------------------------------------------------------------------
// Errors

enum class Err {
    EmptyDomain,
    DuplicateName,
    BadBinning,
    UnresolvedRef,
    KindMismatch,
    UnknownType,
    ValidationFailed,
    IdConflict,
    NonCanonicalRule,
    ChainMismatch,
    PremiseMismatch,
    ConclusionMismatch,
    DegenerateHypothesis,
    UnknownTarget,
    NonConvergence,
    EmptyConceptSet,
    EmptyCandidates,
    UnknownGoal,
    InvalidStatus,
    RewardOutOfRange,
    NoApplicableFunction,
    BadMix,
    UnknownTag,
    BadLiteral,
    IoFailure,
    CorruptStore,
    StoreLocked,
    UsageError,
};

const char* err_name(Err e);

// Domain error carrying a stable code; the CLI maps these to exit code 1
// and prints the code name in the message.
class Error : public std::runtime_error {
public:
    Error(Err code, const std::string& message)
        : std::runtime_error(std::string(err_name(code)) + ": " + message), code_(code) {}
    Err code() const { return code_; }

private:
    Err code_;
};

[[noreturn]] inline void raise(Err code, const std::string& message) {
    throw Error(code, message);
}

// ---------------------------------------------------------------------------
// Literal: one signed classifier=category condition.

struct Literal {
    Id classifier;
    Id category;
    bool negated = false;

    bool operator==(const Literal&) const = default;
    // Canonical order: (classifier, category, polarity), positive first.
    bool operator<(const Literal& o) const {
        return std::tie(classifier, category, negated) <
               std::tie(o.classifier, o.category, o.negated);
    }

    Literal negation() const { return {classifier, category, !negated}; }

    // "shape=round" or "!shape=round"
    std::string str() const;
    static Literal parse(std::string_view text);
};

// Comma-separated literal list, e.g. "shape=round, !weight=heavy".
std::vector<Literal> parse_literals(std::string_view text);

// ---------------------------------------------------------------------------
// Hashing (FNV-1a 64) — used for content-derived ids and file checksums.

constexpr std::uint64_t FNV_OFFSET = 1469598103934665603ULL;
constexpr std::uint64_t FNV_PRIME = 1099511628211ULL;

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = FNV_OFFSET) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= FNV_PRIME;
    }
    return h;
}

std::string hex64(std::uint64_t value);

// ---------------------------------------------------------------------------
// Small string utilities shared by the schema parser and the CLI.

std::vector<std::string> split(std::string_view text, char sep);
std::string trim(std::string_view text);

// Fixed-decimal formatting ("%.4f" etc.) for canonical text output.
std::string fixed(double value, int decimals);

}  // namespace ck
