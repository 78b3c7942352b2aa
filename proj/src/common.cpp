#include "ck/common.hpp"

#include <cctype>
#include <cstdio>

namespace ck {

const char* err_name(Err e) {
    switch (e) {
        case Err::EmptyDomain: return "EmptyDomain";
        case Err::DuplicateName: return "DuplicateName";
        case Err::BadBinning: return "BadBinning";
        case Err::UnresolvedRef: return "UnresolvedRef";
        case Err::KindMismatch: return "KindMismatch";
        case Err::UnknownType: return "UnknownType";
        case Err::ValidationFailed: return "ValidationFailed";
        case Err::IdConflict: return "IdConflict";
        case Err::NonCanonicalRule: return "NonCanonicalRule";
        case Err::ChainMismatch: return "ChainMismatch";
        case Err::PremiseMismatch: return "PremiseMismatch";
        case Err::ConclusionMismatch: return "ConclusionMismatch";
        case Err::DegenerateHypothesis: return "DegenerateHypothesis";
        case Err::UnknownTarget: return "UnknownTarget";
        case Err::NonConvergence: return "NonConvergence";
        case Err::EmptyConceptSet: return "EmptyConceptSet";
        case Err::EmptyCandidates: return "EmptyCandidates";
        case Err::UnknownGoal: return "UnknownGoal";
        case Err::InvalidStatus: return "InvalidStatus";
        case Err::RewardOutOfRange: return "RewardOutOfRange";
        case Err::NoApplicableFunction: return "NoApplicableFunction";
        case Err::BadMix: return "BadMix";
        case Err::UnknownTag: return "UnknownTag";
        case Err::BadLiteral: return "BadLiteral";
        case Err::IoFailure: return "IoFailure";
        case Err::CorruptStore: return "CorruptStore";
        case Err::StoreLocked: return "StoreLocked";
        case Err::UsageError: return "UsageError";
    }
    return "UnknownError";
}

std::string Literal::str() const {
    std::string out;
    if (negated) out += '!';
    out += classifier;
    out += '=';
    out += category;
    return out;
}

Literal Literal::parse(std::string_view text) {
    std::string t = trim(text);
    Literal lit;
    if (!t.empty() && t.front() == '!') {
        lit.negated = true;
        t.erase(t.begin());
    }
    auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == t.size())
        raise(Err::BadLiteral, "expected classifier=category, got '" + std::string(text) + "'");
    lit.classifier = trim(t.substr(0, eq));
    lit.category = trim(t.substr(eq + 1));
    return lit;
}

std::vector<Literal> parse_literals(std::string_view text) {
    std::vector<Literal> out;
    for (const auto& part : split(text, ',')) {
        if (trim(part).empty()) continue;
        out.push_back(Literal::parse(part));
    }
    return out;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(text.substr(start));
            break;
        }
        out.emplace_back(text.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string trim(std::string_view text) {
    std::size_t b = 0, e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    return std::string(text.substr(b, e - b));
}

std::string fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    return buf;
}

}  // namespace ck
