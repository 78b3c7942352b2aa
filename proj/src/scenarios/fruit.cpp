#include <algorithm>
#include <sstream>

#include "ck/scenarios.hpp"

namespace ck {

namespace {
constexpr const char* OBJECT_CLASSIFIER = "object";
}

FruitReport run_fruit_demo(const Cdb& db, const std::set<Literal>& context) {
    auto forecasts = rank(predict(db, context, OBJECT_CLASSIFIER), RankMode::Combined);

    // which context literals back which hypothesis
    std::map<Id, std::set<Literal>> evidence;
    for (const auto& rule : db.all_rules()) {
        if (rule.conclusion.classifier != OBJECT_CLASSIFIER || rule.conclusion.negated) continue;
        if (!rule.fires_on(context)) continue;
        for (const auto& clause : rule.premise)
            for (const auto& lit : clause)
                if (context.count(lit)) evidence[rule.conclusion.category].insert(lit);
    }

    FruitReport report;
    for (const auto& f : forecasts) {
        FruitHypothesis h;
        h.category = f.target.category;
        h.p_hat = f.p_hat;
        h.p_value = f.p_value;
        h.score = combined_score(f);
        h.prior_only = f.prior_only();
        const auto& own = evidence[h.category];
        h.supporting.assign(own.begin(), own.end());
        std::set<Literal> against;
        for (const auto& [other, lits] : evidence) {
            if (other == h.category) continue;
            for (const auto& lit : lits)
                if (!own.count(lit)) against.insert(lit);
        }
        h.contradicting.assign(against.begin(), against.end());
        report.ranking.push_back(std::move(h));
    }
    return report;
}

std::string FruitReport::render() const {
    std::ostringstream os;
    os << "hypothesis        p_hat   p_value  score   evidence\n";
    for (const auto& h : ranking) {
        std::string name = h.category;
        name.resize(16, ' ');
        os << name << "  " << fixed(h.p_hat, 4) << "  " << fixed(h.p_value, 4) << "  "
           << fixed(h.score, 4) << "  ";
        if (h.prior_only) {
            os << "(prior only)";
        } else {
            os << "for:";
            for (const auto& lit : h.supporting) os << " " << lit.str();
            if (!h.contradicting.empty()) {
                os << "  against:";
                for (const auto& lit : h.contradicting) os << " " << lit.str();
            }
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace ck
