#include "ck/lpi.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <map>

namespace ck {

// ---------------------------------------------------------------------------
// Rule operations

namespace {

void require_disjoint(const std::vector<std::vector<Literal>>& premise, const Literal& conclusion) {
    for (const auto& clause : premise)
        for (const auto& lit : clause)
            if (lit.classifier == conclusion.classifier)
                raise(Err::DegenerateHypothesis, "conclusion classifier '" + conclusion.classifier +
                                                     "' appears in the hypothesis premise");
}

Rule finish(Rule rule) {
    rule = canonicalized(std::move(rule));
    rule.id = rule_content_id(rule);
    check_rule(rule);
    return rule;
}

// The sole literal of a rule whose premise is a single one-literal clause.
std::optional<Literal> atomic_premise(const Rule& rule) {
    if (rule.premise.size() == 1 && rule.premise[0].size() == 1) return rule.premise[0][0];
    return std::nullopt;
}

}  // namespace

Rule deduce(const Rule& r_ab, const Rule& r_bc) {
    const Literal& mid = r_ab.conclusion;
    bool chained = false;
    for (const auto& clause : r_bc.premise)
        if (clause.size() == 1 && clause[0] == mid) {
            chained = true;
            break;
        }
    if (!chained)
        raise(Err::ChainMismatch, "conclusion '" + mid.str() +
                                      "' is not a sole premise literal of the second rule");
    require_disjoint(r_ab.premise, r_bc.conclusion);

    double p = r_ab.truth.p_hat() * r_bc.truth.p_hat();
    double w = std::min(r_ab.truth.w, r_bc.truth.w) * p;

    Rule out;
    out.premise = r_ab.premise;
    out.conclusion = r_bc.conclusion;
    out.truth = from_p_hat(p, w);
    out.p_value = std::max(r_ab.p_value, r_bc.p_value);
    out.provenance = Provenance::Deduced;
    return finish(std::move(out));
}

Rule induce(const Rule& r_ab, const Rule& r_ac, const InferenceParams& params) {
    if (canonicalized(r_ab).premise != canonicalized(r_ac).premise)
        raise(Err::PremiseMismatch, "induction requires identical premises");
    const Literal& b = r_ab.conclusion;
    const Literal& c = r_ac.conclusion;
    if (b.classifier == c.classifier)
        raise(Err::DegenerateHypothesis, "hypothesis would relate '" + b.classifier +
                                             "' to itself");

    double p = r_ac.truth.p_hat();
    double w = params.eta * r_ab.truth.p_hat() * std::min(r_ab.truth.w, r_ac.truth.w);

    Rule out;
    out.premise = {{b}};
    out.conclusion = c;
    out.truth = {p * w, w};
    out.p_value = std::max(r_ab.p_value, r_ac.p_value);
    out.provenance = Provenance::Induced;
    return finish(std::move(out));
}

Rule abduce(const Rule& r_ac, const Rule& r_bc, const InferenceParams& params) {
    if (!(r_ac.conclusion == r_bc.conclusion))
        raise(Err::ConclusionMismatch, "abduction requires identical conclusions");
    auto b = atomic_premise(r_bc);
    if (!b)
        raise(Err::DegenerateHypothesis,
              "the second rule's premise must be a single literal to become a conclusion");
    require_disjoint(r_ac.premise, *b);

    double p = r_ac.truth.p_hat();
    double w = params.eta * r_bc.truth.p_hat() * std::min(r_ac.truth.w, r_bc.truth.w);

    Rule out;
    out.premise = r_ac.premise;
    out.conclusion = *b;
    out.truth = {p * w, w};
    out.p_value = std::max(r_ac.p_value, r_bc.p_value);
    out.provenance = Provenance::Abduced;
    return finish(std::move(out));
}

// ---------------------------------------------------------------------------
// Mining

namespace {

// Row bitset helpers over N transactions.
struct Bits {
    std::vector<std::uint64_t> words;

    explicit Bits(std::size_t n = 0) : words((n + 63) / 64, 0) {}
    void set(std::size_t i) { words[i >> 6] |= std::uint64_t(1) << (i & 63); }

    long long count() const {
        long long c = 0;
        for (auto w : words) c += std::popcount(w);
        return c;
    }
    Bits and_with(const Bits& o) const {
        Bits out;
        out.words.resize(words.size());
        for (std::size_t i = 0; i < words.size(); ++i) out.words[i] = words[i] & o.words[i];
        return out;
    }
    long long and_count(const Bits& o) const {
        long long c = 0;
        for (std::size_t i = 0; i < words.size(); ++i) c += std::popcount(words[i] & o.words[i]);
        return c;
    }
};

struct ConclusionStat {
    long long w = 0;      // rows satisfying the premise, conclusion decidable
    long long w_pos = 0;  // of those, rows also satisfying the conclusion
    bool applicable = false;
};

}  // namespace

TransactionSet transactions_from_records(const std::vector<ObjectRecord>& records,
                                         const Schema& schema) {
    TransactionSet out;
    for (const auto& rec : records) {
        out.object_ids.push_back(rec.id);
        out.rows.push_back(rec.literals(schema));
    }
    return out;
}

std::vector<Rule> mine_rules_core(const TransactionSet& transactions,
                                  const std::vector<Literal>& premise_atoms,
                                  const std::vector<Literal>& conclusions,
                                  const MineParams& params) {
    const std::size_t n_rows = transactions.rows.size();

    std::vector<Literal> atoms = premise_atoms;
    std::sort(atoms.begin(), atoms.end());
    atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
    std::vector<Literal> targets = conclusions;
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

    // incidence bitsets per atom and per conclusion literal (both polarities)
    std::map<Literal, Bits> incidence;
    auto ensure = [&](const Literal& lit) -> Bits& {
        auto it = incidence.find(lit);
        if (it == incidence.end()) it = incidence.emplace(lit, Bits(n_rows)).first;
        return it->second;
    };
    for (const auto& a : atoms) ensure(a);
    for (const auto& t : targets) {
        ensure(t);
        ensure(t.negation());
    }
    for (std::size_t r = 0; r < n_rows; ++r)
        for (const auto& lit : transactions.rows[r]) {
            auto it = incidence.find(lit);
            if (it != incidence.end()) it->second.set(r);
        }

    // decidable-universe bitset and base stats per conclusion
    std::vector<Bits> known(targets.size());
    std::vector<ConclusionStat> base(targets.size());
    for (std::size_t t = 0; t < targets.size(); ++t) {
        known[t] = incidence.at(targets[t]).and_with(incidence.at(targets[t]));  // copy
        const Bits& neg = incidence.at(targets[t].negation());
        for (std::size_t i = 0; i < known[t].words.size(); ++i) known[t].words[i] |= neg.words[i];
        base[t].w = known[t].count();
        base[t].w_pos = incidence.at(targets[t]).count();
        base[t].applicable = true;
    }

    // breadth-first premise search with support pruning
    using Premise = std::vector<int>;  // sorted atom indices
    struct Node {
        Premise premise;
        Bits rows;
    };
    std::map<Premise, std::vector<ConclusionStat>> stats;

    auto evaluate = [&](const Premise& premise, const Bits& rows) {
        std::vector<ConclusionStat> st(targets.size());
        for (std::size_t t = 0; t < targets.size(); ++t) {
            bool clash = false;
            for (int ai : premise)
                if (atoms[static_cast<std::size_t>(ai)].classifier == targets[t].classifier) {
                    clash = true;
                    break;
                }
            if (clash) continue;
            st[t].applicable = true;
            st[t].w = rows.and_count(known[t]);
            st[t].w_pos = rows.and_count(incidence.at(targets[t]));
        }
        stats.emplace(premise, std::move(st));
    };

    std::vector<Node> frontier;
    Bits all(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) all.set(i);
    for (int ai = 0; ai < static_cast<int>(atoms.size()); ++ai) {
        Bits rows = all.and_with(incidence.at(atoms[static_cast<std::size_t>(ai)]));
        if (static_cast<double>(rows.count()) < params.w_min) continue;
        Premise p{ai};
        evaluate(p, rows);
        frontier.push_back({std::move(p), std::move(rows)});
    }
    for (int depth = 2; depth <= params.max_premise; ++depth) {
        std::vector<Node> next;
        for (const auto& node : frontier) {
            for (int ai = node.premise.back() + 1; ai < static_cast<int>(atoms.size()); ++ai) {
                Bits rows = node.rows.and_with(incidence.at(atoms[static_cast<std::size_t>(ai)]));
                if (static_cast<double>(rows.count()) < params.w_min) continue;
                Premise p = node.premise;
                p.push_back(ai);
                evaluate(p, rows);
                next.push_back({std::move(p), std::move(rows)});
            }
        }
        frontier = std::move(next);
    }

    // candidate filtering: support, strict probability increase, significance
    struct Candidate {
        Premise premise;
        std::size_t target;
        long long w, w_pos;
        double p_value;
        bool increases;
    };
    std::vector<Candidate> candidates;
    std::vector<long long> tests(targets.size(), 0);

    for (const auto& [premise, st] : stats) {
        for (std::size_t t = 0; t < targets.size(); ++t) {
            if (!st[t].applicable) continue;
            if (static_cast<double>(st[t].w) < params.w_min) continue;
            ++tests[t];

            double f = static_cast<double>(st[t].w_pos) / static_cast<double>(st[t].w);
            bool increases = true;
            // every proper sub-premise, including the empty one (base rate)
            const std::size_t m = premise.size();
            for (std::uint32_t mask = 0; mask + 1 < (1u << m) && increases; ++mask) {
                const ConclusionStat* sub;
                if (mask == 0) {
                    sub = &base[t];
                } else {
                    Premise sub_premise;
                    for (std::size_t i = 0; i < m; ++i)
                        if (mask & (1u << i)) sub_premise.push_back(premise[i]);
                    auto it = stats.find(sub_premise);
                    if (it == stats.end()) {
                        increases = false;  // unseen subset cannot be audited
                        break;
                    }
                    sub = &it->second[t];
                }
                double f_sub = sub->w > 0
                                   ? static_cast<double>(sub->w_pos) / static_cast<double>(sub->w)
                                   : 0.0;
                if (!(f > f_sub)) increases = false;
            }

            long long a = st[t].w_pos;
            long long b = st[t].w - st[t].w_pos;
            long long c = base[t].w_pos - st[t].w_pos;
            long long d = base[t].w - st[t].w - c;
            double p = fisher_exact(a, b, c, d, FisherSided::Right);
            candidates.push_back({premise, t, st[t].w, st[t].w_pos, p, increases});
        }
    }

    std::vector<Rule> out;
    for (const auto& cand : candidates) {
        if (!cand.increases) continue;
        double threshold = params.alpha;
        if (params.bonferroni && tests[cand.target] > 0)
            threshold /= static_cast<double>(tests[cand.target]);
        if (cand.p_value > threshold) continue;

        Rule rule;
        for (int ai : cand.premise)
            rule.premise.push_back({atoms[static_cast<std::size_t>(ai)]});
        rule.conclusion = targets[cand.target];
        rule.truth = TruthValue::counts(static_cast<double>(cand.w_pos),
                                        static_cast<double>(cand.w));
        rule.p_value = std::max(cand.p_value, std::numeric_limits<double>::min());
        rule.provenance = Provenance::Mined;
        rule = canonicalized(std::move(rule));
        rule.id = rule_content_id(rule);
        out.push_back(std::move(rule));
    }

    std::sort(out.begin(), out.end(), [](const Rule& a, const Rule& b) {
        if (!(a.conclusion == b.conclusion)) return a.conclusion < b.conclusion;
        if (a.premise_size() != b.premise_size()) return a.premise_size() < b.premise_size();
        return a.id < b.id;
    });
    return out;
}

std::vector<Rule> mine_rules(const Cdb& db, const std::vector<Id>& targets,
                             const MineParams& params, const std::optional<Id>& record_type) {
    const Schema& schema = db.schema();
    for (const auto& t : targets)
        if (!schema.find_classifier(t))
            raise(Err::UnknownTarget, "target classifier '" + t + "' is not defined");

    RecordFilter filter;
    filter.type = record_type;
    TransactionSet transactions = transactions_from_records(db.query_records(filter), schema);

    std::vector<Literal> atoms;
    for (const auto& cid : schema.classifier_order()) {
        const auto& c = schema.classifier(cid);
        for (const auto& cat : c.categories) {
            atoms.push_back({cid, cat.id, false});
            if (params.negative_premises) atoms.push_back({cid, cat.id, true});
        }
    }
    std::vector<Literal> conclusions;
    for (const auto& t : targets)
        for (const auto& cat : schema.classifier(t).categories)
            conclusions.push_back({t, cat.id, false});

    return mine_rules_core(transactions, atoms, conclusions, params);
}

// ---------------------------------------------------------------------------
// Prediction

std::vector<Forecast> predict(const Cdb& db, const std::set<Literal>& context, const Id& target) {
    const Schema& schema = db.schema();
    const ClassifierDef* cls = schema.find_classifier(target);
    if (!cls) raise(Err::UnknownTarget, "target classifier '" + target + "' is not defined");
    for (const auto& lit : context) schema.require_literal(lit);

    // base rates over the object base for prior-only fallbacks
    std::map<Id, long long> counts;
    long long known_total = 0;
    {
        RecordFilter any;
        for (const auto& rec : db.query_records(any)) {
            auto it = rec.attrs.find(target);
            if (it == rec.attrs.end()) continue;
            ++counts[it->second];
            ++known_total;
        }
    }

    std::vector<Forecast> out;
    std::vector<Literal> ctx(context.begin(), context.end());
    for (const auto& cat : cls->categories) {
        Forecast f;
        f.target = {target, cat.id, false};
        f.context = ctx;

        for (const auto& rule : db.all_rules()) {  // id order
            if (!(rule.conclusion == f.target)) continue;
            if (!rule.fires_on(context)) continue;
            f.pooled = revise(f.pooled, rule.truth);
            f.p_value = std::min(f.p_value, rule.p_value);
            f.support.push_back(rule.id);
        }
        if (f.support.empty()) {
            f.p_hat = static_cast<double>(counts[cat.id] + 1) /
                      static_cast<double>(known_total + static_cast<long long>(cls->categories.size()));
            f.p_value = 1.0;
        } else {
            f.p_hat = f.pooled.p_hat();
        }
        out.push_back(std::move(f));
    }
    return out;
}

double combined_score(const Forecast& f) { return f.p_hat * (1.0 - f.p_value); }

std::vector<Forecast> rank(std::vector<Forecast> forecasts, RankMode mode) {
    std::stable_sort(forecasts.begin(), forecasts.end(), [mode](const Forecast& a, const Forecast& b) {
        switch (mode) {
            case RankMode::Probability:
                if (a.p_hat != b.p_hat) return a.p_hat > b.p_hat;
                break;
            case RankMode::Significance:
                if (a.p_value != b.p_value) return a.p_value < b.p_value;
                break;
            case RankMode::Combined: {
                double sa = combined_score(a), sb = combined_score(b);
                if (sa != sb) return sa > sb;
                break;
            }
        }
        return a.target.category < b.target.category;
    });
    return forecasts;
}

std::optional<RankMode> rank_mode_from_name(std::string_view name) {
    if (name == "probability") return RankMode::Probability;
    if (name == "significance") return RankMode::Significance;
    if (name == "combined") return RankMode::Combined;
    return std::nullopt;
}

}  // namespace ck
