#include "ck/pfc.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace ck {

// ---------------------------------------------------------------------------
// Context construction

int FormalContext::attribute_index(const Literal& lit) const {
    auto it = std::lower_bound(attributes.begin(), attributes.end(), lit);
    if (it != attributes.end() && *it == lit) return static_cast<int>(it - attributes.begin());
    return -1;
}

std::vector<Literal> FormalContext::row(std::size_t object_idx) const {
    std::vector<Literal> out;
    const auto& bits = incidence[object_idx];
    for (std::size_t a = 0; a < attributes.size(); ++a)
        if (bits[a]) out.push_back(attributes[a]);
    return out;
}

FormalContext build_context(const std::vector<ObjectRecord>& records,
                            const std::vector<Id>& classifiers, const Schema& schema) {
    FormalContext ctx;
    ctx.classifiers = classifiers;
    for (const auto& cid : classifiers) {
        const ClassifierDef& c = schema.classifier(cid);
        for (const auto& cat : c.categories) {
            ctx.attributes.push_back({cid, cat.id, false});
            ctx.attributes.push_back({cid, cat.id, true});
        }
    }
    std::sort(ctx.attributes.begin(), ctx.attributes.end());

    std::vector<const ObjectRecord*> sorted;
    sorted.reserve(records.size());
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const ObjectRecord* a, const ObjectRecord* b) { return a->id < b->id; });

    for (const ObjectRecord* rec : sorted) {
        ctx.objects.push_back(rec->id);
        std::vector<bool> bits(ctx.attributes.size(), false);
        for (const auto& cid : classifiers) {
            auto it = rec->attrs.find(cid);
            if (it == rec->attrs.end()) continue;  // unknown: no incidence
            const ClassifierDef& c = schema.classifier(cid);
            if (!c.has_category(it->second))
                raise(Err::UnresolvedRef, "value '" + it->second + "' outside classifier '" + cid + "'");
            for (const auto& cat : c.categories) {
                Literal lit{cid, cat.id, cat.id != it->second};
                bits[static_cast<std::size_t>(ctx.attribute_index(lit))] = true;
            }
        }
        ctx.incidence.push_back(std::move(bits));
    }
    return ctx;
}

// ---------------------------------------------------------------------------
// Closure

namespace {

struct InternedRules {
    std::vector<Literal> literals;                 // id -> literal
    std::map<Literal, int> index;                  // literal -> id
    std::vector<std::vector<std::vector<int>>> premises;
    std::vector<int> conclusions;
    std::vector<TruthValue> truths;

    int intern(const Literal& lit) {
        auto it = index.find(lit);
        if (it != index.end()) return it->second;
        int id = static_cast<int>(literals.size());
        literals.push_back(lit);
        index.emplace(lit, id);
        return id;
    }
};

bool rule_fires(const std::vector<std::vector<int>>& premise, const std::vector<char>& in_state) {
    for (const auto& clause : premise) {
        bool sat = false;
        for (int lit : clause)
            if (in_state[static_cast<std::size_t>(lit)]) {
                sat = true;
                break;
            }
        if (!sat) return false;
    }
    return true;
}

}  // namespace

std::vector<Literal> closure(const std::vector<Literal>& state, const std::vector<Rule>& rules,
                             double theta, const std::vector<Literal>& attribute_space) {
    if (!(theta > 0.5 && theta <= 1.0))
        raise(Err::UsageError, "theta must lie in (0.5, 1]");

    InternedRules sys;
    for (const auto& lit : attribute_space) sys.intern(lit);
    for (const auto& lit : state) sys.intern(lit);
    for (const auto& rule : rules) {
        if (rule.truth.p_hat() < theta) continue;  // can never fire
        std::vector<std::vector<int>> premise;
        for (const auto& clause : rule.premise) {
            std::vector<int> c;
            for (const auto& lit : clause) c.push_back(sys.intern(lit));
            premise.push_back(std::move(c));
        }
        sys.premises.push_back(std::move(premise));
        sys.conclusions.push_back(sys.intern(rule.conclusion));
        sys.truths.push_back(rule.truth);
    }
    // negations must be addressable for contradiction checks
    for (std::size_t i = 0; i < sys.literals.size(); ++i) sys.intern(sys.literals[i].negation());

    const std::size_t n_lit = sys.literals.size();
    const std::size_t bound = n_lit + 1;

    // sibling positives per classifier, for the exclusivity structure
    std::map<Id, std::vector<int>> positives_of;
    for (std::size_t i = 0; i < n_lit; ++i)
        if (!sys.literals[i].negated)
            positives_of[sys.literals[i].classifier].push_back(static_cast<int>(i));

    std::vector<char> in_state(n_lit, 0), blocked(n_lit, 0);
    auto add = [&](int lit) {
        if (blocked[static_cast<std::size_t>(lit)] || in_state[static_cast<std::size_t>(lit)])
            return false;
        in_state[static_cast<std::size_t>(lit)] = 1;
        const Literal& l = sys.literals[static_cast<std::size_t>(lit)];
        if (!l.negated) {
            // a known value excludes its sibling categories
            for (int sib : positives_of[l.classifier]) {
                if (sib == lit) continue;
                int neg = sys.index.at(sys.literals[static_cast<std::size_t>(sib)].negation());
                if (!blocked[static_cast<std::size_t>(neg)])
                    in_state[static_cast<std::size_t>(neg)] = 1;
            }
        }
        return true;
    };
    for (const auto& lit : state) add(sys.index.at(lit));

    // pooled rule evidence for one literal; evidence for a sibling value also
    // argues against this one when pooling a negative literal
    auto pooled_tv = [&](int lit) {
        TruthValue tv;
        for (std::size_t r = 0; r < sys.premises.size(); ++r)
            if (sys.conclusions[r] == lit && rule_fires(sys.premises[r], in_state))
                tv = revise(tv, sys.truths[r]);
        const Literal& l = sys.literals[static_cast<std::size_t>(lit)];
        if (l.negated) {
            for (int sib : positives_of[l.classifier]) {
                const Literal& s = sys.literals[static_cast<std::size_t>(sib)];
                if (s.category == l.category) continue;
                for (std::size_t r = 0; r < sys.premises.size(); ++r)
                    if (sys.conclusions[r] == sib && rule_fires(sys.premises[r], in_state))
                        tv = revise(tv, sys.truths[r]);
            }
        }
        return tv;
    };
    auto pooled = [&](int lit) { return pooled_tv(lit).p_hat(); };

    for (std::size_t round = 0; round <= bound; ++round) {
        // saturate
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::size_t r = 0; r < sys.premises.size(); ++r) {
                int concl = sys.conclusions[r];
                if (in_state[static_cast<std::size_t>(concl)] ||
                    blocked[static_cast<std::size_t>(concl)])
                    continue;
                if (rule_fires(sys.premises[r], in_state))
                    if (add(concl)) changed = true;
            }
        }

        // contradictions: two values of one classifier, or both polarities
        std::vector<std::pair<int, int>> value_pairs, polarity_pairs;
        for (int lit = 0; lit < static_cast<int>(n_lit); ++lit) {
            const Literal& l = sys.literals[static_cast<std::size_t>(lit)];
            if (l.negated || !in_state[static_cast<std::size_t>(lit)]) continue;
            for (int sib : positives_of[l.classifier])
                if (sib > lit && in_state[static_cast<std::size_t>(sib)])
                    value_pairs.emplace_back(lit, sib);
            auto neg_it = sys.index.find(l.negation());
            if (neg_it != sys.index.end() && in_state[static_cast<std::size_t>(neg_it->second)])
                polarity_pairs.emplace_back(lit, neg_it->second);
        }
        if (value_pairs.empty() && polarity_pairs.empty()) {
            std::vector<Literal> out;
            for (std::size_t i = 0; i < n_lit; ++i)
                if (in_state[i]) out.push_back(sys.literals[i]);
            std::sort(out.begin(), out.end());
            return out;
        }

        auto drop = [&](int lit) {
            in_state[static_cast<std::size_t>(lit)] = 0;
            blocked[static_cast<std::size_t>(lit)] = 1;
        };
        // competing values of one classifier: the heavier body of firing
        // evidence wins
        for (auto [a, b] : value_pairs) {
            if (!in_state[static_cast<std::size_t>(a)] || !in_state[static_cast<std::size_t>(b)])
                continue;
            double ma = pooled_tv(a).w_pos, mb = pooled_tv(b).w_pos;
            if (ma > mb) {
                drop(b);
            } else if (mb > ma) {
                drop(a);
            } else {
                drop(a);
                drop(b);
            }
        }
        // opposite polarities: larger pooled smoothed probability wins
        for (auto [a, b] : polarity_pairs) {
            if (!in_state[static_cast<std::size_t>(a)] || !in_state[static_cast<std::size_t>(b)])
                continue;
            double pa = pooled(a), pb = pooled(b);
            if (pa > pb) {
                drop(b);
            } else if (pb > pa) {
                drop(a);
            } else {  // exact tie: drop both
                drop(a);
                drop(b);
            }
        }
    }
    raise(Err::NonConvergence, "closure exceeded the attribute-space iteration bound");
}

// ---------------------------------------------------------------------------
// Concept discovery

std::vector<Literal> Concept::intent_literals() const {
    std::vector<Literal> out;
    out.reserve(intent.size());
    for (const auto& [lit, w] : intent) out.push_back(lit);
    return out;
}

ConceptDiscovery find_concepts(const FormalContext& context, const ConceptParams& params) {
    TransactionSet transactions;
    transactions.object_ids = context.objects;
    for (std::size_t i = 0; i < context.objects.size(); ++i)
        transactions.rows.push_back(context.row(i));

    MineParams mp;
    mp.max_premise = params.max_premise;
    mp.w_min = params.w_min;
    mp.alpha = params.alpha;

    // value-to-value associations: positive premises, conclusions of both
    // polarities
    std::vector<Literal> premise_atoms;
    for (const auto& lit : context.attributes)
        if (!lit.negated) premise_atoms.push_back(lit);

    ConceptDiscovery out;
    out.rules = mine_rules_core(transactions, premise_atoms, context.attributes, mp);

    // close every object row and group by fixed point
    std::map<std::vector<Literal>, std::vector<Id>> groups;
    std::map<Id, std::vector<Literal>> row_of;
    for (std::size_t i = 0; i < context.objects.size(); ++i) {
        auto fixed = closure(transactions.rows[i], out.rules, params.theta, context.attributes);
        groups[fixed].push_back(context.objects[i]);
        row_of[context.objects[i]] = transactions.rows[i];
    }

    for (auto& [intent, members] : groups) {
        if (static_cast<int>(members.size()) < params.min_extent) continue;
        Concept cpt;
        std::string content;
        for (const auto& lit : intent) content += lit.str() + ";";
        cpt.id = "inv" + hex64(fnv1a(content));

        std::sort(members.begin(), members.end());
        std::set<Literal> intent_set(intent.begin(), intent.end());
        for (const auto& lit : intent) {
            long long observed = 0;
            for (const auto& oid : members) {
                const auto& row = row_of[oid];
                if (std::binary_search(row.begin(), row.end(), lit)) ++observed;
            }
            cpt.intent.emplace_back(lit, static_cast<double>(observed) /
                                                 static_cast<double>(members.size()));
        }
        cpt.extent = members;
        // stabilizing rules: fire on the intent and conclude inside it
        for (const auto& rule : out.rules) {
            if (rule.truth.p_hat() < params.theta) continue;
            if (!intent_set.count(rule.conclusion)) continue;
            if (rule.fires_on(intent_set)) cpt.rules.push_back(rule.id);
        }
        std::sort(cpt.rules.begin(), cpt.rules.end());
        cpt.fixed_point =
            closure(intent, out.rules, params.theta, context.attributes) == intent;
        out.concepts.push_back(std::move(cpt));
    }

    std::sort(out.concepts.begin(), out.concepts.end(), [](const Concept& a, const Concept& b) {
        if (a.extent.size() != b.extent.size()) return a.extent.size() > b.extent.size();
        return a.id < b.id;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Hierarchy

std::vector<std::pair<Id, Id>> build_hierarchy(
    std::vector<Concept>& concepts,
    std::vector<std::pair<std::vector<Id>, std::vector<Id>>>* links) {
    const std::size_t n = concepts.size();
    std::vector<std::set<Literal>> intents(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto lits = concepts[i].intent_literals();
        intents[i] = std::set<Literal>(lits.begin(), lits.end());
    }
    auto strict_subset = [&](std::size_t a, std::size_t b) {
        if (intents[a].size() >= intents[b].size()) return false;
        return std::includes(intents[b].begin(), intents[b].end(), intents[a].begin(),
                             intents[a].end());
    };

    std::vector<std::pair<Id, Id>> edges;
    std::vector<std::pair<std::vector<Id>, std::vector<Id>>> pc(n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            if (a == b || !strict_subset(a, b)) continue;
            bool direct = true;
            for (std::size_t c = 0; c < n && direct; ++c)
                if (c != a && c != b && strict_subset(a, c) && strict_subset(c, b)) direct = false;
            if (!direct) continue;
            edges.emplace_back(concepts[a].id, concepts[b].id);
            pc[a].second.push_back(concepts[b].id);  // children of a
            pc[b].first.push_back(concepts[a].id);   // parents of b
        }
    std::sort(edges.begin(), edges.end());
    if (links) *links = std::move(pc);
    return edges;
}

// ---------------------------------------------------------------------------
// Assignment and composite classifiers

double match_score(const ObjectRecord& record, const Concept& cpt, const Schema& schema) {
    if (cpt.intent.empty()) return 0.0;
    auto lits = record.literals(schema);
    std::set<Literal> held(lits.begin(), lits.end());
    double score = 0.0;
    for (const auto& [lit, weight] : cpt.intent) {
        if (held.count(lit))
            score += 1.0;
        else if (held.count(lit.negation()))
            score -= 1.0;
    }
    return score / static_cast<double>(cpt.intent.size());
}

std::optional<Assignment> assign(const ObjectRecord& record, const std::vector<Concept>& concepts,
                                 const Schema& schema, double threshold) {
    const Concept* best = nullptr;
    double best_score = 0.0;
    for (const auto& cpt : concepts) {
        double s = match_score(record, cpt, schema);
        bool better = false;
        if (!best || s > best_score) {
            better = true;
        } else if (s == best_score) {
            if (cpt.extent.size() > best->extent.size() ||
                (cpt.extent.size() == best->extent.size() && cpt.id < best->id))
                better = true;
        }
        if (better) {
            best = &cpt;
            best_score = s;
        }
    }
    if (!best || best_score < threshold) return std::nullopt;
    return Assignment{best->id, best_score};
}

Id derive_composite_classifier(Cdb& db, const std::vector<Concept>& concepts,
                               const std::string& name, double assign_threshold) {
    if (concepts.empty()) raise(Err::EmptyConceptSet, "no concepts to derive '" + name + "' from");

    std::vector<std::string> categories;
    for (const auto& c : concepts) categories.push_back(c.id);
    db.schema().define_classifier(name, categories, {}, /*composite=*/true);

    // in-scope types: those of the concepts' extent members
    std::set<Id> scope_types;
    for (const auto& c : concepts)
        for (const auto& oid : c.extent)
            if (const ObjectRecord* rec = db.find_record(oid)) scope_types.insert(rec->type);
    AttributeDef attr;
    attr.name = name;
    attr.kind = ValueKind::ClassifierRef;
    attr.ref = name;
    for (const auto& t : scope_types) db.schema().extend_type(t, attr);

    for (const auto& t : scope_types) {
        RecordFilter filter;
        filter.type = t;
        for (const auto& rec : db.query_records(filter)) {
            auto a = assign(rec, concepts, db.schema(), assign_threshold);
            if (a) db.set_attr(rec.id, name, a->concept_id);
        }
    }
    return name;
}

std::vector<Id> store_concepts(Cdb& db, const ConceptDiscovery& discovery) {
    for (const auto& rule : discovery.rules) db.upsert_rule(rule);
    std::vector<Concept> concepts = discovery.concepts;
    std::vector<std::pair<std::vector<Id>, std::vector<Id>>> links;
    build_hierarchy(concepts, &links);

    std::vector<Id> ids;
    for (std::size_t i = 0; i < concepts.size(); ++i) {
        const Concept& c = concepts[i];
        InvariantRecord inv;
        inv.id = c.id;
        inv.kind = TypeKind::Image;
        inv.intent = c.intent;
        for (const auto& oid : c.extent) {
            double s = match_score(db.record(oid), c, db.schema());
            inv.extent.emplace_back(oid, s);
        }
        inv.parents = links[i].first;
        inv.children = links[i].second;
        std::sort(inv.parents.begin(), inv.parents.end());
        std::sort(inv.children.begin(), inv.children.end());
        inv.rules = c.rules;
        ids.push_back(db.put_invariant(std::move(inv)));
    }
    return ids;
}

}  // namespace ck
