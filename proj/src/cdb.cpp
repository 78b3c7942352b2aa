#include "ck/cdb.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace ck {

// ---------------------------------------------------------------------------
// ObjectRecord

std::vector<Literal> ObjectRecord::literals(const Schema& schema) const {
    std::vector<Literal> out;
    for (const auto& [classifier_id, category] : attrs) {
        const ClassifierDef* c = schema.find_classifier(classifier_id);
        if (!c) continue;
        out.push_back({classifier_id, category, false});
        for (const auto& other : c->categories)
            if (other.id != category) out.push_back({classifier_id, other.id, true});
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool ObjectRecord::same_content(const ObjectRecord& other) const {
    return to_jsonl(*this) == to_jsonl(other);
}

const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::Mined: return "mined";
        case Provenance::Revised: return "revised";
        case Provenance::Deduced: return "deduced";
        case Provenance::Induced: return "induced";
        case Provenance::Abduced: return "abduced";
        case Provenance::Reinforced: return "reinforced";
        case Provenance::Prior: return "prior";
    }
    return "mined";
}

std::optional<Provenance> provenance_from_name(std::string_view name) {
    for (Provenance p : {Provenance::Mined, Provenance::Revised, Provenance::Deduced,
                         Provenance::Induced, Provenance::Abduced, Provenance::Reinforced,
                         Provenance::Prior})
        if (name == provenance_name(p)) return p;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Rule

bool Rule::fires_on(const std::set<Literal>& context) const {
    for (const auto& clause : premise) {
        bool satisfied = false;
        for (const auto& lit : clause)
            if (context.count(lit)) {
                satisfied = true;
                break;
            }
        if (!satisfied) return false;
    }
    return true;
}

std::size_t Rule::premise_size() const {
    std::size_t n = 0;
    for (const auto& clause : premise) n += clause.size();
    return n;
}

std::string Rule::text() const {
    std::ostringstream os;
    os << "IF ";
    for (std::size_t i = 0; i < premise.size(); ++i) {
        if (i) os << " AND ";
        const auto& clause = premise[i];
        if (clause.size() == 1) {
            os << clause[0].str();
        } else {
            os << '(';
            for (std::size_t j = 0; j < clause.size(); ++j) {
                if (j) os << " OR ";
                os << clause[j].str();
            }
            os << ')';
        }
    }
    os << " THEN " << conclusion.str() << " P=" << fixed(truth.p_hat(), 4)
       << " W=" << fixed(truth.w, 1) << " PV=" << fixed(p_value, 4);
    return os.str();
}

Rule canonicalized(Rule rule) {
    for (auto& clause : rule.premise) {
        std::sort(clause.begin(), clause.end());
        clause.erase(std::unique(clause.begin(), clause.end()), clause.end());
    }
    std::sort(rule.premise.begin(), rule.premise.end());
    rule.premise.erase(std::unique(rule.premise.begin(), rule.premise.end()), rule.premise.end());
    return rule;
}

bool is_canonical(const Rule& rule) {
    Rule c = canonicalized(rule);
    return c.premise == rule.premise;
}

void check_rule(const Rule& rule) {
    if (rule.premise.empty())
        raise(Err::NonCanonicalRule, "rule has an empty premise");
    std::map<std::pair<Id, Id>, std::set<bool>> polarity;
    for (const auto& clause : rule.premise) {
        if (clause.empty()) raise(Err::NonCanonicalRule, "rule has an empty premise clause");
        for (const auto& lit : clause) {
            polarity[{lit.classifier, lit.category}].insert(lit.negated);
            if (lit.classifier == rule.conclusion.classifier)
                raise(Err::NonCanonicalRule,
                      "conclusion classifier '" + lit.classifier + "' appears in the premise");
        }
    }
    for (const auto& [key, pols] : polarity)
        if (pols.size() > 1)
            raise(Err::NonCanonicalRule,
                  "literal '" + key.first + "=" + key.second + "' appears in both polarities");
    if (!rule.truth.valid())
        raise(Err::NonCanonicalRule, "truth value violates 0 <= w_pos <= w");
    if (!(rule.p_value > 0.0 && rule.p_value <= 1.0))
        raise(Err::NonCanonicalRule, "p_value outside (0,1]");
}

Id rule_content_id(const Rule& rule) {
    Rule c = canonicalized(rule);
    std::string content;
    for (const auto& clause : c.premise) {
        for (const auto& lit : clause) {
            content += lit.str();
            content += '|';
        }
        content += '&';
    }
    content += '>';
    content += c.conclusion.str();
    return "r" + hex64(fnv1a(content));
}

std::vector<Literal> InvariantRecord::intent_literals() const {
    std::vector<Literal> out;
    out.reserve(intent.size());
    for (const auto& [lit, weight] : intent) out.push_back(lit);
    return out;
}

// ---------------------------------------------------------------------------
// JSON serialization (fixed key order, one record per line)

namespace {

ordered_json literal_clauses_json(const std::vector<std::vector<Literal>>& premise) {
    ordered_json arr = ordered_json::array();
    for (const auto& clause : premise) {
        ordered_json c = ordered_json::array();
        for (const auto& lit : clause) c.push_back(lit.str());
        arr.push_back(std::move(c));
    }
    return arr;
}

std::vector<std::vector<Literal>> clauses_from_json(const ordered_json& arr) {
    std::vector<std::vector<Literal>> out;
    for (const auto& c : arr) {
        std::vector<Literal> clause;
        for (const auto& l : c) clause.push_back(Literal::parse(l.get<std::string>()));
        out.push_back(std::move(clause));
    }
    return out;
}

}  // namespace

std::string to_jsonl(const ObjectRecord& rec) {
    ordered_json j;
    j["id"] = rec.id;
    j["type"] = rec.type;
    j["ts"] = rec.ts ? ordered_json(*rec.ts) : ordered_json(nullptr);
    j["span"] = rec.span ? ordered_json({rec.span->first, rec.span->second}) : ordered_json(nullptr);
    j["attrs"] = ordered_json::object();
    for (const auto& [k, v] : rec.attrs) j["attrs"][k] = v;
    j["raw"] = ordered_json::object();
    for (const auto& [k, v] : rec.raw) j["raw"][k] = v;
    j["text"] = ordered_json::object();
    for (const auto& [k, v] : rec.text) j["text"][k] = v;
    j["refs"] = ordered_json::object();
    for (const auto& [k, v] : rec.refs) j["refs"][k] = v;
    j["links"] = ordered_json::array();
    for (const auto& [rel, target] : rec.links) j["links"].push_back({rel, target});
    j["part_of"] = rec.part_of ? ordered_json(*rec.part_of) : ordered_json(nullptr);
    return j.dump();
}

ObjectRecord record_from_json(const std::string& line) {
    ordered_json j = ordered_json::parse(line);
    ObjectRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.type = j.at("type").get<std::string>();
    if (!j.at("ts").is_null()) rec.ts = j["ts"].get<Timestamp>();
    if (!j.at("span").is_null())
        rec.span = std::make_pair(j["span"][0].get<Timestamp>(), j["span"][1].get<Timestamp>());
    for (const auto& [k, v] : j.at("attrs").items()) rec.attrs[k] = v.get<std::string>();
    for (const auto& [k, v] : j.at("raw").items()) rec.raw[k] = v.get<double>();
    for (const auto& [k, v] : j.at("text").items()) rec.text[k] = v.get<std::string>();
    for (const auto& [k, v] : j.at("refs").items()) rec.refs[k] = v.get<std::string>();
    for (const auto& l : j.at("links"))
        rec.links.emplace_back(l[0].get<std::string>(), l[1].get<std::string>());
    if (!j.at("part_of").is_null()) rec.part_of = j["part_of"].get<std::string>();
    return rec;
}

std::string to_jsonl(const Rule& rule) {
    ordered_json j;
    j["id"] = rule.id;
    j["premise"] = literal_clauses_json(rule.premise);
    j["conclusion"] = rule.conclusion.str();
    j["w_pos"] = rule.truth.w_pos;
    j["w"] = rule.truth.w;
    j["p_value"] = rule.p_value;
    j["provenance"] = provenance_name(rule.provenance);
    j["invariant"] = rule.invariant_ref ? ordered_json(*rule.invariant_ref) : ordered_json(nullptr);
    return j.dump();
}

Rule rule_from_json(const std::string& line) {
    ordered_json j = ordered_json::parse(line);
    Rule rule;
    rule.id = j.at("id").get<std::string>();
    rule.premise = clauses_from_json(j.at("premise"));
    rule.conclusion = Literal::parse(j.at("conclusion").get<std::string>());
    rule.truth = {j.at("w_pos").get<double>(), j.at("w").get<double>()};
    rule.p_value = j.at("p_value").get<double>();
    if (auto p = provenance_from_name(j.at("provenance").get<std::string>())) rule.provenance = *p;
    if (!j.at("invariant").is_null()) rule.invariant_ref = j["invariant"].get<std::string>();
    return rule;
}

std::string to_jsonl(const InvariantRecord& inv) {
    ordered_json j;
    j["id"] = inv.id;
    j["kind"] = kind_name(inv.kind);
    j["intent"] = ordered_json::array();
    for (const auto& [lit, weight] : inv.intent) j["intent"].push_back({lit.str(), weight});
    j["extent"] = ordered_json::array();
    for (const auto& [oid, score] : inv.extent) j["extent"].push_back({oid, score});
    j["parents"] = inv.parents;
    j["children"] = inv.children;
    j["rules"] = inv.rules;
    return j.dump();
}

InvariantRecord invariant_from_json(const std::string& line) {
    ordered_json j = ordered_json::parse(line);
    InvariantRecord inv;
    inv.id = j.at("id").get<std::string>();
    if (auto k = kind_from_name(j.at("kind").get<std::string>())) inv.kind = *k;
    for (const auto& e : j.at("intent"))
        inv.intent.emplace_back(Literal::parse(e[0].get<std::string>()), e[1].get<double>());
    for (const auto& e : j.at("extent"))
        inv.extent.emplace_back(e[0].get<std::string>(), e[1].get<double>());
    inv.parents = j.at("parents").get<std::vector<std::string>>();
    inv.children = j.at("children").get<std::vector<std::string>>();
    inv.rules = j.at("rules").get<std::vector<std::string>>();
    return inv;
}

// ---------------------------------------------------------------------------
// Cdb: objects

void Cdb::validate_links(const ObjectRecord& rec, ValidationReport& report) const {
    for (const auto& [rel, target] : rec.links)
        if (!objects_.count(target))
            report.violations.push_back(
                {Err::UnresolvedRef, rel, "link target '" + target + "' not stored"});
    for (const auto& [name, target] : rec.refs)
        if (!objects_.count(target))
            report.violations.push_back(
                {Err::UnresolvedRef, name, "ref target '" + target + "' not stored"});
    if (rec.part_of && !objects_.count(*rec.part_of))
        report.violations.push_back(
            {Err::UnresolvedRef, "part_of", "parent '" + *rec.part_of + "' not stored"});
}

Id Cdb::put_record(ObjectRecord record) {
    ValidationReport report = schema_.validate_record(record);
    validate_links(record, report);
    if (!report.ok())
        raise(Err::ValidationFailed, "record '" + record.id + "' rejected:\n" + report.str());

    if (record.id.empty()) {
        do {
            char buf[16];
            std::snprintf(buf, sizeof buf, "obj-%06llu",
                          static_cast<unsigned long long>(next_object_seq_++));
            record.id = buf;
        } while (objects_.count(record.id));
    }

    auto it = objects_.find(record.id);
    if (it != objects_.end()) {
        if (it->second.same_content(record)) return record.id;  // idempotent
        raise(Err::IdConflict, "record '" + record.id + "' already stored with different content");
    }

    Id id = record.id;
    index_record(record);
    objects_.emplace(id, std::move(record));
    return id;
}

void Cdb::index_record(const ObjectRecord& rec) {
    by_type_[rec.type].push_back(rec.id);
    for (const auto& [c, v] : rec.attrs) by_literal_[{c, v}].push_back(rec.id);
    if (auto t = rec.when()) by_time_.emplace(*t, rec.id);
}

const ObjectRecord* Cdb::find_record(const Id& id) const {
    auto it = objects_.find(id);
    return it == objects_.end() ? nullptr : &it->second;
}

const ObjectRecord& Cdb::record(const Id& id) const {
    const ObjectRecord* r = find_record(id);
    if (!r) raise(Err::UnresolvedRef, "record '" + id + "' not stored");
    return *r;
}

namespace {

bool satisfies_literal(const ObjectRecord& rec, const Literal& lit) {
    auto it = rec.attrs.find(lit.classifier);
    if (it == rec.attrs.end()) return false;  // unknown never satisfies
    return lit.negated ? it->second != lit.category : it->second == lit.category;
}

Timestamp sort_time(const ObjectRecord& rec) {
    auto t = rec.when();
    return t ? *t : std::numeric_limits<Timestamp>::min();
}

}  // namespace

std::vector<ObjectRecord> Cdb::query_records(const RecordFilter& filter) const {
    if (filter.type && filter.kind)
        raise(Err::UsageError, "filter by either type or kind, not both");
    if (filter.type && !schema_.find_type(*filter.type))
        raise(Err::UnresolvedRef, "unknown type '" + *filter.type + "'");
    for (const auto& lit : filter.literals) schema_.require_literal(lit);

    std::vector<ObjectRecord> out;
    for (const auto& [id, rec] : objects_) {
        if (filter.type && rec.type != *filter.type) continue;
        if (filter.kind) {
            const TypeDef* t = schema_.find_type(rec.type);
            if (!t || !subsumes(*filter.kind, t->kind)) continue;
        }
        bool match = true;
        for (const auto& lit : filter.literals)
            if (!satisfies_literal(rec, lit)) {
                match = false;
                break;
            }
        if (!match) continue;
        if (filter.window) {
            auto t = rec.when();
            if (!t || *t < filter.window->first || *t > filter.window->second) continue;
        }
        if (filter.part_of && (!rec.part_of || *rec.part_of != *filter.part_of)) continue;
        out.push_back(rec);
    }
    std::sort(out.begin(), out.end(), [](const ObjectRecord& a, const ObjectRecord& b) {
        auto ta = sort_time(a), tb = sort_time(b);
        return ta != tb ? ta < tb : a.id < b.id;
    });
    return out;
}

std::vector<ProjectedRow> Cdb::query_records(const RecordFilter& filter,
                                             const std::vector<Id>& projection) const {
    for (const auto& c : projection) schema_.classifier(c);
    std::vector<ProjectedRow> rows;
    for (const auto& rec : query_records(filter)) {
        ProjectedRow row;
        row.id = rec.id;
        for (const auto& c : projection) {
            auto it = rec.attrs.find(c);
            row.values.push_back(it == rec.attrs.end() ? std::optional<Id>{} : std::optional<Id>{it->second});
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<Id> Cdb::children_of(const Id& id) const {
    std::vector<Id> out;
    for (const auto& [oid, rec] : objects_)
        if (rec.part_of && *rec.part_of == id) out.push_back(oid);
    return out;
}

void Cdb::set_attr(const Id& id, const Id& classifier, const Id& category) {
    auto it = objects_.find(id);
    if (it == objects_.end()) raise(Err::UnresolvedRef, "record '" + id + "' not stored");
    ObjectRecord updated = it->second;
    updated.attrs[classifier] = category;
    ValidationReport report = schema_.validate_record(updated);
    if (!report.ok())
        raise(Err::ValidationFailed, "set_attr on '" + id + "' rejected:\n" + report.str());

    auto old = it->second.attrs.find(classifier);
    if (old != it->second.attrs.end()) {
        auto& bucket = by_literal_[{classifier, old->second}];
        bucket.erase(std::remove(bucket.begin(), bucket.end(), id), bucket.end());
    }
    by_literal_[{classifier, category}].push_back(id);
    it->second = std::move(updated);
}

// ---------------------------------------------------------------------------
// Cdb: rules

Id Cdb::put_rule(Rule rule) {
    if (!is_canonical(rule)) raise(Err::NonCanonicalRule, "rule is not in canonical form");
    check_rule(rule);
    if (rule.id.empty()) rule.id = rule_content_id(rule);
    auto it = rules_.find(rule.id);
    if (it != rules_.end()) {
        if (to_jsonl(it->second) == to_jsonl(rule)) return rule.id;
        raise(Err::IdConflict, "rule '" + rule.id + "' already stored with different content");
    }
    Id id = rule.id;
    rules_.emplace(id, std::move(rule));
    return id;
}

Id Cdb::upsert_rule(Rule rule) {
    if (!is_canonical(rule)) raise(Err::NonCanonicalRule, "rule is not in canonical form");
    check_rule(rule);
    if (rule.id.empty()) rule.id = rule_content_id(rule);
    Id id = rule.id;
    rules_[id] = std::move(rule);
    return id;
}

void Cdb::remove_rule(const Id& id) {
    auto it = rules_.find(id);
    if (it == rules_.end()) raise(Err::UnresolvedRef, "rule '" + id + "' not stored");
    for (const auto& [iid, inv] : invariants_)
        for (const auto& rid : inv.rules)
            if (rid == id)
                raise(Err::IdConflict, "rule '" + id + "' is referenced by invariant '" + iid + "'");
    rules_.erase(it);
}

void Cdb::update_rule_truth(const Id& id, const TruthValue& tv, Provenance provenance) {
    auto it = rules_.find(id);
    if (it == rules_.end()) raise(Err::UnresolvedRef, "rule '" + id + "' not stored");
    if (!tv.valid()) raise(Err::NonCanonicalRule, "truth value violates 0 <= w_pos <= w");
    it->second.truth = tv;
    it->second.provenance = provenance;
}

const Rule* Cdb::find_rule(const Id& id) const {
    auto it = rules_.find(id);
    return it == rules_.end() ? nullptr : &it->second;
}

const Rule& Cdb::rule(const Id& id) const {
    const Rule* r = find_rule(id);
    if (!r) raise(Err::UnresolvedRef, "rule '" + id + "' not stored");
    return *r;
}

std::vector<Rule> Cdb::query_rules(const std::optional<std::set<Literal>>& pre_criteria,
                                   const std::optional<Literal>& post_criteria) const {
    if (pre_criteria)
        for (const auto& lit : *pre_criteria) schema_.require_literal(lit);
    if (post_criteria) schema_.require_literal(*post_criteria);

    std::vector<Rule> out;
    for (const auto& [id, rule] : rules_) {
        if (post_criteria && !(rule.conclusion == *post_criteria)) continue;
        if (pre_criteria && !rule.fires_on(*pre_criteria)) continue;
        out.push_back(rule);
    }
    std::sort(out.begin(), out.end(), [](const Rule& a, const Rule& b) {
        if (!(a.conclusion == b.conclusion)) return a.conclusion < b.conclusion;
        if (a.premise_size() != b.premise_size()) return a.premise_size() < b.premise_size();
        return a.id < b.id;
    });
    return out;
}

std::vector<Rule> Cdb::all_rules() const {
    std::vector<Rule> out;
    out.reserve(rules_.size());
    for (const auto& [id, rule] : rules_) out.push_back(rule);
    return out;
}

// ---------------------------------------------------------------------------
// Cdb: invariants

Id Cdb::put_invariant(InvariantRecord inv) {
    for (const auto& [oid, score] : inv.extent)
        if (!objects_.count(oid))
            raise(Err::UnresolvedRef, "extent object '" + oid + "' not stored");
    for (const auto& rid : inv.rules)
        if (!rules_.count(rid))
            raise(Err::UnresolvedRef, "defining rule '" + rid + "' not stored");
    if (inv.id.empty()) {
        std::string content;
        for (const auto& [lit, w] : inv.intent) content += lit.str() + ";";
        inv.id = "inv" + hex64(fnv1a(content));
    }
    // parent/child links must stay acyclic across the stored set
    for (const auto& pid : inv.parents) {
        std::vector<Id> stack{pid};
        std::set<Id> seen;
        while (!stack.empty()) {
            Id cur = stack.back();
            stack.pop_back();
            if (cur == inv.id)
                raise(Err::ValidationFailed, "invariant '" + inv.id + "' parent link forms a cycle");
            if (!seen.insert(cur).second) continue;
            if (auto it = invariants_.find(cur); it != invariants_.end())
                for (const auto& p : it->second.parents) stack.push_back(p);
        }
    }
    Id id = inv.id;
    invariants_[id] = std::move(inv);
    return id;
}

const InvariantRecord* Cdb::find_invariant(const Id& id) const {
    auto it = invariants_.find(id);
    return it == invariants_.end() ? nullptr : &it->second;
}

std::vector<InvariantRecord> Cdb::query_invariants(std::optional<TypeKind> kind,
                                                   const std::vector<Id>& classifiers) const {
    std::vector<InvariantRecord> out;
    for (const auto& [id, inv] : invariants_) {
        if (kind && inv.kind != *kind) continue;
        bool match = true;
        for (const auto& c : classifiers) {
            bool found = false;
            for (const auto& [lit, w] : inv.intent)
                if (lit.classifier == c) {
                    found = true;
                    break;
                }
            if (!found) {
                match = false;
                break;
            }
        }
        if (match) out.push_back(inv);
    }
    std::sort(out.begin(), out.end(), [](const InvariantRecord& a, const InvariantRecord& b) {
        if (a.extent.size() != b.extent.size()) return a.extent.size() > b.extent.size();
        return a.id < b.id;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Ingestion binning

void apply_binning(ObjectRecord& record, const Schema& schema) {
    const TypeDef* t = schema.find_type(record.type);
    if (!t) return;  // validation will report the unknown type
    for (const auto& attr : t->attributes) {
        if (attr.kind != ValueKind::Numeric || attr.ref.empty()) continue;
        auto raw = record.raw.find(attr.name);
        if (raw == record.raw.end()) continue;
        const ClassifierDef& c = schema.classifier(attr.ref);
        if (!c.binning) continue;  // not frozen yet
        record.attrs[attr.ref] = c.bin(raw->second);
    }
}

void freeze_quantile_bins(Schema& schema, const std::vector<ObjectRecord>& batch) {
    // classifiers referenced by numeric attributes but still without cuts
    std::map<Id, std::vector<double>> samples;
    for (const auto& rec : batch) {
        const TypeDef* t = schema.find_type(rec.type);
        if (!t) continue;
        for (const auto& attr : t->attributes) {
            if (attr.kind != ValueKind::Numeric || attr.ref.empty()) continue;
            const ClassifierDef* c = schema.find_classifier(attr.ref);
            if (!c || c->binning) continue;
            auto raw = rec.raw.find(attr.name);
            if (raw != rec.raw.end()) samples[attr.ref].push_back(raw->second);
        }
    }
    for (auto& [classifier_id, values] : samples) {
        const ClassifierDef& c = schema.classifier(classifier_id);
        std::size_t k = c.categories.size();
        std::sort(values.begin(), values.end());
        BinningSpec spec;
        for (std::size_t i = 1; i < k; ++i) {
            std::size_t idx = i * values.size() / k;
            if (idx >= values.size()) idx = values.size() - 1;
            double cut = values[idx];
            if (!spec.cuts.empty() && cut <= spec.cuts.back()) continue;  // degenerate quantile
            spec.cuts.push_back(cut);
        }
        if (spec.cuts.size() + 1 != k)
            raise(Err::BadBinning, "cannot derive " + std::to_string(k) + " distinct quantile bins for '" +
                                       classifier_id + "'");
        schema.set_binning(classifier_id, std::move(spec));
    }
}

// ---------------------------------------------------------------------------
// Persistence. Each file ends with a checksum trailer over everything above
// it; a missing or mismatched trailer means the snapshot is unusable.

namespace {

constexpr const char* TRAILER_PREFIX = "#fnv1a64 ";

void write_checked(const fs::path& path, const std::string& body) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) raise(Err::IoFailure, "cannot write '" + path.string() + "'");
    os << body << TRAILER_PREFIX << hex64(fnv1a(body)) << '\n';
    if (!os.flush()) raise(Err::IoFailure, "write failed for '" + path.string() + "'");
}

std::string read_checked(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) raise(Err::IoFailure, "cannot read '" + path.string() + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    std::string content = buf.str();

    auto nl = content.rfind('\n');
    std::size_t line_start;
    if (nl == std::string::npos || nl + 1 == content.size()) {
        // trailer line is the last newline-terminated line
        if (nl == std::string::npos) raise(Err::CorruptStore, "'" + path.string() + "' has no checksum trailer");
        line_start = content.rfind('\n', nl - 1);
        line_start = line_start == std::string::npos ? 0 : line_start + 1;
    } else {
        raise(Err::CorruptStore, "'" + path.string() + "' has trailing bytes after the checksum");
    }
    std::string trailer = content.substr(line_start, nl - line_start);
    if (trailer.rfind(TRAILER_PREFIX, 0) != 0)
        raise(Err::CorruptStore, "'" + path.string() + "' has no checksum trailer");
    std::string body = content.substr(0, line_start);
    if (hex64(fnv1a(body)) != trailer.substr(std::string(TRAILER_PREFIX).size()))
        raise(Err::CorruptStore, "checksum mismatch in '" + path.string() + "'");
    return body;
}

}  // namespace

void Cdb::persist(const std::string& dir) const {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) raise(Err::IoFailure, "cannot create '" + dir + "': " + ec.message());

    write_checked(fs::path(dir) / "meta.schema", schema_.to_text());

    std::string objects = "# cogkern objects v1\n";
    for (const auto& [id, rec] : objects_) objects += to_jsonl(rec) + "\n";
    write_checked(fs::path(dir) / "objects.jsonl", objects);

    std::string invariants = "# cogkern invariants v1\n";
    for (const auto& [id, inv] : invariants_) invariants += to_jsonl(inv) + "\n";
    write_checked(fs::path(dir) / "invariants.jsonl", invariants);

    std::string rules = "# cogkern rules v1\n";
    for (const auto& [id, rule] : rules_) rules += to_jsonl(rule) + "\n";
    write_checked(fs::path(dir) / "rules.jsonl", rules);
}

Cdb Cdb::load(const std::string& dir) {
    Cdb db(Schema::from_text(read_checked(fs::path(dir) / "meta.schema")));

    auto each_line = [](const std::string& body, auto&& fn) {
        for (const auto& line : split(body, '\n')) {
            std::string t = trim(line);
            if (t.empty() || t[0] == '#') continue;
            fn(t);
        }
    };

    each_line(read_checked(fs::path(dir) / "objects.jsonl"), [&](const std::string& line) {
        ObjectRecord rec = record_from_json(line);
        db.index_record(rec);
        db.objects_.emplace(rec.id, std::move(rec));
    });
    each_line(read_checked(fs::path(dir) / "rules.jsonl"), [&](const std::string& line) {
        Rule rule = rule_from_json(line);
        db.rules_.emplace(rule.id, std::move(rule));
    });
    each_line(read_checked(fs::path(dir) / "invariants.jsonl"), [&](const std::string& line) {
        InvariantRecord inv = invariant_from_json(line);
        db.invariants_.emplace(inv.id, std::move(inv));
    });
    db.next_object_seq_ = db.objects_.size() + 1;
    return db;
}

bool Cdb::check_indexes() const {
    std::map<Id, std::vector<Id>> by_type;
    std::map<std::pair<Id, Id>, std::vector<Id>> by_literal;
    std::multimap<Timestamp, Id> by_time;
    for (const auto& [id, rec] : objects_) {
        by_type[rec.type].push_back(id);
        for (const auto& [c, v] : rec.attrs) by_literal[{c, v}].push_back(id);
        if (auto t = rec.when()) by_time.emplace(*t, id);
    }
    auto normalize = [](std::map<std::pair<Id, Id>, std::vector<Id>> m) {
        for (auto& [k, v] : m) std::sort(v.begin(), v.end());
        for (auto it = m.begin(); it != m.end();)
            it = it->second.empty() ? m.erase(it) : std::next(it);
        return m;
    };
    auto normalize_type = [](std::map<Id, std::vector<Id>> m) {
        for (auto& [k, v] : m) std::sort(v.begin(), v.end());
        for (auto it = m.begin(); it != m.end();)
            it = it->second.empty() ? m.erase(it) : std::next(it);
        return m;
    };
    return normalize_type(by_type) == normalize_type(by_type_) &&
           normalize(by_literal) == normalize(by_literal_) && by_time == by_time_;
}

}  // namespace ck
