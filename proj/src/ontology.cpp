#include "ck/ontology.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "ck/cdb.hpp"

namespace ck {

namespace {

struct KindInfo {
    TypeKind kind;
    const char* name;
    std::optional<TypeKind> parent;
};

const KindInfo KIND_TABLE[TYPE_KIND_COUNT] = {
    {TypeKind::Thing, "Thing", {}},
    {TypeKind::Instance, "Instance", TypeKind::Thing},
    {TypeKind::Value, "Value", TypeKind::Instance},
    {TypeKind::Entity, "Entity", TypeKind::Value},
    {TypeKind::Category, "Category", TypeKind::Value},
    {TypeKind::Relation, "Relation", TypeKind::Value},
    {TypeKind::Precedent, "Precedent", TypeKind::Instance},
    {TypeKind::Event, "Event", TypeKind::Precedent},
    {TypeKind::State, "State", TypeKind::Event},
    {TypeKind::Action, "Action", TypeKind::Event},
    {TypeKind::Coincidence, "Coincidence", TypeKind::Precedent},
    {TypeKind::Process, "Process", TypeKind::Precedent},
    {TypeKind::Invariant, "Invariant", TypeKind::Thing},
    {TypeKind::Property, "Property", TypeKind::Invariant},
    {TypeKind::Appearance, "Appearance", TypeKind::Invariant},
    {TypeKind::Scene, "Scene", TypeKind::Invariant},
    {TypeKind::Fork, "Fork", TypeKind::Invariant},
    {TypeKind::Scenario, "Scenario", TypeKind::Invariant},
    {TypeKind::Classifier, "Classifier", TypeKind::Invariant},
    {TypeKind::Image, "Image", TypeKind::Invariant},
};

const KindInfo& info(TypeKind k) { return KIND_TABLE[static_cast<int>(k)]; }

}  // namespace

const char* kind_name(TypeKind k) { return info(k).name; }

std::optional<TypeKind> kind_from_name(std::string_view name) {
    for (const auto& k : KIND_TABLE)
        if (name == k.name) return k.kind;
    return std::nullopt;
}

std::optional<TypeKind> kind_parent(TypeKind k) { return info(k).parent; }

std::vector<TypeKind> all_kinds() {
    std::vector<TypeKind> out;
    out.reserve(TYPE_KIND_COUNT);
    for (const auto& k : KIND_TABLE) out.push_back(k.kind);
    return out;
}

bool subsumes(TypeKind ancestor, TypeKind descendant) {
    std::optional<TypeKind> cur = descendant;
    while (cur) {
        if (*cur == ancestor) return true;
        cur = kind_parent(*cur);
    }
    return false;
}

// ---------------------------------------------------------------------------

bool ClassifierDef::has_category(const Id& category) const {
    return category_index(category) >= 0;
}

int ClassifierDef::category_index(const Id& category) const {
    for (std::size_t i = 0; i < categories.size(); ++i)
        if (categories[i].id == category) return static_cast<int>(i);
    return -1;
}

const Id& ClassifierDef::bin(double raw_value) const {
    if (!binning) raise(Err::BadBinning, "classifier '" + id + "' has no binning spec");
    const auto& cuts = binning->cuts;
    std::size_t k = 0;
    while (k < cuts.size() && raw_value > cuts[k]) ++k;
    return categories[k].id;
}

const AttributeDef* TypeDef::find_attribute(const std::string& attr_name) const {
    for (const auto& a : attributes)
        if (a.name == attr_name) return &a;
    return nullptr;
}

std::string ValidationReport::str() const {
    std::ostringstream os;
    for (const auto& v : violations) {
        os << err_name(v.code);
        if (!v.attr.empty()) os << " [" << v.attr << "]";
        os << ": " << v.message << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Schema

const ClassifierDef& Schema::define_classifier(const std::string& name,
                                               const std::vector<std::string>& categories,
                                               std::optional<BinningSpec> binning,
                                               bool composite) {
    if (categories.empty())
        raise(Err::EmptyDomain, "classifier '" + name + "' has no categories");
    if (classifiers_.count(name))
        raise(Err::DuplicateName, "classifier '" + name + "' already defined");
    std::set<std::string> seen;
    for (const auto& c : categories)
        if (!seen.insert(c).second)
            raise(Err::DuplicateName, "category '" + c + "' repeated in '" + name + "'");
    if (binning) {
        const auto& cuts = binning->cuts;
        if (cuts.size() + 1 != categories.size())
            raise(Err::BadBinning, "classifier '" + name + "': " + std::to_string(cuts.size()) +
                                       " cut points for " + std::to_string(categories.size()) +
                                       " categories");
        for (std::size_t i = 1; i < cuts.size(); ++i)
            if (!(cuts[i - 1] < cuts[i]))
                raise(Err::BadBinning, "classifier '" + name + "': cut points not strictly increasing");
    }

    ClassifierDef def;
    def.id = name;
    def.name = name;
    for (const auto& c : categories) def.categories.push_back({c, c});
    def.composite = composite;
    def.binning = std::move(binning);
    def.ordinal = static_cast<int>(classifier_order_.size());
    classifier_order_.push_back(def.id);
    ++version_;
    return classifiers_.emplace(def.id, std::move(def)).first->second;
}

const TypeDef& Schema::define_type(const std::string& name, TypeKind kind,
                                   std::vector<AttributeDef> attributes,
                                   std::optional<Id> part_of) {
    if (kind == TypeKind::Thing)
        raise(Err::KindMismatch, "type '" + name + "' cannot use the root kind");
    if (types_.count(name))
        raise(Err::DuplicateName, "type '" + name + "' already defined");
    std::set<std::string> seen;
    for (const auto& a : attributes) {
        if (!seen.insert(a.name).second)
            raise(Err::DuplicateName, "attribute '" + a.name + "' repeated in '" + name + "'");
        if ((a.kind == ValueKind::ClassifierRef || (a.kind == ValueKind::Numeric && !a.ref.empty())) &&
            !classifiers_.count(a.ref))
            raise(Err::UnresolvedRef, "attribute '" + a.name + "' references unknown classifier '" +
                                          a.ref + "'");
        if (a.kind == ValueKind::TypeRef && !types_.count(a.ref) && a.ref != name)
            raise(Err::UnresolvedRef, "attribute '" + a.name + "' references unknown type '" +
                                          a.ref + "'");
    }
    if (part_of) {
        auto it = types_.find(*part_of);
        if (it == types_.end())
            raise(Err::UnresolvedRef, "part_of target '" + *part_of + "' not defined");
        // Events and Processes nest under Processes or their Scenario invariants
        // (a Session runs according to a Protocol).
        bool process_like =
            is_process_kind(it->second.kind) || subsumes(TypeKind::Scenario, it->second.kind);
        if ((is_event_kind(kind) || is_process_kind(kind)) && !process_like)
            raise(Err::KindMismatch, "part_of target '" + *part_of + "' must be Process-kind");
    }

    TypeDef def;
    def.id = name;
    def.name = name;
    def.kind = kind;
    def.attributes = std::move(attributes);
    def.part_of = std::move(part_of);
    def.ordinal = static_cast<int>(type_order_.size());
    type_order_.push_back(def.id);
    ++version_;
    return types_.emplace(def.id, std::move(def)).first->second;
}

void Schema::register_success_function(SuccessFunction fn) {
    if (find_success_function(fn.id))
        raise(Err::DuplicateName, "success function '" + fn.id + "' already registered");
    if (fn.reward_success < -1.0 || fn.reward_success > 1.0 || fn.reward_failure < -1.0 ||
        fn.reward_failure > 1.0)
        raise(Err::RewardOutOfRange, "rewards for '" + fn.id + "' must lie in [-1,1]");
    const TypeDef* t = find_type(fn.applies_to);
    if (!t) raise(Err::UnresolvedRef, "success function '" + fn.id + "' applies to unknown type '" +
                                          fn.applies_to + "'");
    if (fn.aggregate_children && !is_process_kind(t->kind))
        raise(Err::KindMismatch, "aggregate success requires a Process-kind type");
    for (const auto& lit : fn.success_when) require_literal(lit);
    success_.push_back(std::move(fn));
    ++version_;
}

void Schema::extend_type(const Id& type_id, const AttributeDef& attr) {
    auto it = types_.find(type_id);
    if (it == types_.end()) raise(Err::UnresolvedRef, "unknown type '" + type_id + "'");
    if (it->second.find_attribute(attr.name)) return;  // already present
    if (attr.kind == ValueKind::ClassifierRef && !classifiers_.count(attr.ref))
        raise(Err::UnresolvedRef, "unknown classifier '" + attr.ref + "'");
    it->second.attributes.push_back(attr);
    ++version_;
}

void Schema::set_binning(const Id& classifier_id, BinningSpec spec) {
    auto it = classifiers_.find(classifier_id);
    if (it == classifiers_.end()) raise(Err::UnresolvedRef, "unknown classifier '" + classifier_id + "'");
    if (spec.cuts.size() + 1 != it->second.categories.size())
        raise(Err::BadBinning, "classifier '" + classifier_id + "': cut/category count mismatch");
    for (std::size_t i = 1; i < spec.cuts.size(); ++i)
        if (!(spec.cuts[i - 1] < spec.cuts[i]))
            raise(Err::BadBinning, "classifier '" + classifier_id + "': cut points not strictly increasing");
    it->second.binning = std::move(spec);
    ++version_;
}

const ClassifierDef* Schema::find_classifier(const Id& id) const {
    auto it = classifiers_.find(id);
    return it == classifiers_.end() ? nullptr : &it->second;
}

const ClassifierDef& Schema::classifier(const Id& id) const {
    const ClassifierDef* c = find_classifier(id);
    if (!c) raise(Err::UnresolvedRef, "unknown classifier '" + id + "'");
    return *c;
}

const TypeDef* Schema::find_type(const Id& id) const {
    auto it = types_.find(id);
    return it == types_.end() ? nullptr : &it->second;
}

const TypeDef& Schema::type(const Id& id) const {
    const TypeDef* t = find_type(id);
    if (!t) raise(Err::UnresolvedRef, "unknown type '" + id + "'");
    return *t;
}

const SuccessFunction* Schema::find_success_function(const Id& id) const {
    for (const auto& fn : success_)
        if (fn.id == id) return &fn;
    return nullptr;
}

bool Schema::literal_valid(const Literal& lit) const {
    const ClassifierDef* c = find_classifier(lit.classifier);
    return c && c->has_category(lit.category);
}

void Schema::require_literal(const Literal& lit) const {
    if (!literal_valid(lit))
        raise(Err::UnresolvedRef, "literal '" + lit.str() + "' does not resolve in the schema");
}

ValidationReport Schema::validate_record(const ObjectRecord& record) const {
    ValidationReport report;
    const TypeDef* t = find_type(record.type);
    if (!t) {
        report.violations.push_back({Err::UnknownType, "", "type '" + record.type + "' is not defined"});
        return report;
    }

    if (is_process_kind(t->kind)) {
        if (record.ts)
            report.violations.push_back({Err::ValidationFailed, "", "Process-kind record carries a point timestamp"});
        if (record.span && record.span->first > record.span->second)
            report.violations.push_back({Err::ValidationFailed, "", "Process span start exceeds end"});
    } else if (is_event_kind(t->kind)) {
        if (record.span)
            report.violations.push_back({Err::ValidationFailed, "", "Event-kind record carries a span"});
    } else {
        if (record.ts || record.span)
            report.violations.push_back({Err::ValidationFailed, "", "Value-kind record carries time fields"});
    }

    for (const auto& [classifier_id, category] : record.attrs) {
        const AttributeDef* attr = nullptr;
        for (const auto& a : t->attributes)
            if (a.ref == classifier_id &&
                (a.kind == ValueKind::ClassifierRef || a.kind == ValueKind::Numeric)) {
                attr = &a;
                break;
            }
        if (!attr) {
            report.violations.push_back({Err::ValidationFailed, classifier_id,
                                         "classifier '" + classifier_id + "' is not declared for type '" +
                                             record.type + "'"});
            continue;
        }
        const ClassifierDef* c = find_classifier(classifier_id);
        if (!c) {
            report.violations.push_back({Err::UnresolvedRef, classifier_id, "classifier does not resolve"});
            continue;
        }
        if (!c->has_category(category))
            report.violations.push_back({Err::ValidationFailed, classifier_id,
                                         "value '" + category + "' outside the domain of '" +
                                             classifier_id + "'"});
    }

    for (const auto& a : t->attributes) {
        if (!a.required) continue;
        bool present = false;
        switch (a.kind) {
            case ValueKind::ClassifierRef: present = record.attrs.count(a.ref); break;
            case ValueKind::Numeric:
                present = record.raw.count(a.name) || (!a.ref.empty() && record.attrs.count(a.ref));
                break;
            case ValueKind::Text: present = record.text.count(a.name); break;
            case ValueKind::TypeRef: present = record.refs.count(a.name); break;
        }
        if (!present)
            report.violations.push_back({Err::ValidationFailed, a.name,
                                         "required attribute '" + a.name + "' missing"});
    }

    for (const auto& [name, value] : record.text)
        if (const AttributeDef* a = t->find_attribute(name); !a || a->kind != ValueKind::Text)
            report.violations.push_back({Err::ValidationFailed, name, "undeclared text attribute"});

    return report;
}

// ---------------------------------------------------------------------------
// Canonical text format. One definition per line, pipe-separated sections:
//
//   classifier <id> <cat>... [| bins <cut>...] [| composite]
//   type <id> <Kind> [| part_of <type>] [| attr <name> cls <classifier> [required]]...
//   success <id> | type <type> | when <lit>,... [| reward <s> <f>] [| aggregate mean]

namespace {

std::vector<std::string> tokens(const std::string& text) {
    std::istringstream is(text);
    std::vector<std::string> out;
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

}  // namespace

std::string Schema::to_text() const {
    std::ostringstream os;
    os << "# cogkern schema\n";
    for (const auto& id : classifier_order_) {
        const auto& c = classifiers_.at(id);
        os << "classifier " << c.id;
        for (const auto& cat : c.categories) os << ' ' << cat.id;
        if (c.binning) {
            os << " | bins";
            for (double cut : c.binning->cuts) os << ' ' << fixed(cut, 6);
        }
        if (c.composite) os << " | composite";
        os << '\n';
    }
    for (const auto& id : type_order_) {
        const auto& t = types_.at(id);
        os << "type " << t.id << ' ' << kind_name(t.kind);
        if (t.part_of) os << " | part_of " << *t.part_of;
        for (const auto& a : t.attributes) {
            os << " | attr " << a.name << ' ';
            switch (a.kind) {
                case ValueKind::ClassifierRef: os << "cls " << a.ref; break;
                case ValueKind::Numeric: os << "num"; if (!a.ref.empty()) os << ' ' << a.ref; break;
                case ValueKind::Text: os << "text"; break;
                case ValueKind::TypeRef: os << "ref " << a.ref; break;
            }
            if (a.required) os << " required";
        }
        os << '\n';
    }
    for (const auto& fn : success_) {
        os << "success " << fn.id << " | type " << fn.applies_to << " | when ";
        for (std::size_t i = 0; i < fn.success_when.size(); ++i) {
            if (i) os << ',';
            os << fn.success_when[i].str();
        }
        os << " | reward " << fixed(fn.reward_success, 4) << ' ' << fixed(fn.reward_failure, 4);
        if (fn.aggregate_children) os << " | aggregate mean";
        os << '\n';
    }
    return os.str();
}

Schema Schema::from_text(const std::string& text) {
    Schema schema;
    int line_no = 0;
    for (const auto& raw_line : split(text, '\n')) {
        ++line_no;
        std::string line = trim(raw_line);
        if (line.empty() || line[0] == '#') continue;

        std::vector<std::string> sections = split(line, '|');
        auto head = tokens(sections[0]);
        auto fail = [&](const std::string& msg) {
            raise(Err::CorruptStore, "schema line " + std::to_string(line_no) + ": " + msg);
        };
        if (head.empty()) continue;

        if (head[0] == "classifier") {
            if (head.size() < 3) fail("classifier needs an id and at least one category");
            std::vector<std::string> cats(head.begin() + 2, head.end());
            std::optional<BinningSpec> binning;
            bool composite = false;
            for (std::size_t s = 1; s < sections.size(); ++s) {
                auto toks = tokens(sections[s]);
                if (toks.empty()) continue;
                if (toks[0] == "bins") {
                    BinningSpec spec;
                    for (std::size_t i = 1; i < toks.size(); ++i) spec.cuts.push_back(std::stod(toks[i]));
                    binning = std::move(spec);
                } else if (toks[0] == "composite") {
                    composite = true;
                } else {
                    fail("unknown classifier section '" + toks[0] + "'");
                }
            }
            schema.define_classifier(head[1], cats, std::move(binning), composite);
        } else if (head[0] == "type") {
            if (head.size() != 3) fail("type needs an id and a kind");
            auto kind = kind_from_name(head[2]);
            if (!kind) fail("unknown kind '" + head[2] + "'");
            std::vector<AttributeDef> attrs;
            std::optional<Id> part_of;
            for (std::size_t s = 1; s < sections.size(); ++s) {
                auto toks = tokens(sections[s]);
                if (toks.empty()) continue;
                if (toks[0] == "part_of") {
                    if (toks.size() != 2) fail("part_of needs one type id");
                    part_of = toks[1];
                } else if (toks[0] == "attr") {
                    if (toks.size() < 3) fail("attr needs a name and a value kind");
                    AttributeDef a;
                    a.name = toks[1];
                    std::size_t next = 3;
                    if (toks[2] == "cls") {
                        if (toks.size() < 4) fail("attr cls needs a classifier id");
                        a.kind = ValueKind::ClassifierRef;
                        a.ref = toks[3];
                        next = 4;
                    } else if (toks[2] == "num") {
                        a.kind = ValueKind::Numeric;
                        if (toks.size() > 3 && toks[3] != "required") {
                            a.ref = toks[3];
                            next = 4;
                        }
                    } else if (toks[2] == "text") {
                        a.kind = ValueKind::Text;
                    } else if (toks[2] == "ref") {
                        if (toks.size() < 4) fail("attr ref needs a type id");
                        a.kind = ValueKind::TypeRef;
                        a.ref = toks[3];
                        next = 4;
                    } else {
                        fail("unknown attr kind '" + toks[2] + "'");
                    }
                    if (next < toks.size() && toks[next] == "required") a.required = true;
                    attrs.push_back(std::move(a));
                } else {
                    fail("unknown type section '" + toks[0] + "'");
                }
            }
            schema.define_type(head[1], *kind, std::move(attrs), std::move(part_of));
        } else if (head[0] == "success") {
            if (head.size() != 2) fail("success needs an id");
            SuccessFunction fn;
            fn.id = head[1];
            for (std::size_t s = 1; s < sections.size(); ++s) {
                auto toks = tokens(sections[s]);
                if (toks.empty()) continue;
                if (toks[0] == "type" && toks.size() == 2) {
                    fn.applies_to = toks[1];
                } else if (toks[0] == "when" && toks.size() == 2) {
                    fn.success_when = parse_literals(toks[1]);
                } else if (toks[0] == "reward" && toks.size() == 3) {
                    fn.reward_success = std::stod(toks[1]);
                    fn.reward_failure = std::stod(toks[2]);
                } else if (toks[0] == "aggregate" && toks.size() == 2 && toks[1] == "mean") {
                    fn.aggregate_children = true;
                } else {
                    fail("unknown success section '" + toks[0] + "'");
                }
            }
            schema.register_success_function(std::move(fn));
        } else {
            fail("unknown directive '" + head[0] + "'");
        }
    }
    return schema;
}

}  // namespace ck
