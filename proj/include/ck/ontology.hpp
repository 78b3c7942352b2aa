// Upper ("activity") ontology: the kind tree, classifier and type schemas,
// and record validation against them. This is the content model of the
// meta-data base.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ck/common.hpp"

namespace ck {

// ---------------------------------------------------------------------------
// Kind tree. Everything is a Thing; concrete occurrences are Instances,
// their abstract repeatable counterparts are Invariants.

enum class TypeKind {
    Thing,
    Instance,
    Value,
    Entity,
    Category,
    Relation,
    Precedent,
    Event,
    State,
    Action,
    Coincidence,
    Process,
    Invariant,
    Property,
    Appearance,
    Scene,
    Fork,
    Scenario,
    Classifier,
    Image,
};

constexpr int TYPE_KIND_COUNT = 20;

const char* kind_name(TypeKind k);
std::optional<TypeKind> kind_from_name(std::string_view name);
std::optional<TypeKind> kind_parent(TypeKind k);
std::vector<TypeKind> all_kinds();

// True iff `ancestor` lies on the root path of `descendant` (reflexive).
bool subsumes(TypeKind ancestor, TypeKind descendant);

inline bool is_event_kind(TypeKind k) { return subsumes(TypeKind::Event, k); }
inline bool is_process_kind(TypeKind k) { return subsumes(TypeKind::Process, k); }
inline bool is_invariant_kind(TypeKind k) { return subsumes(TypeKind::Invariant, k); }

// ---------------------------------------------------------------------------
// Schema definitions.

struct CategoryDef {
    Id id;
    std::string label;
};

// Ordered cut points discretizing a numeric raw value; bin k covers
// (cuts[k-1], cuts[k]], the last bin is open-ended.
struct BinningSpec {
    std::vector<double> cuts;
};

struct ClassifierDef {
    Id id;
    std::string name;
    std::vector<CategoryDef> categories;
    bool composite = false;  // derived from discovered invariants
    std::optional<BinningSpec> binning;
    int ordinal = 0;  // insertion order

    bool has_category(const Id& category) const;
    int category_index(const Id& category) const;  // -1 when absent
    // Maps a raw numeric value to a category via the binning cut points.
    const Id& bin(double raw_value) const;
};

enum class ValueKind { ClassifierRef, Numeric, Text, TypeRef };

struct AttributeDef {
    std::string name;
    ValueKind kind = ValueKind::ClassifierRef;
    Id ref;  // classifier id (ClassifierRef / binned Numeric) or type id (TypeRef)
    bool required = false;
};

struct TypeDef {
    Id id;
    std::string name;
    TypeKind kind = TypeKind::Entity;
    std::vector<AttributeDef> attributes;
    std::optional<Id> part_of;
    int ordinal = 0;

    const AttributeDef* find_attribute(const std::string& name) const;
};

// Declarative reward specification evaluated by the success oracle.
struct SuccessFunction {
    Id id;
    Id applies_to;  // type-ref
    std::vector<Literal> success_when;
    double reward_success = 1.0;
    double reward_failure = -1.0;
    bool aggregate_children = false;  // mean over part-of children (Process only)
};

// ---------------------------------------------------------------------------
// Validation report — violations are reported, not thrown.

struct Violation {
    Err code = Err::ValidationFailed;
    std::string attr;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    std::string str() const;
};

// ---------------------------------------------------------------------------
// Schema: the registered classifiers, types and success functions.
// Immutable after load within a run; define_* is setup-time only.

struct ObjectRecord;

class Schema {
public:
    const ClassifierDef& define_classifier(const std::string& name,
                                           const std::vector<std::string>& categories,
                                           std::optional<BinningSpec> binning = {},
                                           bool composite = false);
    const TypeDef& define_type(const std::string& name, TypeKind kind,
                               std::vector<AttributeDef> attributes,
                               std::optional<Id> part_of = {});
    void register_success_function(SuccessFunction fn);

    // Adds an optional classifier-valued attribute to an existing type;
    // used when composite classifiers are derived after initial load.
    void extend_type(const Id& type_id, const AttributeDef& attr);

    // Freezes cut points for a classifier defined without them (quantile
    // bins computed once at ingestion).
    void set_binning(const Id& classifier_id, BinningSpec spec);

    const ClassifierDef* find_classifier(const Id& id) const;
    const ClassifierDef& classifier(const Id& id) const;  // throws UnresolvedRef
    const TypeDef* find_type(const Id& id) const;
    const TypeDef& type(const Id& id) const;

    const std::vector<Id>& classifier_order() const { return classifier_order_; }
    const std::vector<Id>& type_order() const { return type_order_; }
    const std::vector<SuccessFunction>& success_functions() const { return success_; }
    const SuccessFunction* find_success_function(const Id& id) const;

    std::uint64_t version() const { return version_; }
    bool empty() const { return classifier_order_.empty() && type_order_.empty(); }

    // A literal is well-formed when its category belongs to its classifier.
    bool literal_valid(const Literal& lit) const;
    void require_literal(const Literal& lit) const;  // throws UnresolvedRef

    // Schema-level record validation: type exists, attribute keys declared,
    // values inside their domains, required attributes present, timestamps
    // match the kind. Link targets are checked by the store on put.
    ValidationReport validate_record(const ObjectRecord& record) const;

    // Canonical text round-trip (the meta.schema format, documented in README).
    std::string to_text() const;
    static Schema from_text(const std::string& text);

private:
    std::map<Id, ClassifierDef> classifiers_;
    std::map<Id, TypeDef> types_;
    std::vector<Id> classifier_order_;
    std::vector<Id> type_order_;
    std::vector<SuccessFunction> success_;
    std::uint64_t version_ = 0;
};

}  // namespace ck
