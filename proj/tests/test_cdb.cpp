#include "ck/cdb.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include "doctest.h"
#include "test_util.hpp"

using namespace ck;

namespace {

Cdb seeded_store(std::uint64_t seed, int n) {
    Cdb db(testutil::tiny_schema());
    std::mt19937_64 rng(seed);
    const char* colors[] = {"green", "red", "orange", "yellow", ""};
    const char* shapes[] = {"round", "oblong", ""};
    const char* tastes[] = {"sweet", "sour", ""};
    for (int i = 0; i < n; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "f%04d", i);
        auto rec = testutil::fruit(buf, colors[rng() % 5], shapes[rng() % 3], tastes[rng() % 3]);
        db.put_record(rec);
    }
    return db;
}

// independent linear-scan reference for query_records
std::vector<Id> scan(const Cdb& db, const RecordFilter& f, int n) {
    struct Row {
        Id id;
        Timestamp t;
    };
    std::vector<Row> hits;
    for (int i = 0; i < n; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "f%04d", i);
        const ObjectRecord* rec = db.find_record(buf);
        if (!rec) continue;
        if (f.type && rec->type != *f.type) continue;
        bool ok = true;
        for (const auto& lit : f.literals) {
            auto it = rec->attrs.find(lit.classifier);
            bool sat = it != rec->attrs.end() &&
                       (lit.negated ? it->second != lit.category : it->second == lit.category);
            if (!sat) ok = false;
        }
        if (!ok) continue;
        auto t = rec->when();
        hits.push_back({rec->id, t ? *t : std::numeric_limits<Timestamp>::min()});
    }
    std::stable_sort(hits.begin(), hits.end(), [](const Row& a, const Row& b) {
        return a.t != b.t ? a.t < b.t : a.id < b.id;
    });
    std::vector<Id> out;
    for (const auto& h : hits) out.push_back(h.id);
    return out;
}

Rule simple_rule(const char* premise, const char* conclusion, double w_pos, double w) {
    Rule r;
    r.premise = {{Literal::parse(premise)}};
    r.conclusion = Literal::parse(conclusion);
    r.truth = {w_pos, w};
    r.p_value = 0.01;
    r = canonicalized(std::move(r));
    r.id = rule_content_id(r);
    return r;
}

}  // namespace

TEST_CASE("put_record is idempotent on identical content") {
    Cdb db(testutil::tiny_schema());
    auto rec = testutil::fruit("f1", "green", "round", "sweet");
    Id id = db.put_record(rec);
    CHECK(id == "f1");
    CHECK(db.put_record(rec) == "f1");
    CHECK(db.record_count() == 1);

    auto changed = rec;
    changed.attrs["color"] = "red";
    CHECK_THROWS_AS(db.put_record(changed), Error);
    try {
        db.put_record(changed);
    } catch (const Error& e) {
        CHECK(e.code() == Err::IdConflict);
    }
}

TEST_CASE("put_record validates against the schema and the store") {
    Cdb db(testutil::tiny_schema());
    auto bad = testutil::fruit("f1", "blue", "round", "sweet");
    CHECK_THROWS_AS(db.put_record(bad), Error);

    auto rec = testutil::fruit("f1", "green", "round", "sweet");
    rec.links.emplace_back("near", "missing");
    CHECK_THROWS_AS(db.put_record(rec), Error);

    rec.links.clear();
    db.put_record(rec);
    auto linked = testutil::fruit("f2", "red", "round", "sour");
    linked.links.emplace_back("near", "f1");
    CHECK_NOTHROW(db.put_record(linked));
}

TEST_CASE("process spans and empty ids") {
    Schema s = testutil::tiny_schema();
    s.define_type("Batch", TypeKind::Process, {});
    Cdb db(std::move(s));
    ObjectRecord p;
    p.type = "Batch";
    p.span = {{5, 3}};
    CHECK_THROWS_AS(db.put_record(p), Error);  // start > end
    p.span = {{3, 5}};
    Id id = db.put_record(p);
    CHECK_FALSE(id.empty());
    CHECK(db.record(id).when() == 3);
}

TEST_CASE("query_records equals the linear-scan oracle") {
    const int n = 200;
    Cdb db = seeded_store(42, n);
    REQUIRE(db.check_indexes());

    std::mt19937_64 rng(77);
    const char* colors[] = {"green", "red", "orange", "yellow"};
    const char* shapes[] = {"round", "oblong"};
    for (int trial = 0; trial < 60; ++trial) {
        RecordFilter f;
        if (rng() % 2) f.type = "Fruit";
        if (rng() % 2) f.literals.push_back({"color", colors[rng() % 4], rng() % 4 == 0});
        if (rng() % 3 == 0) f.literals.push_back({"shape", shapes[rng() % 2], false});
        auto got = db.query_records(f);
        auto expected = scan(db, f, n);
        REQUIRE(got.size() == expected.size());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].id == expected[i]);
    }

    SUBCASE("empty store yields empty results") {
        Cdb empty(testutil::tiny_schema());
        RecordFilter f;
        f.literals.push_back({"color", "red", false});
        CHECK(empty.query_records(f).empty());
    }
    SUBCASE("projection keeps only requested columns") {
        RecordFilter f;
        f.type = "Fruit";
        auto rows = db.query_records(f, {"color", "taste"});
        REQUIRE_FALSE(rows.empty());
        for (const auto& row : rows) {
            CHECK(row.values.size() == 2);
            const ObjectRecord& rec = db.record(row.id);
            auto c = rec.attrs.find("color");
            CHECK(row.values[0] == (c == rec.attrs.end() ? std::optional<Id>{} : std::optional<Id>{c->second}));
        }
        CHECK_THROWS_AS(db.query_records(f, {"nosuch"}), Error);
    }
    SUBCASE("kind filter uses subsumption") {
        RecordFilter f;
        f.kind = TypeKind::Value;  // Fruit is an Entity, Entity < Value
        CHECK(db.query_records(f).size() == db.record_count());
    }
}

TEST_CASE("rule canonicalization is idempotent and order-insensitive") {
    Rule r;
    r.premise = {{Literal::parse("shape=round"), Literal::parse("color=red")},
                 {Literal::parse("taste=sweet")}};
    r.conclusion = Literal::parse("color=green");  // clashes on purpose below
    r.conclusion = Literal::parse("taste=sour");

    SUBCASE("canonical form sorts clauses and literals") {
        Rule c = canonicalized(r);
        CHECK(is_canonical(c));
        CHECK(canonicalized(c).premise == c.premise);

        Rule shuffled = r;
        std::swap(shuffled.premise[0], shuffled.premise[1]);
        std::reverse(shuffled.premise[1].begin(), shuffled.premise[1].end());
        CHECK(canonicalized(shuffled).premise == c.premise);
        CHECK(rule_content_id(shuffled) == rule_content_id(r));
    }
    SUBCASE("check_rule rejects structural violations") {
        Rule bad = canonicalized(r);
        bad.conclusion = Literal::parse("color=green");  // color already in premise
        CHECK_THROWS_AS(check_rule(bad), Error);

        Rule both = simple_rule("shape=round", "taste=sweet", 1, 2);
        both.premise.push_back({Literal::parse("!shape=round")});
        both = canonicalized(both);
        CHECK_THROWS_AS(check_rule(both), Error);

        Rule empty;
        empty.conclusion = Literal::parse("taste=sweet");
        CHECK_THROWS_AS(check_rule(empty), Error);
    }
}

TEST_CASE("rule base put and query") {
    Cdb db(testutil::tiny_schema());
    Rule r1 = simple_rule("shape=round", "taste=sweet", 8, 10);
    Rule r2 = simple_rule("color=red", "taste=sweet", 5, 10);
    Rule r3 = simple_rule("shape=oblong", "taste=sour", 4, 10);
    for (const auto& r : {r1, r2, r3}) db.put_rule(r);

    SUBCASE("put is idempotent, conflicting content is rejected") {
        CHECK(db.put_rule(r1) == r1.id);
        Rule changed = r1;
        changed.truth = {9, 12};
        CHECK_THROWS_AS(db.put_rule(changed), Error);
        CHECK_NOTHROW(db.upsert_rule(changed));
        CHECK(db.rule(r1.id).truth.w == 12);
    }
    SUBCASE("non-canonical rules are rejected") {
        Rule messy;
        messy.premise = {{Literal::parse("shape=round"), Literal::parse("color=red")}};
        std::swap(messy.premise[0][0], messy.premise[0][1]);  // unsorted clause
        messy.conclusion = Literal::parse("taste=sweet");
        messy.truth = {1, 2};
        if (!is_canonical(messy)) CHECK_THROWS_AS(db.put_rule(messy), Error);
    }
    SUBCASE("query by post-condition") {
        auto sweet = db.query_rules({}, Literal::parse("taste=sweet"));
        CHECK(sweet.size() == 2);
        for (const auto& r : sweet) CHECK(r.conclusion.category == "sweet");
    }
    SUBCASE("query by satisfiable pre-conditions") {
        std::set<Literal> have{Literal::parse("shape=round")};
        auto rules = db.query_rules(have, {});
        REQUIRE(rules.size() == 1);
        CHECK(rules[0].id == r1.id);
        // a rule whose clause has no literal in the set is excluded
        std::set<Literal> other{Literal::parse("color=green")};
        CHECK(db.query_rules(other, {}).empty());
    }
    SUBCASE("empty rule base") {
        Cdb fresh(testutil::tiny_schema());
        CHECK(fresh.query_rules({}, {}).empty());
    }
}

TEST_CASE("invariants round-trip and order by extent size") {
    Cdb db = seeded_store(5, 10);
    Rule r = simple_rule("shape=round", "taste=sweet", 8, 10);
    db.put_rule(r);

    InvariantRecord inv;
    inv.kind = TypeKind::Image;
    inv.intent = {{Literal::parse("color=green"), 0.9}, {Literal::parse("!color=red"), 0.8}};
    inv.extent = {{"f0000", 1.0}, {"f0001", 0.8}};
    inv.rules = {r.id};
    Id id = db.put_invariant(inv);

    InvariantRecord small;
    small.kind = TypeKind::Image;
    small.intent = {{Literal::parse("shape=round"), 1.0}};
    small.extent = {{"f0002", 1.0}};
    db.put_invariant(small);

    auto images = db.query_invariants(TypeKind::Image);
    REQUIRE(images.size() == 2);
    CHECK(images[0].id == id);  // larger extent first
    CHECK(db.query_invariants(TypeKind::Scene).empty());

    auto by_cls = db.query_invariants(TypeKind::Image, {"color"});
    REQUIRE(by_cls.size() == 1);
    CHECK(by_cls[0].id == id);

    SUBCASE("dangling extent or rule refs are rejected") {
        InvariantRecord bad = inv;
        bad.id = "other";
        bad.extent.emplace_back("missing", 1.0);
        CHECK_THROWS_AS(db.put_invariant(bad), Error);
        bad = inv;
        bad.id = "other2";
        bad.rules.push_back("nosuchrule");
        CHECK_THROWS_AS(db.put_invariant(bad), Error);
    }
    SUBCASE("serialized form is byte-stable") {
        const InvariantRecord* stored = db.find_invariant(id);
        REQUIRE(stored);
        std::string once = to_jsonl(*stored);
        CHECK(to_jsonl(invariant_from_json(once)) == once);
    }
}

TEST_CASE("persistence round-trips byte-for-byte") {
    testutil::TempDir dir("cdb");

    SUBCASE("empty store") {
        Cdb db(testutil::tiny_schema());
        db.persist(dir.str());
        Cdb back = Cdb::load(dir.str());
        CHECK(back.record_count() == 0);
        CHECK(back.rule_count() == 0);
        CHECK(back.schema().to_text() == db.schema().to_text());
    }

    SUBCASE("seeded store reloads identically and rewrites identical bytes") {
        Cdb db = seeded_store(9, 120);
        db.put_rule(simple_rule("shape=round", "taste=sweet", 8, 10));
        db.persist(dir.str());

        auto slurp = [&](const char* name) {
            return testutil::slurp((std::filesystem::path(dir.str()) / name).string());
        };
        std::string objects = slurp("objects.jsonl");
        std::string rules = slurp("rules.jsonl");

        Cdb back = Cdb::load(dir.str());
        REQUIRE(back.check_indexes());
        CHECK(back.record_count() == db.record_count());

        testutil::TempDir dir2("cdb2");
        back.persist(dir2.str());
        CHECK(testutil::slurp((std::filesystem::path(dir2.str()) / "objects.jsonl").string()) ==
              objects);
        CHECK(testutil::slurp((std::filesystem::path(dir2.str()) / "rules.jsonl").string()) == rules);

        RecordFilter f;
        f.literals.push_back({"color", "red", false});
        auto before = db.query_records(f);
        auto after = back.query_records(f);
        REQUIRE(before.size() == after.size());
        for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i].id == after[i].id);
    }

    SUBCASE("truncation is detected") {
        Cdb db = seeded_store(9, 20);
        db.persist(dir.str());
        auto path = std::filesystem::path(dir.str()) / "objects.jsonl";
        std::string content = testutil::slurp(path.string());
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        os << content.substr(0, content.size() / 2);
        os.close();
        CHECK_THROWS_AS(Cdb::load(dir.str()), Error);
        try {
            Cdb::load(dir.str());
        } catch (const Error& e) {
            CHECK(e.code() == Err::CorruptStore);
        }
    }
}

TEST_CASE("numeric ingestion bins raw values") {
    Schema s;
    s.define_classifier("photos", {"low", "mid", "high"}, BinningSpec{{5.0, 50.0}});
    s.define_classifier("friends", {"few", "some", "many"});  // cuts frozen at ingestion
    s.define_type("Profile", TypeKind::Entity,
                  {{"photos", ValueKind::Numeric, "photos", false},
                   {"friends", ValueKind::Numeric, "friends", false}});

    std::vector<ObjectRecord> batch;
    for (int i = 0; i < 12; ++i) {
        ObjectRecord rec;
        rec.id = "p" + std::to_string(i);
        rec.type = "Profile";
        rec.raw["photos"] = i * 10.0;
        rec.raw["friends"] = i * 7.0;
        batch.push_back(rec);
    }
    freeze_quantile_bins(s, batch);
    REQUIRE(s.classifier("friends").binning.has_value());
    CHECK(s.classifier("friends").binning->cuts.size() == 2);

    Cdb db(std::move(s));
    for (auto rec : batch) {
        apply_binning(rec, db.schema());
        CHECK(rec.attrs.count("photos"));
        CHECK(rec.attrs.count("friends"));
        db.put_record(rec);
    }
    CHECK(db.record("p0").attrs.at("photos") == "low");
    CHECK(db.record("p11").attrs.at("photos") == "high");
}

TEST_CASE("set_attr keeps indexes consistent") {
    Cdb db = seeded_store(3, 30);
    db.set_attr("f0000", "color", "yellow");
    CHECK(db.record("f0000").attrs.at("color") == "yellow");
    CHECK(db.check_indexes());
    CHECK_THROWS_AS(db.set_attr("f0000", "color", "blue"), Error);
    CHECK_THROWS_AS(db.set_attr("missing", "color", "red"), Error);
}
