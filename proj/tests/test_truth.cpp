#include "ck/truth.hpp"

#include <random>

#include "ck/lpi.hpp"
#include "doctest.h"

using namespace ck;

namespace {

Rule make_rule(const Literal& premise, const Literal& conclusion, double w_pos, double w,
               double p_value = 0.01) {
    Rule r;
    r.premise = {{premise}};
    r.conclusion = conclusion;
    r.truth = {w_pos, w};
    r.p_value = p_value;
    r = canonicalized(std::move(r));
    r.id = rule_content_id(r);
    return r;
}

const Literal MALNUTRITION{"nutrition", "poor", false};
const Literal WEAK_IMMUNITY{"immunity", "weak", false};
const Literal INFECTION{"infection_risk", "high", false};
const Literal HYPOTHERMIA{"hypothermia_risk", "high", false};

}  // namespace

TEST_CASE("revision pools evidence counts") {
    TruthValue a{3, 4}, b{1, 2};
    CHECK(revise(a, b) == TruthValue{4, 6});
    CHECK(revise(a, TruthValue{0, 0}) == a);           // identity
    CHECK(revise(a, b) == revise(b, a));               // commutative
}

TEST_CASE("revision is exactly associative on dyadic rationals") {
    // weights are multiples of 1/64 with bounded numerators, so double
    // addition is exact and associativity can be checked bitwise
    std::mt19937_64 rng(20240811);
    std::uniform_int_distribution<long long> num(0, 1 << 20);
    for (int i = 0; i < 10000; ++i) {
        auto draw = [&]() {
            double w = static_cast<double>(num(rng)) / 64.0;
            double w_pos = static_cast<double>(num(rng) % (1 << 10)) / 64.0;
            if (w_pos > w) std::swap(w_pos, w);
            return TruthValue{w_pos, w};
        };
        TruthValue a = draw(), b = draw(), c = draw();
        CHECK(revise(revise(a, b), c) == revise(a, revise(b, c)));
        CHECK(revise(a, b) == revise(b, a));
    }
}

TEST_CASE("derived quantities respect their bounds") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        double w = unit(rng) * 1000.0;
        double w_pos = unit(rng) * w;
        TruthValue tv{w_pos, w};
        REQUIRE(tv.valid());
        CHECK(tv.p_hat() > 0.0);
        CHECK(tv.p_hat() < 1.0);
        CHECK(tv.confidence() >= 0.0);
        CHECK(tv.confidence() < 1.0);
    }
    CHECK(TruthValue{0, 0}.p_hat() == 0.5);
}

TEST_CASE("from_p_hat inverts the smoothed form inside its range") {
    for (double w : {1.0, 4.0, 25.0}) {
        for (double p : {0.3, 0.5, 0.8}) {
            TruthValue tv = from_p_hat(p, w);
            CHECK(tv.valid());
            if (p >= 1.0 / (w + 2.0) && p <= (w + 1.0) / (w + 2.0))
                CHECK(tv.p_hat() == doctest::Approx(p).epsilon(1e-12));
        }
    }
}

TEST_CASE("deduction chains the healthcare rules") {
    Rule ab = make_rule(MALNUTRITION, WEAK_IMMUNITY, 8, 10);
    Rule bc = make_rule(WEAK_IMMUNITY, INFECTION, 9, 10);

    Rule ac = deduce(ab, bc);
    CHECK(ac.premise == ab.premise);
    CHECK(ac.conclusion == INFECTION);
    CHECK(ac.provenance == Provenance::Deduced);
    double expect = ab.truth.p_hat() * bc.truth.p_hat();
    CHECK(ac.truth.p_hat() == doctest::Approx(expect).epsilon(1e-12));
    CHECK(ac.truth.w == doctest::Approx(std::min(ab.truth.w, bc.truth.w) * expect));
    CHECK(ac.truth.valid());
}

TEST_CASE("deduction approaches the first rule's probability as the second saturates") {
    Rule ab = make_rule(MALNUTRITION, WEAK_IMMUNITY, 3, 4);
    Rule bc = make_rule(WEAK_IMMUNITY, INFECTION, 1e9, 1e9);
    Rule ac = deduce(ab, bc);
    CHECK(ac.truth.p_hat() == doctest::Approx(ab.truth.p_hat()).epsilon(1e-6));
}

TEST_CASE("deduction rejects an unrelated middle literal") {
    Rule ab = make_rule(MALNUTRITION, WEAK_IMMUNITY, 8, 10);
    Rule cc = make_rule(HYPOTHERMIA, INFECTION, 9, 10);
    CHECK_THROWS_AS(deduce(ab, cc), Error);
    try {
        deduce(ab, cc);
    } catch (const Error& e) {
        CHECK(e.code() == Err::ChainMismatch);
    }
}

TEST_CASE("induction hypothesizes an effect-effect link") {
    Rule ab = make_rule(MALNUTRITION, HYPOTHERMIA, 7, 10);
    Rule ac = make_rule(MALNUTRITION, WEAK_IMMUNITY, 8, 10);

    Rule bc = induce(ab, ac);
    CHECK(bc.premise == std::vector<std::vector<Literal>>{{HYPOTHERMIA}});
    CHECK(bc.conclusion == WEAK_IMMUNITY);
    CHECK(bc.provenance == Provenance::Induced);
    double eta = 0.5;
    CHECK(bc.truth.w ==
          doctest::Approx(eta * ab.truth.p_hat() * std::min(ab.truth.w, ac.truth.w)));
    CHECK(bc.truth.f() == doctest::Approx(ac.truth.p_hat()));

    SUBCASE("mismatched premises") {
        Rule other = make_rule(HYPOTHERMIA, WEAK_IMMUNITY, 5, 10);
        CHECK_THROWS_AS(induce(ab, other), Error);
    }
    SUBCASE("discount off yields zero weight and a vacuous smoothed prior") {
        Rule zero = induce(ab, ac, {0.0});
        CHECK(zero.truth.w == 0.0);
        CHECK(zero.truth.w_pos == 0.0);
        CHECK(zero.truth.p_hat() == 0.5);
    }
}

TEST_CASE("abduction hypothesizes a cause-cause link") {
    Rule ac = make_rule(HYPOTHERMIA, INFECTION, 8, 10);
    Rule bc = make_rule(WEAK_IMMUNITY, INFECTION, 9, 12);

    Rule ab = abduce(ac, bc);
    CHECK(ab.premise == std::vector<std::vector<Literal>>{{HYPOTHERMIA}});
    CHECK(ab.conclusion == WEAK_IMMUNITY);
    CHECK(ab.provenance == Provenance::Abduced);
    CHECK(ab.truth.w == doctest::Approx(0.5 * bc.truth.p_hat() * 10.0));

    SUBCASE("eta scales the weight linearly") {
        Rule half = abduce(ac, bc, {0.25});
        Rule full = abduce(ac, bc, {0.5});
        CHECK(full.truth.w == doctest::Approx(2.0 * half.truth.w));
    }
    SUBCASE("conclusion mismatch") {
        Rule other = make_rule(WEAK_IMMUNITY, HYPOTHERMIA, 3, 10);
        CHECK_THROWS_AS(abduce(ac, other), Error);
        try {
            abduce(ac, other);
        } catch (const Error& e) {
            CHECK(e.code() == Err::ConclusionMismatch);
        }
    }
    SUBCASE("a rule abduced with itself is degenerate") {
        CHECK_THROWS_AS(abduce(ac, ac), Error);
        try {
            abduce(ac, ac);
        } catch (const Error& e) {
            CHECK(e.code() == Err::DegenerateHypothesis);
        }
    }
}

TEST_CASE("derived truth values always satisfy the bounds invariant") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto classifiers = std::vector<Literal>{MALNUTRITION, WEAK_IMMUNITY, INFECTION, HYPOTHERMIA};
    for (int i = 0; i < 2000; ++i) {
        double w1 = unit(rng) * 50, w2 = unit(rng) * 50;
        Rule ab = make_rule(classifiers[0], classifiers[1], unit(rng) * w1, w1);
        Rule bc = make_rule(classifiers[1], classifiers[2], unit(rng) * w2, w2);
        Rule ac = deduce(ab, bc);
        CHECK(ac.truth.valid());
        Rule ad = make_rule(classifiers[0], classifiers[3], unit(rng) * w2, w2);
        CHECK(induce(ab, ad).truth.valid());
        Rule ec = make_rule(classifiers[3], classifiers[2], unit(rng) * w1, w1);
        CHECK(abduce(ac, ec).truth.valid());
    }
}
