#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "medrec/domain.hpp"
#include "medrec/rng.hpp"

using namespace medrec;

TEST_CASE("clamp_grade passes through in-range values") {
    CHECK(clamp_grade(0.78) == doctest::Approx(0.78).epsilon(1e-12));
    CHECK(clamp_grade(0.0) == 0.0);
    CHECK(clamp_grade(1.0) == 1.0);
}

TEST_CASE("clamp_grade clamps out-of-range values") {
    CHECK(clamp_grade(1.7) == 1.0);
    CHECK(clamp_grade(-0.2) == 0.0);
}

TEST_CASE("clamp_grade rejects non-finite input") {
    CHECK_THROWS_AS(clamp_grade(std::numeric_limits<double>::quiet_NaN()), Error);
    CHECK_THROWS_AS(clamp_grade(std::numeric_limits<double>::infinity()), Error);
    try {
        clamp_grade(-std::numeric_limits<double>::infinity());
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::invalid_grade);
    }
}

TEST_CASE("clamp_grade is idempotent and monotone") {
    auto rng = seeded_rng(7);
    double previous_in = -2.0;
    double previous_out = 0.0;
    for (int i = 0; i < 2000; ++i) {
        double raw = static_cast<double>(bounded(rng, 4'000'001)) / 1e6 - 2.0;
        double once = clamp_grade(raw);
        CHECK(clamp_grade(once) == once);
        CHECK(once >= 0.0);
        CHECK(once <= 1.0);
        if (raw >= previous_in) {
            CHECK(once >= previous_out);
        }
        previous_in = raw;
        previous_out = once;
    }
}

TEST_CASE("validate_entry accepts a fully populated entry") {
    MedicationEntry entry{"Metformin", "500 mg", "oral", "twice daily", "with meals",
                          "type 2 diabetes"};
    CHECK(validate_entry(entry).empty());
}

TEST_CASE("validate_entry flags an empty name") {
    MedicationEntry entry{"", "500 mg", "oral", "twice daily", "", "diabetes"};
    auto violations = validate_entry(entry);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0] == EntryViolation::empty_name);
    entry.name = "   ";
    CHECK_FALSE(validate_entry(entry).empty());
}

TEST_CASE("validate_entry allows an empty timing field") {
    MedicationEntry entry{"Lisinopril", "10 mg", "oral", "once daily", "",
                          "hypertension"};
    CHECK(validate_entry(entry).empty());
}

TEST_CASE("model locality follows the provider") {
    CHECK(make_model_id(Provider::openai_compatible, "gpt-4o").locality ==
          Locality::remote);
    CHECK(make_model_id(Provider::anthropic_compatible, "claude-opus-4-1").locality ==
          Locality::remote);
    CHECK(make_model_id(Provider::ollama_compatible, "qwen3:32b").locality ==
          Locality::local);
    CHECK(make_model_id(Provider::scripted, "fake").locality == Locality::local);

    ModelId lying{Provider::ollama_compatible, "qwen3:32b", Locality::remote};
    CHECK_THROWS_AS(validate_model_id(lying), Error);
}

TEST_CASE("make_ensemble sets n and keeps order") {
    auto a = make_model_id(Provider::scripted, "alpha");
    auto b = make_model_id(Provider::scripted, "beta");
    auto config = make_ensemble(Strategy::random, {b, a}, 42);
    CHECK(config.n == 2);
    CHECK(config.members[0].name == "beta");
    CHECK(config.members[1].name == "alpha");
    CHECK(config.seed == 42);
}

TEST_CASE("make_ensemble rejects duplicates for all inputs") {
    auto rng = seeded_rng(11);
    const char* pool[] = {"a", "b", "c", "d"};
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<ModelId> members;
        std::size_t size = 2 + bounded(rng, 4);
        bool has_duplicate = false;
        std::set<std::string> seen;
        for (std::size_t i = 0; i < size; ++i) {
            std::string name = pool[bounded(rng, 4)];
            has_duplicate |= !seen.insert(name).second;
            members.push_back(make_model_id(Provider::scripted, name));
        }
        if (has_duplicate) {
            CHECK_THROWS_AS(make_ensemble(Strategy::random, members, 1), Error);
        } else {
            CHECK(make_ensemble(Strategy::random, members, 1).n ==
                  static_cast<int>(size));
        }
    }
}

TEST_CASE("strategy and provider names round-trip") {
    for (Strategy s : {Strategy::local, Strategy::remote, Strategy::random,
                       Strategy::chemistry}) {
        CHECK(strategy_from_string(to_string(s)) == s);
    }
    CHECK_THROWS_AS(strategy_from_string("HYBRID"), Error);
    for (Provider p : {Provider::openai_compatible, Provider::anthropic_compatible,
                       Provider::ollama_compatible, Provider::scripted}) {
        CHECK(provider_from_string(to_string(p)) == p);
    }
}
