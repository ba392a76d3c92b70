#include <doctest.h>

#include <cmath>
#include <map>

#include "medrec/consensus.hpp"
#include "medrec/rng.hpp"

using namespace medrec;

namespace {

GradeCell explicit_cell(const std::string& grader, const std::string& item, double v) {
    return {grader, item, Grade{v, GradeKind::explicit_review}};
}

GradeMatrix adversary_fixture() {
    // Graders 1-2 grade both items {0.9, 0.5}; grader 3 grades {0.1, 1.0}.
    GradeMatrix matrix;
    matrix.graders = {"g1", "g2", "g3"};
    matrix.items = {"i1", "i2"};
    matrix.cells = {explicit_cell("g1", "i1", 0.9), explicit_cell("g1", "i2", 0.5),
                    explicit_cell("g2", "i1", 0.9), explicit_cell("g2", "i2", 0.5),
                    explicit_cell("g3", "i1", 0.1), explicit_cell("g3", "i2", 1.0)};
    return matrix;
}

/// Straight-line reimplementation of the consensus recurrence, kept naive
/// on purpose: plain maps, every quantity recomputed from scratch each
/// sweep. Checks the production implementation, so it must not share code
/// with it.
struct OracleResult {
    std::map<std::string, double> grades;
    std::map<std::string, double> variances;
    int iterations = 0;
    bool converged = false;
};

OracleResult oracle_vancouver(const GradeMatrix& matrix, const VancouverParams& p) {
    std::map<std::pair<std::string, std::string>, std::pair<double, double>> cells;
    std::map<std::string, bool> graders;
    std::map<std::string, bool> items;
    for (const auto& cell : matrix.cells) {
        double weight =
            cell.grade.kind == GradeKind::implicit_self ? p.self_grade_weight : 1.0;
        cells[{cell.grader, cell.item}] = {cell.grade.value, weight};
        graders[cell.grader] = true;
        items[cell.item] = true;
    }

    OracleResult result;
    for (const auto& [item, unused] : items) {
        double sum = 0.0;
        int count = 0;
        for (const auto& [key, cell] : cells) {
            if (key.second != item) continue;
            sum += cell.first;
            ++count;
        }
        result.grades[item] = sum / count;
    }
    for (const auto& [grader, unused] : graders) result.variances[grader] = 1.0;

    for (int sweep = 1; sweep <= p.max_iterations; ++sweep) {
        result.iterations = sweep;
        std::map<std::string, double> new_variances;
        for (const auto& [grader, unused] : graders) {
            double total = 0.0;
            int count = 0;
            for (const auto& [key, cell] : cells) {
                if (key.first != grader) continue;
                const std::string& item = key.second;
                double numerator = 0.0;
                double denominator = 0.0;
                for (const auto& [other_key, other_cell] : cells) {
                    if (other_key.second != item || other_key.first == grader) continue;
                    double w = other_cell.second / result.variances[other_key.first];
                    numerator += w * other_cell.first;
                    denominator += w;
                }
                double reference =
                    denominator == 0.0 ? result.grades[item] : numerator / denominator;
                total += (cell.first - reference) * (cell.first - reference);
                ++count;
            }
            new_variances[grader] = std::max(p.variance_floor, total / count);
        }
        std::map<std::string, double> new_grades;
        double delta = 0.0;
        for (const auto& [item, unused] : items) {
            double numerator = 0.0;
            double denominator = 0.0;
            for (const auto& [key, cell] : cells) {
                if (key.second != item) continue;
                double w = cell.second / new_variances[key.first];
                numerator += w * cell.first;
                denominator += w;
            }
            new_grades[item] = denominator == 0.0 ? result.grades[item]
                                                  : numerator / denominator;
            delta = std::max(delta, std::abs(new_grades[item] - result.grades[item]));
        }
        result.variances = new_variances;
        result.grades = new_grades;
        if (delta < p.epsilon) {
            result.converged = true;
            break;
        }
    }
    return result;
}

GradeMatrix random_matrix(std::mt19937_64& rng, bool with_self_cells) {
    std::size_t graders = 2 + bounded(rng, 4);
    std::size_t items = 2 + bounded(rng, 4);
    GradeMatrix matrix;
    for (std::size_t g = 0; g < graders; ++g) {
        matrix.graders.push_back("grader" + std::to_string(g));
    }
    for (std::size_t i = 0; i < items; ++i) {
        matrix.items.push_back("item" + std::to_string(i));
    }
    auto grade = [&rng] { return static_cast<double>(bounded(rng, 1'000'001)) / 1e6; };
    for (std::size_t g = 0; g < graders; ++g) {
        for (std::size_t i = 0; i < items; ++i) {
            if (bounded(rng, 10) < 7) {
                GradeKind kind = with_self_cells && g == i
                                     ? GradeKind::implicit_self
                                     : GradeKind::explicit_review;
                matrix.cells.push_back({matrix.graders[g], matrix.items[i],
                                        Grade{grade(), kind}});
            }
        }
    }
    // Patch empty rows and columns so the preconditions hold.
    for (std::size_t i = 0; i < items; ++i) {
        bool any = false;
        for (const auto& cell : matrix.cells) any |= cell.item == matrix.items[i];
        if (!any) {
            matrix.cells.push_back(
                {matrix.graders[bounded(rng, graders)], matrix.items[i],
                 Grade{grade(), GradeKind::explicit_review}});
        }
    }
    for (std::size_t g = 0; g < graders; ++g) {
        bool any = false;
        for (const auto& cell : matrix.cells) any |= cell.grader == matrix.graders[g];
        if (!any) {
            matrix.cells.push_back(
                {matrix.graders[g], matrix.items[bounded(rng, items)],
                 Grade{grade(), GradeKind::explicit_review}});
        }
    }
    return matrix;
}

} // namespace

TEST_CASE("unanimity is a fixed point reached within two iterations") {
    for (std::size_t graders = 2; graders <= 5; ++graders) {
        for (std::size_t items = 1; items <= 4; ++items) {
            GradeMatrix matrix;
            for (std::size_t g = 0; g < graders; ++g) {
                for (std::size_t i = 0; i < items; ++i) {
                    matrix.cells.push_back(explicit_cell("g" + std::to_string(g),
                                                         "i" + std::to_string(i), 0.8));
                }
            }
            auto result = vancouver(matrix);
            CHECK(result.converged);
            CHECK(result.iterations_used <= 2);
            for (const auto& [item, grade] : result.consensus_grade) {
                CHECK(grade == doctest::Approx(0.8).epsilon(1e-12));
            }
            for (const auto& [grader, variance] : result.grader_variance) {
                CHECK(variance == doctest::Approx(1e-4).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("single grader, single item") {
    GradeMatrix matrix;
    matrix.cells = {explicit_cell("only", "item", 0.6)};
    auto result = vancouver(matrix);
    CHECK(result.consensus_grade.at("item") == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(result.grader_variance.at("only") == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(result.converged);
}

TEST_CASE("noisy grader is discounted and consensus tracks the accurate pair") {
    auto result = vancouver(adversary_fixture());

    // Frozen from an independent straight-line run of the recurrence.
    CHECK(result.consensus_grade.at("i1") ==
          doctest::Approx(0.899910122458).epsilon(1e-9));
    CHECK(result.consensus_grade.at("i2") ==
          doctest::Approx(0.500056173464).epsilon(1e-9));
    CHECK(result.grader_variance.at("g1") == doctest::Approx(1e-4).epsilon(1e-9));
    CHECK(result.grader_variance.at("g2") == doctest::Approx(1e-4).epsilon(1e-9));
    CHECK(result.grader_variance.at("g3") == doctest::Approx(0.445).epsilon(1e-9));
    CHECK(result.converged);
    CHECK(result.iterations_used == 5);

    CHECK(result.grader_variance.at("g3") > result.grader_variance.at("g1"));
    // Strictly closer to the accurate pair than the unweighted mean.
    double unweighted_i1 = (0.9 + 0.9 + 0.1) / 3.0;
    double unweighted_i2 = (0.5 + 0.5 + 1.0) / 3.0;
    CHECK(std::abs(result.consensus_grade.at("i1") - 0.9) <
          std::abs(unweighted_i1 - 0.9));
    CHECK(std::abs(result.consensus_grade.at("i2") - 0.5) <
          std::abs(unweighted_i2 - 0.5));
}

TEST_CASE("leave_one_out examples") {
    auto matrix = adversary_fixture();
    std::map<std::string, double> unit{{"g1", 1.0}, {"g2", 1.0}, {"g3", 1.0}};

    SUBCASE("grader absent from the item equals the full weighted mean") {
        GradeMatrix partial;
        partial.cells = {explicit_cell("a", "x", 0.4), explicit_cell("b", "x", 0.8)};
        std::map<std::string, double> v{{"a", 1.0}, {"b", 1.0}, {"c", 2.0}};
        auto excluded = leave_one_out(partial, "x", "c", v);
        REQUIRE(excluded.has_value());
        CHECK(*excluded == doctest::Approx(0.6).epsilon(1e-12));
    }

    SUBCASE("two equal-variance graders, exclude the first") {
        GradeMatrix partial;
        partial.cells = {explicit_cell("a", "x", 0.4), explicit_cell("b", "x", 0.8)};
        std::map<std::string, double> v{{"a", 1.0}, {"b", 1.0}};
        auto excluded = leave_one_out(partial, "x", "a", v);
        REQUIRE(excluded.has_value());
        CHECK(*excluded == doctest::Approx(0.8).epsilon(1e-12));
    }

    SUBCASE("precision weighting with a floor-variance pair") {
        GradeMatrix partial;
        partial.cells = {explicit_cell("a", "x", 0.6), explicit_cell("b", "x", 0.6),
                         explicit_cell("c", "x", 0.0)};
        std::map<std::string, double> v{{"a", 1e-4}, {"b", 1e-4}, {"c", 4e-4}};
        auto excluded = leave_one_out(partial, "x", "c", v);
        REQUIRE(excluded.has_value());
        CHECK(*excluded == doctest::Approx(0.6).epsilon(1e-9));
    }

    SUBCASE("only grader of an item yields no leave-one-out mean") {
        GradeMatrix partial;
        partial.cells = {explicit_cell("a", "x", 0.4)};
        CHECK_FALSE(leave_one_out(partial, "x", "a", unit).has_value());
    }
    (void)matrix;
}

TEST_CASE("empty and isolated matrices are rejected") {
    GradeMatrix empty;
    CHECK_THROWS_AS(vancouver(empty), Error);

    GradeMatrix isolated;
    isolated.items = {"graded", "silent"};
    isolated.cells = {explicit_cell("a", "graded", 0.5)};
    try {
        vancouver(isolated);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::isolated_item);
    }
}

TEST_CASE("consensus grades stay within each item's grade range") {
    auto rng = seeded_rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        auto matrix = random_matrix(rng, false);
        auto result = vancouver(matrix);
        for (const auto& item : result.consensus_grade) {
            double lowest = 1.0;
            double highest = 0.0;
            for (const auto& cell : matrix.cells) {
                if (cell.item != item.first) continue;
                lowest = std::min(lowest, cell.grade.value);
                highest = std::max(highest, cell.grade.value);
            }
            CHECK(item.second >= lowest - 1e-12);
            CHECK(item.second <= highest + 1e-12);
        }
    }
}

TEST_CASE("relabeling graders and items permutes the output identically") {
    auto rng = seeded_rng(37);
    for (int trial = 0; trial < 50; ++trial) {
        auto matrix = random_matrix(rng, false);
        auto result = vancouver(matrix);

        auto rename = [](const std::string& name) { return "x-" + name; };
        GradeMatrix relabeled;
        for (const auto& cell : matrix.cells) {
            relabeled.cells.push_back(
                {rename(cell.grader), rename(cell.item), cell.grade});
        }
        auto relabeled_result = vancouver(relabeled);
        CHECK(relabeled_result.iterations_used == result.iterations_used);
        for (const auto& [item, grade] : result.consensus_grade) {
            CHECK(relabeled_result.consensus_grade.at(rename(item)) ==
                  doctest::Approx(grade).epsilon(1e-12));
        }
        for (const auto& [grader, variance] : result.grader_variance) {
            CHECK(relabeled_result.grader_variance.at(rename(grader)) ==
                  doctest::Approx(variance).epsilon(1e-12));
        }
    }
}

TEST_CASE("pushing one grader's grades away from consensus never lowers its variance") {
    auto rng = seeded_rng(41);
    for (int trial = 0; trial < 60; ++trial) {
        auto matrix = random_matrix(rng, false);
        // Keep grades centered so the away-push below stays inside [0, 1].
        for (auto& cell : matrix.cells) {
            cell.grade.value = 0.25 + cell.grade.value / 2.0;
        }
        auto baseline = vancouver(matrix);

        const std::string victim = matrix.graders[bounded(rng, matrix.graders.size())];
        GradeMatrix perturbed = matrix;
        for (auto& cell : perturbed.cells) {
            if (cell.grader != victim) continue;
            // Push away from the victim's leave-one-out reference, the
            // quantity its variance is estimated against.
            auto loo = leave_one_out(matrix, cell.item, victim,
                                     baseline.grader_variance);
            double reference = loo ? *loo : baseline.consensus_grade.at(cell.item);
            cell.grade.value = cell.grade.value >= reference
                                   ? std::min(1.0, cell.grade.value + 0.2)
                                   : std::max(0.0, cell.grade.value - 0.2);
        }
        auto result = vancouver(perturbed);
        if (baseline.grader_variance.count(victim) == 0) continue;
        CHECK(result.grader_variance.at(victim) >=
              baseline.grader_variance.at(victim) - 1e-9);
    }
}

TEST_CASE("implementation matches the straight-line oracle") {
    auto rng = seeded_rng(43);
    for (int trial = 0; trial < 200; ++trial) {
        bool with_self = trial % 3 == 0;
        auto matrix = random_matrix(rng, with_self);
        VancouverParams params;
        if (trial % 5 == 0) params.self_grade_weight = 0.5;
        auto result = vancouver(matrix, params);
        auto oracle = oracle_vancouver(matrix, params);
        CHECK(result.iterations_used == oracle.iterations);
        CHECK(result.converged == oracle.converged);
        for (const auto& [item, grade] : oracle.grades) {
            CHECK(result.consensus_grade.at(item) ==
                  doctest::Approx(grade).epsilon(1e-9));
        }
        for (const auto& [grader, variance] : oracle.variances) {
            CHECK(result.grader_variance.at(grader) ==
                  doctest::Approx(variance).epsilon(1e-9));
        }
    }
}
