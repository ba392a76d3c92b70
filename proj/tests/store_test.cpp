#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "medrec/rng.hpp"
#include "medrec/store.hpp"

using namespace medrec;
using namespace std::chrono_literals;

namespace {

std::string temp_path(const std::string& tag) {
    static std::atomic<int> counter{0};
    auto dir = std::filesystem::temp_directory_path() / "medrec-store-tests";
    std::filesystem::create_directories(dir);
    return (dir / (tag + "-" + std::to_string(::getpid()) + "-" +
                   std::to_string(counter.fetch_add(1)) + ".tmp"))
        .string();
}

TaskRecord random_record(std::mt19937_64& rng, int index) {
    TaskRecord record;
    record.strategy = static_cast<Strategy>(bounded(rng, 4));
    record.trial = static_cast<int>(bounded(rng, 10));
    record.note_id = "note-" + std::to_string(index);

    std::vector<ModelId> members;
    std::size_t n = 2 + bounded(rng, 3);
    for (std::size_t i = 0; i < n; ++i) {
        members.push_back(make_model_id(Provider::scripted,
                                        "model-" + std::to_string(i)));
    }
    record.ensemble = make_ensemble(record.strategy, members, rng());

    char label = 'A';
    for (std::size_t i = 0; i < n; ++i) {
        GenerationMember member;
        member.model = members[i];
        member.result.model = members[i];
        bool ok = bounded(rng, 10) < 8;
        member.result.outcome = ok ? Outcome::ok
                                   : (bounded(rng, 2) == 0 ? Outcome::transport_failed
                                                           : Outcome::timed_out);
        member.result.elapsed = std::chrono::milliseconds(bounded(rng, 400'000));
        member.result.raw_text = "raw \"text\" with\nnewlines " + std::to_string(rng());
        if (ok) {
            member.label = std::string("Response ") + label++;
            Recommendation rec;
            std::size_t entries = 1 + bounded(rng, 3);
            for (std::size_t e = 0; e < entries; ++e) {
                rec.entries.push_back(
                    {"drug-" + std::to_string(e),
                     std::to_string(100 + bounded(rng, 900)) + " mg", "oral",
                     "once daily", bounded(rng, 2) == 0 ? "" : "with meals",
                     "condition-" + std::to_string(bounded(rng, 5))});
            }
            rec.rationale = bounded(rng, 2) == 0 ? "" : "because";
            member.result.recommendation = rec;
        } else {
            record.failures.push_back({TaskFailure::Phase::generation, members[i],
                                       std::nullopt, member.result.outcome});
        }
        record.generations.push_back(std::move(member));
    }

    ConsensusResult consensus;
    bool any_ok = false;
    for (const auto& member : record.generations) {
        if (!member.result.ok()) continue;
        any_ok = true;
        record.matrix.graders.push_back(member.model.name);
        record.matrix.items.push_back(*member.label);
        record.matrix.cells.push_back({member.model.name, *member.label,
                                       Grade{1.0, GradeKind::implicit_self}});
        consensus.grader_variance[member.model.name] =
            1e-4 + static_cast<double>(bounded(rng, 1000)) / 1e5;
    }
    for (const auto& reviewer : record.generations) {
        if (!reviewer.result.ok()) continue;
        for (const auto& author : record.generations) {
            if (!author.result.ok() || author.model == reviewer.model) continue;
            record.matrix.cells.push_back(
                {reviewer.model.name, *author.label,
                 Grade{clamp_grade(static_cast<double>(bounded(rng, 1'000'001)) / 1e6),
                       GradeKind::explicit_review}});
        }
    }
    if (any_ok) {
        for (const auto& member : record.generations) {
            if (!member.result.ok()) continue;
            consensus.consensus_grade[*member.label] =
                clamp_grade(static_cast<double>(bounded(rng, 1'000'001)) / 1e6);
        }
        consensus.iterations_used = 1 + static_cast<int>(bounded(rng, 50));
        consensus.converged = bounded(rng, 10) < 9;
        record.consensus = consensus;
        const auto& first_ok = *std::find_if(
            record.generations.begin(), record.generations.end(),
            [](const GenerationMember& m) { return m.result.ok(); });
        record.selected = SelectedAnswer{*first_ok.label, *first_ok.result.recommendation};
    } else {
        record.all_generations_failed = true;
    }
    record.timing.started_at = "2026-08-10T00:00:00Z";
    record.timing.finished_at = "2026-08-10T00:00:05Z";
    record.timing.generation_wall_ms = static_cast<std::int64_t>(bounded(rng, 10'000));
    record.timing.evaluation_wall_ms = static_cast<std::int64_t>(bounded(rng, 10'000));
    return record;
}

} // namespace

TEST_CASE("bundled sample dataset loads with twenty validated records") {
    auto dataset = load_dataset(std::string(MEDREC_DATA_DIR) + "/dataset.json");
    CHECK(dataset.records.size() == 20);
    CHECK(dataset.unvalidated);
    CHECK(dataset.warnings.empty());
    auto truth = dataset.truth();
    CHECK(truth.size() == 20);
    CHECK(truth.at("note-001").size() == 1);
    CHECK(truth.at("note-019").size() == 3);
}

TEST_CASE("dataset validation rejects duplicates and empty entries") {
    try {
        dataset_from_json(nlohmann::json::parse(R"({"records": [
            {"id": "a", "vignette": "v", "medications": [{"name": "x"}]},
            {"id": "a", "vignette": "v", "medications": [{"name": "y"}]}]})"));
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::duplicate_id);
    }

    try {
        dataset_from_json(nlohmann::json::parse(R"({"records": [
            {"id": "a", "vignette": "v", "medications": []}]})"));
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::invalid_entry);
    }

    try {
        dataset_from_json(nlohmann::json::parse(R"({"records": [
            {"id": "a", "vignette": "v", "medications": [{"name": "  "}]}]})"));
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::invalid_entry);
    }
}

TEST_CASE("an empty dataset is valid but warns") {
    auto dataset = dataset_from_json(nlohmann::json::parse(R"({"records": []})"));
    CHECK(dataset.records.empty());
    REQUIRE(dataset.warnings.size() == 1);
}

TEST_CASE("dataset re-serialization is byte stable") {
    auto dataset = load_dataset(std::string(MEDREC_DATA_DIR) + "/dataset.json");
    auto first = dataset_to_json(dataset).dump(2);
    auto reloaded = dataset_from_json(nlohmann::json::parse(first));
    auto second = dataset_to_json(reloaded).dump(2);
    CHECK(first == second);
}

TEST_CASE("registry loads, validates and round-trips") {
    auto registry = load_registry(std::string(MEDREC_DATA_DIR) + "/models.json");
    CHECK(registry.models.size() == 14);
    CHECK(registry.find("gemini-2.5-flash")->api_key_env == "GOOGLE_API_KEY");

    auto doc = registry_to_json(registry);
    CHECK(doc["models"].size() == 14);

    Registry duplicate;
    duplicate.models.push_back({make_model_id(Provider::scripted, "same"), {}, {}});
    duplicate.models.push_back({make_model_id(Provider::scripted, "same"), {}, {}});
    CHECK_THROWS_AS(validate_registry(duplicate), Error);
}

TEST_CASE("task records serialize, parse and re-serialize stably") {
    auto rng = seeded_rng(83);
    for (int i = 0; i < 400; ++i) {
        auto record = random_record(rng, i);
        auto first = record_to_json(record);
        auto parsed = record_from_json(first);
        auto second = record_to_json(parsed);
        CHECK(first.dump() == second.dump());
    }
}

TEST_CASE("unknown top-level fields survive a rewrite") {
    auto rng = seeded_rng(89);
    auto record = random_record(rng, 0);
    auto doc = record_to_json(record);
    doc["x_downstream_annotation"] = {{"source", "external tool"}, {"version", 3}};
    auto reloaded = record_from_json(doc);
    auto rewritten = record_to_json(reloaded);
    CHECK(rewritten["x_downstream_annotation"]["version"] == 3);
    CHECK(rewritten.dump() == doc.dump());
}

TEST_CASE("append then load returns a structurally equal record") {
    auto rng = seeded_rng(97);
    auto path = temp_path("roundtrip");
    auto record = random_record(rng, 1);
    {
        RunLogWriter writer(path);
        writer.append(record);
    }
    auto loaded = load_records(path);
    CHECK(loaded.corrupt_lines.empty());
    REQUIRE(loaded.records.size() == 1);
    CHECK(record_to_json(loaded.records[0]).dump() == record_to_json(record).dump());
    std::filesystem::remove(path);
}

TEST_CASE("a truncated line is reported and skipped, not fatal") {
    auto rng = seeded_rng(101);
    auto path = temp_path("corrupt");
    {
        RunLogWriter writer(path);
        for (int i = 0; i < 10; ++i) writer.append(random_record(rng, i));
    }
    // Truncate line 4 in place.
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    in.close();
    lines[3] = lines[3].substr(0, lines[3].size() / 2);
    std::ofstream out(path, std::ios::trunc);
    for (const auto& l : lines) out << l << '\n';
    out.close();

    auto loaded = load_records(path);
    CHECK(loaded.records.size() == 9);
    REQUIRE(loaded.corrupt_lines.size() == 1);
    CHECK(loaded.corrupt_lines[0] == 4);
    std::filesystem::remove(path);
}

TEST_CASE("one writer serializes appends from four threads") {
    auto path = temp_path("concurrent");
    {
        RunLogWriter writer(path);
        std::vector<std::thread> workers;
        for (int w = 0; w < 4; ++w) {
            workers.emplace_back([&writer, w] {
                auto rng = seeded_rng(200 + static_cast<std::uint64_t>(w));
                for (int i = 0; i < 25; ++i) {
                    writer.append(random_record(rng, w * 100 + i));
                }
            });
        }
        for (auto& worker : workers) worker.join();
    }
    auto loaded = load_records(path);
    CHECK(loaded.corrupt_lines.empty());
    CHECK(loaded.records.size() == 100);
    std::filesystem::remove(path);
}

TEST_CASE("the advisory lock admits a single writer per log") {
    auto path = temp_path("locked");
    RunLogWriter first(path);
    try {
        RunLogWriter second(path);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::io_error);
    }
    std::filesystem::remove(path);
}

TEST_CASE("durations and grades survive the wire format exactly") {
    auto rng = seeded_rng(103);
    auto record = random_record(rng, 7);
    auto doc = record_to_json(record);
    auto parsed = record_from_json(doc);
    for (std::size_t i = 0; i < record.generations.size(); ++i) {
        CHECK(parsed.generations[i].result.elapsed ==
              record.generations[i].result.elapsed);
    }
    REQUIRE(parsed.matrix.cells.size() == record.matrix.cells.size());
    for (std::size_t i = 0; i < record.matrix.cells.size(); ++i) {
        CHECK(parsed.matrix.cells[i].grade.value == record.matrix.cells[i].grade.value);
    }
    if (record.consensus) {
        for (const auto& [item, grade] : record.consensus->consensus_grade) {
            CHECK(parsed.consensus->consensus_grade.at(item) == grade);
        }
    }
}
