#include "medrec/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace medrec {

GroundTruth Dataset::truth() const {
    GroundTruth map;
    for (const auto& record : records) {
        map[record.note.id] = record.medications;
    }
    return map;
}

namespace {

nlohmann::json parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::io_error, "cannot open '" + path + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    nlohmann::json doc = nlohmann::json::parse(buffer.str(), nullptr, false);
    if (doc.is_discarded()) {
        throw Error(ErrorCode::parse_error, "invalid JSON in '" + path + "'");
    }
    return doc;
}

std::string require_string(const nlohmann::json& doc, const char* key) {
    auto it = doc.find(key);
    if (it == doc.end() || !it->is_string()) {
        throw Error(ErrorCode::parse_error, std::string("missing string field '") + key + "'");
    }
    return it->get<std::string>();
}

} // namespace

nlohmann::json entry_to_json(const MedicationEntry& entry) {
    return {{"name", entry.name},         {"dosage", entry.dosage},
            {"route", entry.route},       {"frequency", entry.frequency},
            {"timing", entry.timing},     {"indication", entry.indication}};
}

MedicationEntry entry_from_json(const nlohmann::json& doc) {
    MedicationEntry entry;
    entry.name = require_string(doc, "name");
    entry.dosage = doc.value("dosage", std::string{});
    entry.route = doc.value("route", std::string{});
    entry.frequency = doc.value("frequency", std::string{});
    entry.timing = doc.value("timing", std::string{});
    entry.indication = doc.value("indication", std::string{});
    return entry;
}

nlohmann::json recommendation_to_json(const Recommendation& rec) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& entry : rec.entries) entries.push_back(entry_to_json(entry));
    return {{"entries", std::move(entries)}, {"rationale", rec.rationale}};
}

Recommendation recommendation_from_json(const nlohmann::json& doc) {
    Recommendation rec;
    for (const auto& item : doc.at("entries")) {
        rec.entries.push_back(entry_from_json(item));
    }
    rec.rationale = doc.value("rationale", std::string{});
    return rec;
}

nlohmann::json model_id_to_json(const ModelId& id) {
    return {{"name", id.name},
            {"provider", to_string(id.provider)},
            {"locality", to_string(id.locality)}};
}

ModelId model_id_from_json(const nlohmann::json& doc) {
    ModelId id;
    id.name = require_string(doc, "name");
    id.provider = provider_from_string(require_string(doc, "provider"));
    id.locality = locality_from_string(require_string(doc, "locality"));
    return id;
}

nlohmann::json ensemble_to_json(const EnsembleConfig& config) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& member : config.members) members.push_back(model_id_to_json(member));
    return {{"strategy", to_string(config.strategy)},
            {"members", std::move(members)},
            {"n", config.n},
            {"seed", config.seed}};
}

EnsembleConfig ensemble_from_json(const nlohmann::json& doc) {
    EnsembleConfig config;
    config.strategy = strategy_from_string(require_string(doc, "strategy"));
    for (const auto& member : doc.at("members")) {
        config.members.push_back(model_id_from_json(member));
    }
    config.n = doc.at("n").get<int>();
    config.seed = doc.at("seed").get<std::uint64_t>();
    return config;
}

nlohmann::json matrix_to_json(const GradeMatrix& matrix) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& cell : matrix.cells) {
        cells.push_back({{"grader", cell.grader},
                         {"item", cell.item},
                         {"value", cell.grade.value},
                         {"kind", to_string(cell.grade.kind)}});
    }
    return {{"graders", matrix.graders}, {"items", matrix.items},
            {"cells", std::move(cells)}};
}

GradeMatrix matrix_from_json(const nlohmann::json& doc) {
    GradeMatrix matrix;
    matrix.graders = doc.at("graders").get<std::vector<std::string>>();
    matrix.items = doc.at("items").get<std::vector<std::string>>();
    for (const auto& cell : doc.at("cells")) {
        matrix.cells.push_back(
            GradeCell{cell.at("grader").get<std::string>(),
                      cell.at("item").get<std::string>(),
                      Grade{cell.at("value").get<double>(),
                            grade_kind_from_string(cell.at("kind").get<std::string>())}});
    }
    return matrix;
}

namespace {

nlohmann::json consensus_to_json(const ConsensusResult& consensus) {
    return {{"grades", consensus.consensus_grade},
            {"variances", consensus.grader_variance},
            {"iterations", consensus.iterations_used},
            {"converged", consensus.converged}};
}

ConsensusResult consensus_from_json(const nlohmann::json& doc) {
    ConsensusResult consensus;
    consensus.consensus_grade = doc.at("grades").get<std::map<std::string, double>>();
    consensus.grader_variance = doc.at("variances").get<std::map<std::string, double>>();
    consensus.iterations_used = doc.at("iterations").get<int>();
    consensus.converged = doc.at("converged").get<bool>();
    return consensus;
}

nlohmann::json generation_to_json(const GenerationMember& member) {
    nlohmann::json doc{{"model", model_id_to_json(member.model)},
                       {"outcome", to_string(member.result.outcome)},
                       {"elapsed_ms", member.result.elapsed.count()},
                       {"raw_text", member.result.raw_text}};
    if (member.label) doc["label"] = *member.label;
    if (member.result.recommendation) {
        doc["recommendation"] = recommendation_to_json(*member.result.recommendation);
    }
    return doc;
}

GenerationMember generation_from_json(const nlohmann::json& doc) {
    GenerationMember member;
    member.model = model_id_from_json(doc.at("model"));
    member.result.model = member.model;
    member.result.outcome = outcome_from_string(require_string(doc, "outcome"));
    member.result.elapsed =
        std::chrono::milliseconds(doc.at("elapsed_ms").get<std::int64_t>());
    member.result.raw_text = doc.value("raw_text", std::string{});
    if (auto it = doc.find("label"); it != doc.end()) {
        member.label = it->get<std::string>();
    }
    if (auto it = doc.find("recommendation"); it != doc.end()) {
        member.result.recommendation = recommendation_from_json(*it);
    }
    return member;
}

nlohmann::json failure_to_json(const TaskFailure& failure) {
    nlohmann::json doc{{"phase", to_string(failure.phase)},
                       {"model", model_id_to_json(failure.model)},
                       {"outcome", to_string(failure.outcome)}};
    if (failure.item) doc["item"] = *failure.item;
    return doc;
}

TaskFailure failure_from_json(const nlohmann::json& doc) {
    TaskFailure failure;
    std::string phase = require_string(doc, "phase");
    failure.phase = phase == "generation" ? TaskFailure::Phase::generation
                                          : TaskFailure::Phase::review;
    failure.model = model_id_from_json(doc.at("model"));
    failure.outcome = outcome_from_string(require_string(doc, "outcome"));
    if (auto it = doc.find("item"); it != doc.end()) failure.item = it->get<std::string>();
    return failure;
}

const std::set<std::string>& known_record_keys() {
    static const std::set<std::string> keys{
        "schema_version", "strategy",  "trial",    "note_id",
        "ensemble",       "generations", "grade_matrix", "consensus",
        "selected",       "failures",  "timing",   "all_generations_failed"};
    return keys;
}

} // namespace

nlohmann::json record_to_json(const TaskRecord& record) {
    nlohmann::json doc;
    doc["schema_version"] = record.schema_version;
    doc["strategy"] = to_string(record.strategy);
    doc["trial"] = record.trial;
    doc["note_id"] = record.note_id;
    doc["ensemble"] = ensemble_to_json(record.ensemble);
    nlohmann::json generations = nlohmann::json::array();
    for (const auto& member : record.generations) {
        generations.push_back(generation_to_json(member));
    }
    doc["generations"] = std::move(generations);
    doc["grade_matrix"] = matrix_to_json(record.matrix);
    doc["consensus"] =
        record.consensus ? consensus_to_json(*record.consensus) : nlohmann::json{};
    if (record.selected) {
        doc["selected"] = {
            {"label", record.selected->label},
            {"recommendation", recommendation_to_json(record.selected->recommendation)}};
    } else {
        doc["selected"] = nullptr;
    }
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& failure : record.failures) {
        failures.push_back(failure_to_json(failure));
    }
    doc["failures"] = std::move(failures);
    doc["timing"] = {{"started_at", record.timing.started_at},
                     {"finished_at", record.timing.finished_at},
                     {"generation_wall_ms", record.timing.generation_wall_ms},
                     {"evaluation_wall_ms", record.timing.evaluation_wall_ms},
                     {"consensus_wall_ms", record.timing.consensus_wall_ms}};
    doc["all_generations_failed"] = record.all_generations_failed;
    for (const auto& [key, value] : record.extra.items()) {
        if (!doc.contains(key)) doc[key] = value;
    }
    return doc;
}

TaskRecord record_from_json(const nlohmann::json& doc) {
    TaskRecord record;
    record.schema_version = doc.at("schema_version").get<int>();
    record.strategy = strategy_from_string(require_string(doc, "strategy"));
    record.trial = doc.at("trial").get<int>();
    record.note_id = require_string(doc, "note_id");
    record.ensemble = ensemble_from_json(doc.at("ensemble"));
    for (const auto& member : doc.at("generations")) {
        record.generations.push_back(generation_from_json(member));
    }
    record.matrix = matrix_from_json(doc.at("grade_matrix"));
    if (auto it = doc.find("consensus"); it != doc.end() && !it->is_null()) {
        record.consensus = consensus_from_json(*it);
    }
    if (auto it = doc.find("selected"); it != doc.end() && !it->is_null()) {
        record.selected =
            SelectedAnswer{it->at("label").get<std::string>(),
                           recommendation_from_json(it->at("recommendation"))};
    }
    for (const auto& failure : doc.at("failures")) {
        record.failures.push_back(failure_from_json(failure));
    }
    const auto& timing = doc.at("timing");
    record.timing.started_at = timing.value("started_at", std::string{});
    record.timing.finished_at = timing.value("finished_at", std::string{});
    record.timing.generation_wall_ms = timing.value("generation_wall_ms", std::int64_t{0});
    record.timing.evaluation_wall_ms = timing.value("evaluation_wall_ms", std::int64_t{0});
    record.timing.consensus_wall_ms = timing.value("consensus_wall_ms", std::int64_t{0});
    record.all_generations_failed = doc.value("all_generations_failed", false);
    for (const auto& [key, value] : doc.items()) {
        if (known_record_keys().count(key) == 0) record.extra[key] = value;
    }
    return record;
}

Dataset dataset_from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("records") || !doc["records"].is_array()) {
        throw Error(ErrorCode::parse_error, "dataset must carry a records array");
    }
    Dataset dataset;
    dataset.unvalidated = doc.value("unvalidated", false);
    dataset.description = doc.value("description", std::string{});
    std::set<std::string> ids;
    for (const auto& item : doc["records"]) {
        DatasetRecord record;
        record.note.id = require_string(item, "id");
        record.note.vignette = require_string(item, "vignette");
        if (record.note.vignette.empty()) {
            throw Error(ErrorCode::invalid_entry,
                        "record '" + record.note.id + "': empty vignette");
        }
        if (!ids.insert(record.note.id).second) {
            throw Error(ErrorCode::duplicate_id,
                        "duplicate record id '" + record.note.id + "'");
        }
        auto meds = item.find("medications");
        if (meds == item.end() || !meds->is_array() || meds->empty()) {
            throw Error(ErrorCode::invalid_entry,
                        "record '" + record.note.id + "': needs at least one medication");
        }
        for (const auto& med : *meds) {
            MedicationEntry entry = entry_from_json(med);
            auto violations = validate_entry(entry);
            if (!violations.empty()) {
                throw Error(ErrorCode::invalid_entry,
                            "record '" + record.note.id + "': " +
                                to_string(violations.front()));
            }
            record.medications.push_back(std::move(entry));
        }
        dataset.records.push_back(std::move(record));
    }
    if (dataset.records.empty()) {
        dataset.warnings.push_back("dataset has no records");
    }
    return dataset;
}

Dataset load_dataset(const std::string& path) {
    return dataset_from_json(parse_file(path));
}

nlohmann::json dataset_to_json(const Dataset& dataset) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& record : dataset.records) {
        nlohmann::json meds = nlohmann::json::array();
        for (const auto& entry : record.medications) meds.push_back(entry_to_json(entry));
        records.push_back({{"id", record.note.id},
                           {"vignette", record.note.vignette},
                           {"medications", std::move(meds)}});
    }
    nlohmann::json doc{{"records", std::move(records)}};
    if (dataset.unvalidated) doc["unvalidated"] = true;
    if (!dataset.description.empty()) doc["description"] = dataset.description;
    return doc;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::io_error, "cannot write '" + path + "'");
    }
    out << dataset_to_json(dataset).dump(2) << '\n';
}

Registry load_registry(const std::string& path) {
    nlohmann::json doc = parse_file(path);
    if (!doc.contains("models") || !doc["models"].is_array()) {
        throw Error(ErrorCode::parse_error, "registry must carry a models array");
    }
    Registry registry;
    for (const auto& item : doc["models"]) {
        RegistryEntry entry;
        entry.id.name = require_string(item, "name");
        entry.id.provider = provider_from_string(require_string(item, "provider"));
        entry.id.locality = item.contains("locality")
                                ? locality_from_string(item["locality"].get<std::string>())
                                : expected_locality(entry.id.provider);
        if (auto it = item.find("base_url"); it != item.end() && it->is_string()) {
            entry.base_url = it->get<std::string>();
        }
        if (auto it = item.find("api_key_env"); it != item.end() && it->is_string()) {
            entry.api_key_env = it->get<std::string>();
        }
        if (auto it = item.find("temperature"); it != item.end() && it->is_number()) {
            entry.temperature = it->get<double>();
        }
        registry.models.push_back(std::move(entry));
    }
    validate_registry(registry);
    return registry;
}

nlohmann::json registry_to_json(const Registry& registry) {
    nlohmann::json models = nlohmann::json::array();
    for (const auto& entry : registry.models) {
        nlohmann::json item = model_id_to_json(entry.id);
        if (entry.base_url) item["base_url"] = *entry.base_url;
        if (entry.api_key_env) item["api_key_env"] = *entry.api_key_env;
        if (entry.temperature) item["temperature"] = *entry.temperature;
        models.push_back(std::move(item));
    }
    return {{"models", std::move(models)}};
}

RunLogWriter::RunLogWriter(const std::string& path) : path_(path) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd_ < 0) {
        throw Error(ErrorCode::io_error,
                    "cannot open log '" + path + "': " + std::strerror(errno));
    }
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw Error(ErrorCode::io_error, "log '" + path + "' is locked by another writer");
    }
}

RunLogWriter::~RunLogWriter() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

void RunLogWriter::append(const TaskRecord& record) {
    std::string line = record_to_json(record).dump();
    line.push_back('\n');
    std::lock_guard<std::mutex> lock(mutex_);
    std::size_t written = 0;
    while (written < line.size()) {
        ssize_t n = ::write(fd_, line.data() + written, line.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorCode::io_error,
                        "write to '" + path_ + "' failed: " + std::strerror(errno));
        }
        written += static_cast<std::size_t>(n);
    }
}

LoadedLog load_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::io_error, "cannot open log '" + path + "'");
    }
    LoadedLog log;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
        if (doc.is_discarded()) {
            log.corrupt_lines.push_back(line_number);
            continue;
        }
        try {
            log.records.push_back(record_from_json(doc));
        } catch (const std::exception&) {
            log.corrupt_lines.push_back(line_number);
        }
    }
    return log;
}

LoadedLog load_many(const std::vector<std::string>& paths) {
    LoadedLog merged;
    for (const auto& path : paths) {
        LoadedLog log = load_records(path);
        merged.records.insert(merged.records.end(),
                              std::make_move_iterator(log.records.begin()),
                              std::make_move_iterator(log.records.end()));
        merged.corrupt_lines.insert(merged.corrupt_lines.end(), log.corrupt_lines.begin(),
                                    log.corrupt_lines.end());
    }
    return merged;
}

} // namespace medrec
