#pragma once

#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "medrec/metrics.hpp"
#include "medrec/pipeline.hpp"
#include "medrec/sampling.hpp"

namespace medrec {

struct DatasetRecord {
    ClinicalNote note;
    std::vector<MedicationEntry> medications;
};

struct Dataset {
    std::vector<DatasetRecord> records;
    bool unvalidated = false;
    std::string description;
    std::vector<std::string> warnings;

    GroundTruth truth() const;
};

/// Loads and validates dataset.json. Throws Error(parse_error),
/// Error(duplicate_id) or Error(invalid_entry); an empty records array is
/// valid and only warns.
Dataset load_dataset(const std::string& path);

nlohmann::json dataset_to_json(const Dataset& dataset);
Dataset dataset_from_json(const nlohmann::json& doc);
void save_dataset(const Dataset& dataset, const std::string& path);

/// Loads and validates models.json.
Registry load_registry(const std::string& path);
nlohmann::json registry_to_json(const Registry& registry);

nlohmann::json model_id_to_json(const ModelId& id);
ModelId model_id_from_json(const nlohmann::json& doc);
nlohmann::json entry_to_json(const MedicationEntry& entry);
MedicationEntry entry_from_json(const nlohmann::json& doc);
nlohmann::json recommendation_to_json(const Recommendation& rec);
Recommendation recommendation_from_json(const nlohmann::json& doc);
nlohmann::json ensemble_to_json(const EnsembleConfig& config);
EnsembleConfig ensemble_from_json(const nlohmann::json& doc);
nlohmann::json matrix_to_json(const GradeMatrix& matrix);
GradeMatrix matrix_from_json(const nlohmann::json& doc);

/// Full task record <-> one JSONL line. Durations serialize as integer
/// milliseconds and grades as shortest round-trip decimals, so
/// parse(serialize(r)) reproduces every value bit-exactly. Unknown
/// top-level fields survive a rewrite through TaskRecord::extra.
nlohmann::json record_to_json(const TaskRecord& record);
TaskRecord record_from_json(const nlohmann::json& doc);

/// Append-only JSONL log with a single-writer advisory lock (flock). Each
/// append writes one whole line; concurrent append() calls serialize on an
/// internal mutex.
class RunLogWriter {
public:
    explicit RunLogWriter(const std::string& path);
    ~RunLogWriter();

    RunLogWriter(const RunLogWriter&) = delete;
    RunLogWriter& operator=(const RunLogWriter&) = delete;

    void append(const TaskRecord& record);
    const std::string& path() const { return path_; }

private:
    std::string path_;
    int fd_ = -1;
    std::mutex mutex_;
};

struct LoadedLog {
    std::vector<TaskRecord> records;
    /// 1-based numbers of lines that failed to parse; reported, not fatal.
    std::vector<int> corrupt_lines;
};

LoadedLog load_records(const std::string& path);

/// Convenience: concatenates several logs, collecting corrupt lines.
LoadedLog load_many(const std::vector<std::string>& paths);

} // namespace medrec
