#include "medrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

namespace medrec {

EfficiencyReport efficiency(const std::vector<TaskRecord>& records) {
    EfficiencyReport report;
    std::int64_t total_ms = 0;
    std::map<std::string, std::int64_t> per_model_ms;
    for (const auto& record : records) {
        for (const auto& member : record.generations) {
            report.attempts += 1;
            total_ms += member.result.elapsed.count();
            per_model_ms[member.model.name] += member.result.elapsed.count();
            report.per_model_attempts[member.model.name] += 1;
        }
    }
    if (report.attempts == 0) {
        throw Error(ErrorCode::no_data, "no generation attempts in records");
    }
    report.mean = std::chrono::milliseconds(total_ms / report.attempts);
    for (const auto& [name, ms] : per_model_ms) {
        report.per_model_mean[name] =
            std::chrono::milliseconds(ms / report.per_model_attempts[name]);
    }
    return report;
}

namespace {

std::optional<double> task_f1(const TaskRecord& record, const GroundTruth& truth,
                              const ScoringParams& scoring) {
    if (!record.selected) return std::nullopt;
    auto it = truth.find(record.note_id);
    if (it == truth.end()) {
        throw Error(ErrorCode::missing_ground_truth,
                    "no ground truth for note '" + record.note_id + "'");
    }
    return score_recommendation(record.selected->recommendation, it->second, scoring).f1;
}

double task_quality(const TaskRecord& record) {
    if (!record.selected || !record.consensus) return 0.0;
    auto it = record.consensus->consensus_grade.find(record.selected->label);
    return it == record.consensus->consensus_grade.end() ? 0.0 : it->second;
}

} // namespace

double effectiveness(const std::vector<TaskRecord>& records, const GroundTruth& truth,
                     const ScoringParams& scoring) {
    if (records.empty()) {
        throw Error(ErrorCode::no_data, "no task records");
    }
    double sum = 0.0;
    for (const auto& record : records) {
        auto f1 = task_f1(record, truth, scoring);
        sum += f1.value_or(0.0);
    }
    return sum / static_cast<double>(records.size());
}

double stability(const std::vector<TaskRecord>& records) {
    if (records.size() < 2) {
        throw Error(ErrorCode::too_few_tasks, "stability needs at least two tasks");
    }
    std::vector<double> qualities;
    qualities.reserve(records.size());
    for (const auto& record : records) qualities.push_back(task_quality(record));

    double mean = 0.0;
    for (double q : qualities) mean += q;
    mean /= static_cast<double>(qualities.size());
    double ss = 0.0;
    for (double q : qualities) ss += (q - mean) * (q - mean);
    double sample_std = std::sqrt(ss / static_cast<double>(qualities.size() - 1));
    return std::max(0.0, 1.0 - sample_std);
}

double calibration(const std::vector<TaskRecord>& records) {
    double total_variance = 0.0;
    int responses = 0;
    for (const auto& record : records) {
        std::map<std::string, std::vector<double>> grades_by_item;
        for (const auto& cell : record.matrix.cells) {
            if (cell.grade.kind != GradeKind::explicit_review) continue;
            grades_by_item[cell.item].push_back(cell.grade.value);
        }
        for (const auto& [item, grades] : grades_by_item) {
            if (grades.size() < 2) continue;
            double mean = 0.0;
            for (double g : grades) mean += g;
            mean /= static_cast<double>(grades.size());
            double var = 0.0;
            for (double g : grades) var += (g - mean) * (g - mean);
            // The handful of reviews a response gets is its whole
            // population, hence population variance.
            total_variance += var / static_cast<double>(grades.size());
            ++responses;
        }
    }
    if (responses == 0) {
        throw Error(ErrorCode::no_multiply_graded_responses,
                    "no response carries two explicit grades");
    }
    return total_variance / static_cast<double>(responses);
}

std::string format_duration(std::chrono::milliseconds d) {
    std::int64_t total_seconds =
        static_cast<std::int64_t>(std::llround(static_cast<double>(d.count()) / 1000.0));
    std::int64_t hours = total_seconds / 3600;
    std::int64_t minutes = (total_seconds % 3600) / 60;
    std::int64_t seconds = total_seconds % 60;
    std::ostringstream out;
    if (hours > 0) {
        out << hours << " hours, " << minutes << " minutes and " << seconds
            << " seconds";
    } else if (minutes > 0) {
        out << minutes << " minutes and " << seconds << " seconds";
    } else {
        out << seconds << " seconds";
    }
    return out.str();
}

StrategyReport build_strategy_report(Strategy strategy,
                                     const std::vector<TaskRecord>& records,
                                     const GroundTruth& truth,
                                     const ScoringParams& scoring) {
    StrategyReport report;
    report.strategy = strategy;
    report.tasks = static_cast<int>(records.size());

    std::set<int> trials;
    for (const auto& record : records) {
        trials.insert(record.trial);
        for (const auto& member : record.generations) {
            if (member.result.ok()) ++report.answers;
        }
        report.failures += static_cast<int>(record.failures.size());

        PerTaskRow row;
        row.strategy = record.strategy;
        row.trial = record.trial;
        row.note_id = record.note_id;
        for (const auto& member : record.generations) {
            if (member.result.ok()) ++row.ok_responses;
        }
        row.failures = static_cast<int>(record.failures.size());
        if (record.selected) {
            row.selected_label = record.selected->label;
            row.selected_consensus = task_quality(record);
        }
        row.f1 = task_f1(record, truth, scoring);
        report.rows.push_back(std::move(row));
    }
    report.trials = static_cast<int>(trials.size());

    try {
        report.mean_elapsed = efficiency(records).mean;
    } catch (const Error&) {
    }
    try {
        report.effectiveness = effectiveness(records, truth, scoring);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::missing_ground_truth) throw;
    }
    try {
        report.stability = stability(records);
    } catch (const Error&) {
    }
    try {
        report.calibration = calibration(records);
    } catch (const Error&) {
    }
    return report;
}

namespace {

std::string fixed3(std::optional<double> value) {
    if (!value) return "-";
    std::ostringstream out;
    out << std::fixed << std::setprecision(3) << *value;
    return out.str();
}

} // namespace

std::string report_to_text(const std::vector<StrategyReport>& reports) {
    std::vector<std::vector<std::string>> table;
    table.push_back({"strategy", "trials", "tasks", "answers", "failures", "efficiency",
                     "effectiveness", "stability", "calibration"});
    for (const auto& report : reports) {
        table.push_back({to_string(report.strategy), std::to_string(report.trials),
                         std::to_string(report.tasks), std::to_string(report.answers),
                         std::to_string(report.failures),
                         report.mean_elapsed ? format_duration(*report.mean_elapsed) : "-",
                         fixed3(report.effectiveness), fixed3(report.stability),
                         fixed3(report.calibration)});
    }
    std::vector<std::size_t> widths(table[0].size(), 0);
    for (const auto& row : table) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            widths[i] = std::max(widths[i], row[i].size());
        }
    }
    std::ostringstream out;
    for (const auto& row : table) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out << std::left << std::setw(static_cast<int>(widths[i])) << row[i];
            out << (i + 1 == row.size() ? "\n" : "  ");
        }
    }
    out << "effectiveness is f1-accuracy of the selected answer against ground "
           "truth; calibration is mean inter-reviewer grade variance (lower is "
           "better)\n";
    return out.str();
}

nlohmann::json report_to_json(const std::vector<StrategyReport>& reports) {
    auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json{};
    };
    nlohmann::json out = nlohmann::json::array();
    for (const auto& report : reports) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& row : report.rows) {
            rows.push_back({{"trial", row.trial},
                            {"note_id", row.note_id},
                            {"ok_responses", row.ok_responses},
                            {"failures", row.failures},
                            {"selected_label",
                             row.selected_label ? nlohmann::json(*row.selected_label)
                                                : nlohmann::json{}},
                            {"selected_consensus", opt(row.selected_consensus)},
                            {"f1", opt(row.f1)}});
        }
        out.push_back(
            {{"strategy", to_string(report.strategy)},
             {"trials", report.trials},
             {"tasks", report.tasks},
             {"answers", report.answers},
             {"failures", report.failures},
             {"mean_elapsed_ms",
              report.mean_elapsed ? nlohmann::json(report.mean_elapsed->count())
                                  : nlohmann::json{}},
             {"efficiency",
              report.mean_elapsed ? nlohmann::json(format_duration(*report.mean_elapsed))
                                  : nlohmann::json{}},
             {"effectiveness", opt(report.effectiveness)},
             {"effectiveness_metric", "f1-accuracy"},
             {"stability", opt(report.stability)},
             {"calibration", opt(report.calibration)},
             {"per_task", std::move(rows)}});
    }
    return out;
}

std::string report_rows_to_csv(const std::vector<StrategyReport>& reports) {
    std::ostringstream out;
    out << "strategy,trial,note_id,ok_responses,failures,selected_label,"
           "selected_consensus,f1\n";
    auto cell = [](std::optional<double> v) {
        if (!v) return std::string{};
        std::ostringstream s;
        s << std::setprecision(9) << *v;
        return s.str();
    };
    for (const auto& report : reports) {
        for (const auto& row : report.rows) {
            out << to_string(row.strategy) << ',' << row.trial << ',' << row.note_id
                << ',' << row.ok_responses << ',' << row.failures << ','
                << row.selected_label.value_or("") << ',' << cell(row.selected_consensus)
                << ',' << cell(row.f1) << '\n';
        }
    }
    return out.str();
}

} // namespace medrec
