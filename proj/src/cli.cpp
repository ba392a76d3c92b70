#include "medrec/cli.hpp"

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>

#include <CLI11.hpp>

#include "medrec/http_clients.hpp"
#include "medrec/rng.hpp"
#include "medrec/scripted.hpp"
#include "medrec/timeutil.hpp"

namespace medrec {

int RunSummary::total_answers() const {
    int total = 0;
    for (const auto& s : strategies) total += s.answers;
    return total;
}

int RunSummary::total_failures() const {
    int total = 0;
    for (const auto& s : strategies) total += s.failures;
    return total;
}

namespace {

std::string fresh_log_path(const std::string& out_dir, Strategy strategy) {
    std::string base = out_dir + "/" + to_string(strategy) + "-" + compact_utc_now();
    std::string path = base + ".jsonl";
    for (int counter = 1; std::filesystem::exists(path); ++counter) {
        path = base + "-" + std::to_string(counter) + ".jsonl";
    }
    return path;
}

void validate_plan(const RunPlan& plan) {
    if (plan.trials < 1) {
        throw Error(ErrorCode::invalid_config, "--trials must be at least 1");
    }
    if (plan.n < 2) {
        throw Error(ErrorCode::invalid_config, "--n must be at least 2");
    }
    if (plan.records_limit < 1) {
        throw Error(ErrorCode::invalid_config, "--records must be at least 1");
    }
    if (plan.strategies.empty()) {
        throw Error(ErrorCode::invalid_config, "at least one --strategy is required");
    }
    if (plan.timeout.count() <= 0) {
        throw Error(ErrorCode::invalid_config, "--timeout-secs must be positive");
    }
}

std::optional<EnsembleConfig> chemistry_hint_for(const RunPlan& plan) {
    bool wants_chemistry =
        std::find(plan.strategies.begin(), plan.strategies.end(), Strategy::chemistry) !=
        plan.strategies.end();
    if (!wants_chemistry) return std::nullopt;
    if (plan.chemistry_from.empty()) {
        throw Error(ErrorCode::missing_chemistry_hint,
                    "CHEMISTRY strategy requires --chemistry-from <run logs>");
    }
    LoadedLog history = load_many(plan.chemistry_from);
    if (history.records.empty()) {
        throw Error(ErrorCode::no_eligible_models, "chemistry logs hold no records");
    }
    auto profiles = build_profiles(history.records);
    auto agreement = build_agreement(history.records);
    auto recommendation =
        recommend_ensemble(profiles, agreement, static_cast<std::size_t>(plan.n));
    return make_ensemble(Strategy::chemistry, recommendation.best.members, plan.seed);
}

} // namespace

RunSummary run_experiment(const RunPlan& plan,
                          std::shared_ptr<ModelTransport> transport_override) {
    validate_plan(plan);

    Registry registry = load_registry(plan.registry_path);
    Dataset dataset = load_dataset(plan.dataset_path);
    for (const auto& warning : dataset.warnings) {
        std::cerr << "warning: " << warning << "\n";
    }

    std::vector<DatasetRecord> subset(
        dataset.records.begin(),
        dataset.records.begin() +
            std::min<std::size_t>(dataset.records.size(),
                                  static_cast<std::size_t>(plan.records_limit)));
    if (subset.empty()) {
        throw Error(ErrorCode::no_data, "dataset has no records to run");
    }

    std::shared_ptr<ModelTransport> transport = transport_override;
    if (!transport) {
        if (plan.script_path) {
            transport = std::make_shared<ScriptedTransport>(Script::load(*plan.script_path));
        } else {
            transport = BackendRouter::live(registry);
        }
    }
    CompletionService service(transport);

    TaskParams params;
    params.timeout = plan.timeout;
    params.implicit_self_grade = plan.implicit_self_grade;
    params.self_grade_value = plan.self_grade_value;
    if (plan.prompts_dir) {
        params.templates = PromptTemplates::load_dir(*plan.prompts_dir);
    }

    auto hint = chemistry_hint_for(plan);
    std::filesystem::create_directories(plan.out_dir);

    RunSummary summary;
    for (Strategy strategy : plan.strategies) {
        StrategyRunSummary strategy_summary;
        strategy_summary.strategy = strategy;
        strategy_summary.log_path = fresh_log_path(plan.out_dir, strategy);
        RunLogWriter writer(strategy_summary.log_path);

        for (int trial = 0; trial < plan.trials; ++trial) {
            std::uint64_t trial_seed = derive_seed(
                plan.seed, std::string(to_string(strategy)) + ":" + std::to_string(trial));
            EnsembleConfig ensemble =
                sample(strategy, registry, static_cast<std::size_t>(plan.n), trial_seed,
                       hint);

            TaskParams task_params = params;
            task_params.trial_seed = trial_seed;

            std::vector<TaskRecord> records(subset.size());
            if (plan.parallel_tasks) {
                std::vector<std::future<TaskRecord>> futures;
                futures.reserve(subset.size());
                for (const auto& record : subset) {
                    futures.push_back(std::async(std::launch::async, [&] {
                        return run_task(record.note, ensemble, service, task_params);
                    }));
                }
                for (std::size_t i = 0; i < futures.size(); ++i) {
                    records[i] = futures[i].get();
                }
            } else {
                for (std::size_t i = 0; i < subset.size(); ++i) {
                    records[i] = run_task(subset[i].note, ensemble, service, task_params);
                }
            }

            for (auto& record : records) {
                record.trial = trial;
                writer.append(record);
                strategy_summary.tasks += 1;
                for (const auto& member : record.generations) {
                    if (member.result.ok()) ++strategy_summary.answers;
                }
                strategy_summary.failures += static_cast<int>(record.failures.size());
            }
        }
        summary.strategies.push_back(std::move(strategy_summary));
    }
    return summary;
}

ChemistryRecommendation cmd_recommend(const std::vector<std::string>& log_paths,
                                      const RecommendOptions& options) {
    LoadedLog history = load_many(log_paths);
    for (int line : history.corrupt_lines) {
        std::cerr << "warning: skipped corrupt log line " << line << "\n";
    }
    if (history.records.empty()) {
        throw Error(ErrorCode::no_eligible_models, "logs hold no task records");
    }
    auto profiles = build_profiles(history.records, options.min_obs);
    auto agreement = build_agreement(history.records);
    return recommend_ensemble(profiles, agreement, options.n, options.weights);
}

nlohmann::json chemistry_report_to_json(const ChemistryRecommendation& recommendation,
                                        std::size_t top_k) {
    auto score_to_json = [](const ChemistryScore& score) {
        std::vector<std::string> names;
        for (const auto& member : score.members) names.push_back(member.name);
        return nlohmann::json{{"members", names},
                              {"score", score.score},
                              {"components",
                               {{"quality", score.quality},
                                {"disagreement", score.disagreement},
                                {"latency_penalty", score.latency_penalty}}},
                              {"imputed_pairs", score.imputed_pairs}};
    };
    nlohmann::json ranked = nlohmann::json::array();
    for (std::size_t i = 0; i < recommendation.ranked.size() && i < top_k; ++i) {
        ranked.push_back(score_to_json(recommendation.ranked[i]));
    }
    nlohmann::json doc = score_to_json(recommendation.best);
    doc["ranked_top_k"] = std::move(ranked);
    doc["weights"] = {{"alpha", recommendation.weights.alpha},
                      {"beta", recommendation.weights.beta},
                      {"gamma", recommendation.weights.gamma}};
    doc["stats_basis"] = recommendation.stats_basis;
    doc["candidates"] = recommendation.ranked.size();
    return doc;
}

std::string cmd_report(const std::vector<std::string>& log_paths,
                       const std::string& dataset_path, ReportFormat format) {
    LoadedLog history = load_many(log_paths);
    for (int line : history.corrupt_lines) {
        std::cerr << "warning: skipped corrupt log line " << line << "\n";
    }
    Dataset dataset = load_dataset(dataset_path);
    GroundTruth truth = dataset.truth();

    std::map<Strategy, std::vector<TaskRecord>> by_strategy;
    for (auto& record : history.records) {
        by_strategy[record.strategy].push_back(std::move(record));
    }
    std::vector<StrategyReport> reports;
    for (const auto& [strategy, records] : by_strategy) {
        reports.push_back(build_strategy_report(strategy, records, truth));
    }

    switch (format) {
        case ReportFormat::text:
            return report_to_text(reports);
        case ReportFormat::csv:
            return report_rows_to_csv(reports);
        case ReportFormat::json:
            return report_to_json(reports).dump(2) + "\n";
    }
    return report_to_text(reports);
}

Dataset cmd_synthesize(const std::string& medication_sets_path,
                       const SynthesizeOptions& options) {
    std::ifstream in(medication_sets_path);
    if (!in) {
        throw Error(ErrorCode::io_error,
                    "cannot open medication lists '" + medication_sets_path + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    nlohmann::json doc = nlohmann::json::parse(buffer.str(), nullptr, false);
    if (doc.is_discarded() || !doc.contains("sets") || !doc["sets"].is_array() ||
        doc["sets"].empty()) {
        throw Error(ErrorCode::invalid_config,
                    "medication lists file needs a nonempty 'sets' array");
    }

    Registry registry = load_registry(options.registry_path);
    const RegistryEntry* entry = registry.find(options.model_name);
    if (entry == nullptr) {
        throw Error(ErrorCode::unknown_model,
                    "model '" + options.model_name + "' is not in the registry");
    }

    std::shared_ptr<ModelTransport> transport;
    if (options.script_path) {
        transport = std::make_shared<ScriptedTransport>(Script::load(*options.script_path));
    } else {
        transport = BackendRouter::live(registry);
    }

    Dataset dataset;
    dataset.unvalidated = true;
    dataset.description = "synthesized vignettes; not expert validated";

    int index = 0;
    for (const auto& set : doc["sets"]) {
        ++index;
        std::vector<MedicationEntry> medications;
        for (const auto& med : set) {
            MedicationEntry medication = entry_from_json(med);
            if (!validate_entry(medication).empty()) {
                throw Error(ErrorCode::invalid_entry,
                            "medication set " + std::to_string(index) + " has an entry "
                            "with an empty name");
            }
            medications.push_back(std::move(medication));
        }
        if (medications.empty()) {
            throw Error(ErrorCode::invalid_config,
                        "medication set " + std::to_string(index) + " is empty");
        }

        nlohmann::json meds = nlohmann::json::array();
        for (const auto& m : medications) meds.push_back(entry_to_json(m));

        CompletionRequest request;
        request.model = entry->id;
        request.system_prompt =
            "You write brief, plausible clinical vignettes. Respond with the "
            "vignette text only: an unstructured note summarizing a patient whose "
            "treatment plan matches the given medications. Do not list the "
            "medications verbatim.";
        request.user_prompt = "Medications:\n" + meds.dump(2) +
                              "\n\nWrite the clinical note for this patient.";
        request.response_schema = ResponseSchema::recommendation;
        request.timeout = options.timeout;

        TransportResult result = transport->send(request);
        if (result.outcome != Outcome::ok || result.raw_text.empty()) {
            std::cerr << "warning: set " << index << " failed ("
                      << to_string(result.outcome) << "), skipped\n";
            continue;
        }

        char id[32];
        std::snprintf(id, sizeof(id), "synth-%03d", index);
        DatasetRecord record;
        record.note.id = id;
        record.note.vignette = result.raw_text;
        record.medications = std::move(medications);
        dataset.records.push_back(std::move(record));
    }
    return dataset;
}

namespace {

int exit_code_for(const Error& error) {
    switch (error.code()) {
        case ErrorCode::invalid_config:
        case ErrorCode::io_error:
        case ErrorCode::unknown_model:
        case ErrorCode::insufficient_models:
        case ErrorCode::missing_chemistry_hint:
            return 2;
        default:
            return 3;
    }
}

std::vector<Strategy> parse_strategies(const std::vector<std::string>& names) {
    std::vector<Strategy> strategies;
    for (const auto& name : names) strategies.push_back(strategy_from_string(name));
    return strategies;
}

ReportFormat parse_format(const std::string& name) {
    if (name == "text") return ReportFormat::text;
    if (name == "json") return ReportFormat::json;
    if (name == "csv") return ReportFormat::csv;
    throw Error(ErrorCode::invalid_config, "unknown format '" + name + "'");
}

void write_or_print(const std::string& content, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream out(out_path);
    if (!out) {
        throw Error(ErrorCode::io_error, "cannot write '" + out_path + "'");
    }
    out << content;
}

} // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Multi-model medication recommendation with peer-review consensus"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Execute sampling strategies over a dataset");
    RunPlan plan;
    std::vector<std::string> strategy_names;
    long timeout_secs = 300;
    std::string script_path;
    std::string prompts_dir;
    run->add_option("--dataset", plan.dataset_path, "Dataset JSON path")->required();
    run->add_option("--registry", plan.registry_path, "Model registry JSON path")->required();
    run->add_option("--strategy", strategy_names,
                    "Strategy to run (repeatable): LOCAL, REMOTE, RANDOM, CHEMISTRY")
        ->required();
    run->add_option("--n", plan.n, "Ensemble size");
    run->add_option("--trials", plan.trials, "Trials per strategy");
    run->add_option("--seed", plan.seed, "Base seed");
    run->add_option("--records", plan.records_limit, "Dataset records per trial");
    run->add_option("--timeout-secs", timeout_secs, "Per-call timeout in seconds");
    run->add_option("--scripted", script_path, "Scripted backend JSON path");
    run->add_option("--chemistry-from", plan.chemistry_from,
                    "Run logs to mine for the CHEMISTRY ensemble");
    run->add_option("--out-dir", plan.out_dir, "Directory for run logs");
    run->add_option("--prompts-dir", prompts_dir, "Prompt template directory");
    run->add_flag("--parallel-tasks", plan.parallel_tasks,
                  "Run a trial's tasks concurrently (overlapping wall timing)");

    // recommend
    auto* recommend = app.add_subcommand("recommend", "Recommend an ensemble from run logs");
    std::vector<std::string> recommend_logs;
    RecommendOptions recommend_options;
    std::string recommend_out;
    recommend->add_option("logs", recommend_logs, "Run log JSONL paths")->required();
    recommend->add_option("--n", recommend_options.n, "Ensemble size");
    recommend->add_option("--alpha", recommend_options.weights.alpha, "Quality weight");
    recommend->add_option("--beta", recommend_options.weights.beta, "Disagreement weight");
    recommend->add_option("--gamma", recommend_options.weights.gamma, "Latency weight");
    recommend->add_option("--min-obs", recommend_options.min_obs,
                          "Observations needed for candidacy");
    recommend->add_option("--top-k", recommend_options.top_k, "Ranked subsets to emit");
    recommend->add_option("--out", recommend_out, "Report JSON path (stdout when omitted)");

    // report
    auto* report = app.add_subcommand("report", "Aggregate run logs into the four metrics");
    std::vector<std::string> report_logs;
    std::string report_dataset;
    std::string report_format = "text";
    std::string report_out;
    report->add_option("logs", report_logs, "Run log JSONL paths")->required();
    report->add_option("--dataset", report_dataset, "Dataset JSON path (ground truth)")
        ->required();
    report->add_option("--format", report_format, "text, json or csv");
    report->add_option("--out", report_out, "Output path (stdout when omitted)");

    // synthesize
    auto* synthesize =
        app.add_subcommand("synthesize", "Reverse-synthesize vignettes for medication sets");
    std::string synth_meds;
    std::string synth_out;
    SynthesizeOptions synth_options;
    std::string synth_script;
    long synth_timeout_secs = 300;
    synthesize->add_option("--medications", synth_meds, "Medication sets JSON path")
        ->required();
    synthesize->add_option("--model", synth_options.model_name, "Generator model name")
        ->required();
    synthesize->add_option("--registry", synth_options.registry_path, "Registry path")
        ->required();
    synthesize->add_option("--scripted", synth_script, "Scripted backend JSON path");
    synthesize->add_option("--timeout-secs", synth_timeout_secs, "Per-call timeout");
    synthesize->add_option("--out", synth_out, "Dataset output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) {
            plan.strategies = parse_strategies(strategy_names);
            plan.timeout = std::chrono::seconds(timeout_secs);
            if (!script_path.empty()) plan.script_path = script_path;
            if (!prompts_dir.empty()) plan.prompts_dir = prompts_dir;
            RunSummary summary = run_experiment(plan);
            for (const auto& s : summary.strategies) {
                std::cout << to_string(s.strategy) << ": " << s.tasks << " tasks, "
                          << s.answers << " answers, " << s.failures << " failures -> "
                          << s.log_path << "\n";
            }
            std::cout << "total: " << summary.total_answers() << " answers, "
                      << summary.total_failures() << " failures";
            if (plan.parallel_tasks) {
                std::cout << " (parallel tasks: per-task wall timing overlaps)";
            }
            std::cout << "\n";
            return 0;
        }
        if (recommend->parsed()) {
            ChemistryRecommendation recommendation =
                cmd_recommend(recommend_logs, recommend_options);
            nlohmann::json doc =
                chemistry_report_to_json(recommendation, recommend_options.top_k);
            write_or_print(doc.dump(2) + "\n", recommend_out);
            if (!recommend_out.empty()) {
                std::cout << "recommended:";
                for (const auto& member : recommendation.best.members) {
                    std::cout << " " << member.name;
                }
                std::cout << "\nscore " << recommendation.best.score << " (quality "
                          << recommendation.best.quality << ", disagreement "
                          << recommendation.best.disagreement << ", latency penalty "
                          << recommendation.best.latency_penalty << ")\n";
            }
            return 0;
        }
        if (report->parsed()) {
            std::string rendered =
                cmd_report(report_logs, report_dataset, parse_format(report_format));
            write_or_print(rendered, report_out);
            return 0;
        }
        if (synthesize->parsed()) {
            synth_options.timeout = std::chrono::seconds(synth_timeout_secs);
            if (!synth_script.empty()) synth_options.script_path = synth_script;
            Dataset dataset = cmd_synthesize(synth_meds, synth_options);
            save_dataset(dataset, synth_out);
            std::cout << "wrote " << dataset.records.size() << " records to " << synth_out
                      << " (unvalidated)\n";
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

} // namespace medrec
