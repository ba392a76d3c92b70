#include "medrec/chemistry.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace medrec {

const AgreementEntry* AgreementMatrix::find(const std::string& a,
                                            const std::string& b) const {
    auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    auto it = entries.find(key);
    return it == entries.end() ? nullptr : &it->second;
}

double AgreementMatrix::global_mean() const {
    if (entries.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [key, entry] : entries) sum += entry.mean_squared_diff;
    return sum / static_cast<double>(entries.size());
}

namespace {

/// Author of each labeled item in a record.
std::map<std::string, std::string> label_authors(const TaskRecord& record) {
    std::map<std::string, std::string> authors;
    for (const auto& member : record.generations) {
        if (member.label) authors[*member.label] = member.model.name;
    }
    return authors;
}

struct ProfileAccumulator {
    ModelId model;
    std::vector<double> received;           // explicit grades, pooled
    std::vector<double> per_task_means;     // mean received grade per task
    std::int64_t elapsed_ms_total = 0;
    int attempts = 0;
    int failures = 0;
    int observations = 0;
};

} // namespace

std::map<std::string, ModelProfile> build_profiles(const std::vector<TaskRecord>& records,
                                                   int min_obs) {
    if (records.empty()) {
        throw Error(ErrorCode::no_eligible_models, "no task records to profile");
    }

    std::map<std::string, ProfileAccumulator> acc;
    for (const auto& record : records) {
        auto authors = label_authors(record);
        std::map<std::string, std::vector<double>> task_received;
        for (const auto& cell : record.matrix.cells) {
            if (cell.grade.kind != GradeKind::explicit_review) continue;
            auto author = authors.find(cell.item);
            if (author == authors.end()) continue;
            task_received[author->second].push_back(cell.grade.value);
        }
        for (const auto& member : record.generations) {
            auto& a = acc[member.model.name];
            a.model = member.model;
            a.observations += 1;
            a.attempts += 1;
            a.elapsed_ms_total += member.result.elapsed.count();
            if (!member.result.ok()) a.failures += 1;
            auto got = task_received.find(member.model.name);
            if (got != task_received.end() && !got->second.empty()) {
                double sum = 0.0;
                for (double g : got->second) sum += g;
                double mean = sum / static_cast<double>(got->second.size());
                a.per_task_means.push_back(mean);
                a.received.insert(a.received.end(), got->second.begin(),
                                  got->second.end());
            }
        }
    }

    std::map<std::string, ModelProfile> profiles;
    int eligible_count = 0;
    for (auto& [name, a] : acc) {
        ModelProfile profile;
        profile.model = a.model;
        profile.observations = a.observations;
        profile.failure_rate =
            a.attempts == 0 ? 0.0
                            : static_cast<double>(a.failures) / static_cast<double>(a.attempts);
        profile.mean_elapsed = std::chrono::milliseconds(
            a.attempts == 0 ? 0 : a.elapsed_ms_total / a.attempts);
        if (!a.received.empty()) {
            double sum = 0.0;
            for (double g : a.received) sum += g;
            profile.mean_received_grade = sum / static_cast<double>(a.received.size());
        }
        if (!a.per_task_means.empty()) {
            double mean = 0.0;
            for (double m : a.per_task_means) mean += m;
            mean /= static_cast<double>(a.per_task_means.size());
            double var = 0.0;
            for (double m : a.per_task_means) var += (m - mean) * (m - mean);
            profile.grade_variance_across_tasks =
                var / static_cast<double>(a.per_task_means.size());
        }
        profile.eligible = a.observations >= min_obs && !a.received.empty();
        if (profile.eligible) ++eligible_count;
        profiles[name] = std::move(profile);
    }

    if (eligible_count == 0) {
        throw Error(ErrorCode::no_eligible_models,
                    "no model reaches min_obs=" + std::to_string(min_obs) +
                        " with peer grades");
    }
    return profiles;
}

AgreementMatrix build_agreement(const std::vector<TaskRecord>& records) {
    // (sorted name pair) -> squared diffs over shared items.
    std::map<std::pair<std::string, std::string>, std::pair<double, int>> sums;
    for (const auto& record : records) {
        std::map<std::string, std::vector<const GradeCell*>> by_item;
        for (const auto& cell : record.matrix.cells) {
            if (cell.grade.kind != GradeKind::explicit_review) continue;
            by_item[cell.item].push_back(&cell);
        }
        for (const auto& [item, cells] : by_item) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                for (std::size_t j = i + 1; j < cells.size(); ++j) {
                    const auto& a = cells[i]->grader;
                    const auto& b = cells[j]->grader;
                    if (a == b) continue;
                    auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
                    double diff = cells[i]->grade.value - cells[j]->grade.value;
                    auto& slot = sums[key];
                    slot.first += diff * diff;
                    slot.second += 1;
                }
            }
        }
    }
    AgreementMatrix matrix;
    for (const auto& [key, slot] : sums) {
        matrix.entries[key] =
            AgreementEntry{slot.first / static_cast<double>(slot.second), slot.second};
    }
    return matrix;
}

namespace {

void enumerate_subsets(const std::vector<const ModelProfile*>& pool, std::size_t n,
                       std::size_t start, std::vector<const ModelProfile*>& current,
                       const std::function<void(const std::vector<const ModelProfile*>&)>& visit) {
    if (current.size() == n) {
        visit(current);
        return;
    }
    for (std::size_t i = start; i < pool.size(); ++i) {
        current.push_back(pool[i]);
        enumerate_subsets(pool, n, i + 1, current, visit);
        current.pop_back();
    }
}

} // namespace

ChemistryRecommendation recommend_ensemble(const std::map<std::string, ModelProfile>& profiles,
                                           const AgreementMatrix& agreement, std::size_t n,
                                           const ChemistryWeights& weights) {
    std::vector<const ModelProfile*> eligible;
    for (const auto& [name, profile] : profiles) {
        if (profile.eligible) eligible.push_back(&profile);
    }
    if (eligible.size() < n) {
        throw Error(ErrorCode::too_few_eligible,
                    std::to_string(eligible.size()) + " eligible models, need " +
                        std::to_string(n));
    }

    double max_elapsed = 0.0;
    for (const auto* profile : eligible) {
        max_elapsed = std::max(max_elapsed,
                               static_cast<double>(profile->mean_elapsed.count()));
    }
    const double global_disagreement = agreement.global_mean();

    ChemistryRecommendation result;
    result.weights = weights;
    result.stats_basis =
        "quality/disagreement from explicit peer-review grades; latency and "
        "failure rate from generation attempts";

    std::vector<const ModelProfile*> current;
    enumerate_subsets(eligible, n, 0, current,
                      [&](const std::vector<const ModelProfile*>& subset) {
        ChemistryScore score;
        double quality = 0.0;
        double elapsed = 0.0;
        for (const auto* member : subset) {
            score.members.push_back(member->model);
            quality += member->mean_received_grade;
            elapsed += static_cast<double>(member->mean_elapsed.count());
        }
        quality /= static_cast<double>(subset.size());
        elapsed /= static_cast<double>(subset.size());

        double disagreement = 0.0;
        int pairs = 0;
        for (std::size_t i = 0; i < subset.size(); ++i) {
            for (std::size_t j = i + 1; j < subset.size(); ++j) {
                const auto* entry = agreement.find(subset[i]->model.name,
                                                   subset[j]->model.name);
                if (entry) {
                    disagreement += entry->mean_squared_diff;
                } else {
                    // Never co-reviewed: neutral prior, flagged.
                    disagreement += global_disagreement;
                    ++score.imputed_pairs;
                }
                ++pairs;
            }
        }
        if (pairs > 0) disagreement /= static_cast<double>(pairs);

        score.quality = quality;
        score.disagreement = disagreement;
        score.latency_penalty = max_elapsed > 0.0 ? elapsed / max_elapsed : 0.0;
        score.score = weights.alpha * quality - weights.beta * disagreement -
                      weights.gamma * score.latency_penalty;
        result.ranked.push_back(std::move(score));
    });

    auto member_names = [](const ChemistryScore& s) {
        std::vector<std::string> names;
        for (const auto& m : s.members) names.push_back(m.name);
        std::sort(names.begin(), names.end());
        return names;
    };
    std::sort(result.ranked.begin(), result.ranked.end(),
              [&](const ChemistryScore& a, const ChemistryScore& b) {
                  if (a.score != b.score) return a.score > b.score;
                  return member_names(a) < member_names(b);
              });
    result.best = result.ranked.front();
    return result;
}

} // namespace medrec
