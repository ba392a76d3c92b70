#include "medrec/consensus.hpp"

#include <algorithm>
#include <cmath>

namespace medrec {

const Grade* GradeMatrix::find(const std::string& grader, const std::string& item) const {
    for (const auto& cell : cells) {
        if (cell.grader == grader && cell.item == item) return &cell.grade;
    }
    return nullptr;
}

std::vector<const GradeCell*> GradeMatrix::cells_on_item(const std::string& item) const {
    std::vector<const GradeCell*> out;
    for (const auto& cell : cells) {
        if (cell.item == item) out.push_back(&cell);
    }
    return out;
}

std::vector<const GradeCell*> GradeMatrix::cells_by_grader(const std::string& grader) const {
    std::vector<const GradeCell*> out;
    for (const auto& cell : cells) {
        if (cell.grader == grader) out.push_back(&cell);
    }
    return out;
}

namespace {

double cell_weight(const GradeCell& cell, double self_grade_weight) {
    return cell.grade.kind == GradeKind::implicit_self ? self_grade_weight : 1.0;
}

} // namespace

std::optional<double> leave_one_out(const GradeMatrix& matrix, const std::string& item,
                                    const std::string& excluded_grader,
                                    const std::map<std::string, double>& variances,
                                    double self_grade_weight) {
    double numerator = 0.0;
    double denominator = 0.0;
    for (const auto& cell : matrix.cells) {
        if (cell.item != item || cell.grader == excluded_grader) continue;
        auto it = variances.find(cell.grader);
        double variance = it == variances.end() ? 1.0 : it->second;
        double weight = cell_weight(cell, self_grade_weight) / variance;
        numerator += weight * cell.grade.value;
        denominator += weight;
    }
    if (denominator <= 0.0) return std::nullopt;
    return numerator / denominator;
}

ConsensusResult vancouver(const GradeMatrix& matrix, const VancouverParams& params) {
    if (matrix.cells.empty()) {
        throw Error(ErrorCode::empty_matrix, "grade matrix has no cells");
    }

    // Work off the cells themselves; declared-but-empty items are a
    // contract violation, declared-but-silent graders carry no information.
    std::vector<std::string> items = matrix.items;
    if (items.empty()) {
        for (const auto& cell : matrix.cells) {
            if (std::find(items.begin(), items.end(), cell.item) == items.end()) {
                items.push_back(cell.item);
            }
        }
    }
    std::map<std::string, std::vector<const GradeCell*>> by_item;
    std::map<std::string, std::vector<const GradeCell*>> by_grader;
    for (const auto& cell : matrix.cells) {
        by_item[cell.item].push_back(&cell);
        by_grader[cell.grader].push_back(&cell);
    }
    for (const auto& item : items) {
        if (by_item.find(item) == by_item.end()) {
            throw Error(ErrorCode::isolated_item, "item '" + item + "' has no grades");
        }
    }

    ConsensusResult result;
    for (const auto& [item, cells] : by_item) {
        double sum = 0.0;
        for (const auto* cell : cells) sum += cell->grade.value;
        result.consensus_grade[item] = sum / static_cast<double>(cells.size());
    }
    for (const auto& [grader, cells] : by_grader) {
        result.grader_variance[grader] = 1.0;
    }

    for (int iteration = 1; iteration <= params.max_iterations; ++iteration) {
        result.iterations_used = iteration;

        // Variance pass, computed entirely from the previous sweep's variances.
        std::map<std::string, double> next_variance;
        for (const auto& [grader, cells] : by_grader) {
            double sum_sq = 0.0;
            for (const auto* cell : cells) {
                auto loo = leave_one_out(matrix, cell->item, grader,
                                         result.grader_variance,
                                         params.self_grade_weight);
                double reference = loo ? *loo : result.consensus_grade[cell->item];
                double dev = cell->grade.value - reference;
                sum_sq += dev * dev;
            }
            next_variance[grader] =
                std::max(params.variance_floor, sum_sq / static_cast<double>(cells.size()));
        }

        // Consensus pass with the fresh variances.
        std::map<std::string, double> next_grade;
        double max_delta = 0.0;
        for (const auto& [item, cells] : by_item) {
            double numerator = 0.0;
            double denominator = 0.0;
            for (const auto* cell : cells) {
                double weight = cell_weight(*cell, params.self_grade_weight) /
                                next_variance[cell->grader];
                numerator += weight * cell->grade.value;
                denominator += weight;
            }
            double updated = denominator > 0.0
                                 ? numerator / denominator
                                 : result.consensus_grade[item];
            max_delta = std::max(max_delta,
                                 std::abs(updated - result.consensus_grade[item]));
            next_grade[item] = updated;
        }

        result.grader_variance = std::move(next_variance);
        result.consensus_grade = std::move(next_grade);

        if (max_delta < params.epsilon) {
            result.converged = true;
            break;
        }
    }
    return result;
}

} // namespace medrec
