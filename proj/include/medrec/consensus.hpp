#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medrec/domain.hpp"

namespace medrec {

struct GradeCell {
    std::string grader;
    std::string item;
    Grade grade;

    bool operator==(const GradeCell& other) const = default;
};

/// Sparse reviewer x response grade matrix. Graders are model names, items
/// are anonymized response labels; cells are keyed by (grader, item) so the
/// matrix is independent of arrival order.
struct GradeMatrix {
    std::vector<std::string> graders;
    std::vector<std::string> items;
    std::vector<GradeCell> cells;

    const Grade* find(const std::string& grader, const std::string& item) const;
    std::vector<const GradeCell*> cells_on_item(const std::string& item) const;
    std::vector<const GradeCell*> cells_by_grader(const std::string& grader) const;
};

struct VancouverParams {
    int max_iterations = 50;
    double epsilon = 1e-6;
    double variance_floor = 1e-4;
    /// Weight of implicit self-grade cells in every weighted mean;
    /// explicit review cells always weigh 1.
    double self_grade_weight = 1.0;
};

struct ConsensusResult {
    std::map<std::string, double> consensus_grade;
    std::map<std::string, double> grader_variance;
    int iterations_used = 0;
    bool converged = false;
};

/// Reputation-weighted consensus over a grade matrix.
///
/// Fixed-point iteration: consensus starts at the unweighted per-item mean
/// and grader variances at 1. Each sweep first re-estimates every grader's
/// variance as the mean squared deviation of its grades from the
/// leave-one-out consensus of each graded item (floored at variance_floor),
/// then recomputes every item's consensus as the precision-weighted mean of
/// its grades (weight w/v with w = self_grade_weight for implicit-self
/// cells). Sweeps are Jacobi-style: all variances update from the previous
/// sweep's values, so grader and item ordering cannot affect the result.
/// Stops when the largest consensus change drops below epsilon or after
/// max_iterations sweeps.
///
/// Throws Error(empty_matrix) when there are no cells and
/// Error(isolated_item) when a declared item has none.
ConsensusResult vancouver(const GradeMatrix& matrix, const VancouverParams& params = {});

/// Precision-weighted mean of an item's grades excluding one grader; equals
/// the full weighted mean when that grader did not grade the item. Returns
/// nullopt when the excluded grader was the item's only grader.
std::optional<double> leave_one_out(const GradeMatrix& matrix, const std::string& item,
                                    const std::string& excluded_grader,
                                    const std::map<std::string, double>& variances,
                                    double self_grade_weight = 1.0);

} // namespace medrec
