#pragma once

#include <stdexcept>
#include <string>

namespace medrec {

/// Error categories surfaced by the library. Expected run-time failures
/// (model calls that time out, reviews that fail to parse) are encoded as
/// data in their result types, never thrown; these codes cover contract
/// violations, bad configuration, and unusable input files.
enum class ErrorCode {
    invalid_grade,
    invalid_config,
    unknown_model,
    insufficient_models,
    missing_chemistry_hint,
    empty_matrix,
    isolated_item,
    empty_truth,
    no_eligible_models,
    too_few_eligible,
    no_data,
    missing_ground_truth,
    too_few_tasks,
    no_multiply_graded_responses,
    parse_error,
    duplicate_id,
    invalid_entry,
    io_error,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

} // namespace medrec
