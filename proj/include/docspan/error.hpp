#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace docspan {

/// Broad failure class. Each maps to one CLI exit status.
enum class ErrorCategory {
    config,   // exit 2
    input,    // exit 3
    backend,  // exit 4
};

enum class ErrorCode {
    config_invalid,
    separator_collision,
    length_mismatch,
    sentence_count_mismatch,
    doc_id_mismatch,
    duplicate_doc_id,
    malformed_line,
    malformed_pair,
    index_out_of_range,
    missing_input,
    no_valid_candidate,
    translator_unavailable,
    per_request_failure,
    bind_failure,
    protocol_error,
};

ErrorCategory category_of(ErrorCode code) noexcept;
std::string_view to_string(ErrorCode code) noexcept;
int exit_status(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    ErrorCategory category() const noexcept { return category_of(code_); }

private:
    ErrorCode code_;
};

}  // namespace docspan
