#include "docspan/error.hpp"

namespace docspan {

ErrorCategory category_of(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::config_invalid:
        return ErrorCategory::config;
    case ErrorCode::no_valid_candidate:
    case ErrorCode::translator_unavailable:
    case ErrorCode::per_request_failure:
    case ErrorCode::bind_failure:
    case ErrorCode::protocol_error:
        return ErrorCategory::backend;
    default:
        return ErrorCategory::input;
    }
}

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::config_invalid: return "ConfigError";
    case ErrorCode::separator_collision: return "SeparatorCollision";
    case ErrorCode::length_mismatch: return "LengthMismatch";
    case ErrorCode::sentence_count_mismatch: return "SentenceCountMismatch";
    case ErrorCode::doc_id_mismatch: return "DocIdMismatch";
    case ErrorCode::duplicate_doc_id: return "DuplicateDocId";
    case ErrorCode::malformed_line: return "MalformedLine";
    case ErrorCode::malformed_pair: return "MalformedPair";
    case ErrorCode::index_out_of_range: return "IndexOutOfRange";
    case ErrorCode::missing_input: return "MissingInput";
    case ErrorCode::no_valid_candidate: return "NoValidCandidate";
    case ErrorCode::translator_unavailable: return "TranslatorUnavailable";
    case ErrorCode::per_request_failure: return "PerRequestFailure";
    case ErrorCode::bind_failure: return "BindFailure";
    case ErrorCode::protocol_error: return "ProtocolError";
    }
    return "Unknown";
}

int exit_status(ErrorCategory category) noexcept {
    switch (category) {
    case ErrorCategory::config: return 2;
    case ErrorCategory::input: return 3;
    case ErrorCategory::backend: return 4;
    }
    return 1;
}

}  // namespace docspan
