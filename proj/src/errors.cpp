#include "daclr/errors.hpp"

namespace daclr {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::EmptyView: return "EmptyView";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::TemplateError: return "TemplateError";
        case ErrorCode::TransportError: return "TransportError";
        case ErrorCode::SummaryQualityError: return "SummaryQualityError";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::UnknownDoc: return "UnknownDoc";
        case ErrorCode::QueryMismatch: return "QueryMismatch";
        case ErrorCode::NumericalError: return "NumericalError";
        case ErrorCode::InsufficientNegatives: return "InsufficientNegatives";
        case ErrorCode::MissingSummary: return "MissingSummary";
        case ErrorCode::InvalidP: return "InvalidP";
        case ErrorCode::InvalidQ: return "InvalidQ";
        case ErrorCode::InvalidStagePlan: return "InvalidStagePlan";
        case ErrorCode::IngestError: return "IngestError";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::ModelMismatch: return "ModelMismatch";
    }
    return "UnknownError";
}

} // namespace daclr
