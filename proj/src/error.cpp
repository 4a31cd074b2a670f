#include "talus/error.hpp"

namespace talus {

const char* error_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::OK: return "OK";
        case ErrorCode::EMPTY_KEY: return "EMPTY_KEY";
        case ErrorCode::EMPTY_SEED: return "EMPTY_SEED";
        case ErrorCode::MALFORMED_KEY: return "MALFORMED_KEY";
        case ErrorCode::ALREADY_OWNED: return "ALREADY_OWNED";
        case ErrorCode::NOT_OWNED: return "NOT_OWNED";
        case ErrorCode::INVALID_LOCALITY: return "INVALID_LOCALITY";
        case ErrorCode::UNKNOWN_SESSION: return "UNKNOWN_SESSION";
        case ErrorCode::IDENTITY_LOCALITY: return "IDENTITY_LOCALITY";
        case ErrorCode::POLICY_FAIL: return "POLICY_FAIL";
        case ErrorCode::KIND_MISMATCH: return "KIND_MISMATCH";
        case ErrorCode::UNKNOWN_HANDLE: return "UNKNOWN_HANDLE";
        case ErrorCode::UNKNOWN_PARENT: return "UNKNOWN_PARENT";
        case ErrorCode::BAD_WRAP: return "BAD_WRAP";
        case ErrorCode::UNKNOWN_SEQUENCE: return "UNKNOWN_SEQUENCE";
        case ErrorCode::LOCALITY_FAIL: return "LOCALITY_FAIL";
        case ErrorCode::BAD_INDEX: return "BAD_INDEX";
        case ErrorCode::EMPTY_SELECTION: return "EMPTY_SELECTION";
        case ErrorCode::CORRUPT_STATE: return "CORRUPT_STATE";
        case ErrorCode::VERSION_MISMATCH: return "VERSION_MISMATCH";
        case ErrorCode::ROLLBACK_DETECTED: return "ROLLBACK_DETECTED";
        case ErrorCode::SESSION_BUSY: return "SESSION_BUSY";
        case ErrorCode::BUS_BUSY: return "BUS_BUSY";
        case ErrorCode::REPLAY: return "REPLAY";
        case ErrorCode::TAMPER: return "TAMPER";
        case ErrorCode::SEQUENCE_CLOSED: return "SEQUENCE_CLOSED";
        case ErrorCode::MEASUREMENT_FINAL: return "MEASUREMENT_FINAL";
        case ErrorCode::ALREADY_INIT: return "ALREADY_INIT";
        case ErrorCode::NOT_INIT: return "NOT_INIT";
        case ErrorCode::NOT_RUNNING: return "NOT_RUNNING";
        case ErrorCode::RUNNING: return "RUNNING";
        case ErrorCode::UNKNOWN_ENCLAVE: return "UNKNOWN_ENCLAVE";
        case ErrorCode::BAD_TOKEN: return "BAD_TOKEN";
        case ErrorCode::BAD_ADDRESS: return "BAD_ADDRESS";
        case ErrorCode::MEASUREMENT_MISMATCH: return "MEASUREMENT_MISMATCH";
        case ErrorCode::BAD_SIGNATURE: return "BAD_SIGNATURE";
        case ErrorCode::BAD_REPORT: return "BAD_REPORT";
        case ErrorCode::UNSEAL_FAIL: return "UNSEAL_FAIL";
        case ErrorCode::SECRET_TOO_SHORT: return "SECRET_TOO_SHORT";
        case ErrorCode::SECURITY_VIOLATION: return "SECURITY_VIOLATION";
        case ErrorCode::BAD_CONFIG: return "BAD_CONFIG";
        case ErrorCode::IO_ERROR: return "IO_ERROR";
    }
    return "UNKNOWN";
}

TalusError::TalusError(ErrorCode code, const std::string& detail)
    : std::runtime_error(detail.empty() ? error_name(code)
                                        : std::string(error_name(code)) + ": " + detail),
      code_(code) {}

}  // namespace talus
