#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace talus {

// Every named failure in the simulator. Values are stable: they travel as a
// single status byte in bus responses and through the C API.
enum class ErrorCode : uint8_t {
    OK = 0,

    // crypto_core
    EMPTY_KEY = 1,
    EMPTY_SEED = 2,
    MALFORMED_KEY = 3,

    // tpm_device
    ALREADY_OWNED = 10,
    NOT_OWNED = 11,
    INVALID_LOCALITY = 12,
    UNKNOWN_SESSION = 13,
    IDENTITY_LOCALITY = 14,
    POLICY_FAIL = 15,
    KIND_MISMATCH = 16,
    UNKNOWN_HANDLE = 17,
    UNKNOWN_PARENT = 18,
    BAD_WRAP = 19,
    UNKNOWN_SEQUENCE = 20,
    LOCALITY_FAIL = 21,
    BAD_INDEX = 22,
    EMPTY_SELECTION = 23,
    CORRUPT_STATE = 24,
    VERSION_MISMATCH = 25,
    ROLLBACK_DETECTED = 26,

    // secure_bus
    SESSION_BUSY = 40,
    BUS_BUSY = 41,
    REPLAY = 42,
    TAMPER = 43,

    // enclave_cpu
    SEQUENCE_CLOSED = 60,
    MEASUREMENT_FINAL = 61,
    ALREADY_INIT = 62,
    NOT_INIT = 63,
    NOT_RUNNING = 64,
    RUNNING = 65,
    UNKNOWN_ENCLAVE = 66,
    BAD_TOKEN = 67,
    BAD_ADDRESS = 68,

    // talus_flows
    MEASUREMENT_MISMATCH = 80,
    BAD_SIGNATURE = 81,
    BAD_REPORT = 82,
    UNSEAL_FAIL = 83,

    // adversary
    SECRET_TOO_SHORT = 100,
    SECURITY_VIOLATION = 101,

    // cli / C API
    BAD_CONFIG = 110,
    IO_ERROR = 111,
};

const char* error_name(ErrorCode code);

class TalusError : public std::runtime_error {
public:
    explicit TalusError(ErrorCode code, const std::string& detail = "");

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

}  // namespace talus
