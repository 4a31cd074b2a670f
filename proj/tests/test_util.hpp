#pragma once

#include <doctest.h>

#include "talus/error.hpp"

// Asserts that `expr` throws TalusError with exactly `expected_code`.
#define CHECK_TALUS_ERROR(expr, expected_code)                                     \
    do {                                                                           \
        bool threw_ = false;                                                       \
        try {                                                                      \
            (void)(expr);                                                          \
        } catch (const talus::TalusError& e_) {                                    \
            threw_ = true;                                                         \
            CHECK(e_.code() == talus::ErrorCode::expected_code);                   \
        }                                                                          \
        CHECK_MESSAGE(threw_, "expected TalusError " #expected_code " from " #expr); \
    } while (0)
