#pragma once

#include <cstdint>
#include <string>

#include "talus/bytes.hpp"
#include "talus/error.hpp"

namespace talus::wire {

// Big-endian serialization helpers shared by bus frames, TPM commands and
// persistence. Readers throw CORRUPT_STATE on truncation.

class Writer {
public:
    void u8(uint8_t v) { out_.push_back(v); }
    void u16(uint16_t v);
    void u32(uint32_t v);
    void u64(uint64_t v);
    void raw(ByteView data) { append(out_, data); }
    // u32 length prefix followed by the bytes.
    void blob(ByteView data);

    const Bytes& bytes() const { return out_; }
    Bytes take() { return std::move(out_); }

private:
    Bytes out_;
};

class Reader {
public:
    explicit Reader(ByteView data) : data_(data) {}

    uint8_t u8();
    uint16_t u16();
    uint32_t u32();
    uint64_t u64();
    Bytes raw(size_t n);
    Bytes blob();

    size_t remaining() const { return data_.size() - pos_; }
    bool done() const { return pos_ == data_.size(); }
    // Throws CORRUPT_STATE unless all input was consumed.
    void expect_done() const;

private:
    void need(size_t n) const;

    ByteView data_;
    size_t pos_ = 0;
};

}  // namespace talus::wire
