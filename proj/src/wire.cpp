#include "talus/wire.hpp"

namespace talus::wire {

void Writer::u16(uint16_t v) {
    out_.push_back(static_cast<uint8_t>(v >> 8));
    out_.push_back(static_cast<uint8_t>(v));
}

void Writer::u32(uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8)
        out_.push_back(static_cast<uint8_t>(v >> shift));
}

void Writer::u64(uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8)
        out_.push_back(static_cast<uint8_t>(v >> shift));
}

void Writer::blob(ByteView data) {
    u32(static_cast<uint32_t>(data.size()));
    raw(data);
}

void Reader::need(size_t n) const {
    if (data_.size() - pos_ < n)
        throw TalusError(ErrorCode::CORRUPT_STATE, "truncated message");
}

uint8_t Reader::u8() {
    need(1);
    return data_[pos_++];
}

uint16_t Reader::u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(data_[pos_] << 8 | data_[pos_ + 1]);
    pos_ += 2;
    return v;
}

uint32_t Reader::u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = v << 8 | data_[pos_ + i];
    pos_ += 4;
    return v;
}

uint64_t Reader::u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = v << 8 | data_[pos_ + i];
    pos_ += 8;
    return v;
}

Bytes Reader::raw(size_t n) {
    need(n);
    Bytes out(data_.begin() + pos_, data_.begin() + pos_ + n);
    pos_ += n;
    return out;
}

Bytes Reader::blob() {
    uint32_t n = u32();
    return raw(n);
}

void Reader::expect_done() const {
    if (!done())
        throw TalusError(ErrorCode::CORRUPT_STATE, "trailing bytes in message");
}

}  // namespace talus::wire
