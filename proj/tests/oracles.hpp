// Independent reference computations used to cross-check the library. These
// are deliberately written as naive one-shot recomputations so they share no
// code path with the implementation under test (beyond the vector-verified
// HMAC/SHA primitives they are built from).
#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "talus/bytes.hpp"
#include "talus/crypto.hpp"

namespace oracles {

using talus::ByteView;
using talus::Bytes;
using talus::crypto::Digest32;

// SP800-108 counter mode, written as a standalone loop: generate ceil(n/32)
// full HMAC blocks K(i) = HMAC(seed, be32(i) || label || 0x00 || context ||
// be32(n*8)) for i = 1.., concatenate, truncate to n bytes.
inline Bytes kdf_counter_mode(ByteView seed, std::string_view label,
                              ByteView context, size_t out_len) {
    Bytes fixed;
    fixed.insert(fixed.end(), label.begin(), label.end());
    fixed.push_back(0x00);
    fixed.insert(fixed.end(), context.begin(), context.end());
    uint32_t bits = static_cast<uint32_t>(out_len * 8);
    for (int s = 24; s >= 0; s -= 8) fixed.push_back(static_cast<uint8_t>(bits >> s));

    Bytes stream;
    for (uint32_t i = 1; stream.size() < out_len; ++i) {
        Bytes block;
        for (int s = 24; s >= 0; s -= 8) block.push_back(static_cast<uint8_t>(i >> s));
        block.insert(block.end(), fixed.begin(), fixed.end());
        auto tag = talus::crypto::mac(seed, block);
        stream.insert(stream.end(), tag.v.begin(), tag.v.end());
    }
    stream.resize(out_len);
    return stream;
}

// Hash-extend chain recomputed from scratch: fold hash(prev || update) over
// the update list starting from `initial`.
inline Digest32 extend_chain(const Digest32& initial, const std::vector<Bytes>& updates) {
    Digest32 acc = initial;
    for (const auto& u : updates) {
        Bytes buf(acc.v.begin(), acc.v.end());
        buf.insert(buf.end(), u.begin(), u.end());
        acc = talus::crypto::hash(buf);
    }
    return acc;
}

// Streaming hash recomputed as a single one-shot hash of the concatenation.
inline Digest32 hash_of_concat(const std::vector<Bytes>& chunks) {
    Bytes all;
    for (const auto& c : chunks) all.insert(all.end(), c.begin(), c.end());
    return talus::crypto::hash(all);
}

// Enclave measurement: the per-page record stream is be64(offset) ||
// sha256(content), hashed as one message.
inline Digest32 mrenclave(const std::vector<std::pair<uint64_t, Bytes>>& pages) {
    Bytes all;
    for (const auto& [offset, content] : pages) {
        for (int s = 56; s >= 0; s -= 8) all.push_back(static_cast<uint8_t>(offset >> s));
        auto d = talus::crypto::hash(content);
        all.insert(all.end(), d.v.begin(), d.v.end());
    }
    return talus::crypto::hash(all);
}

// CTR keystream recomputed directly from the block cipher: block i of the
// stream for (key, nonce) is AES(key, be64(nonce) || be64(i)).
inline Bytes ctr_keystream(const talus::crypto::SymKey128& key, uint64_t nonce,
                           uint64_t first_block, size_t len) {
    Bytes out;
    for (uint64_t i = first_block; out.size() < len; ++i) {
        std::array<uint8_t, 16> ctr{};
        for (int b = 0; b < 8; ++b) ctr[b] = static_cast<uint8_t>(nonce >> (56 - 8 * b));
        for (int b = 0; b < 8; ++b) ctr[8 + b] = static_cast<uint8_t>(i >> (56 - 8 * b));
        auto ks = talus::crypto::aes128_encrypt_block(key, ctr);
        out.insert(out.end(), ks.begin(), ks.end());
    }
    out.resize(len);
    return out;
}

// Deterministic byte generator for fuzz-style tests (splitmix64; avoids the
// non-portable std distributions).
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    uint64_t below(uint64_t n) { return next() % n; }

    Bytes bytes(size_t n) {
        Bytes out(n);
        for (auto& b : out) b = static_cast<uint8_t>(next());
        return out;
    }

    Digest32 digest() {
        Digest32 d;
        for (auto& b : d.v) b = static_cast<uint8_t>(next());
        return d;
    }

private:
    uint64_t state_;
};

}  // namespace oracles
