#pragma once

#include <array>
#include <cstdint>

#include "talus/bytes.hpp"

namespace talus::crypto {

struct Digest32 {
    std::array<uint8_t, 32> v{};

    bool operator==(const Digest32&) const = default;
    ByteView view() const { return {v.data(), v.size()}; }
    std::string hex() const { return hex_encode(view()); }
    static Digest32 from_bytes(ByteView b);
    static Digest32 zero() { return {}; }
};

struct SymKey128 {
    std::array<uint8_t, 16> v{};

    bool operator==(const SymKey128&) const = default;
    ByteView view() const { return {v.data(), v.size()}; }
    static SymKey128 from_bytes(ByteView b);
};

struct MacTag32 {
    std::array<uint8_t, 32> v{};

    bool operator==(const MacTag32&) const = default;
    ByteView view() const { return {v.data(), v.size()}; }
    static MacTag32 from_bytes(ByteView b);
};

struct SigKeyPair {
    Bytes public_part;
    Bytes private_part;
};

using Signature = Bytes;

// SHA-256, streaming form. Used directly by the TPM hash-sequence commands.
class Sha256 {
public:
    Sha256();
    void update(ByteView data);
    Digest32 finish();

private:
    void process_block(const uint8_t* block);

    std::array<uint32_t, 8> state_;
    std::array<uint8_t, 64> buffer_;
    uint64_t total_len_ = 0;
    size_t buffer_len_ = 0;
};

Digest32 hash(ByteView data);

// hash(old || data); the extend primitive behind PCRs, measurements and
// policy digests.
Digest32 hash_extend(const Digest32& old, ByteView data);

// HMAC-SHA-256. Throws EMPTY_KEY.
MacTag32 mac(ByteView key, ByteView msg);

// SP800-108 counter-mode KDF with HMAC-SHA-256 as PRF.
// PRF input per iteration: be32(i) || label || 0x00 || context || be32(bits).
// Throws EMPTY_SEED; out_len must be >= 1.
Bytes kdf(ByteView seed, std::string_view label, ByteView context, size_t out_len);

// AES-128 single-block encryption (keystream generator for ctr_crypt and the
// in-enclave block instruction).
std::array<uint8_t, 16> aes128_encrypt_block(const SymKey128& key,
                                             const std::array<uint8_t, 16>& block);

// AES-128-CTR. Counter block = be64(nonce) || be64(block_index), block_index
// starting at block_offset. Applying twice with identical (key, nonce) is the
// identity.
Bytes ctr_crypt_at(const SymKey128& key, uint64_t nonce, uint64_t block_offset,
                   ByteView data);
Bytes ctr_crypt(const SymKey128& key, uint64_t nonce, ByteView data);

// Ed25519 with deterministic seed-based keygen.
SigKeyPair sig_keygen(const Digest32& seed);
Signature sign(ByteView private_part, const Digest32& digest);
bool verify(ByteView public_part, const Digest32& digest, const Signature& sig);

}  // namespace talus::crypto
