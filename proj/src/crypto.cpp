#include "talus/crypto.hpp"

#include <sodium.h>

#include <cstring>
#include <mutex>

#include "talus/error.hpp"

namespace talus::crypto {

// ---------------------------------------------------------------------------
// SHA-256 (FIPS 180-4)
// ---------------------------------------------------------------------------

namespace {

constexpr std::array<uint32_t, 64> kRoundConstants = {
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1,
    0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3,
    0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
    0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
    0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
    0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
    0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
    0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
    0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};

constexpr std::array<uint32_t, 8> kInitState = {0x6a09e667, 0xbb67ae85, 0x3c6ef372,
                                                0xa54ff53a, 0x510e527f, 0x9b05688c,
                                                0x1f83d9ab, 0x5be0cd19};

inline uint32_t rotr(uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

void ensure_sodium() {
    static std::once_flag flag;
    std::call_once(flag, [] {
        if (sodium_init() < 0)
            throw TalusError(ErrorCode::MALFORMED_KEY, "sodium_init failed");
    });
}

}  // namespace

Sha256::Sha256() : state_(kInitState), buffer_{} {}

void Sha256::process_block(const uint8_t* block) {
    uint32_t w[64];
    for (int i = 0; i < 16; ++i)
        w[i] = uint32_t(block[4 * i]) << 24 | uint32_t(block[4 * i + 1]) << 16 |
               uint32_t(block[4 * i + 2]) << 8 | uint32_t(block[4 * i + 3]);
    for (int i = 16; i < 64; ++i) {
        uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
        uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
        w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }

    uint32_t a = state_[0], b = state_[1], c = state_[2], d = state_[3];
    uint32_t e = state_[4], f = state_[5], g = state_[6], h = state_[7];
    for (int i = 0; i < 64; ++i) {
        uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
        uint32_t ch = (e & f) ^ (~e & g);
        uint32_t t1 = h + s1 + ch + kRoundConstants[i] + w[i];
        uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
        uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
        uint32_t t2 = s0 + maj;
        h = g;
        g = f;
        f = e;
        e = d + t1;
        d = c;
        c = b;
        b = a;
        a = t1 + t2;
    }
    state_[0] += a;
    state_[1] += b;
    state_[2] += c;
    state_[3] += d;
    state_[4] += e;
    state_[5] += f;
    state_[6] += g;
    state_[7] += h;
}

void Sha256::update(ByteView data) {
    total_len_ += data.size();
    size_t pos = 0;
    if (buffer_len_ > 0) {
        size_t take = std::min(data.size(), buffer_.size() - buffer_len_);
        std::memcpy(buffer_.data() + buffer_len_, data.data(), take);
        buffer_len_ += take;
        pos = take;
        if (buffer_len_ == buffer_.size()) {
            process_block(buffer_.data());
            buffer_len_ = 0;
        }
    }
    while (data.size() - pos >= 64) {
        process_block(data.data() + pos);
        pos += 64;
    }
    if (pos < data.size()) {
        std::memcpy(buffer_.data(), data.data() + pos, data.size() - pos);
        buffer_len_ = data.size() - pos;
    }
}

Digest32 Sha256::finish() {
    uint64_t bit_len = total_len_ * 8;
    uint8_t pad = 0x80;
    update({&pad, 1});
    uint8_t zero = 0x00;
    while (buffer_len_ != 56) update({&zero, 1});
    uint8_t len_be[8];
    for (int i = 0; i < 8; ++i) len_be[i] = static_cast<uint8_t>(bit_len >> (56 - 8 * i));
    update({len_be, 8});

    Digest32 out;
    for (int i = 0; i < 8; ++i)
        for (int b = 0; b < 4; ++b)
            out.v[4 * i + b] = static_cast<uint8_t>(state_[i] >> (24 - 8 * b));
    return out;
}

Digest32 hash(ByteView data) {
    Sha256 s;
    s.update(data);
    return s.finish();
}

Digest32 hash_extend(const Digest32& old, ByteView data) {
    Sha256 s;
    s.update(old.view());
    s.update(data);
    return s.finish();
}

// ---------------------------------------------------------------------------
// HMAC-SHA-256 (RFC 2104)
// ---------------------------------------------------------------------------

MacTag32 mac(ByteView key, ByteView msg) {
    if (key.empty()) throw TalusError(ErrorCode::EMPTY_KEY);

    std::array<uint8_t, 64> block{};
    if (key.size() > block.size()) {
        auto d = hash(key);
        std::memcpy(block.data(), d.v.data(), d.v.size());
    } else {
        std::memcpy(block.data(), key.data(), key.size());
    }

    std::array<uint8_t, 64> ipad, opad;
    for (size_t i = 0; i < 64; ++i) {
        ipad[i] = block[i] ^ 0x36;
        opad[i] = block[i] ^ 0x5c;
    }

    Sha256 inner;
    inner.update(ipad);
    inner.update(msg);
    auto inner_digest = inner.finish();

    Sha256 outer;
    outer.update(opad);
    outer.update(inner_digest.view());
    auto d = outer.finish();

    MacTag32 tag;
    tag.v = d.v;
    return tag;
}

// ---------------------------------------------------------------------------
// SP800-108 KDF, counter mode, HMAC-SHA-256 PRF
// ---------------------------------------------------------------------------

Bytes kdf(ByteView seed, std::string_view label, ByteView context, size_t out_len) {
    if (seed.empty()) throw TalusError(ErrorCode::EMPTY_SEED);

    Bytes out;
    out.reserve(out_len);
    uint32_t counter = 1;
    uint32_t bits = static_cast<uint32_t>(out_len * 8);
    while (out.size() < out_len) {
        Bytes prf_input;
        for (int s = 24; s >= 0; s -= 8)
            prf_input.push_back(static_cast<uint8_t>(counter >> s));
        prf_input.insert(prf_input.end(), label.begin(), label.end());
        prf_input.push_back(0x00);
        append(prf_input, context);
        for (int s = 24; s >= 0; s -= 8) prf_input.push_back(static_cast<uint8_t>(bits >> s));
        auto block = mac(seed, prf_input);
        size_t take = std::min<size_t>(block.v.size(), out_len - out.size());
        out.insert(out.end(), block.v.begin(), block.v.begin() + take);
        ++counter;
    }
    return out;
}

// ---------------------------------------------------------------------------
// AES-128 (FIPS 197), encryption direction only -- CTR needs nothing else
// ---------------------------------------------------------------------------

namespace {

constexpr uint8_t kSbox[256] = {
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7,
    0xab, 0x76, 0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf,
    0x9c, 0xa4, 0x72, 0xc0, 0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5,
    0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15, 0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a,
    0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75, 0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e,
    0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84, 0x53, 0xd1, 0x00, 0xed,
    0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf, 0xd0, 0xef,
    0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff,
    0xf3, 0xd2, 0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d,
    0x64, 0x5d, 0x19, 0x73, 0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee,
    0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb, 0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c,
    0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79, 0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5,
    0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08, 0xba, 0x78, 0x25, 0x2e,
    0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a, 0x70, 0x3e,
    0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55,
    0x28, 0xdf, 0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f,
    0xb0, 0x54, 0xbb, 0x16};

inline uint8_t xtime(uint8_t x) {
    return static_cast<uint8_t>((x << 1) ^ ((x >> 7) * 0x1b));
}

struct AesRoundKeys {
    std::array<std::array<uint8_t, 16>, 11> rk;
};

AesRoundKeys expand_key(const SymKey128& key) {
    AesRoundKeys out;
    uint8_t w[176];
    std::memcpy(w, key.v.data(), 16);
    uint8_t rcon = 0x01;
    for (int i = 16; i < 176; i += 4) {
        uint8_t t[4] = {w[i - 4], w[i - 3], w[i - 2], w[i - 1]};
        if (i % 16 == 0) {
            uint8_t tmp = t[0];
            t[0] = static_cast<uint8_t>(kSbox[t[1]] ^ rcon);
            t[1] = kSbox[t[2]];
            t[2] = kSbox[t[3]];
            t[3] = kSbox[tmp];
            rcon = xtime(rcon);
        }
        for (int b = 0; b < 4; ++b) w[i + b] = w[i - 16 + b] ^ t[b];
    }
    for (int r = 0; r < 11; ++r) std::memcpy(out.rk[r].data(), w + 16 * r, 16);
    return out;
}

}  // namespace

std::array<uint8_t, 16> aes128_encrypt_block(const SymKey128& key,
                                             const std::array<uint8_t, 16>& block) {
    auto keys = expand_key(key);
    std::array<uint8_t, 16> s = block;

    auto add_round_key = [&](int r) {
        for (int i = 0; i < 16; ++i) s[i] ^= keys.rk[r][i];
    };
    auto sub_shift = [&] {
        // SubBytes + ShiftRows fused; state is column-major.
        std::array<uint8_t, 16> t;
        for (int c = 0; c < 4; ++c)
            for (int r = 0; r < 4; ++r) t[4 * c + r] = kSbox[s[4 * ((c + r) % 4) + r]];
        s = t;
    };
    auto mix_columns = [&] {
        for (int c = 0; c < 4; ++c) {
            uint8_t* col = s.data() + 4 * c;
            uint8_t a0 = col[0], a1 = col[1], a2 = col[2], a3 = col[3];
            col[0] = static_cast<uint8_t>(xtime(a0) ^ xtime(a1) ^ a1 ^ a2 ^ a3);
            col[1] = static_cast<uint8_t>(a0 ^ xtime(a1) ^ xtime(a2) ^ a2 ^ a3);
            col[2] = static_cast<uint8_t>(a0 ^ a1 ^ xtime(a2) ^ xtime(a3) ^ a3);
            col[3] = static_cast<uint8_t>(xtime(a0) ^ a0 ^ a1 ^ a2 ^ xtime(a3));
        }
    };

    add_round_key(0);
    for (int round = 1; round <= 9; ++round) {
        sub_shift();
        mix_columns();
        add_round_key(round);
    }
    sub_shift();
    add_round_key(10);
    return s;
}

Bytes ctr_crypt_at(const SymKey128& key, uint64_t nonce, uint64_t block_offset,
                   ByteView data) {
    Bytes out(data.begin(), data.end());
    std::array<uint8_t, 16> ctr{};
    for (int b = 0; b < 8; ++b) ctr[b] = static_cast<uint8_t>(nonce >> (56 - 8 * b));
    for (size_t pos = 0; pos < out.size(); pos += 16) {
        uint64_t index = block_offset + pos / 16;
        for (int b = 0; b < 8; ++b) ctr[8 + b] = static_cast<uint8_t>(index >> (56 - 8 * b));
        auto ks = aes128_encrypt_block(key, ctr);
        size_t n = std::min<size_t>(16, out.size() - pos);
        for (size_t i = 0; i < n; ++i) out[pos + i] ^= ks[i];
    }
    return out;
}

Bytes ctr_crypt(const SymKey128& key, uint64_t nonce, ByteView data) {
    return ctr_crypt_at(key, nonce, 0, data);
}

// ---------------------------------------------------------------------------
// Ed25519 (libsodium)
// ---------------------------------------------------------------------------

SigKeyPair sig_keygen(const Digest32& seed) {
    ensure_sodium();
    SigKeyPair kp;
    kp.public_part.resize(crypto_sign_PUBLICKEYBYTES);
    kp.private_part.resize(crypto_sign_SECRETKEYBYTES);
    crypto_sign_seed_keypair(kp.public_part.data(), kp.private_part.data(), seed.v.data());
    return kp;
}

Signature sign(ByteView private_part, const Digest32& digest) {
    ensure_sodium();
    if (private_part.size() != crypto_sign_SECRETKEYBYTES)
        throw TalusError(ErrorCode::MALFORMED_KEY, "bad private key length");
    Signature sig(crypto_sign_BYTES);
    crypto_sign_detached(sig.data(), nullptr, digest.v.data(), digest.v.size(),
                         private_part.data());
    return sig;
}

bool verify(ByteView public_part, const Digest32& digest, const Signature& sig) {
    ensure_sodium();
    if (public_part.size() != crypto_sign_PUBLICKEYBYTES)
        throw TalusError(ErrorCode::MALFORMED_KEY, "bad public key length");
    if (sig.size() != crypto_sign_BYTES) return false;
    return crypto_sign_verify_detached(sig.data(), digest.v.data(), digest.v.size(),
                                       public_part.data()) == 0;
}

// ---------------------------------------------------------------------------

Digest32 Digest32::from_bytes(ByteView b) {
    if (b.size() != 32) throw TalusError(ErrorCode::CORRUPT_STATE, "digest must be 32 bytes");
    Digest32 d;
    std::copy(b.begin(), b.end(), d.v.begin());
    return d;
}

SymKey128 SymKey128::from_bytes(ByteView b) {
    if (b.size() != 16) throw TalusError(ErrorCode::CORRUPT_STATE, "key must be 16 bytes");
    SymKey128 k;
    std::copy(b.begin(), b.end(), k.v.begin());
    return k;
}

MacTag32 MacTag32::from_bytes(ByteView b) {
    if (b.size() != 32) throw TalusError(ErrorCode::CORRUPT_STATE, "tag must be 32 bytes");
    MacTag32 t;
    std::copy(b.begin(), b.end(), t.v.begin());
    return t;
}

}  // namespace talus::crypto
