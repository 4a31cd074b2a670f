#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "talus/bytes.hpp"
#include "talus/crypto.hpp"
#include "talus/error.hpp"

namespace talus::tpm {

using crypto::Digest32;
using crypto::MacTag32;
using crypto::Signature;
using crypto::SymKey128;

enum class ObjectKind : uint8_t {
    HmacKey = 1,
    SigningKey = 2,
    SymmetricKey = 3,
    AttestationKey = 4,
};

enum class NvKind : uint8_t {
    Counter = 1,
    Data = 2,
};

enum class PolicyKind : uint8_t {
    Locality = 1,
    Pcr = 2,
    Identity = 3,
};

// Identity policy field selection bits.
constexpr uint8_t kIdMrenclave = 0x01;
constexpr uint8_t kIdMrsigner = 0x02;
constexpr uint8_t kIdIsvProdId = 0x04;
constexpr uint8_t kIdIsvSvn = 0x08;

struct IdentityAssertion {
    Digest32 mrenclave;
    Digest32 mrsigner;
    uint16_t isvprodid = 0;
    uint16_t isvsvn = 0;
};

struct ObjectTemplate {
    ObjectKind kind = ObjectKind::HmacKey;
    Bytes creation_context;
    Digest32 auth_policy;
};

struct CreateResult {
    uint32_t handle = 0;
    std::optional<Bytes> public_part;
};

struct TpmObject {
    uint32_t handle = 0;
    ObjectKind kind = ObjectKind::HmacKey;
    Bytes secret_material;
    std::optional<Bytes> public_part;
    Digest32 auth_policy;
    Bytes creation_context;
};

struct NvIndex {
    uint32_t handle = 0;
    NvKind kind = NvKind::Counter;
    uint64_t counter_value = 0;
    Bytes data_payload;
    Digest32 auth_policy;
};

struct PolicySession {
    uint32_t handle = 0;
    Digest32 digest;
    uint8_t creation_locality = 0;
};

struct PcrBank {
    std::array<Digest32, 24> pcrs;
    std::array<uint8_t, 24> extend_mask;  // bit i set = locality i may extend
    std::array<uint8_t, 24> reset_mask;
    std::array<Digest32, 24> defaults;
};

struct NvValue {
    NvKind kind;
    uint64_t counter_value;
    Bytes data_payload;
};

struct TimeRecord {
    uint64_t ticks = 0;
    Bytes qualifying;
    Signature signature;

    Bytes signed_body() const;
};

struct Quote {
    std::vector<uint8_t> selection;  // sorted PCR indices
    Digest32 composite;              // hash of selected PCR values in index order
    uint64_t ticks = 0;
    Bytes qualifying;
    Signature signature;

    Bytes signed_body() const;
    Bytes serialize() const;
    static Quote deserialize(ByteView data);
};

// Policy digest chaining, exposed so the CPU microcode can predict the digest
// a session will reach. Each step is hash_extend(digest, tag || args).
Digest32 policy_extend_locality(const Digest32& digest, uint8_t min_locality);
Digest32 policy_extend_pcr(const Digest32& digest, const std::vector<uint8_t>& indices,
                           const Digest32& composite);
Digest32 policy_extend_identity(const Digest32& digest, uint8_t field_bitmap,
                                const IdentityAssertion& values);
Digest32 pcr_composite(const std::vector<Digest32>& values);

// A TPM 2.0-shaped device: object store with EAP-gated use, locality-masked
// PCR bank, NV counters/data, streaming hash sequences, a deterministic
// command clock, and text persistence. Commands are processed strictly
// sequentially; localities arrive with each locality-sensitive command (over
// the bus they come from the authenticated frame header).
class TpmDevice {
public:
    TpmDevice(const Digest32& primary_seed, const Digest32& endorsement_seed);

    SymKey128 take_ownership(ByteView owner_secret);
    bool owned() const { return owned_; }

    uint32_t policy_start_session(uint8_t locality);
    Digest32 policy_locality(uint32_t session, uint8_t min_locality);
    Digest32 policy_pcr(uint32_t session, const std::vector<uint8_t>& indices);
    Digest32 policy_identity(uint32_t session, uint8_t field_bitmap,
                             const IdentityAssertion& values);

    CreateResult create_primary(const ObjectTemplate& tmpl);
    Bytes create_wrapped(uint32_t parent, const ObjectTemplate& tmpl);
    uint32_t load(uint32_t parent, ByteView blob);

    MacTag32 hmac_sign(uint32_t handle, uint32_t session, ByteView msg);
    Signature sign(uint32_t handle, uint32_t session, const Digest32& digest);
    Bytes encrypt_decrypt(uint32_t handle, uint32_t session, uint64_t nonce, ByteView data);
    SymKey128 release_symmetric(uint32_t handle, uint32_t session);
    bool verify_signature(ByteView public_part, const Digest32& digest, const Signature& sig);

    uint32_t hash_sequence_start();
    void hash_sequence_update(uint32_t seq, ByteView chunk);
    Digest32 hash_sequence_complete(uint32_t seq);

    void pcr_extend(uint8_t index, uint8_t locality, const Digest32& value);
    void pcr_reset(uint8_t index, uint8_t locality);
    Digest32 pcr_read(uint8_t index, uint8_t locality);

    // session == 0 means "no session"; allowed only for a zero auth policy.
    uint32_t nv_define_space(NvKind kind, uint32_t size, const Digest32& auth_policy);
    uint64_t nv_increment(uint32_t handle, uint32_t session);
    NvValue nv_read(uint32_t handle, uint32_t session);
    void nv_write(uint32_t handle, uint32_t session, ByteView payload);
    bool nv_defined(uint32_t handle) const { return nv_store_.count(handle) > 0; }

    uint64_t read_clock();
    uint64_t peek_clock() const { return clock_ticks_; }
    TimeRecord get_time(uint32_t ak, uint32_t session, ByteView qualifying);
    Quote quote(uint32_t ak, uint32_t session, const std::vector<uint8_t>& selection,
                ByteView qualifying);

    // Line-oriented text snapshot of the durable state (NV, clock, seeds,
    // ownership). Volatile sessions, sequences and loaded objects are not
    // included. Each snapshot carries a fresh generation number.
    std::string persist();
    static TpmDevice restore(const std::string& blob);
    uint64_t generation() const { return generation_; }

    // Bus entry point: decode one command payload, execute it at the frame's
    // locality, encode status byte + response body.
    Bytes handle_command(uint8_t locality, ByteView payload);

    void set_command_cost(const std::string& command, uint64_t ticks);

    // Read-only snapshots for the offline inspector and tests.
    const PcrBank& pcr_bank_snapshot() const { return pcr_bank_; }
    const std::map<uint32_t, NvIndex>& nv_snapshot() const { return nv_store_; }

    // Test hook; production callers have no path to raw secret material.
    const Bytes& object_secret_for_test(uint32_t handle) const;

private:
    friend struct PersistCodec;

    const TpmObject& find_object(uint32_t handle, ErrorCode missing) const;
    NvIndex& find_nv(uint32_t handle);
    void authorize(uint32_t session, const Digest32& auth_policy);
    PolicySession& find_session(uint32_t session);
    void drop_session(uint32_t session);
    const TpmObject& use_object(uint32_t handle, uint32_t session, ObjectKind kind);
    Signature sign_with(const TpmObject& obj, const Digest32& digest);
    void tick(const char* command);
    void require_owned() const;
    static PcrBank make_pcr_bank();

    Digest32 primary_seed_;
    Digest32 endorsement_seed_;
    bool owned_ = false;
    Bytes owner_secret_;
    SymKey128 channel_psk_;

    PcrBank pcr_bank_;
    std::map<uint32_t, TpmObject> objects_;
    std::map<uint32_t, NvIndex> nv_store_;
    std::map<uint32_t, PolicySession> sessions_;
    std::map<uint32_t, crypto::Sha256> sequences_;

    uint64_t clock_ticks_ = 0;
    uint64_t generation_ = 0;
    std::map<std::string, uint64_t> command_costs_;

    uint32_t next_object_handle_ = 0x80000000;
    uint32_t next_session_handle_ = 0x03000000;
    uint32_t next_sequence_handle_ = 0x02000000;
    uint32_t next_nv_handle_ = 0x01000000;
};

// Command opcodes on the wire (reused by the client-side marshaller).
enum class Cmd : uint8_t {
    PolicyStartSession = 0x10,
    PolicyLocality = 0x11,
    PolicyPcr = 0x12,
    PolicyIdentity = 0x13,
    CreatePrimary = 0x20,
    CreateWrapped = 0x21,
    Load = 0x22,
    HmacSign = 0x30,
    Sign = 0x31,
    EncryptDecrypt = 0x32,
    ReleaseSymmetric = 0x33,
    VerifySignature = 0x34,
    HashSeqStart = 0x40,
    HashSeqUpdate = 0x41,
    HashSeqComplete = 0x42,
    PcrExtend = 0x50,
    PcrReset = 0x51,
    PcrRead = 0x52,
    NvDefine = 0x60,
    NvIncrement = 0x61,
    NvRead = 0x62,
    NvWrite = 0x63,
    ReadClock = 0x70,
    GetTime = 0x71,
    QuotePcr = 0x72,
};

const char* command_name(uint8_t opcode);

}  // namespace talus::tpm
