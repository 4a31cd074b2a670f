#pragma once

#include "talus/bus.hpp"
#include "talus/tpm.hpp"

namespace talus::tpm {

// Client-side command marshalling over the secure bus. CPU microcode uses a
// grant-backed client at locality 4; OS-level actors get localities 0..3 and
// no grant. Errors returned by the device surface as TalusError.
class TpmClient {
public:
    // Software client (OS, user space, adversary probes).
    TpmClient(bus::Channel& channel, uint8_t locality);
    // Microcode client.
    TpmClient(bus::Channel& channel, uint8_t locality, const bus::MicrocodeGrant& grant);

    uint8_t locality() const { return locality_; }

    uint32_t policy_start_session();
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

    void pcr_extend(uint8_t index, const Digest32& value);
    void pcr_reset(uint8_t index);
    Digest32 pcr_read(uint8_t index);

    uint32_t nv_define_space(NvKind kind, uint32_t size, const Digest32& auth_policy);
    uint64_t nv_increment(uint32_t handle, uint32_t session);
    NvValue nv_read(uint32_t handle, uint32_t session);
    void nv_write(uint32_t handle, uint32_t session, ByteView payload);

    uint64_t read_clock();
    TimeRecord get_time(uint32_t ak, uint32_t session, ByteView qualifying);
    Quote quote(uint32_t ak, uint32_t session, const std::vector<uint8_t>& selection,
                ByteView qualifying);

private:
    Bytes roundtrip(ByteView payload, bus::Cycle cycle = bus::Cycle::Io);

    bus::Channel& channel_;
    uint8_t locality_;
    const bus::MicrocodeGrant* grant_ = nullptr;
};

}  // namespace talus::tpm
