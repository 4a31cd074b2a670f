#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "talus/bus.hpp"
#include "talus/bytes.hpp"
#include "talus/crypto.hpp"
#include "talus/tpm_client.hpp"

namespace talus::cpu {

using crypto::Digest32;
using crypto::MacTag32;
using crypto::SymKey128;

struct EnclaveIdentity {
    Digest32 mrenclave;
    Digest32 mrsigner;
    uint16_t isvprodid = 0;
    uint16_t isvsvn = 0;
    uint64_t attributes = 0;

    bool operator==(const EnclaveIdentity&) const = default;
    // mrenclave || mrsigner || be16 prodid || be16 svn || be64 attributes
    Bytes canonical() const;
};

struct SigStruct {
    Bytes author_public_key;
    Digest32 expected_mrenclave;
    uint16_t isvprodid = 0;
    uint16_t isvsvn = 0;
    uint64_t attributes = 0;
    crypto::Signature signature;  // over hash(body())

    Bytes body() const;
};

struct EinitToken {
    Bytes body;  // identity canonical || keyid
    MacTag32 tag;

    bool operator==(const EinitToken&) const = default;
    Bytes serialize() const;
    static EinitToken deserialize(ByteView data);
};

struct Report {
    EnclaveIdentity target_identity;
    EnclaveIdentity reporting_identity;
    std::array<uint8_t, 64> user_data{};
    MacTag32 tag;

    Bytes mac_body() const;   // everything but the tag
    Bytes serialize() const;  // everything including the tag
    static Report deserialize(ByteView data);
};

struct RegisterFile {
    std::array<uint64_t, 8> gprs{};
    std::array<std::array<uint8_t, 16>, 4> bnd{};

    bool operator==(const RegisterFile&) const = default;
};

struct SsaFrame {
    std::array<uint64_t, 8> gpr_snapshot{};                // spilled in plaintext
    std::array<std::array<uint8_t, 16>, 4> bnd_ct{};       // one-shot ciphertexts
    uint64_t aex_nonce = 0;

    Bytes serialize() const;
};

enum class LeakSource : uint8_t { Ssa = 1, Epc = 2, Buffer = 3 };

struct LeakRecord {
    LeakSource source;
    Bytes bytes;
};

// Everything the CPU writes to the simulated memory hierarchy, verbatim.
// Registers are never appended.
struct LeakTrace {
    std::vector<LeakRecord> records;

    void append(LeakSource source, ByteView bytes) {
        records.push_back({source, Bytes(bytes.begin(), bytes.end())});
    }
};

struct KeySelector {
    std::string keyname;  // "SEAL-SYM", "DATA-SYM", "EINITTOKEN", "ATTEST", ...
    bool use_mrenclave = false;
    bool use_mrsigner = false;
    Digest32 keyid;
};

// Abstract enclave instruction set; enough to exercise every flow and attack.
struct Instr {
    enum class Op : uint8_t {
        Nop,
        LoadSecretToBnd,      // key request resolved by microcode into bnd[slot]
        MoveBndToGpr,         // bnd[slot] -> gpr[r] (low half), gpr[r+1] (high half)
        XorBnd,               // bnd[slot] ^= bnd[other]
        EncryptBlockWithBnd,  // CTR block at memory[addr..addr+len) keyed by bnd[slot]
        WriteMem,             // gpr[r] -> memory[addr..addr+8)
        Exit,
    };

    Op op = Op::Nop;
    KeySelector selector;
    uint8_t slot = 0;
    uint8_t other = 0;
    uint8_t gpr = 0;
    uint32_t addr = 0;
    uint8_t len = 16;

    static Instr nop() { return {}; }
    static Instr load_secret(KeySelector sel, uint8_t slot);
    static Instr move_bnd_to_gpr(uint8_t slot, uint8_t r);
    static Instr xor_bnd(uint8_t slot, uint8_t other);
    static Instr encrypt_block(uint8_t slot, uint32_t addr, uint8_t len = 16);
    static Instr write_mem(uint32_t addr, uint8_t r);
    static Instr exit();
};

using EnclaveId = uint32_t;
using ContextId = uint32_t;

struct Secs {
    EnclaveIdentity identity;
    bool init = false;
    Digest32 keyid;
    uint64_t aex_count = 0;
    std::optional<uint32_t> measurement_seq;
    bool measurement_final = false;
    std::vector<std::pair<uint64_t, Digest32>> pages;  // (offset, content digest)
    std::optional<SymKey128> sealing_key;  // microcode-private register slot
};

enum class StepResult : uint8_t { Running, Exited };

struct ExecContext {
    EnclaveId enclave = 0;
    std::vector<Instr> program;
    size_t pc = 0;
    bool running = false;
    bool interrupted = false;  // between aex and eresume
    RegisterFile regs;
    Bytes memory;  // untrusted shared output buffer, adversary-visible
    SsaFrame ssa;
};

// The application-processor model: enclave life cycle, register file with BND
// secret registers, encrypted SSA spills, TPM-backed key derivation at
// locality 4, local attestation, and the leak-trace view of everything that
// reaches the memory hierarchy.
class CpuCore {
public:
    CpuCore(bus::Channel& channel, const Digest32& seal_fuses, uint16_t cpusvn,
            const Digest32& owner_secret_digest, const Digest32& mee_salt);

    // The channel is replaced on platform power cycles.
    void rebind_channel(bus::Channel& channel);

    // --- life cycle ---
    EnclaveId ecreate(uint64_t attributes, const Digest32& keyid);
    void eadd(EnclaveId e, uint64_t offset, ByteView content);
    Digest32 finalize_measurement(EnclaveId e);
    EinitToken mint_einit_token(EnclaveId e);  // launch-enclave microcode path
    void einit(EnclaveId e, const EinitToken& token);
    void eremove(EnclaveId e);

    ContextId eenter(EnclaveId e, std::vector<Instr> program, size_t memory_size = 4096);
    StepResult step(ContextId ctx);
    SsaFrame aex(ContextId ctx);
    void eresume(ContextId ctx);
    void eexit(ContextId ctx);
    bool exited(ContextId ctx) const;

    // --- key derivation / attestation ---
    Bytes derive_kdm_context(const KeySelector& sel, const EnclaveIdentity& id) const;
    Digest32 identity_policy_digest(const KeySelector& sel, const EnclaveIdentity& id) const;
    uint32_t egetkey(ContextId ctx, const KeySelector& sel);
    Report ereport(ContextId ctx, const EnclaveIdentity& target,
                   const std::array<uint8_t, 64>& user_data);
    bool verify_report(ContextId target_ctx, const Report& report);

    // Microcode helpers used by the protocol flows (all at locality 4).
    tpm::TpmClient microcode_client();
    Digest32 token_policy_digest(const EnclaveIdentity& id) const;
    Bytes token_body(const EnclaveIdentity& id, const Digest32& keyid) const;
    SymKey128 fetch_symmetric_key(ContextId ctx, const KeySelector& sel);
    // Opens a policy session asserting the given identity for the selector's
    // field set; the session satisfies the EAP of keys made by egetkey.
    uint32_t identity_session(const KeySelector& sel, const EnclaveIdentity& id);

    // Insecure staging path kept for the leak-oracle positive control: routes
    // bytes through the shared memory hierarchy, exactly what the secure
    // flows must never do.
    void stage_bytes_through_memory(ContextId ctx, uint32_t addr, ByteView data);
    void load_bnd_from_memory(ContextId ctx, uint8_t slot, uint32_t addr);

    // --- untrusted shared memory ---
    void os_write_memory(ContextId ctx, uint32_t addr, ByteView data);
    Bytes read_memory(ContextId ctx, uint32_t addr, size_t len) const;
    std::vector<Bytes> observable_memory() const;  // final images, all contexts

    // --- introspection ---
    const LeakTrace& leak_trace() const { return leak_trace_; }
    const Secs& secs(EnclaveId e) const;
    bool enclave_exists(EnclaveId e) const { return enclaves_.count(e) > 0; }
    const ExecContext& context(ContextId ctx) const;
    uint16_t cpusvn() const { return cpusvn_; }

    void set_registers_for_test(ContextId ctx, const RegisterFile& regs);
    const Digest32& seal_fuses_for_test() const { return seal_fuses_; }

private:
    Secs& secs_mut(EnclaveId e);
    ExecContext& context_mut(ContextId ctx);
    void spill_registers(ExecContext& ctx, Secs& secs);
    void restore_registers(ExecContext& ctx, const Secs& secs);
    void ensure_sealing_key(ContextId ctx);
    void write_memory_traced(ExecContext& ctx, uint32_t addr, ByteView data);
    void execute(ContextId ctx_id, const Instr& instr);
    tpm::ObjectKind kind_for_keyname(const std::string& keyname) const;
    uint32_t create_key_with_policy(const KeySelector& sel, const EnclaveIdentity& id,
                                    tpm::ObjectKind kind);

    bus::Channel* channel_;
    bus::MicrocodeGrant grant_;
    Digest32 seal_fuses_;
    uint16_t cpusvn_;
    Digest32 owner_secret_digest_;
    Digest32 mee_salt_;

    std::map<EnclaveId, Secs> enclaves_;
    std::map<ContextId, ExecContext> contexts_;
    LeakTrace leak_trace_;
    EnclaveId next_enclave_ = 1;
    ContextId next_context_ = 1;
};

}  // namespace talus::cpu
