#include "talus/cpu.hpp"

#include <algorithm>

#include "talus/tpm.hpp"
#include "talus/wire.hpp"

namespace talus::cpu {

using tpm::ObjectKind;

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

Bytes EnclaveIdentity::canonical() const {
    wire::Writer w;
    w.raw(mrenclave.view());
    w.raw(mrsigner.view());
    w.u16(isvprodid);
    w.u16(isvsvn);
    w.u64(attributes);
    return w.take();
}

Bytes SigStruct::body() const {
    wire::Writer w;
    w.blob(author_public_key);
    w.raw(expected_mrenclave.view());
    w.u16(isvprodid);
    w.u16(isvsvn);
    w.u64(attributes);
    return w.take();
}

Bytes EinitToken::serialize() const {
    wire::Writer w;
    w.blob(body);
    w.raw(tag.view());
    return w.take();
}

EinitToken EinitToken::deserialize(ByteView data) {
    wire::Reader r(data);
    EinitToken token;
    token.body = r.blob();
    token.tag = MacTag32::from_bytes(r.raw(32));
    r.expect_done();
    return token;
}

namespace {

EnclaveIdentity identity_from_reader(wire::Reader& r) {
    EnclaveIdentity id;
    id.mrenclave = Digest32::from_bytes(r.raw(32));
    id.mrsigner = Digest32::from_bytes(r.raw(32));
    id.isvprodid = r.u16();
    id.isvsvn = r.u16();
    id.attributes = r.u64();
    return id;
}

}  // namespace

Bytes Report::mac_body() const {
    wire::Writer w;
    w.raw(target_identity.canonical());
    w.raw(reporting_identity.canonical());
    w.raw(ByteView(user_data.data(), user_data.size()));
    return w.take();
}

Bytes Report::serialize() const {
    Bytes out = mac_body();
    append(out, tag.view());
    return out;
}

Report Report::deserialize(ByteView data) {
    wire::Reader r(data);
    Report report;
    report.target_identity = identity_from_reader(r);
    report.reporting_identity = identity_from_reader(r);
    Bytes ud = r.raw(64);
    std::copy(ud.begin(), ud.end(), report.user_data.begin());
    report.tag = MacTag32::from_bytes(r.raw(32));
    r.expect_done();
    return report;
}

Bytes SsaFrame::serialize() const {
    wire::Writer w;
    for (uint64_t g : gpr_snapshot) w.u64(g);
    for (const auto& ct : bnd_ct) w.raw(ByteView(ct.data(), ct.size()));
    w.u64(aex_nonce);
    return w.take();
}

Instr Instr::load_secret(KeySelector sel, uint8_t slot) {
    Instr i;
    i.op = Op::LoadSecretToBnd;
    i.selector = std::move(sel);
    i.slot = slot;
    return i;
}

Instr Instr::move_bnd_to_gpr(uint8_t slot, uint8_t r) {
    Instr i;
    i.op = Op::MoveBndToGpr;
    i.slot = slot;
    i.gpr = r;
    return i;
}

Instr Instr::xor_bnd(uint8_t slot, uint8_t other) {
    Instr i;
    i.op = Op::XorBnd;
    i.slot = slot;
    i.other = other;
    return i;
}

Instr Instr::encrypt_block(uint8_t slot, uint32_t addr, uint8_t len) {
    Instr i;
    i.op = Op::EncryptBlockWithBnd;
    i.slot = slot;
    i.addr = addr;
    i.len = len;
    return i;
}

Instr Instr::write_mem(uint32_t addr, uint8_t r) {
    Instr i;
    i.op = Op::WriteMem;
    i.addr = addr;
    i.gpr = r;
    return i;
}

Instr Instr::exit() {
    Instr i;
    i.op = Op::Exit;
    return i;
}

// ---------------------------------------------------------------------------
// CpuCore
// ---------------------------------------------------------------------------

CpuCore::CpuCore(bus::Channel& channel, const Digest32& seal_fuses, uint16_t cpusvn,
                 const Digest32& owner_secret_digest, const Digest32& mee_salt)
    : channel_(&channel),
      seal_fuses_(seal_fuses),
      cpusvn_(cpusvn),
      owner_secret_digest_(owner_secret_digest),
      mee_salt_(mee_salt) {}

void CpuCore::rebind_channel(bus::Channel& channel) {
    channel_ = &channel;
}

tpm::TpmClient CpuCore::microcode_client() {
    return tpm::TpmClient(*channel_, 4, grant_);
}

Secs& CpuCore::secs_mut(EnclaveId e) {
    auto it = enclaves_.find(e);
    if (it == enclaves_.end()) throw TalusError(ErrorCode::UNKNOWN_ENCLAVE);
    return it->second;
}

const Secs& CpuCore::secs(EnclaveId e) const {
    auto it = enclaves_.find(e);
    if (it == enclaves_.end()) throw TalusError(ErrorCode::UNKNOWN_ENCLAVE);
    return it->second;
}

ExecContext& CpuCore::context_mut(ContextId ctx) {
    auto it = contexts_.find(ctx);
    if (it == contexts_.end()) throw TalusError(ErrorCode::NOT_RUNNING, "unknown context");
    return it->second;
}

const ExecContext& CpuCore::context(ContextId ctx) const {
    auto it = contexts_.find(ctx);
    if (it == contexts_.end()) throw TalusError(ErrorCode::NOT_RUNNING, "unknown context");
    return it->second;
}

// --- life cycle ---

EnclaveId CpuCore::ecreate(uint64_t attributes, const Digest32& keyid) {
    Secs secs;
    secs.identity.attributes = attributes;
    secs.keyid = keyid;
    secs.measurement_seq = microcode_client().hash_sequence_start();
    EnclaveId id = next_enclave_++;
    enclaves_[id] = std::move(secs);
    return id;
}

void CpuCore::eadd(EnclaveId e, uint64_t offset, ByteView content) {
    auto& secs = secs_mut(e);
    if (secs.init || secs.measurement_final) throw TalusError(ErrorCode::SEQUENCE_CLOSED);

    Digest32 content_digest = crypto::hash(content);
    wire::Writer record;
    record.u64(offset);
    record.raw(content_digest.view());
    microcode_client().hash_sequence_update(*secs.measurement_seq, record.bytes());
    secs.pages.emplace_back(offset, content_digest);

    // EPC write: DRAM sees MEE ciphertext, modeled as an opaque per-write
    // token bound to the hidden MEE salt.
    wire::Writer epc;
    epc.raw(mee_salt_.view());
    epc.u64(offset);
    epc.raw(content);
    leak_trace_.append(LeakSource::Epc, crypto::hash(epc.bytes()).view());
}

Digest32 CpuCore::finalize_measurement(EnclaveId e) {
    auto& secs = secs_mut(e);
    if (secs.measurement_final) throw TalusError(ErrorCode::MEASUREMENT_FINAL);
    secs.identity.mrenclave = microcode_client().hash_sequence_complete(*secs.measurement_seq);
    secs.measurement_final = true;
    return secs.identity.mrenclave;
}

Bytes CpuCore::token_body(const EnclaveIdentity& id, const Digest32& keyid) const {
    Bytes body = id.canonical();
    append(body, keyid.view());
    return body;
}

Digest32 CpuCore::token_policy_digest(const EnclaveIdentity& id) const {
    // Predicts the launch policy: LOCALITY(4) then PCR{11,12,13} over the
    // values the launch extends (reset to zero defaults, one extend each).
    wire::Writer misc;
    misc.u16(id.isvprodid);
    misc.u16(id.isvsvn);
    misc.u64(id.attributes);
    Digest32 p11 = crypto::hash_extend(Digest32{}, id.mrenclave.view());
    Digest32 p12 = crypto::hash_extend(Digest32{}, id.mrsigner.view());
    Digest32 p13 = crypto::hash_extend(Digest32{}, crypto::hash(misc.bytes()).view());

    Digest32 d = tpm::policy_extend_locality(Digest32{}, 4);
    return tpm::policy_extend_pcr(d, {11, 12, 13}, tpm::pcr_composite({p11, p12, p13}));
}

namespace {

Digest32 launch_misc_digest(const EnclaveIdentity& id) {
    wire::Writer w;
    w.u16(id.isvprodid);
    w.u16(id.isvsvn);
    w.u64(id.attributes);
    return crypto::hash(w.bytes());
}

}  // namespace

EinitToken CpuCore::mint_einit_token(EnclaveId e) {
    const auto& secs = secs_mut(e);
    if (!secs.measurement_final)
        throw TalusError(ErrorCode::BAD_TOKEN, "measurement not finalized");
    const auto& id = secs.identity;
    auto client = microcode_client();

    for (uint8_t pcr : {11, 12, 13}) client.pcr_reset(pcr);
    client.pcr_extend(11, id.mrenclave);
    client.pcr_extend(12, id.mrsigner);
    client.pcr_extend(13, launch_misc_digest(id));

    KeySelector lk_selector{"EINITTOKEN", false, true, secs.keyid};
    tpm::ObjectTemplate lk_tmpl;
    lk_tmpl.kind = ObjectKind::HmacKey;
    lk_tmpl.creation_context = derive_kdm_context(lk_selector, id);
    lk_tmpl.auth_policy = token_policy_digest(id);
    uint32_t lk = client.create_primary(lk_tmpl).handle;

    uint32_t session = client.policy_start_session();
    client.policy_locality(session, 4);
    client.policy_pcr(session, {11, 12, 13});

    EinitToken token;
    token.body = token_body(id, secs.keyid);
    token.tag = client.hmac_sign(lk, session, token.body);

    for (uint8_t pcr : {11, 12, 13}) client.pcr_reset(pcr);
    return token;
}

void CpuCore::einit(EnclaveId e, const EinitToken& token) {
    auto& secs = secs_mut(e);
    if (secs.init) throw TalusError(ErrorCode::ALREADY_INIT);
    if (!secs.measurement_final)
        throw TalusError(ErrorCode::BAD_TOKEN, "measurement not finalized");
    const auto& id = secs.identity;

    // Identity binding: the token body must name exactly this enclave.
    if (token.body != token_body(id, secs.keyid))
        throw TalusError(ErrorCode::BAD_TOKEN, "token bound to a different identity");

    // Second EAP session: recompute the token MAC inside the TPM under the
    // launch key and compare.
    auto client = microcode_client();
    for (uint8_t pcr : {11, 12, 13}) client.pcr_reset(pcr);
    client.pcr_extend(11, id.mrenclave);
    client.pcr_extend(12, id.mrsigner);
    client.pcr_extend(13, launch_misc_digest(id));

    KeySelector lk_selector{"EINITTOKEN", false, true, secs.keyid};
    tpm::ObjectTemplate lk_tmpl;
    lk_tmpl.kind = ObjectKind::HmacKey;
    lk_tmpl.creation_context = derive_kdm_context(lk_selector, id);
    lk_tmpl.auth_policy = token_policy_digest(id);
    uint32_t lk = client.create_primary(lk_tmpl).handle;

    uint32_t session = client.policy_start_session();
    client.policy_locality(session, 4);
    client.policy_pcr(session, {11, 12, 13});
    MacTag32 expected = client.hmac_sign(lk, session, token.body);

    for (uint8_t pcr : {11, 12, 13}) client.pcr_reset(pcr);

    if (!(expected == token.tag)) throw TalusError(ErrorCode::BAD_TOKEN);
    secs.init = true;
}

void CpuCore::eremove(EnclaveId e) {
    auto& secs = secs_mut(e);
    for (const auto& [ctx_id, ctx] : contexts_) {
        if (ctx.enclave == e && (ctx.running || ctx.interrupted))
            throw TalusError(ErrorCode::RUNNING, "context still live");
    }
    secs.pages.clear();
    secs.sealing_key.reset();
    enclaves_.erase(e);
}

// --- execution ---

ContextId CpuCore::eenter(EnclaveId e, std::vector<Instr> program, size_t memory_size) {
    auto& secs = secs_mut(e);
    if (!secs.init) throw TalusError(ErrorCode::NOT_INIT);
    for (const auto& [ctx_id, ctx] : contexts_) {
        if (ctx.enclave == e && (ctx.running || ctx.interrupted))
            throw TalusError(ErrorCode::RUNNING, "one context per enclave");
    }

    ExecContext ctx;
    ctx.enclave = e;
    ctx.program = std::move(program);
    ctx.running = true;
    ctx.memory.assign(memory_size, 0);
    ContextId id = next_context_++;
    contexts_[id] = std::move(ctx);
    ensure_sealing_key(id);
    return id;
}

void CpuCore::ensure_sealing_key(ContextId ctx_id) {
    auto& ctx = context_mut(ctx_id);
    auto& secs = secs_mut(ctx.enclave);
    if (secs.sealing_key) return;
    // Fetched once per enclave, held in a microcode-private slot; used for
    // the SSA register encryption.
    KeySelector sel{"SEAL-SYM", true, true, secs.keyid};
    secs.sealing_key = fetch_symmetric_key(ctx_id, sel);
}

void CpuCore::write_memory_traced(ExecContext& ctx, uint32_t addr, ByteView data) {
    if (addr + data.size() > ctx.memory.size())
        throw TalusError(ErrorCode::BAD_ADDRESS, "memory write out of bounds");
    std::copy(data.begin(), data.end(), ctx.memory.begin() + addr);
    leak_trace_.append(LeakSource::Buffer, data);
}

void CpuCore::execute(ContextId ctx_id, const Instr& instr) {
    auto& ctx = context_mut(ctx_id);
    switch (instr.op) {
        case Instr::Op::Nop:
        case Instr::Op::Exit:
            break;
        case Instr::Op::LoadSecretToBnd: {
            auto key = fetch_symmetric_key(ctx_id, instr.selector);
            context_mut(ctx_id).regs.bnd[instr.slot % 4] = key.v;
            break;
        }
        case Instr::Op::MoveBndToGpr: {
            // 16-byte register spills into a GPR pair; a deliberately leaky
            // path since GPR snapshots hit the SSA in plaintext.
            const auto& b = ctx.regs.bnd[instr.slot % 4];
            uint64_t lo = 0, hi = 0;
            for (int i = 0; i < 8; ++i) lo = lo << 8 | b[i];
            for (int i = 8; i < 16; ++i) hi = hi << 8 | b[i];
            ctx.regs.gprs[instr.gpr % 8] = lo;
            ctx.regs.gprs[(instr.gpr + 1) % 8] = hi;
            break;
        }
        case Instr::Op::XorBnd: {
            auto& dst = ctx.regs.bnd[instr.slot % 4];
            const auto& src = ctx.regs.bnd[instr.other % 4];
            for (int i = 0; i < 16; ++i) dst[i] ^= src[i];
            break;
        }
        case Instr::Op::EncryptBlockWithBnd: {
            if (instr.addr % 16 != 0 || instr.len > 16)
                throw TalusError(ErrorCode::BAD_ADDRESS, "unaligned block");
            if (instr.addr + instr.len > ctx.memory.size())
                throw TalusError(ErrorCode::BAD_ADDRESS, "block out of bounds");
            SymKey128 key;
            key.v = ctx.regs.bnd[instr.slot % 4];
            Bytes block(ctx.memory.begin() + instr.addr,
                        ctx.memory.begin() + instr.addr + instr.len);
            Bytes ct = crypto::ctr_crypt_at(key, 0, instr.addr / 16, block);
            write_memory_traced(ctx, instr.addr, ct);
            break;
        }
        case Instr::Op::WriteMem: {
            wire::Writer w;
            w.u64(ctx.regs.gprs[instr.gpr % 8]);
            write_memory_traced(ctx, instr.addr, w.bytes());
            break;
        }
    }
}

StepResult CpuCore::step(ContextId ctx_id) {
    auto& ctx = context_mut(ctx_id);
    if (!ctx.running || ctx.interrupted) throw TalusError(ErrorCode::NOT_RUNNING);

    if (ctx.pc >= ctx.program.size()) {
        eexit(ctx_id);
        return StepResult::Exited;
    }
    Instr instr = ctx.program[ctx.pc++];
    execute(ctx_id, instr);
    if (instr.op == Instr::Op::Exit) {
        auto& fresh = context_mut(ctx_id);
        auto& secs = secs_mut(fresh.enclave);
        spill_registers(fresh, secs);
        fresh.running = false;
        return StepResult::Exited;
    }
    return StepResult::Running;
}

bool CpuCore::exited(ContextId ctx_id) const {
    const auto& ctx = context(ctx_id);
    return !ctx.running && !ctx.interrupted;
}

void CpuCore::spill_registers(ExecContext& ctx, Secs& secs) {
    // BND registers never reach the memory hierarchy in plaintext: each spill
    // uses a fresh nonce (the exit counter) with per-slot CTR block offsets,
    // so ciphertexts are one-shot even for unchanged secrets.
    ++secs.aex_count;
    uint64_t nonce = secs.aex_count;
    SsaFrame frame;
    frame.gpr_snapshot = ctx.regs.gprs;
    for (int i = 0; i < 4; ++i) {
        Bytes ct = crypto::ctr_crypt_at(*secs.sealing_key, nonce, 4 * i,
                                        ByteView(ctx.regs.bnd[i].data(), 16));
        std::copy(ct.begin(), ct.end(), frame.bnd_ct[i].begin());
    }
    frame.aex_nonce = nonce;
    ctx.ssa = frame;
    leak_trace_.append(LeakSource::Ssa, frame.serialize());

    ctx.regs = RegisterFile{};  // scrub to non-secret values
}

SsaFrame CpuCore::aex(ContextId ctx_id) {
    auto& ctx = context_mut(ctx_id);
    if (!ctx.running || ctx.interrupted) throw TalusError(ErrorCode::NOT_RUNNING);
    auto& secs = secs_mut(ctx.enclave);
    spill_registers(ctx, secs);
    ctx.interrupted = true;
    return ctx.ssa;
}

void CpuCore::eresume(ContextId ctx_id) {
    auto& ctx = context_mut(ctx_id);
    if (!ctx.interrupted) throw TalusError(ErrorCode::NOT_RUNNING, "nothing to resume");
    const auto& secs = secs_mut(ctx.enclave);
    restore_registers(ctx, secs);
    ctx.interrupted = false;
}

void CpuCore::restore_registers(ExecContext& ctx, const Secs& secs) {
    ctx.regs.gprs = ctx.ssa.gpr_snapshot;
    for (int i = 0; i < 4; ++i) {
        Bytes pt = crypto::ctr_crypt_at(*secs.sealing_key, ctx.ssa.aex_nonce, 4 * i,
                                        ByteView(ctx.ssa.bnd_ct[i].data(), 16));
        std::copy(pt.begin(), pt.end(), ctx.regs.bnd[i].begin());
    }
}

void CpuCore::eexit(ContextId ctx_id) {
    auto& ctx = context_mut(ctx_id);
    if (!ctx.running || ctx.interrupted) throw TalusError(ErrorCode::NOT_RUNNING);
    auto& secs = secs_mut(ctx.enclave);
    spill_registers(ctx, secs);
    ctx.running = false;
}

// --- key derivation & attestation ---

Bytes CpuCore::derive_kdm_context(const KeySelector& sel, const EnclaveIdentity& id) const {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(sel.keyname.size()));
    w.raw(to_bytes(sel.keyname));
    uint8_t flags = (sel.use_mrenclave ? 0x01 : 0) | (sel.use_mrsigner ? 0x02 : 0);
    w.u8(flags);
    if (sel.use_mrenclave) w.raw(id.mrenclave.view());
    if (sel.use_mrsigner) w.raw(id.mrsigner.view());
    w.u16(id.isvprodid);
    w.u16(id.isvsvn);
    w.u64(id.attributes);
    w.raw(sel.keyid.view());
    w.u16(cpusvn_);
    // Owner binding ties every derived key to both the CPU (seal fuses) and
    // the platform owner epoch.
    w.raw(crypto::kdf(seal_fuses_.view(), "OWNERBIND", owner_secret_digest_.view(), 32));
    return w.take();
}

Digest32 CpuCore::identity_policy_digest(const KeySelector& sel,
                                         const EnclaveIdentity& id) const {
    uint8_t bitmap = (sel.use_mrenclave ? tpm::kIdMrenclave : 0) |
                     (sel.use_mrsigner ? tpm::kIdMrsigner : 0);
    tpm::IdentityAssertion assertion;
    assertion.mrenclave = id.mrenclave;
    assertion.mrsigner = id.mrsigner;
    assertion.isvprodid = id.isvprodid;
    assertion.isvsvn = id.isvsvn;
    return tpm::policy_extend_identity(Digest32{}, bitmap, assertion);
}

tpm::ObjectKind CpuCore::kind_for_keyname(const std::string& keyname) const {
    if (keyname.find("SYM") != std::string::npos) return ObjectKind::SymmetricKey;
    if (keyname == "ATTEST") return ObjectKind::AttestationKey;
    if (keyname == "SIGN") return ObjectKind::SigningKey;
    return ObjectKind::HmacKey;
}

uint32_t CpuCore::create_key_with_policy(const KeySelector& sel, const EnclaveIdentity& id,
                                         ObjectKind kind) {
    tpm::ObjectTemplate tmpl;
    tmpl.kind = kind;
    tmpl.creation_context = derive_kdm_context(sel, id);
    tmpl.auth_policy = identity_policy_digest(sel, id);
    return microcode_client().create_primary(tmpl).handle;
}

uint32_t CpuCore::identity_session(const KeySelector& sel, const EnclaveIdentity& id) {
    auto client = microcode_client();
    uint32_t session = client.policy_start_session();
    uint8_t bitmap = (sel.use_mrenclave ? tpm::kIdMrenclave : 0) |
                     (sel.use_mrsigner ? tpm::kIdMrsigner : 0);
    tpm::IdentityAssertion assertion;
    assertion.mrenclave = id.mrenclave;
    assertion.mrsigner = id.mrsigner;
    assertion.isvprodid = id.isvprodid;
    assertion.isvsvn = id.isvsvn;
    client.policy_identity(session, bitmap, assertion);
    return session;
}

uint32_t CpuCore::egetkey(ContextId ctx_id, const KeySelector& sel) {
    auto& ctx = context_mut(ctx_id);
    if (!ctx.running) throw TalusError(ErrorCode::NOT_RUNNING);
    const auto& id = secs(ctx.enclave).identity;
    ObjectKind kind = kind_for_keyname(sel.keyname);
    uint32_t handle = create_key_with_policy(sel, id, kind);
    if (kind == ObjectKind::SymmetricKey) {
        // Direct-to-register release: the key crosses the bus encrypted and
        // lands in BND0 without touching the memory hierarchy.
        uint32_t session = identity_session(sel, id);
        auto key = microcode_client().release_symmetric(handle, session);
        context_mut(ctx_id).regs.bnd[0] = key.v;
    }
    return handle;
}

SymKey128 CpuCore::fetch_symmetric_key(ContextId ctx_id, const KeySelector& sel) {
    const auto& ctx = context(ctx_id);
    const auto& id = secs(ctx.enclave).identity;
    uint32_t handle = create_key_with_policy(sel, id, ObjectKind::SymmetricKey);
    uint32_t session = identity_session(sel, id);
    return microcode_client().release_symmetric(handle, session);
}

Report CpuCore::ereport(ContextId ctx_id, const EnclaveIdentity& target,
                        const std::array<uint8_t, 64>& user_data) {
    const auto& ctx = context(ctx_id);
    if (!ctx.running && !ctx.interrupted) throw TalusError(ErrorCode::NOT_RUNNING);

    Report report;
    report.target_identity = target;
    report.reporting_identity = secs(ctx.enclave).identity;
    report.user_data = user_data;
    // Reporting key: derivable only by microcode (seal fuses) for the target.
    Bytes report_key = crypto::kdf(seal_fuses_.view(), "REPORT", target.canonical(), 32);
    report.tag = crypto::mac(report_key, report.mac_body());
    return report;
}

bool CpuCore::verify_report(ContextId target_ctx, const Report& report) {
    const auto& ctx = context(target_ctx);
    const auto& own = secs(ctx.enclave).identity;
    // The target's microcode derives the reporting key from its own identity;
    // a report aimed elsewhere simply fails the MAC.
    Bytes report_key = crypto::kdf(seal_fuses_.view(), "REPORT", own.canonical(), 32);
    return crypto::mac(report_key, report.mac_body()) == report.tag;
}

// --- staging paths & shared memory ---

void CpuCore::stage_bytes_through_memory(ContextId ctx_id, uint32_t addr, ByteView data) {
    write_memory_traced(context_mut(ctx_id), addr, data);
}

void CpuCore::load_bnd_from_memory(ContextId ctx_id, uint8_t slot, uint32_t addr) {
    auto& ctx = context_mut(ctx_id);
    if (addr + 16 > ctx.memory.size()) throw TalusError(ErrorCode::BAD_ADDRESS);
    std::copy(ctx.memory.begin() + addr, ctx.memory.begin() + addr + 16,
              ctx.regs.bnd[slot % 4].begin());
}

void CpuCore::os_write_memory(ContextId ctx_id, uint32_t addr, ByteView data) {
    write_memory_traced(context_mut(ctx_id), addr, data);
}

Bytes CpuCore::read_memory(ContextId ctx_id, uint32_t addr, size_t len) const {
    const auto& ctx = context(ctx_id);
    if (addr + len > ctx.memory.size()) throw TalusError(ErrorCode::BAD_ADDRESS);
    return Bytes(ctx.memory.begin() + addr, ctx.memory.begin() + addr + len);
}

std::vector<Bytes> CpuCore::observable_memory() const {
    std::vector<Bytes> out;
    out.reserve(contexts_.size());
    for (const auto& [id, ctx] : contexts_) out.push_back(ctx.memory);
    return out;
}

void CpuCore::set_registers_for_test(ContextId ctx_id, const RegisterFile& regs) {
    context_mut(ctx_id).regs = regs;
}

}  // namespace talus::cpu
