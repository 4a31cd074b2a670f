#include "talus/tpm.hpp"

#include <algorithm>

#include "talus/wire.hpp"

namespace talus::tpm {

namespace {

constexpr uint8_t kAllLocalities = 0x1f;  // localities 0..4
constexpr uint8_t kLocality4Only = 0x10;

constexpr size_t kFieldIdentityCount = 4;

void check_locality_value(uint8_t locality) {
    if (locality > 4) throw TalusError(ErrorCode::INVALID_LOCALITY);
}

const char* kind_label(ObjectKind kind) {
    switch (kind) {
        case ObjectKind::HmacKey: return "HMAC-KEY";
        case ObjectKind::SigningKey: return "SIGNING-KEY";
        case ObjectKind::SymmetricKey: return "SYM-KEY";
        case ObjectKind::AttestationKey: return "ATTEST-KEY";
    }
    throw TalusError(ErrorCode::KIND_MISMATCH, "unknown object kind");
}

size_t kind_secret_len(ObjectKind kind) {
    return kind == ObjectKind::SymmetricKey ? 16 : 32;
}

bool kind_has_public(ObjectKind kind) {
    return kind == ObjectKind::SigningKey || kind == ObjectKind::AttestationKey;
}

uint32_t selection_bitmap(const std::vector<uint8_t>& indices) {
    uint32_t bitmap = 0;
    for (uint8_t idx : indices) {
        if (idx > 23) throw TalusError(ErrorCode::BAD_INDEX);
        bitmap |= 1u << idx;
    }
    return bitmap;
}

}  // namespace

// ---------------------------------------------------------------------------
// Policy digest chaining
// ---------------------------------------------------------------------------

Digest32 policy_extend_locality(const Digest32& digest, uint8_t min_locality) {
    wire::Writer w;
    w.raw(to_bytes("POLICY_LOCALITY"));
    w.u8(min_locality);
    return crypto::hash_extend(digest, w.bytes());
}

Digest32 policy_extend_pcr(const Digest32& digest, const std::vector<uint8_t>& indices,
                           const Digest32& composite) {
    wire::Writer w;
    w.raw(to_bytes("POLICY_PCR"));
    w.u32(selection_bitmap(indices));
    w.raw(composite.view());
    return crypto::hash_extend(digest, w.bytes());
}

Digest32 policy_extend_identity(const Digest32& digest, uint8_t field_bitmap,
                                const IdentityAssertion& values) {
    wire::Writer w;
    w.raw(to_bytes("POLICY_ID"));
    w.u8(field_bitmap);
    if (field_bitmap & kIdMrenclave) w.raw(values.mrenclave.view());
    if (field_bitmap & kIdMrsigner) w.raw(values.mrsigner.view());
    if (field_bitmap & kIdIsvProdId) w.u16(values.isvprodid);
    if (field_bitmap & kIdIsvSvn) w.u16(values.isvsvn);
    return crypto::hash_extend(digest, w.bytes());
}

Digest32 pcr_composite(const std::vector<Digest32>& values) {
    crypto::Sha256 s;
    for (const auto& v : values) s.update(v.view());
    return s.finish();
}

// ---------------------------------------------------------------------------
// Attestation record serialization
// ---------------------------------------------------------------------------

Bytes TimeRecord::signed_body() const {
    wire::Writer w;
    w.raw(to_bytes("TPM-TIME"));
    w.u64(ticks);
    w.blob(qualifying);
    return w.take();
}

Bytes Quote::signed_body() const {
    wire::Writer w;
    w.raw(to_bytes("TPM-QUOTE"));
    w.u32(selection_bitmap(selection));
    w.raw(composite.view());
    w.u64(ticks);
    w.blob(qualifying);
    return w.take();
}

Bytes Quote::serialize() const {
    wire::Writer w;
    w.u32(selection_bitmap(selection));
    w.raw(composite.view());
    w.u64(ticks);
    w.blob(qualifying);
    w.blob(signature);
    return w.take();
}

Quote Quote::deserialize(ByteView data) {
    wire::Reader r(data);
    Quote q;
    uint32_t bitmap = r.u32();
    for (uint8_t i = 0; i < 24; ++i)
        if (bitmap & (1u << i)) q.selection.push_back(i);
    q.composite = Digest32::from_bytes(r.raw(32));
    q.ticks = r.u64();
    q.qualifying = r.blob();
    q.signature = r.blob();
    r.expect_done();
    return q;
}

// ---------------------------------------------------------------------------
// Device
// ---------------------------------------------------------------------------

PcrBank TpmDevice::make_pcr_bank() {
    PcrBank bank{};
    for (int i = 0; i <= 15; ++i) {
        bank.extend_mask[i] = kAllLocalities;
        bank.reset_mask[i] = 0x00;  // static PCRs never reset
    }
    // Launch PCRs: reset is microcode-only so a software actor can never
    // rewind the identity measurements mid-launch.
    for (int i = 11; i <= 13; ++i) bank.reset_mask[i] = kLocality4Only;
    bank.extend_mask[16] = bank.reset_mask[16] = kAllLocalities;  // debug PCR
    for (int i = 17; i <= 22; ++i) {
        bank.extend_mask[i] = kLocality4Only;
        bank.reset_mask[i] = kLocality4Only;
    }
    bank.extend_mask[23] = bank.reset_mask[23] = kAllLocalities;
    return bank;
}

TpmDevice::TpmDevice(const Digest32& primary_seed, const Digest32& endorsement_seed)
    : primary_seed_(primary_seed),
      endorsement_seed_(endorsement_seed),
      pcr_bank_(make_pcr_bank()) {}

void TpmDevice::tick(const char* command) {
    auto it = command_costs_.find(command);
    clock_ticks_ += it == command_costs_.end() ? 1 : it->second;
}

void TpmDevice::set_command_cost(const std::string& command, uint64_t ticks) {
    command_costs_[command] = ticks;
}

void TpmDevice::require_owned() const {
    if (!owned_) throw TalusError(ErrorCode::NOT_OWNED);
}

SymKey128 TpmDevice::take_ownership(ByteView owner_secret) {
    tick("take_ownership");
    if (owned_) throw TalusError(ErrorCode::ALREADY_OWNED);
    owned_ = true;
    owner_secret_.assign(owner_secret.begin(), owner_secret.end());
    channel_psk_ = SymKey128::from_bytes(
        crypto::kdf(endorsement_seed_.view(), "CHANNEL", owner_secret, 16));
    return channel_psk_;
}

// --- policy sessions ---

uint32_t TpmDevice::policy_start_session(uint8_t locality) {
    tick("policy_start_session");
    check_locality_value(locality);
    PolicySession s;
    s.handle = next_session_handle_++;
    s.creation_locality = locality;
    sessions_[s.handle] = s;
    return s.handle;
}

PolicySession& TpmDevice::find_session(uint32_t session) {
    auto it = sessions_.find(session);
    if (it == sessions_.end()) throw TalusError(ErrorCode::UNKNOWN_SESSION);
    return it->second;
}

void TpmDevice::drop_session(uint32_t session) {
    sessions_.erase(session);
}

Digest32 TpmDevice::policy_locality(uint32_t session, uint8_t min_locality) {
    tick("policy_locality");
    auto& s = find_session(session);
    if (s.creation_locality < min_locality) {
        // A failed policy command invalidates the session.
        drop_session(session);
        throw TalusError(ErrorCode::LOCALITY_FAIL, "session locality below policy minimum");
    }
    s.digest = policy_extend_locality(s.digest, min_locality);
    return s.digest;
}

Digest32 TpmDevice::policy_pcr(uint32_t session, const std::vector<uint8_t>& indices) {
    tick("policy_pcr");
    auto& s = find_session(session);
    std::vector<Digest32> values;
    for (uint8_t idx : indices) {
        if (idx > 23) {
            drop_session(session);
            throw TalusError(ErrorCode::BAD_INDEX);
        }
        values.push_back(pcr_bank_.pcrs[idx]);
    }
    s.digest = policy_extend_pcr(s.digest, indices, pcr_composite(values));
    return s.digest;
}

Digest32 TpmDevice::policy_identity(uint32_t session, uint8_t field_bitmap,
                                    const IdentityAssertion& values) {
    tick("policy_identity");
    auto& s = find_session(session);
    if (s.creation_locality != 4) {
        drop_session(session);
        throw TalusError(ErrorCode::IDENTITY_LOCALITY,
                         "only microcode may assert enclave identity");
    }
    if (field_bitmap >= (1u << kFieldIdentityCount)) {
        drop_session(session);
        throw TalusError(ErrorCode::CORRUPT_STATE, "bad identity bitmap");
    }
    s.digest = policy_extend_identity(s.digest, field_bitmap, values);
    return s.digest;
}

void TpmDevice::authorize(uint32_t session, const Digest32& auth_policy) {
    auto& s = find_session(session);
    bool ok = s.digest == auth_policy;
    drop_session(session);  // single use, consumed either way
    if (!ok) throw TalusError(ErrorCode::POLICY_FAIL);
}

// --- object store ---

const TpmObject& TpmDevice::find_object(uint32_t handle, ErrorCode missing) const {
    auto it = objects_.find(handle);
    if (it == objects_.end()) throw TalusError(missing);
    return it->second;
}

CreateResult TpmDevice::create_primary(const ObjectTemplate& tmpl) {
    tick("create_primary");
    require_owned();
    TpmObject obj;
    obj.handle = next_object_handle_++;
    obj.kind = tmpl.kind;
    obj.creation_context = tmpl.creation_context;
    obj.auth_policy = tmpl.auth_policy;
    obj.secret_material = crypto::kdf(primary_seed_.view(), kind_label(tmpl.kind),
                                      tmpl.creation_context, kind_secret_len(tmpl.kind));
    if (kind_has_public(tmpl.kind)) {
        auto seed = Digest32::from_bytes(obj.secret_material);
        obj.public_part = crypto::sig_keygen(seed).public_part;
    }
    CreateResult result{obj.handle, obj.public_part};
    objects_[obj.handle] = std::move(obj);
    return result;
}

Bytes TpmDevice::create_wrapped(uint32_t parent, const ObjectTemplate& tmpl) {
    tick("create_wrapped");
    require_owned();
    const auto& p = find_object(parent, ErrorCode::UNKNOWN_PARENT);

    TpmObject child;
    child.kind = tmpl.kind;
    child.creation_context = tmpl.creation_context;
    child.auth_policy = tmpl.auth_policy;
    child.secret_material =
        crypto::kdf(p.secret_material, std::string("CHILD-") + kind_label(tmpl.kind),
                    tmpl.creation_context, kind_secret_len(tmpl.kind));
    if (kind_has_public(tmpl.kind)) {
        auto seed = Digest32::from_bytes(child.secret_material);
        child.public_part = crypto::sig_keygen(seed).public_part;
    }

    wire::Writer inner;
    inner.u8(static_cast<uint8_t>(child.kind));
    inner.blob(child.secret_material);
    inner.blob(child.public_part ? *child.public_part : Bytes{});
    inner.raw(child.auth_policy.view());
    inner.blob(child.creation_context);
    Bytes plain = inner.take();

    auto wrap_key = SymKey128::from_bytes(crypto::kdf(p.secret_material, "WRAP-ENC", {}, 16));
    auto mac_key = crypto::kdf(p.secret_material, "WRAP-MAC", {}, 32);
    auto nonce_src = crypto::hash(plain);
    uint64_t nonce = 0;
    for (int i = 0; i < 8; ++i) nonce = nonce << 8 | nonce_src.v[i];

    wire::Writer blob;
    blob.u64(nonce);
    blob.blob(crypto::ctr_crypt(wrap_key, nonce, plain));
    Bytes framed = blob.take();
    auto tag = crypto::mac(mac_key, framed);
    append(framed, tag.view());
    return framed;
}

uint32_t TpmDevice::load(uint32_t parent, ByteView blob) {
    tick("load");
    const auto& p = find_object(parent, ErrorCode::UNKNOWN_PARENT);
    if (blob.size() < 32 + 12) throw TalusError(ErrorCode::BAD_WRAP, "short blob");

    ByteView framed = blob.first(blob.size() - 32);
    ByteView tag_bytes = blob.subspan(blob.size() - 32);
    auto mac_key = crypto::kdf(p.secret_material, "WRAP-MAC", {}, 32);
    if (crypto::mac(mac_key, framed) != MacTag32::from_bytes(tag_bytes))
        throw TalusError(ErrorCode::BAD_WRAP);

    wire::Reader r(framed);
    uint64_t nonce = r.u64();
    Bytes ciphertext = r.blob();
    auto wrap_key = SymKey128::from_bytes(crypto::kdf(p.secret_material, "WRAP-ENC", {}, 16));
    Bytes plain = crypto::ctr_crypt(wrap_key, nonce, ciphertext);

    wire::Reader inner(plain);
    TpmObject child;
    child.kind = static_cast<ObjectKind>(inner.u8());
    child.secret_material = inner.blob();
    Bytes pub = inner.blob();
    if (!pub.empty()) child.public_part = pub;
    child.auth_policy = Digest32::from_bytes(inner.raw(32));
    child.creation_context = inner.blob();
    inner.expect_done();

    child.handle = next_object_handle_++;
    uint32_t handle = child.handle;
    objects_[handle] = std::move(child);
    return handle;
}

const TpmObject& TpmDevice::use_object(uint32_t handle, uint32_t session, ObjectKind kind) {
    const auto& obj = find_object(handle, ErrorCode::UNKNOWN_HANDLE);
    authorize(session, obj.auth_policy);
    if (obj.kind != kind) throw TalusError(ErrorCode::KIND_MISMATCH);
    return obj;
}

MacTag32 TpmDevice::hmac_sign(uint32_t handle, uint32_t session, ByteView msg) {
    tick("hmac_sign");
    const auto& obj = use_object(handle, session, ObjectKind::HmacKey);
    return crypto::mac(obj.secret_material, msg);
}

Signature TpmDevice::sign_with(const TpmObject& obj, const Digest32& digest) {
    auto kp = crypto::sig_keygen(Digest32::from_bytes(obj.secret_material));
    return crypto::sign(kp.private_part, digest);
}

Signature TpmDevice::sign(uint32_t handle, uint32_t session, const Digest32& digest) {
    tick("sign");
    const auto& obj = find_object(handle, ErrorCode::UNKNOWN_HANDLE);
    authorize(session, obj.auth_policy);
    if (obj.kind != ObjectKind::SigningKey && obj.kind != ObjectKind::AttestationKey)
        throw TalusError(ErrorCode::KIND_MISMATCH);
    return sign_with(obj, digest);
}

Bytes TpmDevice::encrypt_decrypt(uint32_t handle, uint32_t session, uint64_t nonce,
                                 ByteView data) {
    tick("encrypt_decrypt");
    const auto& obj = use_object(handle, session, ObjectKind::SymmetricKey);
    return crypto::ctr_crypt(SymKey128::from_bytes(obj.secret_material), nonce, data);
}

SymKey128 TpmDevice::release_symmetric(uint32_t handle, uint32_t session) {
    tick("release_symmetric");
    const auto& obj = use_object(handle, session, ObjectKind::SymmetricKey);
    return SymKey128::from_bytes(obj.secret_material);
}

bool TpmDevice::verify_signature(ByteView public_part, const Digest32& digest,
                                 const Signature& sig) {
    tick("verify_signature");
    return crypto::verify(public_part, digest, sig);
}

// --- hash sequences ---

uint32_t TpmDevice::hash_sequence_start() {
    tick("hash_sequence_start");
    uint32_t handle = next_sequence_handle_++;
    sequences_.emplace(handle, crypto::Sha256{});
    return handle;
}

void TpmDevice::hash_sequence_update(uint32_t seq, ByteView chunk) {
    tick("hash_sequence_update");
    auto it = sequences_.find(seq);
    if (it == sequences_.end()) throw TalusError(ErrorCode::UNKNOWN_SEQUENCE);
    it->second.update(chunk);
}

Digest32 TpmDevice::hash_sequence_complete(uint32_t seq) {
    tick("hash_sequence_complete");
    auto it = sequences_.find(seq);
    if (it == sequences_.end()) throw TalusError(ErrorCode::UNKNOWN_SEQUENCE);
    Digest32 digest = it->second.finish();
    sequences_.erase(it);
    return digest;
}

// --- PCRs ---

void TpmDevice::pcr_extend(uint8_t index, uint8_t locality, const Digest32& value) {
    tick("pcr_extend");
    check_locality_value(locality);
    if (index > 23) throw TalusError(ErrorCode::BAD_INDEX);
    if (!(pcr_bank_.extend_mask[index] & (1u << locality)))
        throw TalusError(ErrorCode::LOCALITY_FAIL);
    pcr_bank_.pcrs[index] = crypto::hash_extend(pcr_bank_.pcrs[index], value.view());
}

void TpmDevice::pcr_reset(uint8_t index, uint8_t locality) {
    tick("pcr_reset");
    check_locality_value(locality);
    if (index > 23) throw TalusError(ErrorCode::BAD_INDEX);
    if (!(pcr_bank_.reset_mask[index] & (1u << locality)))
        throw TalusError(ErrorCode::LOCALITY_FAIL);
    pcr_bank_.pcrs[index] = pcr_bank_.defaults[index];
}

Digest32 TpmDevice::pcr_read(uint8_t index, uint8_t locality) {
    tick("pcr_read");
    check_locality_value(locality);
    if (index > 23) throw TalusError(ErrorCode::BAD_INDEX);
    if (index == 21 && locality != 4)
        throw TalusError(ErrorCode::LOCALITY_FAIL, "PCR21 is readable at locality 4 only");
    return pcr_bank_.pcrs[index];
}

// --- NV ---

NvIndex& TpmDevice::find_nv(uint32_t handle) {
    auto it = nv_store_.find(handle);
    if (it == nv_store_.end()) throw TalusError(ErrorCode::UNKNOWN_HANDLE);
    return it->second;
}

uint32_t TpmDevice::nv_define_space(NvKind kind, uint32_t size, const Digest32& auth_policy) {
    tick("nv_define_space");
    require_owned();
    NvIndex nv;
    nv.handle = next_nv_handle_++;
    nv.kind = kind;
    nv.auth_policy = auth_policy;
    if (kind == NvKind::Data) nv.data_payload.resize(size, 0);
    uint32_t handle = nv.handle;
    nv_store_[handle] = std::move(nv);
    return handle;
}

namespace {
bool zero_policy(const Digest32& d) {
    return d == Digest32{};
}
}  // namespace

uint64_t TpmDevice::nv_increment(uint32_t handle, uint32_t session) {
    tick("nv_increment");
    auto& nv = find_nv(handle);
    if (session != 0)
        authorize(session, nv.auth_policy);
    else if (!zero_policy(nv.auth_policy))
        throw TalusError(ErrorCode::POLICY_FAIL, "NV index requires a policy session");
    if (nv.kind != NvKind::Counter) throw TalusError(ErrorCode::KIND_MISMATCH);
    return ++nv.counter_value;
}

NvValue TpmDevice::nv_read(uint32_t handle, uint32_t session) {
    tick("nv_read");
    auto& nv = find_nv(handle);
    if (session != 0)
        authorize(session, nv.auth_policy);
    else if (!zero_policy(nv.auth_policy))
        throw TalusError(ErrorCode::POLICY_FAIL, "NV index requires a policy session");
    return NvValue{nv.kind, nv.counter_value, nv.data_payload};
}

void TpmDevice::nv_write(uint32_t handle, uint32_t session, ByteView payload) {
    tick("nv_write");
    auto& nv = find_nv(handle);
    if (session != 0)
        authorize(session, nv.auth_policy);
    else if (!zero_policy(nv.auth_policy))
        throw TalusError(ErrorCode::POLICY_FAIL, "NV index requires a policy session");
    if (nv.kind != NvKind::Data) throw TalusError(ErrorCode::KIND_MISMATCH);
    nv.data_payload.assign(payload.begin(), payload.end());
}

// --- clock & attestation ---

uint64_t TpmDevice::read_clock() {
    tick("read_clock");
    return clock_ticks_;
}

TimeRecord TpmDevice::get_time(uint32_t ak, uint32_t session, ByteView qualifying) {
    tick("get_time");
    const auto& obj = use_object(ak, session, ObjectKind::AttestationKey);
    TimeRecord rec;
    rec.ticks = clock_ticks_;
    rec.qualifying.assign(qualifying.begin(), qualifying.end());
    rec.signature = sign_with(obj, crypto::hash(rec.signed_body()));
    return rec;
}

Quote TpmDevice::quote(uint32_t ak, uint32_t session, const std::vector<uint8_t>& selection,
                       ByteView qualifying) {
    tick("quote");
    const auto& obj = use_object(ak, session, ObjectKind::AttestationKey);
    if (selection.empty()) throw TalusError(ErrorCode::EMPTY_SELECTION);

    Quote q;
    q.selection = selection;
    std::sort(q.selection.begin(), q.selection.end());
    std::vector<Digest32> values;
    for (uint8_t idx : q.selection) {
        if (idx > 23) throw TalusError(ErrorCode::BAD_INDEX);
        values.push_back(pcr_bank_.pcrs[idx]);
    }
    q.composite = pcr_composite(values);
    q.ticks = clock_ticks_;
    q.qualifying.assign(qualifying.begin(), qualifying.end());
    q.signature = sign_with(obj, crypto::hash(q.signed_body()));
    return q;
}

const Bytes& TpmDevice::object_secret_for_test(uint32_t handle) const {
    return find_object(handle, ErrorCode::UNKNOWN_HANDLE).secret_material;
}

}  // namespace talus::tpm
