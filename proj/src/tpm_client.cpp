// Both ends of the bus command protocol: TpmDevice::handle_command decodes
// and executes, TpmClient encodes and parses responses. Response layout is
// status byte (ErrorCode, 0 = OK) followed by the command-specific body.

#include "talus/tpm_client.hpp"

#include "talus/wire.hpp"

namespace talus::tpm {

namespace {

IdentityAssertion read_identity_fields(wire::Reader& r, uint8_t bitmap) {
    IdentityAssertion values;
    if (bitmap & kIdMrenclave) values.mrenclave = Digest32::from_bytes(r.raw(32));
    if (bitmap & kIdMrsigner) values.mrsigner = Digest32::from_bytes(r.raw(32));
    if (bitmap & kIdIsvProdId) values.isvprodid = r.u16();
    if (bitmap & kIdIsvSvn) values.isvsvn = r.u16();
    return values;
}

void write_identity_fields(wire::Writer& w, uint8_t bitmap, const IdentityAssertion& values) {
    if (bitmap & kIdMrenclave) w.raw(values.mrenclave.view());
    if (bitmap & kIdMrsigner) w.raw(values.mrsigner.view());
    if (bitmap & kIdIsvProdId) w.u16(values.isvprodid);
    if (bitmap & kIdIsvSvn) w.u16(values.isvsvn);
}

std::vector<uint8_t> indices_from_bitmap(uint32_t bitmap) {
    std::vector<uint8_t> out;
    for (uint8_t i = 0; i < 24; ++i)
        if (bitmap & (1u << i)) out.push_back(i);
    return out;
}

uint32_t bitmap_from_indices(const std::vector<uint8_t>& indices) {
    uint32_t bitmap = 0;
    for (uint8_t i : indices) bitmap |= 1u << i;
    return bitmap;
}

}  // namespace

const char* command_name(uint8_t opcode) {
    switch (static_cast<Cmd>(opcode)) {
        case Cmd::PolicyStartSession: return "policy_start_session";
        case Cmd::PolicyLocality: return "policy_locality";
        case Cmd::PolicyPcr: return "policy_pcr";
        case Cmd::PolicyIdentity: return "policy_identity";
        case Cmd::CreatePrimary: return "create_primary";
        case Cmd::CreateWrapped: return "create_wrapped";
        case Cmd::Load: return "load";
        case Cmd::HmacSign: return "hmac_sign";
        case Cmd::Sign: return "sign";
        case Cmd::EncryptDecrypt: return "encrypt_decrypt";
        case Cmd::ReleaseSymmetric: return "release_symmetric";
        case Cmd::VerifySignature: return "verify_signature";
        case Cmd::HashSeqStart: return "hash_sequence_start";
        case Cmd::HashSeqUpdate: return "hash_sequence_update";
        case Cmd::HashSeqComplete: return "hash_sequence_complete";
        case Cmd::PcrExtend: return "pcr_extend";
        case Cmd::PcrReset: return "pcr_reset";
        case Cmd::PcrRead: return "pcr_read";
        case Cmd::NvDefine: return "nv_define_space";
        case Cmd::NvIncrement: return "nv_increment";
        case Cmd::NvRead: return "nv_read";
        case Cmd::NvWrite: return "nv_write";
        case Cmd::ReadClock: return "read_clock";
        case Cmd::GetTime: return "get_time";
        case Cmd::QuotePcr: return "quote";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Device side
// ---------------------------------------------------------------------------

Bytes TpmDevice::handle_command(uint8_t locality, ByteView payload) {
    wire::Writer ok;
    ok.u8(0);
    try {
        wire::Reader r(payload);
        switch (static_cast<Cmd>(r.u8())) {
            case Cmd::PolicyStartSession: {
                r.expect_done();
                ok.u32(policy_start_session(locality));
                break;
            }
            case Cmd::PolicyLocality: {
                uint32_t session = r.u32();
                uint8_t min_locality = r.u8();
                r.expect_done();
                ok.raw(policy_locality(session, min_locality).view());
                break;
            }
            case Cmd::PolicyPcr: {
                uint32_t session = r.u32();
                auto indices = indices_from_bitmap(r.u32());
                r.expect_done();
                ok.raw(policy_pcr(session, indices).view());
                break;
            }
            case Cmd::PolicyIdentity: {
                uint32_t session = r.u32();
                uint8_t bitmap = r.u8();
                auto values = read_identity_fields(r, bitmap);
                r.expect_done();
                ok.raw(policy_identity(session, bitmap, values).view());
                break;
            }
            case Cmd::CreatePrimary: {
                ObjectTemplate tmpl;
                tmpl.kind = static_cast<ObjectKind>(r.u8());
                tmpl.creation_context = r.blob();
                tmpl.auth_policy = Digest32::from_bytes(r.raw(32));
                r.expect_done();
                auto result = create_primary(tmpl);
                ok.u32(result.handle);
                ok.blob(result.public_part ? *result.public_part : Bytes{});
                break;
            }
            case Cmd::CreateWrapped: {
                uint32_t parent = r.u32();
                ObjectTemplate tmpl;
                tmpl.kind = static_cast<ObjectKind>(r.u8());
                tmpl.creation_context = r.blob();
                tmpl.auth_policy = Digest32::from_bytes(r.raw(32));
                r.expect_done();
                ok.blob(create_wrapped(parent, tmpl));
                break;
            }
            case Cmd::Load: {
                uint32_t parent = r.u32();
                Bytes blob = r.blob();
                r.expect_done();
                ok.u32(load(parent, blob));
                break;
            }
            case Cmd::HmacSign: {
                uint32_t handle = r.u32();
                uint32_t session = r.u32();
                Bytes msg = r.blob();
                r.expect_done();
                ok.raw(hmac_sign(handle, session, msg).view());
                break;
            }
            case Cmd::Sign: {
                uint32_t handle = r.u32();
                uint32_t session = r.u32();
                auto digest = Digest32::from_bytes(r.raw(32));
                r.expect_done();
                ok.blob(sign(handle, session, digest));
                break;
            }
            case Cmd::EncryptDecrypt: {
                uint32_t handle = r.u32();
                uint32_t session = r.u32();
                uint64_t nonce = r.u64();
                Bytes data = r.blob();
                r.expect_done();
                ok.blob(encrypt_decrypt(handle, session, nonce, data));
                break;
            }
            case Cmd::ReleaseSymmetric: {
                uint32_t handle = r.u32();
                uint32_t session = r.u32();
                r.expect_done();
                ok.raw(release_symmetric(handle, session).view());
                break;
            }
            case Cmd::VerifySignature: {
                Bytes pub = r.blob();
                auto digest = Digest32::from_bytes(r.raw(32));
                Bytes sig = r.blob();
                r.expect_done();
                ok.u8(verify_signature(pub, digest, sig) ? 1 : 0);
                break;
            }
            case Cmd::HashSeqStart: {
                r.expect_done();
                ok.u32(hash_sequence_start());
                break;
            }
            case Cmd::HashSeqUpdate: {
                uint32_t seq = r.u32();
                Bytes chunk = r.blob();
                r.expect_done();
                hash_sequence_update(seq, chunk);
                break;
            }
            case Cmd::HashSeqComplete: {
                uint32_t seq = r.u32();
                r.expect_done();
                ok.raw(hash_sequence_complete(seq).view());
                break;
            }
            case Cmd::PcrExtend: {
                uint8_t index = r.u8();
                auto value = Digest32::from_bytes(r.raw(32));
                r.expect_done();
                pcr_extend(index, locality, value);
                break;
            }
            case Cmd::PcrReset: {
                uint8_t index = r.u8();
                r.expect_done();
                pcr_reset(index, locality);
                break;
            }
            case Cmd::PcrRead: {
                uint8_t index = r.u8();
                r.expect_done();
                ok.raw(pcr_read(index, locality).view());
                break;
            }
            case Cmd::NvDefine: {
                auto kind = static_cast<NvKind>(r.u8());
                uint32_t size = r.u32();
                auto policy = Digest32::from_bytes(r.raw(32));
                r.expect_done();
                ok.u32(nv_define_space(kind, size, policy));
                break;
            }
            case Cmd::NvIncrement: {
                uint32_t handle = r.u32();
                uint32_t session = r.u32();
                r.expect_done();
                ok.u64(nv_increment(handle, session));
                break;
            }
            case Cmd::NvRead: {
                uint32_t handle = r.u32();
                uint32_t session = r.u32();
                r.expect_done();
                auto value = nv_read(handle, session);
                ok.u8(static_cast<uint8_t>(value.kind));
                ok.u64(value.counter_value);
                ok.blob(value.data_payload);
                break;
            }
            case Cmd::NvWrite: {
                uint32_t handle = r.u32();
                uint32_t session = r.u32();
                Bytes data = r.blob();
                r.expect_done();
                nv_write(handle, session, data);
                break;
            }
            case Cmd::ReadClock: {
                r.expect_done();
                ok.u64(read_clock());
                break;
            }
            case Cmd::GetTime: {
                uint32_t ak = r.u32();
                uint32_t session = r.u32();
                Bytes qualifying = r.blob();
                r.expect_done();
                auto rec = get_time(ak, session, qualifying);
                ok.u64(rec.ticks);
                ok.blob(rec.qualifying);
                ok.blob(rec.signature);
                break;
            }
            case Cmd::QuotePcr: {
                uint32_t ak = r.u32();
                uint32_t session = r.u32();
                auto selection = indices_from_bitmap(r.u32());
                Bytes qualifying = r.blob();
                r.expect_done();
                ok.blob(quote(ak, session, selection, qualifying).serialize());
                break;
            }
            default:
                throw TalusError(ErrorCode::CORRUPT_STATE, "unknown command opcode");
        }
        return ok.take();
    } catch (const TalusError& e) {
        wire::Writer err;
        err.u8(static_cast<uint8_t>(e.code()));
        err.blob(to_bytes(e.what()));
        return err.take();
    }
}

// ---------------------------------------------------------------------------
// Client side
// ---------------------------------------------------------------------------

TpmClient::TpmClient(bus::Channel& channel, uint8_t locality)
    : channel_(channel), locality_(locality) {}

TpmClient::TpmClient(bus::Channel& channel, uint8_t locality, const bus::MicrocodeGrant& grant)
    : channel_(channel), locality_(locality), grant_(&grant) {}

Bytes TpmClient::roundtrip(ByteView payload, bus::Cycle cycle) {
    Bytes response = grant_ ? channel_.send_microcode(*grant_, locality_, cycle, payload)
                            : channel_.send(locality_, cycle, payload);
    wire::Reader r(response);
    uint8_t status = r.u8();
    if (status != 0) {
        Bytes detail = r.blob();
        throw TalusError(static_cast<ErrorCode>(status),
                         std::string(detail.begin(), detail.end()));
    }
    return Bytes(response.begin() + 1, response.end());
}

uint32_t TpmClient::policy_start_session() {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::PolicyStartSession));
    return wire::Reader(roundtrip(w.bytes())).u32();
}

Digest32 TpmClient::policy_locality(uint32_t session, uint8_t min_locality) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::PolicyLocality));
    w.u32(session);
    w.u8(min_locality);
    return Digest32::from_bytes(roundtrip(w.bytes()));
}

Digest32 TpmClient::policy_pcr(uint32_t session, const std::vector<uint8_t>& indices) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::PolicyPcr));
    w.u32(session);
    w.u32(bitmap_from_indices(indices));
    return Digest32::from_bytes(roundtrip(w.bytes()));
}

Digest32 TpmClient::policy_identity(uint32_t session, uint8_t field_bitmap,
                                    const IdentityAssertion& values) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::PolicyIdentity));
    w.u32(session);
    w.u8(field_bitmap);
    write_identity_fields(w, field_bitmap, values);
    return Digest32::from_bytes(roundtrip(w.bytes()));
}

CreateResult TpmClient::create_primary(const ObjectTemplate& tmpl) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::CreatePrimary));
    w.u8(static_cast<uint8_t>(tmpl.kind));
    w.blob(tmpl.creation_context);
    w.raw(tmpl.auth_policy.view());
    wire::Reader r(roundtrip(w.bytes()));
    CreateResult result;
    result.handle = r.u32();
    Bytes pub = r.blob();
    if (!pub.empty()) result.public_part = pub;
    return result;
}

Bytes TpmClient::create_wrapped(uint32_t parent, const ObjectTemplate& tmpl) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::CreateWrapped));
    w.u32(parent);
    w.u8(static_cast<uint8_t>(tmpl.kind));
    w.blob(tmpl.creation_context);
    w.raw(tmpl.auth_policy.view());
    return wire::Reader(roundtrip(w.bytes())).blob();
}

uint32_t TpmClient::load(uint32_t parent, ByteView blob) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::Load));
    w.u32(parent);
    w.blob(blob);
    return wire::Reader(roundtrip(w.bytes())).u32();
}

MacTag32 TpmClient::hmac_sign(uint32_t handle, uint32_t session, ByteView msg) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::HmacSign));
    w.u32(handle);
    w.u32(session);
    w.blob(msg);
    return MacTag32::from_bytes(roundtrip(w.bytes()));
}

Signature TpmClient::sign(uint32_t handle, uint32_t session, const Digest32& digest) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::Sign));
    w.u32(handle);
    w.u32(session);
    w.raw(digest.view());
    return wire::Reader(roundtrip(w.bytes())).blob();
}

Bytes TpmClient::encrypt_decrypt(uint32_t handle, uint32_t session, uint64_t nonce,
                                 ByteView data) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::EncryptDecrypt));
    w.u32(handle);
    w.u32(session);
    w.u64(nonce);
    w.blob(data);
    return wire::Reader(roundtrip(w.bytes())).blob();
}

SymKey128 TpmClient::release_symmetric(uint32_t handle, uint32_t session) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::ReleaseSymmetric));
    w.u32(handle);
    w.u32(session);
    return SymKey128::from_bytes(roundtrip(w.bytes()));
}

bool TpmClient::verify_signature(ByteView public_part, const Digest32& digest,
                                 const Signature& sig) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::VerifySignature));
    w.blob(public_part);
    w.raw(digest.view());
    w.blob(sig);
    return wire::Reader(roundtrip(w.bytes())).u8() != 0;
}

uint32_t TpmClient::hash_sequence_start() {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::HashSeqStart));
    return wire::Reader(roundtrip(w.bytes())).u32();
}

void TpmClient::hash_sequence_update(uint32_t seq, ByteView chunk) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::HashSeqUpdate));
    w.u32(seq);
    w.blob(chunk);
    roundtrip(w.bytes());
}

Digest32 TpmClient::hash_sequence_complete(uint32_t seq) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::HashSeqComplete));
    w.u32(seq);
    return Digest32::from_bytes(roundtrip(w.bytes()));
}

void TpmClient::pcr_extend(uint8_t index, const Digest32& value) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::PcrExtend));
    w.u8(index);
    w.raw(value.view());
    roundtrip(w.bytes());
}

void TpmClient::pcr_reset(uint8_t index) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::PcrReset));
    w.u8(index);
    roundtrip(w.bytes());
}

Digest32 TpmClient::pcr_read(uint8_t index) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::PcrRead));
    w.u8(index);
    return Digest32::from_bytes(roundtrip(w.bytes()));
}

uint32_t TpmClient::nv_define_space(NvKind kind, uint32_t size, const Digest32& auth_policy) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::NvDefine));
    w.u8(static_cast<uint8_t>(kind));
    w.u32(size);
    w.raw(auth_policy.view());
    return wire::Reader(roundtrip(w.bytes())).u32();
}

uint64_t TpmClient::nv_increment(uint32_t handle, uint32_t session) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::NvIncrement));
    w.u32(handle);
    w.u32(session);
    return wire::Reader(roundtrip(w.bytes())).u64();
}

NvValue TpmClient::nv_read(uint32_t handle, uint32_t session) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::NvRead));
    w.u32(handle);
    w.u32(session);
    wire::Reader r(roundtrip(w.bytes()));
    NvValue value;
    value.kind = static_cast<NvKind>(r.u8());
    value.counter_value = r.u64();
    value.data_payload = r.blob();
    return value;
}

void TpmClient::nv_write(uint32_t handle, uint32_t session, ByteView payload) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::NvWrite));
    w.u32(handle);
    w.u32(session);
    w.blob(payload);
    roundtrip(w.bytes());
}

uint64_t TpmClient::read_clock() {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::ReadClock));
    return wire::Reader(roundtrip(w.bytes())).u64();
}

TimeRecord TpmClient::get_time(uint32_t ak, uint32_t session, ByteView qualifying) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::GetTime));
    w.u32(ak);
    w.u32(session);
    w.blob(qualifying);
    wire::Reader r(roundtrip(w.bytes()));
    TimeRecord rec;
    rec.ticks = r.u64();
    rec.qualifying = r.blob();
    rec.signature = r.blob();
    return rec;
}

Quote TpmClient::quote(uint32_t ak, uint32_t session, const std::vector<uint8_t>& selection,
                       ByteView qualifying) {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(Cmd::QuotePcr));
    w.u32(ak);
    w.u32(session);
    w.u32(bitmap_from_indices(selection));
    w.blob(qualifying);
    return Quote::deserialize(wire::Reader(roundtrip(w.bytes())).blob());
}

}  // namespace talus::tpm
