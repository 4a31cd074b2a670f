#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "talus/cpu.hpp"
#include "test_util.hpp"

using namespace talus;
using namespace talus::cpu;
using talus::crypto::Digest32;
using talus::crypto::SymKey128;

namespace {

struct Rig {
    tpm::TpmDevice dev;
    bus::Channel chan;
    CpuCore cpu;

    explicit Rig(uint64_t salt = 1)
        : dev(oracles::Rng(salt).digest(), oracles::Rng(salt + 101).digest()),
          chan(dev.take_ownership(to_bytes("owner")),
               [this](uint8_t locality, const Bytes& payload) {
                   return dev.handle_command(locality, payload);
               }),
          cpu(chan, oracles::Rng(salt + 202).digest(), 7,
              crypto::hash(to_bytes("owner")), oracles::Rng(salt + 303).digest()) {}
};

EnclaveId make_enclave(Rig& rig, uint64_t salt, size_t page_count = 2,
                       uint64_t attributes = 0x11, bool launch = true) {
    oracles::Rng rng(salt);
    auto e = rig.cpu.ecreate(attributes, rng.digest());
    for (size_t i = 0; i < page_count; ++i)
        rig.cpu.eadd(e, 0x1000 * i, rng.bytes(64 + rng.below(64)));
    rig.cpu.finalize_measurement(e);
    if (launch) rig.cpu.einit(e, rig.cpu.mint_einit_token(e));
    return e;
}

bool trace_contains(const LeakTrace& trace, ByteView needle) {
    for (const auto& rec : trace.records)
        if (contains_subsequence(rec.bytes, needle)) return true;
    return false;
}

}  // namespace

TEST_CASE("ecreate starts uninitialized with independent sequences") {
    Rig rig;
    auto e1 = rig.cpu.ecreate(0xabcd, Digest32{});
    auto e2 = rig.cpu.ecreate(0xabcd, Digest32{});
    CHECK_FALSE(rig.cpu.secs(e1).init);
    CHECK(rig.cpu.secs(e1).identity.attributes == 0xabcd);
    CHECK(rig.cpu.secs(e1).measurement_seq != rig.cpu.secs(e2).measurement_seq);
    CHECK(e1 != e2);
}

TEST_CASE("measurement equals the page-record oracle and is order sensitive") {
    Rig rig;
    oracles::Rng rng(5);
    std::vector<std::pair<uint64_t, Bytes>> pages = {
        {0x0000, rng.bytes(128)}, {0x1000, rng.bytes(32)}, {0x2000, rng.bytes(77)}};

    auto e = rig.cpu.ecreate(0, Digest32{});
    for (const auto& [off, content] : pages) rig.cpu.eadd(e, off, content);
    CHECK(rig.cpu.finalize_measurement(e) == oracles::mrenclave(pages));

    // Same pages, different order -> different measurement.
    auto e2 = rig.cpu.ecreate(0, Digest32{});
    rig.cpu.eadd(e2, pages[1].first, pages[1].second);
    rig.cpu.eadd(e2, pages[0].first, pages[0].second);
    rig.cpu.eadd(e2, pages[2].first, pages[2].second);
    CHECK_FALSE(rig.cpu.finalize_measurement(e2) == oracles::mrenclave(pages));

    // Zero pages measure to hash(empty).
    auto e3 = rig.cpu.ecreate(0, Digest32{});
    CHECK(rig.cpu.finalize_measurement(e3).hex() ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK_TALUS_ERROR(rig.cpu.finalize_measurement(e3), MEASUREMENT_FINAL);
}

TEST_CASE("eadd closes after init and page contents never reach the trace") {
    Rig rig;
    oracles::Rng rng(6);
    auto page = rng.bytes(256);
    auto e = rig.cpu.ecreate(0, rng.digest());
    rig.cpu.eadd(e, 0, page);
    rig.cpu.finalize_measurement(e);
    CHECK_TALUS_ERROR(rig.cpu.eadd(e, 0x1000, page), SEQUENCE_CLOSED);
    rig.cpu.einit(e, rig.cpu.mint_einit_token(e));
    CHECK_TALUS_ERROR(rig.cpu.eadd(e, 0x1000, page), SEQUENCE_CLOSED);

    // EPC writes surface only as opaque MEE tokens.
    CHECK_FALSE(trace_contains(rig.cpu.leak_trace(), page));
    bool epc_seen = false;
    for (const auto& rec : rig.cpu.leak_trace().records)
        if (rec.source == LeakSource::Epc) epc_seen = true;
    CHECK(epc_seen);
}

TEST_CASE("einit accepts exactly the matching token") {
    Rig rig;
    auto e = make_enclave(rig, 10, 2, 0x11, /*launch=*/false);
    auto token = rig.cpu.mint_einit_token(e);

    // Tampered MAC.
    auto bad_tag = token;
    bad_tag.tag.v[0] ^= 0x01;
    CHECK_TALUS_ERROR(rig.cpu.einit(e, bad_tag), BAD_TOKEN);

    // Token minted for a different enclave.
    auto other = make_enclave(rig, 11, 2, 0x11, false);
    auto other_token = rig.cpu.mint_einit_token(other);
    CHECK_TALUS_ERROR(rig.cpu.einit(e, other_token), BAD_TOKEN);

    rig.cpu.einit(e, token);
    CHECK(rig.cpu.secs(e).init);
    CHECK_TALUS_ERROR(rig.cpu.einit(e, token), ALREADY_INIT);
}

TEST_CASE("programs run one instruction per step") {
    Rig rig;
    auto e = make_enclave(rig, 20);
    CHECK_TALUS_ERROR(rig.cpu.eenter(999, {}), UNKNOWN_ENCLAVE);

    auto ctx = rig.cpu.eenter(e, {Instr::nop(), Instr::exit()});
    CHECK(rig.cpu.step(ctx) == StepResult::Running);
    CHECK(rig.cpu.step(ctx) == StepResult::Exited);
    CHECK(rig.cpu.exited(ctx));
    CHECK_TALUS_ERROR(rig.cpu.step(ctx), NOT_RUNNING);

    // eenter before einit.
    auto raw = rig.cpu.ecreate(0, Digest32{});
    rig.cpu.finalize_measurement(raw);
    CHECK_TALUS_ERROR(rig.cpu.eenter(raw, {}), NOT_INIT);
}

TEST_CASE("WriteMem appends its bytes to the leak trace") {
    Rig rig;
    auto e = make_enclave(rig, 21);
    auto ctx = rig.cpu.eenter(e, {Instr::write_mem(0, 0), Instr::exit()});
    RegisterFile regs = rig.cpu.context(ctx).regs;
    regs.gprs[0] = 0x1122334455667788;
    rig.cpu.set_registers_for_test(ctx, regs);
    while (rig.cpu.step(ctx) == StepResult::Running) {}
    Bytes expected = {0x11, 0x22, 0x33, 0x44, 0x55, 0x66, 0x77, 0x88};
    CHECK(trace_contains(rig.cpu.leak_trace(), expected));
    CHECK(rig.cpu.read_memory(ctx, 0, 8) == expected);
}

TEST_CASE("aex and eresume round trip the register file exactly") {
    Rig rig;
    auto e = make_enclave(rig, 22);
    auto ctx = rig.cpu.eenter(e, {Instr::nop(), Instr::exit()});

    oracles::Rng rng(0xaa);
    RegisterFile regs;
    for (auto& g : regs.gprs) g = rng.next();
    for (auto& b : regs.bnd)
        for (auto& byte : b) byte = static_cast<uint8_t>(rng.next());
    rig.cpu.set_registers_for_test(ctx, regs);

    auto frame = rig.cpu.aex(ctx);
    CHECK(frame.aex_nonce == rig.cpu.secs(e).aex_count);
    // Registers are scrubbed while interrupted.
    CHECK(rig.cpu.context(ctx).regs == RegisterFile{});
    CHECK_TALUS_ERROR(rig.cpu.aex(ctx), NOT_RUNNING);

    rig.cpu.eresume(ctx);
    CHECK(rig.cpu.context(ctx).regs == regs);
}

TEST_CASE("bnd ciphertexts are one-shot even for fixed contents") {
    Rig rig;
    auto e = make_enclave(rig, 23);
    std::vector<Instr> program(250, Instr::nop());
    program.push_back(Instr::exit());
    auto ctx = rig.cpu.eenter(e, program);

    RegisterFile regs;
    for (auto& b : regs.bnd)
        for (size_t i = 0; i < b.size(); ++i) b[i] = static_cast<uint8_t>(i);
    rig.cpu.set_registers_for_test(ctx, regs);

    std::set<Bytes> seen;
    for (int i = 0; i < 100; ++i) {
        auto frame = rig.cpu.aex(ctx);
        Bytes all;
        for (const auto& ct : frame.bnd_ct) all.insert(all.end(), ct.begin(), ct.end());
        CHECK(seen.insert(all).second);  // pairwise distinct
        rig.cpu.eresume(ctx);
        CHECK(rig.cpu.context(ctx).regs == regs);
    }
    CHECK(rig.cpu.secs(e).aex_count >= 100);
}

TEST_CASE("bnd plaintext never reaches the leak trace across interrupts") {
    Rig rig;
    auto e = make_enclave(rig, 24);
    auto ctx = rig.cpu.eenter(e, std::vector<Instr>(50, Instr::nop()));

    oracles::Rng rng(0xbb);
    RegisterFile regs;
    for (auto& b : regs.bnd)
        for (auto& byte : b) byte = static_cast<uint8_t>(rng.next());
    rig.cpu.set_registers_for_test(ctx, regs);

    for (int i = 0; i < 20; ++i) {
        rig.cpu.aex(ctx);
        rig.cpu.eresume(ctx);
    }
    for (const auto& b : regs.bnd) {
        CHECK_FALSE(trace_contains(rig.cpu.leak_trace(), ByteView(b.data(), b.size())));
    }
    // GPR snapshots do spill in plaintext; that is the documented surface.
    auto key = *rig.cpu.secs(e).sealing_key;
    CHECK_FALSE(trace_contains(rig.cpu.leak_trace(), key.view()));
}

TEST_CASE("eexit allows a fresh eenter and eremove frees the enclave") {
    Rig rig;
    auto e = make_enclave(rig, 25);
    auto ctx = rig.cpu.eenter(e, {Instr::nop(), Instr::exit()});
    rig.cpu.step(ctx);
    CHECK_TALUS_ERROR(rig.cpu.eremove(e), RUNNING);
    CHECK_TALUS_ERROR(rig.cpu.eenter(e, {}), RUNNING);
    rig.cpu.eexit(ctx);

    auto ctx2 = rig.cpu.eenter(e, {Instr::exit()});
    CHECK(rig.cpu.step(ctx2) == StepResult::Exited);

    rig.cpu.eremove(e);
    CHECK_TALUS_ERROR(rig.cpu.eenter(e, {}), UNKNOWN_ENCLAVE);
    CHECK_TALUS_ERROR(rig.cpu.secs(e), UNKNOWN_ENCLAVE);
}

TEST_CASE("kdm context covers selector flags, identity and platform state") {
    Rig rig;
    auto e = make_enclave(rig, 26);
    const auto& id = rig.cpu.secs(e).identity;

    KeySelector sel{"SEAL-SYM", true, true, Digest32{}};
    auto base = rig.cpu.derive_kdm_context(sel, id);

    auto no_enclave = sel;
    no_enclave.use_mrenclave = false;
    CHECK(rig.cpu.derive_kdm_context(no_enclave, id) != base);

    auto other_key = sel;
    other_key.keyid.v[0] = 1;
    CHECK(rig.cpu.derive_kdm_context(other_key, id) != base);

    // Same mrsigner, selector {mrsigner only}: contexts agree across enclaves
    // that differ only in mrenclave.
    auto id2 = id;
    id2.mrenclave.v[5] ^= 0xff;
    KeySelector signer_only{"SEAL-SYM", false, true, Digest32{}};
    CHECK(rig.cpu.derive_kdm_context(signer_only, id) ==
          rig.cpu.derive_kdm_context(signer_only, id2));

    // Different CPUSVN changes the context.
    CpuCore cpu2(rig.chan, rig.cpu.seal_fuses_for_test(), 8, crypto::hash(to_bytes("owner")),
                 Digest32{});
    CHECK(cpu2.derive_kdm_context(sel, id) != base);
}

TEST_CASE("egetkey derives per-identity keys enforced by EAP") {
    Rig rig;
    auto ea = make_enclave(rig, 30);
    auto eb = make_enclave(rig, 31);
    auto ctx_a = rig.cpu.eenter(ea, {Instr::exit()});
    auto ctx_b = rig.cpu.eenter(eb, {Instr::exit()});

    // Two calls with an identical selector agree (hmac outputs match).
    KeySelector hmac_sel{"BIND-HMAC", true, false, Digest32{}};
    auto h1 = rig.cpu.egetkey(ctx_a, hmac_sel);
    auto h2 = rig.cpu.egetkey(ctx_a, hmac_sel);
    auto id_a = rig.cpu.secs(ea).identity;
    auto client = rig.cpu.microcode_client();
    auto s1 = rig.cpu.identity_session(hmac_sel, id_a);
    auto s2 = rig.cpu.identity_session(hmac_sel, id_a);
    CHECK(client.hmac_sign(h1, s1, to_bytes("m")) == client.hmac_sign(h2, s2, to_bytes("m")));

    // Enclave B cannot satisfy the EAP of A's mrenclave-bound key.
    auto id_b = rig.cpu.secs(eb).identity;
    auto sb = rig.cpu.identity_session(hmac_sel, id_b);
    CHECK_TALUS_ERROR(client.hmac_sign(h1, sb, to_bytes("m")), POLICY_FAIL);
    (void)ctx_b;
}

TEST_CASE("symmetric egetkey lands in BND0 and never in the trace or tap") {
    Rig rig;
    auto e = make_enclave(rig, 32);
    auto ctx = rig.cpu.eenter(e, std::vector<Instr>{Instr::nop(), Instr::exit()});

    KeySelector sel{"DATA-SYM", true, true, Digest32{}};
    rig.cpu.egetkey(ctx, sel);
    auto key_bytes = rig.cpu.context(ctx).regs.bnd[0];
    ByteView key(key_bytes.data(), key_bytes.size());
    CHECK_FALSE(key_bytes == std::array<uint8_t, 16>{});

    // Interrupt storm after the release.
    while (!rig.cpu.exited(ctx)) {
        rig.cpu.aex(ctx);
        rig.cpu.eresume(ctx);
        rig.cpu.step(ctx);
    }
    CHECK_FALSE(trace_contains(rig.cpu.leak_trace(), key));
    for (const auto& frame : rig.chan.tap().frames)
        CHECK_FALSE(contains_subsequence(frame.wire_bytes(), key));
}

TEST_CASE("reports bind target, reporter and user data") {
    Rig rig;
    auto ea = make_enclave(rig, 33);
    auto eb = make_enclave(rig, 34);
    auto ec = make_enclave(rig, 35);
    auto ctx_a = rig.cpu.eenter(ea, {Instr::exit()});
    auto ctx_b = rig.cpu.eenter(eb, {Instr::exit()});
    auto ctx_c = rig.cpu.eenter(ec, {Instr::exit()});

    std::array<uint8_t, 64> user_data{};
    user_data[0] = 0x42;
    auto report = rig.cpu.ereport(ctx_a, rig.cpu.secs(eb).identity, user_data);
    CHECK(rig.cpu.verify_report(ctx_b, report));
    CHECK_FALSE(rig.cpu.verify_report(ctx_c, report));

    auto tampered = report;
    tampered.user_data[3] ^= 0x01;
    CHECK_FALSE(rig.cpu.verify_report(ctx_b, tampered));

    auto report2 = Report::deserialize(report.serialize());
    CHECK(rig.cpu.verify_report(ctx_b, report2));
}

TEST_CASE("locality-4 frames originate from microcode only") {
    Rig rig;
    auto e = make_enclave(rig, 36);
    auto ctx = rig.cpu.eenter(e, {Instr::exit()});
    rig.cpu.step(ctx);

    // OS chatter at low locality for contrast.
    tpm::TpmClient os_client(rig.chan, 1);
    os_client.read_clock();

    bool saw_locality4 = false;
    for (const auto& frame : rig.chan.tap().frames) {
        if (frame.locality == 4) {
            saw_locality4 = true;
            CHECK(frame.origin == bus::Origin::Microcode);
        }
    }
    CHECK(saw_locality4);
}

TEST_CASE("init never reverts and pages never grow after init") {
    Rig rig;
    auto e = make_enclave(rig, 37);
    CHECK(rig.cpu.secs(e).init);
    auto pages_before = rig.cpu.secs(e).pages.size();

    auto ctx = rig.cpu.eenter(e, {Instr::exit()});
    rig.cpu.step(ctx);
    CHECK_TALUS_ERROR(rig.cpu.eadd(e, 0x9000, to_bytes("late page")), SEQUENCE_CLOSED);
    CHECK(rig.cpu.secs(e).init);
    CHECK(rig.cpu.secs(e).pages.size() == pages_before);
}
