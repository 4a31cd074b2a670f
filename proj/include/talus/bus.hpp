#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "talus/bytes.hpp"
#include "talus/crypto.hpp"
#include "talus/error.hpp"

namespace talus::cpu {
class CpuCore;
}

namespace talus::bus {

using crypto::MacTag32;
using crypto::SymKey128;

enum class Cycle : uint8_t {
    Io = 0x00,   // LAD 00: programmed I/O read-write
    Dma = 0x02,  // LAD 10: DMA read-write
};

enum class Direction : uint8_t {
    Request = 0,
    Response = 1,
};

// Who produced a frame. Not part of the wire encoding; the test harness uses
// it to audit that locality-4 traffic originates from microcode alone.
enum class Origin : uint8_t {
    Software = 0,
    Microcode = 1,
};

struct BusFrame {
    Cycle cycle = Cycle::Io;
    uint8_t locality = 0;
    uint64_t seq = 0;
    Bytes ciphertext;
    MacTag32 tag;
    Direction direction = Direction::Request;
    Origin origin = Origin::Software;

    // cycle byte || locality byte || be64 seq || be32 length || ciphertext || tag
    Bytes wire_bytes() const;
    static BusFrame from_wire(ByteView data);
};

struct TapLog {
    std::vector<BusFrame> frames;
};

// Capability for emitting locality-4 frames. Constructible by CpuCore alone,
// so software actors can never hold one.
class MicrocodeGrant {
    MicrocodeGrant() = default;
    friend class ::talus::cpu::CpuCore;

public:
    MicrocodeGrant(const MicrocodeGrant&) = delete;
    MicrocodeGrant& operator=(const MicrocodeGrant&) = delete;
};

// Encrypt-then-MAC request/response channel between CPU and TPM with strict
// per-direction sequence numbering, locality-gated sends, DMA lockout during
// programmed-I/O sessions, and a full wiretap.
class Channel {
public:
    using Responder = std::function<Bytes(uint8_t locality, const Bytes& plaintext)>;

    Channel(const SymKey128& psk, Responder responder);

    // Re-key and reset: zeroes both sequence counters and starts a new tap.
    void establish(const SymKey128& psk);

    void io_session_open(uint8_t locality);
    void io_session_close();
    bool io_session_active() const { return io_session_.has_value(); }

    // Software-initiated command: localities 0..3 only.
    Bytes send(uint8_t locality, Cycle cycle, ByteView payload);
    // Microcode-initiated command: any locality, holder of the grant only.
    Bytes send_microcode(const MicrocodeGrant& grant, uint8_t locality, Cycle cycle,
                         ByteView payload);

    // Adversary interface: deliver a previously captured frame to the TPM end.
    // Honest frames are never delivered this way.
    Bytes inject(const BusFrame& frame);

    TapLog tap() const { return tap_; }
    uint64_t send_seq() const { return send_seq_; }
    uint64_t frames_sent() const { return static_cast<uint64_t>(tap_.frames.size()); }

private:
    Bytes transact(uint8_t locality, Cycle cycle, ByteView payload, Origin origin);
    BusFrame seal_frame(Direction dir, Cycle cycle, uint8_t locality, uint64_t seq,
                        ByteView payload, Origin origin) const;
    Bytes open_frame(const BusFrame& frame, Direction dir, uint64_t expected_seq) const;
    MacTag32 frame_tag(Direction dir, const BusFrame& frame) const;

    SymKey128 psk_;
    Bytes mac_key_;
    Responder responder_;
    uint64_t send_seq_ = 0;
    uint64_t recv_seq_ = 0;
    std::optional<uint8_t> io_session_;
    TapLog tap_;
};

}  // namespace talus::bus
