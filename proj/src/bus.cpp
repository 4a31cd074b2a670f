#include "talus/bus.hpp"

#include "talus/wire.hpp"

namespace talus::bus {

Bytes BusFrame::wire_bytes() const {
    wire::Writer w;
    w.u8(static_cast<uint8_t>(cycle));
    w.u8(locality);
    w.u64(seq);
    w.blob(ciphertext);
    w.raw(tag.view());
    return w.take();
}

BusFrame BusFrame::from_wire(ByteView data) {
    wire::Reader r(data);
    BusFrame f;
    uint8_t cycle = r.u8();
    if (cycle != 0x00 && cycle != 0x02)
        throw TalusError(ErrorCode::TAMPER, "bad cycle byte");
    f.cycle = static_cast<Cycle>(cycle);
    f.locality = r.u8();
    f.seq = r.u64();
    f.ciphertext = r.blob();
    f.tag = MacTag32::from_bytes(r.raw(32));
    r.expect_done();
    return f;
}

Channel::Channel(const SymKey128& psk, Responder responder)
    : responder_(std::move(responder)) {
    establish(psk);
}

void Channel::establish(const SymKey128& psk) {
    psk_ = psk;
    mac_key_ = crypto::kdf(psk.view(), "BUS-MAC", {}, 32);
    send_seq_ = 0;
    recv_seq_ = 0;
    io_session_.reset();
    tap_ = TapLog{};
}

void Channel::io_session_open(uint8_t locality) {
    if (locality < 2 || locality > 4)
        throw TalusError(ErrorCode::INVALID_LOCALITY, "I/O sessions need locality 2..4");
    if (io_session_) throw TalusError(ErrorCode::SESSION_BUSY);
    io_session_ = locality;
}

void Channel::io_session_close() {
    io_session_.reset();
}

MacTag32 Channel::frame_tag(Direction dir, const BusFrame& frame) const {
    // Direction is folded into the MAC so a response can never be reflected
    // back as a request.
    wire::Writer w;
    w.u8(static_cast<uint8_t>(dir));
    w.u8(static_cast<uint8_t>(frame.cycle));
    w.u8(frame.locality);
    w.u64(frame.seq);
    w.raw(frame.ciphertext);
    return crypto::mac(mac_key_, w.bytes());
}

BusFrame Channel::seal_frame(Direction dir, Cycle cycle, uint8_t locality, uint64_t seq,
                             ByteView payload, Origin origin) const {
    BusFrame f;
    f.cycle = cycle;
    f.locality = locality;
    f.seq = seq;
    f.direction = dir;
    f.origin = origin;
    // Per-direction nonce spaces: requests use the low half, responses the
    // high half, so the two directions never share keystream.
    uint64_t nonce = seq | (dir == Direction::Response ? 1ULL << 63 : 0);
    f.ciphertext = crypto::ctr_crypt(psk_, nonce, payload);
    f.tag = frame_tag(dir, f);
    return f;
}

Bytes Channel::open_frame(const BusFrame& frame, Direction dir, uint64_t expected_seq) const {
    if (frame_tag(dir, frame) != frame.tag) throw TalusError(ErrorCode::TAMPER);
    if (frame.seq != expected_seq) throw TalusError(ErrorCode::REPLAY);
    uint64_t nonce = frame.seq | (dir == Direction::Response ? 1ULL << 63 : 0);
    return crypto::ctr_crypt(psk_, nonce, frame.ciphertext);
}

Bytes Channel::transact(uint8_t locality, Cycle cycle, ByteView payload, Origin origin) {
    if (cycle == Cycle::Dma && io_session_)
        throw TalusError(ErrorCode::BUS_BUSY, "DMA rejected during programmed I/O session");

    BusFrame request = seal_frame(Direction::Request, cycle, locality, send_seq_, payload, origin);
    tap_.frames.push_back(request);

    // TPM end: verify, decrypt, dispatch.
    Bytes plain = open_frame(request, Direction::Request, send_seq_);
    ++send_seq_;
    Bytes response_payload = responder_(locality, plain);

    BusFrame response =
        seal_frame(Direction::Response, cycle, locality, recv_seq_, response_payload, origin);
    tap_.frames.push_back(response);

    // CPU end: verify, decrypt.
    Bytes out = open_frame(response, Direction::Response, recv_seq_);
    ++recv_seq_;
    return out;
}

Bytes Channel::send(uint8_t locality, Cycle cycle, ByteView payload) {
    if (locality > 3)
        throw TalusError(ErrorCode::LOCALITY_FAIL, "software cannot emit locality-4 frames");
    return transact(locality, cycle, payload, Origin::Software);
}

Bytes Channel::send_microcode(const MicrocodeGrant&, uint8_t locality, Cycle cycle,
                              ByteView payload) {
    if (locality > 4) throw TalusError(ErrorCode::INVALID_LOCALITY);
    return transact(locality, cycle, payload, Origin::Microcode);
}

Bytes Channel::inject(const BusFrame& frame) {
    tap_.frames.push_back(frame);
    Bytes plain = open_frame(frame, Direction::Request, send_seq_);
    ++send_seq_;
    Bytes response_payload = responder_(frame.locality, plain);
    BusFrame response = seal_frame(Direction::Response, frame.cycle, frame.locality, recv_seq_,
                                   response_payload, frame.origin);
    tap_.frames.push_back(response);
    Bytes out = open_frame(response, Direction::Response, recv_seq_);
    ++recv_seq_;
    return out;
}

}  // namespace talus::bus
