#include <charconv>
#include <sstream>

#include "talus/tpm.hpp"
#include "talus/wire.hpp"

namespace talus::tpm {

namespace {

constexpr const char* kMagic = "TALUS-TPM-STATE";
constexpr const char* kHeader = "TALUS-TPM-STATE v1";

std::string hex_u64(uint64_t v) {
    wire::Writer w;
    w.u64(v);
    return hex_encode(w.bytes());
}

std::string hex_u32(uint32_t v) {
    wire::Writer w;
    w.u32(v);
    return hex_encode(w.bytes());
}

uint64_t parse_u64(const std::string& hex) {
    Bytes b = hex_decode(hex);
    if (b.size() != 8) throw TalusError(ErrorCode::CORRUPT_STATE, "bad u64 field");
    return wire::Reader(b).u64();
}

uint32_t parse_u32(const std::string& hex) {
    Bytes b = hex_decode(hex);
    if (b.size() != 4) throw TalusError(ErrorCode::CORRUPT_STATE, "bad u32 field");
    return wire::Reader(b).u32();
}

uint8_t parse_u8(const std::string& hex) {
    Bytes b = hex_decode(hex);
    if (b.size() != 1) throw TalusError(ErrorCode::CORRUPT_STATE, "bad u8 field");
    return b[0];
}

}  // namespace

// Offline accessor used by persist/restore and the CLI inspector.
struct PersistCodec {
    static std::string encode(TpmDevice& dev) {
        std::ostringstream out;
        out << kHeader << "\n";
        auto emit = [&](const std::string& key, const std::string& value) {
            out << key << " = " << value << "\n";
        };
        emit("generation", hex_u64(dev.generation_));
        emit("primary_seed", dev.primary_seed_.hex());
        emit("endorsement_seed", dev.endorsement_seed_.hex());
        emit("owned", dev.owned_ ? "01" : "00");
        emit("owner_secret", hex_encode(dev.owner_secret_));
        emit("channel_psk", hex_encode(dev.channel_psk_.view()));
        emit("clock", hex_u64(dev.clock_ticks_));
        emit("next_nv_handle", hex_u32(dev.next_nv_handle_));
        emit("nv.count", hex_u32(static_cast<uint32_t>(dev.nv_store_.size())));
        size_t i = 0;
        for (const auto& [handle, nv] : dev.nv_store_) {
            std::string prefix = "nv." + std::to_string(i) + ".";
            emit(prefix + "handle", hex_u32(handle));
            emit(prefix + "kind", nv.kind == NvKind::Counter ? "01" : "02");
            emit(prefix + "policy", nv.auth_policy.hex());
            emit(prefix + "counter", hex_u64(nv.counter_value));
            emit(prefix + "payload", hex_encode(nv.data_payload));
            ++i;
        }
        return out.str();
    }

    static std::map<std::string, std::string> parse(const std::string& blob) {
        std::istringstream in(blob);
        std::string line;
        if (!std::getline(in, line)) throw TalusError(ErrorCode::CORRUPT_STATE, "empty state");
        if (line != kHeader) {
            if (line.rfind(kMagic, 0) == 0) throw TalusError(ErrorCode::VERSION_MISMATCH, line);
            throw TalusError(ErrorCode::CORRUPT_STATE, "missing state header");
        }
        std::map<std::string, std::string> kv;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto sep = line.find(" = ");
            if (sep == std::string::npos)
                throw TalusError(ErrorCode::CORRUPT_STATE, "malformed line: " + line);
            std::string key = line.substr(0, sep);
            std::string value = line.substr(sep + 3);
            if (!kv.emplace(key, value).second)
                throw TalusError(ErrorCode::CORRUPT_STATE, "duplicate key: " + key);
        }
        return kv;
    }

    static TpmDevice decode(const std::string& blob) {
        auto kv = parse(blob);
        auto take = [&](const std::string& key) {
            auto it = kv.find(key);
            if (it == kv.end())
                throw TalusError(ErrorCode::CORRUPT_STATE, "missing key: " + key);
            std::string value = it->second;
            kv.erase(it);
            return value;
        };

        TpmDevice dev(Digest32::from_bytes(hex_decode(take("primary_seed"))),
                      Digest32::from_bytes(hex_decode(take("endorsement_seed"))));
        dev.generation_ = parse_u64(take("generation"));
        dev.owned_ = parse_u8(take("owned")) != 0;
        dev.owner_secret_ = hex_decode(take("owner_secret"));
        Bytes psk = hex_decode(take("channel_psk"));
        if (psk.size() != 16) throw TalusError(ErrorCode::CORRUPT_STATE, "bad psk length");
        dev.channel_psk_ = SymKey128::from_bytes(psk);
        dev.clock_ticks_ = parse_u64(take("clock"));
        dev.next_nv_handle_ = parse_u32(take("next_nv_handle"));

        uint32_t count = parse_u32(take("nv.count"));
        for (uint32_t i = 0; i < count; ++i) {
            std::string prefix = "nv." + std::to_string(i) + ".";
            NvIndex nv;
            nv.handle = parse_u32(take(prefix + "handle"));
            uint8_t kind = parse_u8(take(prefix + "kind"));
            if (kind != 1 && kind != 2)
                throw TalusError(ErrorCode::CORRUPT_STATE, "bad NV kind");
            nv.kind = static_cast<NvKind>(kind);
            nv.auth_policy = Digest32::from_bytes(hex_decode(take(prefix + "policy")));
            nv.counter_value = parse_u64(take(prefix + "counter"));
            nv.data_payload = hex_decode(take(prefix + "payload"));
            uint32_t handle = nv.handle;
            if (!dev.nv_store_.emplace(handle, std::move(nv)).second)
                throw TalusError(ErrorCode::CORRUPT_STATE, "duplicate NV handle");
        }
        if (!kv.empty())
            throw TalusError(ErrorCode::CORRUPT_STATE, "unknown key: " + kv.begin()->first);
        return dev;
    }
};

std::string TpmDevice::persist() {
    ++generation_;
    return PersistCodec::encode(*this);
}

TpmDevice TpmDevice::restore(const std::string& blob) {
    return PersistCodec::decode(blob);
}

}  // namespace talus::tpm
