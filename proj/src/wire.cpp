#include "d2d/wire.hpp"

#include <cstring>

namespace d2d::wire {

namespace {

class BitWriter {
public:
    void put(std::uint64_t value, unsigned bits, const char* field) {
        if (bits < 64 && value >= (std::uint64_t{1} << bits))
            throw FieldOverflow(std::string("encode: field out of range: ") + field);
        for (unsigned i = bits; i-- > 0;) push_bit((value >> i) & 1);
    }

    void put_bytes(ByteView data) {
        for (std::uint8_t b : data) put(b, 8, "bytes");
    }

    /// Zero-pads the trailing partial byte.
    Bytes finish() {
        if (fill_ != 0) {
            out_.push_back(static_cast<std::uint8_t>(cur_ << (8 - fill_)));
            cur_ = 0;
            fill_ = 0;
        }
        return std::move(out_);
    }

private:
    void push_bit(std::uint64_t bit) {
        cur_ = static_cast<std::uint8_t>((cur_ << 1) | bit);
        if (++fill_ == 8) {
            out_.push_back(cur_);
            cur_ = 0;
            fill_ = 0;
        }
    }

    Bytes out_;
    std::uint8_t cur_ = 0;
    unsigned fill_ = 0;
};

class BitReader {
public:
    explicit BitReader(ByteView data) : data_(data) {}

    std::uint64_t get(unsigned bits) {
        std::uint64_t value = 0;
        for (unsigned i = 0; i < bits; ++i) {
            size_t byte = pos_ / 8;
            if (byte >= data_.size()) throw TruncatedPacket("decode: input too short");
            unsigned shift = 7 - (pos_ % 8);
            value = (value << 1) | ((data_[byte] >> shift) & 1);
            ++pos_;
        }
        return value;
    }

    crypto::Block32 get_block() {
        crypto::Block32 out{};
        for (auto& b : out) b = static_cast<std::uint8_t>(get(8));
        return out;
    }

    size_t bits_consumed() const { return pos_; }

private:
    ByteView data_;
    size_t pos_ = 0;
};

void write_request_fields(BitWriter& w, const RequestPacket& p, MsgType type) {
    w.put(static_cast<std::uint8_t>(type), 4, "msg_type");
    w.put(p.src, 8, "src");
    w.put(p.dst, 8, "dst");
    w.put(p.nonce.value, 4, "nonce");
    w.put(p.pkt_id, 4, "pkt_id");
    w.put(p.t, 4, "t");
    w.put_bytes(p.ciphertext);
    w.put_bytes(p.h0.bytes);
}

RequestPacket read_request_fields(BitReader& r) {
    RequestPacket p;
    p.src = static_cast<NodeId>(r.get(8));
    p.dst = static_cast<NodeId>(r.get(8));
    p.nonce.value = static_cast<std::uint8_t>(r.get(4));
    p.pkt_id = static_cast<std::uint8_t>(r.get(4));
    p.t = static_cast<std::uint8_t>(r.get(4));
    p.ciphertext = r.get_block();
    p.h0.bytes = r.get_block();
    return p;
}

void write_reply_fields(BitWriter& w, const ReplyPacket& p, MsgType type) {
    w.put(static_cast<std::uint8_t>(type), 4, "msg_type");
    w.put(p.dst, 8, "dst");
    w.put(p.src, 8, "src");
    w.put(p.t, 4, "t");
    w.put(p.pkt_id, 4, "pkt_id");
    w.put_bytes(p.reply_mac.bytes);
}

ReplyPacket read_reply_fields(BitReader& r) {
    ReplyPacket p;
    p.dst = static_cast<NodeId>(r.get(8));
    p.src = static_cast<NodeId>(r.get(8));
    p.t = static_cast<std::uint8_t>(r.get(4));
    p.pkt_id = static_cast<std::uint8_t>(r.get(4));
    p.reply_mac.bytes = r.get_block();
    return p;
}

// Trailers are length-delimited: both hop entries and key entries are a
// whole 33 bytes, so the entry count falls out of the byte count.
size_t trailer_entries(ByteView bytes, size_t fixed_bytes, const char* what) {
    if (bytes.size() < fixed_bytes) throw TruncatedPacket("decode: input too short");
    size_t rest = bytes.size() - fixed_bytes;
    if (rest % 33 != 0)
        throw TruncatedPacket(std::string("decode: ragged trailer in ") + what);
    return rest / 33;
}

// Reply-family packets end 4 bits short of a byte; the pad must be zero.
void check_zero_pad(ByteView bytes) {
    if (!bytes.empty() && (bytes.back() & 0x0f) != 0)
        throw TruncatedPacket("decode: nonzero padding");
}

}  // namespace

Bytes encode(const Packet& packet) {
    BitWriter w;
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, RequestPacket>) {
                write_request_fields(w, p, MsgType::Request);
            } else if constexpr (std::is_same_v<T, RelayedRequestPacket>) {
                write_request_fields(w, p.base, MsgType::RelayedRequest);
                for (const auto& hop : p.hops) {
                    w.put(hop.relay, 8, "relay");
                    w.put_bytes(hop.mac.bytes);
                }
            } else if constexpr (std::is_same_v<T, ReplyPacket>) {
                write_reply_fields(w, p, MsgType::Reply);
            } else if constexpr (std::is_same_v<T, RelayedReplyPacket>) {
                write_reply_fields(w, p.base, MsgType::RelayedReply);
                for (const auto& entry : p.disclosed_keys) {
                    w.put(entry.owner, 8, "owner");
                    w.put_bytes(entry.key.bytes);
                }
            } else if constexpr (std::is_same_v<T, DisclosurePacket>) {
                w.put(static_cast<std::uint8_t>(MsgType::Disclosure), 4, "msg_type");
                w.put(p.owner, 8, "owner");
                w.put(p.interval, 16, "interval");
                w.put_bytes(p.key.bytes);
            }
        },
        packet);
    return w.finish();
}

Packet decode(ByteView bytes) {
    if (bytes.empty()) throw TruncatedPacket("decode: empty input");
    auto code = static_cast<std::uint8_t>(bytes[0] >> 4);
    switch (static_cast<MsgType>(code)) {
        case MsgType::Request: {
            if (bytes.size() != 68) throw TruncatedPacket("decode: request must be 68 bytes");
            BitReader r(bytes);
            r.get(4);
            return read_request_fields(r);
        }
        case MsgType::RelayedRequest: {
            size_t entries = trailer_entries(bytes, 68, "relayed request");
            BitReader r(bytes);
            r.get(4);
            RelayedRequestPacket p;
            p.base = read_request_fields(r);
            p.hops.resize(entries);
            for (auto& hop : p.hops) {
                hop.relay = static_cast<NodeId>(r.get(8));
                hop.mac.bytes = r.get_block();
            }
            return p;
        }
        case MsgType::Reply: {
            if (bytes.size() != 36) throw TruncatedPacket("decode: reply must be 36 bytes");
            check_zero_pad(bytes);
            BitReader r(bytes);
            r.get(4);
            return read_reply_fields(r);
        }
        case MsgType::RelayedReply: {
            size_t entries = trailer_entries(bytes, 36, "relayed reply");
            check_zero_pad(bytes);
            BitReader r(bytes);
            r.get(4);
            RelayedReplyPacket p;
            p.base = read_reply_fields(r);
            p.disclosed_keys.resize(entries);
            for (auto& entry : p.disclosed_keys) {
                entry.owner = static_cast<NodeId>(r.get(8));
                entry.key = crypto::SymKey{r.get_block(), crypto::KeyKind::Tesla};
            }
            return p;
        }
        case MsgType::Disclosure: {
            if (bytes.size() != 36) throw TruncatedPacket("decode: disclosure must be 36 bytes");
            check_zero_pad(bytes);
            BitReader r(bytes);
            r.get(4);
            DisclosurePacket p;
            p.owner = static_cast<NodeId>(r.get(8));
            p.interval = static_cast<std::uint16_t>(r.get(16));
            p.key = crypto::SymKey{r.get_block(), crypto::KeyKind::Tesla};
            return p;
        }
        default:
            throw FieldOverflow("decode: unknown message code");
    }
}

MsgType type_of(const Packet& packet) {
    return std::visit(
        [](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, RequestPacket>) return MsgType::Request;
            else if constexpr (std::is_same_v<T, RelayedRequestPacket>) return MsgType::RelayedRequest;
            else if constexpr (std::is_same_v<T, ReplyPacket>) return MsgType::Reply;
            else if constexpr (std::is_same_v<T, RelayedReplyPacket>) return MsgType::RelayedReply;
            else return MsgType::Disclosure;
        },
        packet);
}

std::uint64_t encoded_bits(const Packet& packet) {
    return std::visit(
        [](const auto& p) -> std::uint64_t {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, RequestPacket>) return 544;
            else if constexpr (std::is_same_v<T, RelayedRequestPacket>) return 544 + 264 * p.hops.size();
            else if constexpr (std::is_same_v<T, ReplyPacket>) return 284;
            else if constexpr (std::is_same_v<T, RelayedReplyPacket>) return 284 + 264 * p.disclosed_keys.size();
            else return 284;
        },
        packet);
}

Bytes request_mac_input(const RequestPacket& req) {
    BitWriter w;
    w.put(static_cast<std::uint8_t>(MsgType::Request), 4, "msg_type");
    w.put(req.src, 8, "src");
    w.put(req.dst, 8, "dst");
    w.put(req.nonce.value, 4, "nonce");
    w.put(req.pkt_id, 4, "pkt_id");
    w.put(req.t, 4, "t");
    w.put_bytes(req.ciphertext);
    return w.finish();  // 36 bytes
}

Bytes hop_mac_input(const Packet& prior, NodeId relay, const crypto::Digest& h_i) {
    Bytes input = encode(prior);
    input.push_back(relay);
    input.insert(input.end(), h_i.bytes.begin(), h_i.bytes.end());
    return input;
}

Bytes reply_mac_input(const ReplyPacket& rep) {
    BitWriter w;
    w.put(static_cast<std::uint8_t>(MsgType::Reply), 4, "msg_type");
    w.put(rep.dst, 8, "dst");
    w.put(rep.src, 8, "src");
    w.put(rep.t, 4, "t");
    w.put(rep.pkt_id, 4, "pkt_id");
    return w.finish();  // 4 bytes, tail nibble zero
}

std::uint64_t model_size(SizeRole role, std::uint32_t n, std::uint32_t ks) {
    if (n < 2) throw FieldOverflow("model_size: n must be >= 2");
    std::uint64_t nn = n;
    switch (role) {
        case SizeRole::SourceDirect:
        case SizeRole::SourceRelaying:
            return 544;
        case SizeRole::DestinationDirect:
            return 286;
        case SizeRole::DestinationRelaying:
            return 28 + (nn - 2) * 8 + (nn - 1) * 256;
        case SizeRole::IntermediateRequest:
            return 28 + (nn - 1) * 8 + nn * 256;
        case SizeRole::IntermediateReply:
            return 12 + 8 * nn + (nn - 1) * 256 + (nn - 2) * std::uint64_t{ks};
    }
    throw FieldOverflow("model_size: bad role");
}

const char* size_role_name(SizeRole role) {
    switch (role) {
        case SizeRole::SourceDirect: return "source_direct";
        case SizeRole::SourceRelaying: return "source_relaying";
        case SizeRole::DestinationDirect: return "destination_direct";
        case SizeRole::DestinationRelaying: return "destination_relaying";
        case SizeRole::IntermediateRequest: return "intermediate_request";
        case SizeRole::IntermediateReply: return "intermediate_reply";
    }
    return "?";
}

std::vector<SizeDelta> concrete_size_check(const std::vector<SizeObservation>& observations,
                                           std::uint32_t ks) {
    std::vector<SizeDelta> out;
    out.reserve(observations.size());
    for (const auto& obs : observations) {
        std::uint64_t model = model_size(obs.role, obs.n_eff, ks);
        out.push_back(SizeDelta{obs.role, obs.n_eff, model, obs.concrete_bits,
                                static_cast<std::int64_t>(model) -
                                    static_cast<std::int64_t>(obs.concrete_bits)});
    }
    return out;
}

}  // namespace d2d::wire
