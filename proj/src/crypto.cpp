#include "d2d/crypto.hpp"

#include <cstring>

namespace d2d {

std::string to_hex(ByteView data) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (std::uint8_t b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

Bytes from_hex(const std::string& hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    if (hex.size() % 2 != 0) throw std::invalid_argument("from_hex: odd length");
    Bytes out(hex.size() / 2);
    for (size_t i = 0; i < out.size(); ++i) {
        int hi = nibble(hex[2 * i]);
        int lo = nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("from_hex: bad digit");
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

}  // namespace d2d

namespace d2d::crypto::raw {

namespace {

// SHA-256 (FIPS 180-4). Checked against the standard test vectors in the
// unit suite.
constexpr std::uint32_t kInit[8] = {
    0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
    0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19,
};

constexpr std::uint32_t kRound[64] = {
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1,
    0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3,
    0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
    0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
    0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
    0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
    0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
    0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
    0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
};

inline std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

void compress(std::uint32_t state[8], const std::uint8_t block[64]) {
    std::uint32_t w[64];
    for (int i = 0; i < 16; ++i) {
        w[i] = (std::uint32_t(block[4 * i]) << 24) | (std::uint32_t(block[4 * i + 1]) << 16) |
               (std::uint32_t(block[4 * i + 2]) << 8) | std::uint32_t(block[4 * i + 3]);
    }
    for (int i = 16; i < 64; ++i) {
        std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
        std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
        w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    std::uint32_t a = state[0], b = state[1], c = state[2], d = state[3];
    std::uint32_t e = state[4], f = state[5], g = state[6], h = state[7];
    for (int i = 0; i < 64; ++i) {
        std::uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
        std::uint32_t ch = (e & f) ^ (~e & g);
        std::uint32_t t1 = h + s1 + ch + kRound[i] + w[i];
        std::uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
        std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
        std::uint32_t t2 = s0 + maj;
        h = g; g = f; f = e; e = d + t1;
        d = c; c = b; b = a; a = t1 + t2;
    }
    state[0] += a; state[1] += b; state[2] += c; state[3] += d;
    state[4] += e; state[5] += f; state[6] += g; state[7] += h;
}

}  // namespace

Digest sha256(ByteView data) {
    std::uint32_t state[8];
    std::memcpy(state, kInit, sizeof(state));

    std::uint64_t total = data.size();
    size_t off = 0;
    while (data.size() - off >= 64) {
        compress(state, data.data() + off);
        off += 64;
    }

    std::uint8_t tail[128] = {};
    size_t rem = data.size() - off;
    if (rem > 0) std::memcpy(tail, data.data() + off, rem);
    tail[rem] = 0x80;
    size_t tail_len = (rem < 56) ? 64 : 128;
    std::uint64_t bits = total * 8;
    for (int i = 0; i < 8; ++i)
        tail[tail_len - 8 + static_cast<size_t>(i)] = static_cast<std::uint8_t>(bits >> (56 - 8 * i));
    compress(state, tail);
    if (tail_len == 128) compress(state, tail + 64);

    Digest out;
    for (int i = 0; i < 8; ++i) {
        out.bytes[static_cast<size_t>(4 * i)] = static_cast<std::uint8_t>(state[i] >> 24);
        out.bytes[static_cast<size_t>(4 * i + 1)] = static_cast<std::uint8_t>(state[i] >> 16);
        out.bytes[static_cast<size_t>(4 * i + 2)] = static_cast<std::uint8_t>(state[i] >> 8);
        out.bytes[static_cast<size_t>(4 * i + 3)] = static_cast<std::uint8_t>(state[i]);
    }
    return out;
}

MacTag mac(const SymKey& key, ByteView data) {
    Bytes input;
    input.reserve(kBlockBytes + data.size());
    input.insert(input.end(), key.bytes.begin(), key.bytes.end());
    input.insert(input.end(), data.begin(), data.end());
    return MacTag{sha256(input).bytes};
}

namespace {

Block32 keystream(const SymKey& key) {
    std::uint8_t input[kBlockBytes + 1];
    std::memcpy(input, key.bytes.data(), kBlockBytes);
    input[kBlockBytes] = 0x01;  // domain separation from the prefix MAC
    return sha256({input, sizeof(input)}).bytes;
}

}  // namespace

Block32 encrypt(const SymKey& key, ByteView plaintext) {
    Block32 out = keystream(key);
    for (size_t i = 0; i < plaintext.size() && i < kBlockBytes; ++i) out[i] ^= plaintext[i];
    return out;
}

Block32 decrypt(const SymKey& key, ByteView ciphertext) {
    Block32 out = keystream(key);
    for (size_t i = 0; i < ciphertext.size() && i < kBlockBytes; ++i) out[i] ^= ciphertext[i];
    return out;
}

SymKey derive_session_key(const SymKey& k, Nonce n) {
    std::uint8_t input[kBlockBytes + 1];
    std::memcpy(input, k.bytes.data(), kBlockBytes);
    input[kBlockBytes] = n.value;
    return SymKey{sha256({input, sizeof(input)}).bytes, KeyKind::Derived};
}

Digest chain_fold(const Digest& h0, ByteView ids) {
    Digest h = h0;
    for (std::uint8_t id : ids) {
        std::uint8_t input[kBlockBytes + 1];
        std::memcpy(input, h.bytes.data(), kBlockBytes);
        input[kBlockBytes] = id;
        h = sha256({input, sizeof(input)});
    }
    return h;
}

}  // namespace d2d::crypto::raw
