#include "fillside/hex.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace fillside::hex {

namespace {

int nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

std::string strip_prefix(const std::string& s) {
    if (s.size() >= 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) return s.substr(2);
    return s;
}

} // namespace

bool is_hex_string(const std::string& s, std::size_t n_digits) {
    std::string h = strip_prefix(s);
    if (h.size() != n_digits) return false;
    return std::all_of(h.begin(), h.end(), [](char c) { return nibble(c) >= 0; });
}

std::string to_lower_hex(std::span<const std::uint8_t> bytes, bool prefix) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2 + 2);
    if (prefix) out += "0x";
    for (std::uint8_t b : bytes) {
        out += digits[b >> 4];
        out += digits[b & 0xf];
    }
    return out;
}

std::vector<std::uint8_t> from_hex(const std::string& s) {
    std::string h = strip_prefix(s);
    if (h.size() % 2 != 0) throw std::invalid_argument("odd-length hex string");
    std::vector<std::uint8_t> out(h.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = nibble(h[2 * i]);
        int lo = nibble(h[2 * i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("non-hex character");
        out[i] = static_cast<std::uint8_t>(hi << 4 | lo);
    }
    return out;
}

std::string to_quantity(std::uint64_t v) {
    if (v == 0) return "0x0";
    char buf[19];
    int n = std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
    return std::string(buf, static_cast<std::size_t>(n));
}

std::uint64_t parse_quantity(const std::string& s) {
    std::string h = strip_prefix(s);
    if (h.empty() || h.size() > 16) throw std::invalid_argument("bad quantity: " + s);
    std::uint64_t v = 0;
    for (char c : h) {
        int d = nibble(c);
        if (d < 0) throw std::invalid_argument("bad quantity: " + s);
        v = v << 4 | static_cast<std::uint64_t>(d);
    }
    return v;
}

bool is_zero_word(std::span<const std::uint8_t> w) {
    return std::all_of(w.begin(), w.end(), [](std::uint8_t b) { return b == 0; });
}

std::string word_to_decimal(std::span<const std::uint8_t> w) {
    // Repeated division of the big-endian word by 10^9, collecting residues.
    std::vector<std::uint32_t> limbs; // big-endian 32-bit limbs
    for (std::size_t i = 0; i + 4 <= w.size(); i += 4) {
        limbs.push_back(static_cast<std::uint32_t>(w[i]) << 24 |
                        static_cast<std::uint32_t>(w[i + 1]) << 16 |
                        static_cast<std::uint32_t>(w[i + 2]) << 8 |
                        static_cast<std::uint32_t>(w[i + 3]));
    }
    std::string out;
    std::vector<std::uint32_t> chunks;
    bool nonzero = true;
    while (nonzero) {
        nonzero = false;
        std::uint64_t rem = 0;
        for (auto& limb : limbs) {
            std::uint64_t cur = rem << 32 | limb;
            limb = static_cast<std::uint32_t>(cur / 1000000000ull);
            rem = cur % 1000000000ull;
            if (limb != 0) nonzero = true;
        }
        chunks.push_back(static_cast<std::uint32_t>(rem));
    }
    char buf[16];
    std::snprintf(buf, sizeof buf, "%u", chunks.back());
    out = buf;
    for (auto it = chunks.rbegin() + 1; it != chunks.rend(); ++it) {
        std::snprintf(buf, sizeof buf, "%09u", *it);
        out += buf;
    }
    return out;
}

bool word_to_u64(std::span<const std::uint8_t> w, std::uint64_t& out) {
    if (w.size() != 32) return false;
    if (!is_zero_word(w.subspan(0, 24))) return false;
    out = 0;
    for (std::size_t i = 24; i < 32; ++i) out = out << 8 | w[i];
    return true;
}

std::string topic_to_address(std::span<const std::uint8_t> w) {
    if (w.size() != 32) throw std::invalid_argument("topic word must be 32 bytes");
    return to_lower_hex(w.subspan(12, 20));
}

// ---------------------------------------------------------------------------
// Keccak-256 (original Keccak padding, as used for Ethereum event topics).
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint64_t kRC[24] = {
    0x0000000000000001ull, 0x0000000000008082ull, 0x800000000000808aull, 0x8000000080008000ull,
    0x000000000000808bull, 0x0000000080000001ull, 0x8000000080008081ull, 0x8000000000008009ull,
    0x000000000000008aull, 0x0000000000000088ull, 0x0000000080008009ull, 0x000000008000000aull,
    0x000000008000808bull, 0x800000000000008bull, 0x8000000000008089ull, 0x8000000000008003ull,
    0x8000000000008002ull, 0x8000000000000080ull, 0x000000000000800aull, 0x800000008000000aull,
    0x8000000080008081ull, 0x8000000000008080ull, 0x0000000080000001ull, 0x8000000080008008ull};

constexpr int kRho[24] = {1,  3,  6,  10, 15, 21, 28, 36, 45, 55, 2,  14,
                          27, 41, 56, 8,  25, 43, 62, 18, 39, 61, 20, 44};
constexpr int kPi[24] = {10, 7,  11, 17, 18, 3, 5,  16, 8,  21, 24, 4,
                         15, 23, 19, 13, 12, 2, 20, 14, 22, 9,  6,  1};

inline std::uint64_t rotl(std::uint64_t x, int s) { return x << s | x >> (64 - s); }

void keccakf(std::uint64_t st[25]) {
    for (int round = 0; round < 24; ++round) {
        std::uint64_t bc[5];
        for (int i = 0; i < 5; ++i)
            bc[i] = st[i] ^ st[i + 5] ^ st[i + 10] ^ st[i + 15] ^ st[i + 20];
        for (int i = 0; i < 5; ++i) {
            std::uint64_t t = bc[(i + 4) % 5] ^ rotl(bc[(i + 1) % 5], 1);
            for (int j = 0; j < 25; j += 5) st[j + i] ^= t;
        }
        std::uint64_t t = st[1];
        for (int i = 0; i < 24; ++i) {
            int j = kPi[i];
            bc[0] = st[j];
            st[j] = rotl(t, kRho[i]);
            t = bc[0];
        }
        for (int j = 0; j < 25; j += 5) {
            for (int i = 0; i < 5; ++i) bc[i] = st[j + i];
            for (int i = 0; i < 5; ++i) st[j + i] = bc[i] ^ (~bc[(i + 1) % 5] & bc[(i + 2) % 5]);
        }
        st[0] ^= kRC[round];
    }
}

} // namespace

std::array<std::uint8_t, 32> keccak256(std::span<const std::uint8_t> data) {
    constexpr std::size_t rate = 136; // 1088-bit rate for 256-bit output
    std::uint64_t st[25] = {};
    std::uint8_t block[rate];

    std::size_t off = 0;
    while (data.size() - off >= rate) {
        for (std::size_t i = 0; i < rate / 8; ++i) {
            std::uint64_t w = 0;
            std::memcpy(&w, data.data() + off + i * 8, 8);
            st[i] ^= w; // little-endian lane load
        }
        keccakf(st);
        off += rate;
    }

    std::size_t tail = data.size() - off;
    std::memset(block, 0, rate);
    if (tail > 0) std::memcpy(block, data.data() + off, tail);
    block[tail] = 0x01; // Keccak domain padding (not SHA-3's 0x06)
    block[rate - 1] |= 0x80;
    for (std::size_t i = 0; i < rate / 8; ++i) {
        std::uint64_t w = 0;
        std::memcpy(&w, block + i * 8, 8);
        st[i] ^= w;
    }
    keccakf(st);

    std::array<std::uint8_t, 32> out;
    std::memcpy(out.data(), st, 32);
    return out;
}

std::string keccak256_hex(const std::string& data) {
    auto digest = keccak256(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
    return to_lower_hex(digest, /*prefix=*/false);
}

} // namespace fillside::hex
