#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace musiela::hash {

/// Incremental SHA-1. Used to content-address artifact files so reruns can be
/// compared without diffing; not a security boundary.
class Sha1 {
  public:
    void update(const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        total_ += len;
        while (len > 0) {
            const std::size_t take = std::min(len, std::size_t(64) - fill_);
            std::memcpy(buf_.data() + fill_, p, take);
            fill_ += take;
            p += take;
            len -= take;
            if (fill_ == 64) {
                process(buf_.data());
                fill_ = 0;
            }
        }
    }

    /// Finalizes and returns the 40-character lowercase hex digest.
    std::string hex_digest() {
        const std::uint64_t bits = total_ * 8;
        const unsigned char one = 0x80;
        update(&one, 1);
        const unsigned char zero = 0x00;
        while (fill_ != 56) update(&zero, 1);
        unsigned char len_be[8];
        for (int i = 0; i < 8; ++i) len_be[i] = static_cast<unsigned char>(bits >> (56 - 8 * i));
        // bypass total_ bookkeeping for the length block
        std::memcpy(buf_.data() + fill_, len_be, 8);
        process(buf_.data());
        std::string out(40, '0');
        static const char* hexd = "0123456789abcdef";
        for (int i = 0; i < 5; ++i)
            for (int b = 0; b < 4; ++b) {
                const unsigned byte = (h_[i] >> (24 - 8 * b)) & 0xffu;
                out[std::size_t(8 * i + 2 * b)] = hexd[byte >> 4];
                out[std::size_t(8 * i + 2 * b + 1)] = hexd[byte & 0xf];
            }
        return out;
    }

  private:
    static std::uint32_t rotl(std::uint32_t v, int s) { return (v << s) | (v >> (32 - s)); }

    void process(const unsigned char* block) {
        std::uint32_t w[80];
        for (int t = 0; t < 16; ++t)
            w[t] = (std::uint32_t(block[4 * t]) << 24) | (std::uint32_t(block[4 * t + 1]) << 16) |
                   (std::uint32_t(block[4 * t + 2]) << 8) | std::uint32_t(block[4 * t + 3]);
        for (int t = 16; t < 80; ++t) w[t] = rotl(w[t - 3] ^ w[t - 8] ^ w[t - 14] ^ w[t - 16], 1);
        std::uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3], e = h_[4];
        for (int t = 0; t < 80; ++t) {
            std::uint32_t f, k;
            if (t < 20) {
                f = (b & c) | (~b & d);
                k = 0x5a827999;
            } else if (t < 40) {
                f = b ^ c ^ d;
                k = 0x6ed9eba1;
            } else if (t < 60) {
                f = (b & c) | (b & d) | (c & d);
                k = 0x8f1bbcdc;
            } else {
                f = b ^ c ^ d;
                k = 0xca62c1d6;
            }
            const std::uint32_t tmp = rotl(a, 5) + f + e + k + w[t];
            e = d;
            d = c;
            c = rotl(b, 30);
            b = a;
            a = tmp;
        }
        h_[0] += a;
        h_[1] += b;
        h_[2] += c;
        h_[3] += d;
        h_[4] += e;
    }

    std::array<std::uint32_t, 5> h_ = {0x67452301u, 0xefcdab89u, 0x98badcfeu, 0x10325476u,
                                       0xc3d2e1f0u};
    std::array<unsigned char, 64> buf_{};
    std::size_t fill_ = 0;
    std::uint64_t total_ = 0;
};

inline std::string sha1_hex(std::string_view s) {
    Sha1 h;
    h.update(s.data(), s.size());
    return h.hex_digest();
}

}  // namespace musiela::hash
