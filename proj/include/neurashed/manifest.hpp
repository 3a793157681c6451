#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "neurashed/csv.hpp"
#include "neurashed/errors.hpp"

namespace neurashed {

// Minimal SHA-256 (FIPS 180-4), enough to fingerprint run inputs and outputs.
class Sha256 {
public:
    Sha256() { reset(); }

    void reset() {
        state_ = {0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u, 0xa54ff53au,
                  0x510e527fu, 0x9b05688cu, 0x1f83d9abu, 0x5be0cd19u};
        buffer_len_ = 0;
        total_bits_ = 0;
    }

    void update(const void* data, std::size_t len) {
        total_bits_ += static_cast<std::uint64_t>(len) * 8;
        absorb(static_cast<const unsigned char*>(data), len);
    }

    std::string hex_digest() {
        // Padding: 0x80, zeros to 56 mod 64, then the bit length big-endian.
        std::array<unsigned char, 72> pad{};
        pad[0] = 0x80;
        std::size_t pad_len = (buffer_len_ < 56) ? (56 - buffer_len_) : (120 - buffer_len_);
        absorb(pad.data(), pad_len);
        std::array<unsigned char, 8> len_bytes{};
        for (int i = 0; i < 8; ++i)
            len_bytes[static_cast<std::size_t>(7 - i)] = static_cast<unsigned char>(total_bits_ >> (8 * i));
        absorb(len_bytes.data(), 8);

        static const char* hex = "0123456789abcdef";
        std::string out;
        out.reserve(64);
        for (std::uint32_t word : state_) {
            for (int shift = 28; shift >= 0; shift -= 4) out += hex[(word >> shift) & 0xF];
        }
        return out;
    }

private:
    void absorb(const unsigned char* bytes, std::size_t len) {
        while (len > 0) {
            std::size_t take = std::min(len, std::size_t{64} - buffer_len_);
            std::memcpy(buffer_.data() + buffer_len_, bytes, take);
            buffer_len_ += take;
            bytes += take;
            len -= take;
            if (buffer_len_ == 64) {
                process_block(buffer_.data());
                buffer_len_ = 0;
            }
        }
    }

    static std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

    void process_block(const unsigned char* block) {
        static const std::uint32_t k[64] = {
            0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
            0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
            0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
            0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
            0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
            0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
            0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
            0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};
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
        auto [a, b, c, d, e, f, g, h] = std::tuple{state_[0], state_[1], state_[2], state_[3],
                                                   state_[4], state_[5], state_[6], state_[7]};
        for (int i = 0; i < 64; ++i) {
            std::uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
            std::uint32_t ch = (e & f) ^ (~e & g);
            std::uint32_t temp1 = h + s1 + ch + k[i] + w[i];
            std::uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
            std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
            std::uint32_t temp2 = s0 + maj;
            h = g; g = f; f = e; e = d + temp1;
            d = c; c = b; b = a; a = temp1 + temp2;
        }
        state_[0] += a; state_[1] += b; state_[2] += c; state_[3] += d;
        state_[4] += e; state_[5] += f; state_[6] += g; state_[7] += h;
    }

    std::array<std::uint32_t, 8> state_{};
    std::array<unsigned char, 64> buffer_{};
    std::size_t buffer_len_ = 0;
    std::uint64_t total_bits_ = 0;
};

inline std::string sha256_hex(const std::string& content) {
    Sha256 h;
    h.update(content.data(), content.size());
    return h.hex_digest();
}

inline std::string sha256_file(const std::filesystem::path& path) {
    return sha256_hex(read_file(path));
}

struct RunManifest {
    std::vector<std::string> command;
    std::vector<std::uint64_t> seeds;
    std::vector<std::pair<std::string, std::string>> config_hashes; // (name, sha256)
    std::string started_at;
    std::string finished_at;
    std::vector<std::pair<std::string, std::string>> outputs; // (file name, sha256)
};

inline std::string iso8601_utc_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Written last, via a temp file and rename, so a manifest only ever describes
// completely emitted outputs.
inline void write_manifest(const RunManifest& manifest, const std::filesystem::path& dir) {
    nlohmann::json j;
    j["command"] = manifest.command;
    j["seeds"] = manifest.seeds;
    j["config_hashes"] = nlohmann::json::object();
    for (const auto& [name, hash] : manifest.config_hashes) j["config_hashes"][name] = hash;
    j["started_at"] = manifest.started_at;
    j["finished_at"] = manifest.finished_at;
    j["outputs"] = nlohmann::json::array();
    for (const auto& [file, hash] : manifest.outputs)
        j["outputs"].push_back({{"file", file}, {"sha256", hash}});

    std::filesystem::path tmp = dir / "manifest.json.tmp";
    write_file(tmp, j.dump(2) + "\n");
    std::error_code ec;
    std::filesystem::rename(tmp, dir / "manifest.json", ec);
    if (ec) fail(ErrorCode::IoError, "cannot finalize manifest: " + ec.message());
}

} // namespace neurashed
