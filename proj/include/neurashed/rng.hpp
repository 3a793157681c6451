#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "neurashed/errors.hpp"

namespace neurashed {

// Deterministic random source. mt19937_64 has a standard-specified algorithm,
// so streams are identical across platforms; the distribution transforms are
// hand-rolled here because the standard library's distributions are
// implementation-defined and would break bit-level reproducibility.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform on [0, 1), 53-bit resolution.
    double next_unit() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_unit();
    }

    // Standard normal via Box-Muller; the twin is cached so draws come in pairs.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so log(u1) is finite.
        double u1 = static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
        double u2 = next_unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// splitmix64 finalizer, used to derive independent stream seeds.
inline std::uint64_t mix_bits(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    return mix_bits(mix_bits(base ^ mix_bits(a)) ^ mix_bits(b));
}

// Weighted sampling with replacement over indices 0..n-1.
class WeightedSampler {
public:
    explicit WeightedSampler(std::span<const double> weights) {
        cumulative_.reserve(weights.size());
        double total = 0.0;
        for (double w : weights) {
            if (!(w > 0.0)) fail(ErrorCode::InvalidConfig, "sampling weights must be positive");
            total += w;
            cumulative_.push_back(total);
        }
        if (cumulative_.empty()) fail(ErrorCode::EmptyDataset, "no weights to sample from");
    }

    int sample(Rng& rng) const {
        double u = rng.next_unit() * cumulative_.back();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        if (it == cumulative_.end()) --it;
        return static_cast<int>(it - cumulative_.begin());
    }

private:
    std::vector<double> cumulative_;
};

} // namespace neurashed
