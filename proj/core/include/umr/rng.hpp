#pragma once

#include <cstdint>
#include <random>

namespace umr {

/// Seeded generator with explicit integer/real transforms so that draws are
/// reproducible across standard library implementations (std distributions
/// are not portable, the raw mt19937_64 stream is).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [0, n). n must be > 0.
    std::size_t next_index(std::size_t n) {
        return static_cast<std::size_t>(engine_() % static_cast<std::uint64_t>(n));
    }

    /// Uniform in [lo, hi).
    double next_range(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    bool next_bool() { return (engine_() & 1ULL) != 0; }

    /// Fisher-Yates shuffle with this generator.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = next_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace umr
