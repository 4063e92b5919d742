#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace levy_she {

// Philox4x32-10 block cipher (Salmon et al., SC'11).
class Philox4x32 {
  public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter encrypt(Counter ctr, Key key) {
        ctr = round(ctr, key);
        for (int r = 1; r < 10; ++r) {
            key[0] += 0x9E3779B9u;
            key[1] += 0xBB67AE85u;
            ctr = round(ctr, key);
        }
        return ctr;
    }

  private:
    static Counter round(const Counter& c, const Key& k) {
        std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
        std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
        auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
        auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };
        return {hi(p1) ^ c[1] ^ k[0], lo(p1), hi(p0) ^ c[3] ^ k[1], lo(p0)};
    }
};

// Purpose tags keep independent consumers of one (seed, replica) on disjoint counters.
enum class StreamPurpose : std::uint32_t { noise = 0, bootstrap = 1, lab = 2, test = 3 };

// Counter-based stream keyed by (seed, replica, box, purpose). Satisfies
// UniformRandomBitGenerator; draws depend only on the key and draw index.
class CounterStream {
  public:
    using result_type = std::uint32_t;

    CounterStream(std::uint64_t seed, std::uint32_t replica, std::uint32_t box,
                  StreamPurpose purpose = StreamPurpose::noise)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          box_(box), replica_(replica), purpose_(static_cast<std::uint32_t>(purpose)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (pos_ == 4) refill();
        return buffer_[pos_++];
    }

    // Uniform on the open interval (0, 1) with 53 random bits.
    double uniform() {
        std::uint64_t hi = (*this)();
        std::uint64_t lo = (*this)();
        std::uint64_t bits = ((hi << 32) | lo) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

  private:
    void refill() {
        buffer_ = Philox4x32::encrypt({block_++, box_, replica_, purpose_}, key_);
        pos_ = 0;
    }

    Philox4x32::Key key_;
    std::uint32_t box_;
    std::uint32_t replica_;
    std::uint32_t purpose_;
    std::uint32_t block_ = 0;
    Philox4x32::Counter buffer_{};
    int pos_ = 4;
};

}  // namespace levy_she
