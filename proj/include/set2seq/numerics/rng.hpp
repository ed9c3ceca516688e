#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace set2seq {

// SplitMix64 finaliser; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Deterministic random source. Identical seed and call sequence give a
/// bit-identical output sequence on every platform: only the raw engine
/// output is used, never the implementation-defined std distributions.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed = 0) : seed_(seed), engine_(mix64(seed)) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t calls() const { return calls_; }

    std::uint64_t next_u64() {
        ++calls_;
        return engine_();
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi] (inclusive), unbiased via rejection.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) {
            return static_cast<std::int64_t>(next_u64());
        }
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % span;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return lo + static_cast<std::int64_t>(x % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    template <class It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::int64_t>(last - first);
        for (std::int64_t i = n - 1; i > 0; --i) {
            std::swap(first[i], first[uniform_int(0, i)]);
        }
    }

    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = i;
        }
        shuffle(p.begin(), p.end());
        return p;
    }

    // Independent child stream keyed by (seed, stream). Does not advance this rng.
    SeededRng derive(std::uint64_t stream) const { return SeededRng(mix64(seed_ ^ mix64(stream + 0x632BE59BD9B4E019ULL))); }

    std::string serialize() const {
        std::ostringstream os;
        os << seed_ << ' ' << calls_ << ' ' << engine_;
        return os.str();
    }

    static SeededRng deserialize(const std::string& s) {
        std::istringstream is(s);
        SeededRng r;
        is >> r.seed_ >> r.calls_ >> r.engine_;
        return r;
    }

    bool operator==(const SeededRng& o) const {
        return seed_ == o.seed_ && calls_ == o.calls_ && engine_ == o.engine_;
    }

private:
    std::uint64_t seed_;
    std::uint64_t calls_ = 0;
    std::mt19937_64 engine_;
};

}  // namespace set2seq
