#include "puctmusic/random.hpp"

#include "puctmusic/error.hpp"

namespace puctmusic {

double ScriptedRandom::uniform() {
    if (next_ >= draws_.size()) {
        throw InvariantViolation("scripted random stream exhausted after " +
                                 std::to_string(draws_.size()) + " draws");
    }
    return draws_[next_++];
}

std::vector<double> record_stream(std::uint64_t seed, std::size_t count) {
    SeededRandom rng(seed);
    std::vector<double> out(count);
    for (auto& u : out) u = rng.uniform();
    return out;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
    return mix64(master + (stream + 1) * 0x9E3779B97F4A7C15ULL);
}

std::size_t sample_index(std::span<const double> weights, RandomSource& rng) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (weights.empty() || !(total > 0.0)) {
        throw InvariantViolation("sample_index: no positive weight");
    }
    const double target = rng.uniform() * total;
    double running = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        running += weights[i];
        last_positive = i;
        if (running > target) return i;
    }
    // Rounding left target at the very top of the range.
    return last_positive;
}

}  // namespace puctmusic
