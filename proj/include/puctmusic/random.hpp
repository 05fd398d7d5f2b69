#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace puctmusic {

// Source of uniform draws in [0, 1). Decoders consume exactly one draw per
// sampled token, so a recorded stream replays a decode exactly.
class RandomSource {
public:
    virtual ~RandomSource() = default;
    virtual double uniform() = 0;
};

// mt19937_64 with a fixed 53-bit conversion; std::uniform_real_distribution
// is implementation-defined, this is not.
class SeededRandom final : public RandomSource {
public:
    explicit SeededRandom(std::uint64_t seed) : engine_(seed) {}

    double uniform() override {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

private:
    std::mt19937_64 engine_;
};

// Replays a recorded stream of draws. Throws InvariantViolation once exhausted.
class ScriptedRandom final : public RandomSource {
public:
    explicit ScriptedRandom(std::vector<double> draws) : draws_(std::move(draws)) {}

    double uniform() override;
    std::size_t consumed() const noexcept { return next_; }

private:
    std::vector<double> draws_;
    std::size_t next_ = 0;
};

// Records every draw of an inner source, so the stream can be replayed.
class RecordingRandom final : public RandomSource {
public:
    explicit RecordingRandom(RandomSource& inner) : inner_(inner) {}

    double uniform() override {
        double u = inner_.uniform();
        recorded_.push_back(u);
        return u;
    }
    const std::vector<double>& recorded() const noexcept { return recorded_; }

private:
    RandomSource& inner_;
    std::vector<double> recorded_;
};

std::vector<double> record_stream(std::uint64_t seed, std::size_t count);

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Per-stream seed derived from a master seed:
//   derive_seed(m, i) = mix64(m + (i + 1) * 0x9E3779B97F4A7C15)
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept;

// Draws an index from non-negative weights (in the given order) with one
// uniform draw: the first index whose running sum exceeds u * total.
std::size_t sample_index(std::span<const double> weights, RandomSource& rng);

}  // namespace puctmusic
