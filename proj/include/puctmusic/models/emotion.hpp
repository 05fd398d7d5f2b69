#pragma once

#include <array>
#include <cstdint>

#include "puctmusic/remi/token.hpp"

namespace puctmusic::models {

// Four-class distribution E(s, .). Sums to 1 within 1e-9.
class EmotionDistribution {
public:
    EmotionDistribution() : probs_{0.25, 0.25, 0.25, 0.25} {}
    // Throws InvalidArgument for negative entries or a sum away from 1.
    explicit EmotionDistribution(std::array<double, 4> probs);

    double operator[](EmotionQuadrant q) const noexcept { return probs_[static_cast<std::size_t>(index_of(q))]; }
    const std::array<double, 4>& probs() const noexcept { return probs_; }
    // Lowest quadrant index wins ties.
    EmotionQuadrant argmax() const noexcept;

    friend bool operator==(const EmotionDistribution&, const EmotionDistribution&) = default;

private:
    std::array<double, 4> probs_;
};

// Counts evaluator calls for one decode session. Only classify_emotion and
// discriminate touch the counters.
struct EvaluatorBudget {
    std::uint64_t e_calls = 0;
    std::uint64_t d_calls = 0;

    friend bool operator==(const EvaluatorBudget&, const EvaluatorBudget&) = default;
};

}  // namespace puctmusic::models
