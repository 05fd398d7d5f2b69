#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "puctmusic/models/evaluators.hpp"
#include "puctmusic/models/policy.hpp"
#include "puctmusic/random.hpp"

namespace puctmusic::baselines {

using models::EvaluatorBudget;
using remi::Sequence;
using remi::TokenId;

struct SBBSConfig {
    std::size_t beam_width = 5;  // b
    std::size_t top_k = 10;      // k
    double top_p = 0.9;
    EmotionQuadrant target = EmotionQuadrant::E1;
    std::size_t max_bars = 16;
    std::size_t max_tokens = 2048;
    std::uint64_t seed = 0;

    void validate() const;
};

// Scores are log-space: lm_logp is the summed log policy probability and
// emotion_logp the log E(s, target) of the last bar boundary. Before the
// first boundary it holds the uniform prior log(1/4), so closing a bar is
// neither rewarded nor punished until the classifier has an opinion.
inline const double kUniformEmotionLogp = -1.3862943611198906;  // log(1/4)

struct BeamEntry {
    Sequence sequence;
    double lm_logp = 0.0;
    double emotion_logp = kUniformEmotionLogp;
    bool finished = false;

    double score() const noexcept { return lm_logp + emotion_logp; }
};

// Expands every unfinished beam by its top-k successors (taken from the top-p
// set, bar limit applied). When a successor closes a bar, the classifier is
// called once for that beam and the value is shared by all its closing
// successors; others inherit the beam's held value.
std::vector<BeamEntry> sbbs_expand(std::span<const BeamEntry> beams, const models::Policy& policy,
                                   const models::EmotionClassifier& classifier, const SBBSConfig& cfg,
                                   EvaluatorBudget& budget);

// Draws `count` candidates without replacement: sequential draws from
// softmax(score) renormalized over the remaining ones. Returns indices in draw
// order.
std::vector<std::size_t> sample_without_replacement(std::span<const BeamEntry> candidates, std::size_t count,
                                                    RandomSource& rng);

struct SBBSResult {
    Sequence sequence;
    EvaluatorBudget budget;
    std::size_t steps = 0;
};

SBBSResult sbbs_decode(std::span<const TokenId> s0, const models::Policy& policy,
                       const models::EmotionClassifier& classifier, const SBBSConfig& cfg, RandomSource& rng);
SBBSResult sbbs_decode(std::span<const TokenId> s0, const models::Policy& policy,
                       const models::EmotionClassifier& classifier, const SBBSConfig& cfg);

struct SamplingConfig {
    double top_p = 0.9;
    std::size_t max_bars = 16;
    std::size_t max_tokens = 2048;
    std::uint64_t seed = 0;

    void validate() const;
};

// Plain top-p sampling, one uniform per token.
Sequence sample_decode(std::span<const TokenId> s0, const models::Policy& policy, const SamplingConfig& cfg,
                       RandomSource& rng);

// Inserts EMOTION(target) after START, then samples. Throws
// UntrainedCondition if the policy never saw that control token.
Sequence cs_decode(std::span<const TokenId> s0, const models::Policy& conditional_policy, EmotionQuadrant target,
                   const SamplingConfig& cfg, RandomSource& rng);

}  // namespace puctmusic::baselines
