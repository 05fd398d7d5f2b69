#include "puctmusic/baselines/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "puctmusic/decoding.hpp"
#include "puctmusic/error.hpp"
#include "puctmusic/remi/grammar.hpp"

namespace puctmusic::baselines {

using remi::kBarId;
using remi::kEndId;
using remi::kVocabSize;

namespace {

constexpr double kProbFloor = 1e-12;

double floored_log(double p) { return std::log(std::max(p, kProbFloor)); }

bool closes_bar(std::span<const TokenId> seq_with_token) {
    const TokenId t = seq_with_token.back();
    return (t == kBarId || t == kEndId) && remi::has_complete_bar(seq_with_token);
}

}  // namespace

void SBBSConfig::validate() const {
    if (beam_width < 1) throw InvalidArgument("beam width must be >= 1");
    if (top_k < beam_width) throw InvalidArgument("top_k must be >= beam width");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw InvalidArgument("top_p must be in (0, 1]");
    if (max_bars < 1) throw InvalidArgument("max_bars must be >= 1");
    if (max_tokens < 4) throw InvalidArgument("max_tokens must be >= 4");
}

void SamplingConfig::validate() const {
    if (!(top_p > 0.0 && top_p <= 1.0)) throw InvalidArgument("top_p must be in (0, 1]");
    if (max_bars < 1) throw InvalidArgument("max_bars must be >= 1");
    if (max_tokens < 4) throw InvalidArgument("max_tokens must be >= 4");
}

std::vector<BeamEntry> sbbs_expand(std::span<const BeamEntry> beams, const models::Policy& policy,
                                   const models::EmotionClassifier& classifier, const SBBSConfig& cfg,
                                   EvaluatorBudget& budget) {
    std::vector<BeamEntry> out;
    std::vector<double> dist(kVocabSize);
    const auto target_logp = [&](std::span<const TokenId> seq) {
        return floored_log(models::classify_emotion(classifier, seq, budget)[cfg.target]);
    };
    for (const BeamEntry& beam : beams) {
        if (beam.finished) continue;
        if (at_token_limit(beam.sequence, cfg.max_tokens)) {
            BeamEntry closed = beam;
            close_at_limit(closed.sequence);
            closed.finished = true;
            if (remi::has_complete_bar(closed.sequence)) closed.emotion_logp = target_logp(closed.sequence);
            out.push_back(std::move(closed));
            continue;
        }
        std::fill(dist.begin(), dist.end(), 0.0);
        policy.next(beam.sequence, dist);
        auto ids = models::top_p_filter(dist, cfg.top_p);
        if (ids.size() > cfg.top_k) ids.resize(cfg.top_k);

        // (emitted token, probability); BAR turned into END at the bar limit
        // merges with an END already in the list.
        std::vector<std::pair<TokenId, double>> succ;
        for (TokenId id : ids) {
            const TokenId emitted = apply_bar_limit(beam.sequence, id, cfg.max_bars);
            auto it = std::find_if(succ.begin(), succ.end(), [&](const auto& s) { return s.first == emitted; });
            if (it != succ.end()) {
                it->second += dist[id];
            } else {
                succ.emplace_back(emitted, dist[id]);
            }
        }

        std::optional<double> boundary_logp;
        for (const auto& [token, prob] : succ) {
            BeamEntry c;
            c.sequence = beam.sequence;
            c.sequence.push_back(token);
            c.lm_logp = beam.lm_logp + floored_log(prob);
            c.emotion_logp = beam.emotion_logp;
            c.finished = token == kEndId;
            if (closes_bar(c.sequence)) {
                if (!boundary_logp) boundary_logp = target_logp(c.sequence);
                c.emotion_logp = *boundary_logp;
            }
            out.push_back(std::move(c));
        }
    }
    return out;
}

std::vector<std::size_t> sample_without_replacement(std::span<const BeamEntry> candidates, std::size_t count,
                                                    RandomSource& rng) {
    count = std::min(count, candidates.size());
    std::vector<bool> taken(candidates.size(), false);
    std::vector<double> weights(candidates.size());
    std::vector<std::size_t> picks;
    picks.reserve(count);
    for (std::size_t draw = 0; draw < count; ++draw) {
        double top = -INFINITY;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (!taken[i]) top = std::max(top, candidates[i].score());
        }
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            weights[i] = taken[i] ? 0.0 : std::exp(candidates[i].score() - top);
        }
        const std::size_t i = sample_index(weights, rng);
        taken[i] = true;
        picks.push_back(i);
    }
    return picks;
}

SBBSResult sbbs_decode(std::span<const TokenId> s0, const models::Policy& policy,
                       const models::EmotionClassifier& classifier, const SBBSConfig& cfg, RandomSource& rng) {
    cfg.validate();
    check_initial_prefix(s0);
    SBBSResult result;
    std::vector<BeamEntry> beams(1);
    beams[0].sequence.assign(s0.begin(), s0.end());
    while (true) {
        std::vector<BeamEntry> next;
        std::vector<BeamEntry> open;
        for (auto& b : beams) (b.finished ? next : open).push_back(std::move(b));
        if (open.empty() || next.size() >= cfg.beam_width) {
            beams = std::move(next);
            break;
        }
        auto candidates = sbbs_expand(open, policy, classifier, cfg, result.budget);
        for (std::size_t i : sample_without_replacement(candidates, cfg.beam_width - next.size(), rng)) {
            next.push_back(std::move(candidates[i]));
        }
        beams = std::move(next);
        ++result.steps;
    }
    const BeamEntry* best = nullptr;
    for (const auto& b : beams) {
        if (b.finished && (!best || b.score() > best->score())) best = &b;
    }
    if (!best) throw InvariantViolation("sbbs finished without a complete beam");
    result.sequence = best->sequence;
    return result;
}

SBBSResult sbbs_decode(std::span<const TokenId> s0, const models::Policy& policy,
                       const models::EmotionClassifier& classifier, const SBBSConfig& cfg) {
    SeededRandom rng(cfg.seed);
    return sbbs_decode(s0, policy, classifier, cfg, rng);
}

Sequence sample_decode(std::span<const TokenId> s0, const models::Policy& policy, const SamplingConfig& cfg,
                       RandomSource& rng) {
    cfg.validate();
    check_initial_prefix(s0);
    Sequence seq(s0.begin(), s0.end());
    std::vector<double> scratch;
    while (true) {
        if (at_token_limit(seq, cfg.max_tokens)) {
            close_at_limit(seq);
            break;
        }
        const TokenId t = models::sample_top_p(policy, seq, cfg.top_p, rng, scratch);
        seq.push_back(apply_bar_limit(seq, t, cfg.max_bars));
        if (seq.back() == kEndId) break;
    }
    return seq;
}

Sequence cs_decode(std::span<const TokenId> s0, const models::Policy& conditional_policy, EmotionQuadrant target,
                   const SamplingConfig& cfg, RandomSource& rng) {
    if (!conditional_policy.supports_condition(target)) {
        throw UntrainedCondition("policy was not trained with the " + std::string(to_string(target)) +
                                 " control token");
    }
    check_initial_prefix(s0);
    if (s0.size() > 1 && remi::is_kind(s0[1], remi::TokenKind::EmotionControl)) {
        throw InvalidArgument("initial prefix already carries an emotion control token");
    }
    Sequence prefix(s0.begin(), s0.end());
    prefix.insert(prefix.begin() + 1, remi::Token::emotion(target).id());
    return sample_decode(prefix, conditional_policy, cfg, rng);
}

}  // namespace puctmusic::baselines
