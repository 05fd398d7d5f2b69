#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "puctmusic/models/policy.hpp"

namespace puctmusic::models {

// Backoff n-gram over REMI ids with add-k smoothing.
//
// For a prefix, the longest context (up to order - 1 tokens) that was seen in
// training gives P(l) = (count(l) + k) / (total + k * |legal|) over the
// grammar-legal successors. Unseen contexts back off to shorter ones and
// finally to uniform over legal successors.
//
// Sequences with an EMOTION token at index 1 are conditional: the control
// token is removed from the token stream and kept as a condition on every
// context. A conditioned prefix tries conditioned contexts first, then the
// unconditioned ones, then uniform.
class NgramPolicy final : public Policy {
public:
    struct Counts {
        std::uint32_t total = 0;
        std::vector<std::pair<TokenId, std::uint32_t>> next;  // ascending id
    };

    int order() const noexcept { return order_; }
    double add_k() const noexcept { return add_k_; }
    std::size_t context_count() const noexcept { return table_.size(); }

    void next(std::span<const TokenId> prefix, std::span<double> out) const override;
    bool supports_condition(EmotionQuadrant q) const override {
        return conditions_[static_cast<std::size_t>(index_of(q))];
    }

    // `context` holds at most order - 1 ids, oldest first.
    const Counts* counts(std::optional<EmotionQuadrant> condition, std::span<const TokenId> context) const;

    // Versioned text format, sorted by context so equal models give equal bytes.
    std::string serialize() const;
    static NgramPolicy deserialize(std::string_view text);

    friend NgramPolicy train_ngram(std::span<const Sequence> corpus, int order, double add_k);

private:
    NgramPolicy(int order, double add_k) : order_(order), add_k_(add_k) {}

    int order_;
    double add_k_;
    std::array<bool, 4> conditions_{};
    std::unordered_map<std::uint32_t, Counts> table_;
};

// order in 2..4, add_k > 0. Throws EmptyCorpus, GrammarError, InvalidArgument.
NgramPolicy train_ngram(std::span<const Sequence> corpus, int order, double add_k);

// Copy of each sequence with EMOTION(label) inserted at index 1.
std::vector<Sequence> with_emotion_controls(std::span<const Sequence> corpus,
                                            std::span<const EmotionQuadrant> labels);

// Average negative log-likelihood per predicted token, exponentiated. Each
// sequence is scored from index 1 on.
double perplexity(const Policy& policy, std::span<const Sequence> corpus);

}  // namespace puctmusic::models
