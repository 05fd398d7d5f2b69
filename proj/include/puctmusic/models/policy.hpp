#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "puctmusic/random.hpp"
#include "puctmusic/remi/token.hpp"

namespace puctmusic::models {

using remi::Sequence;
using remi::TokenId;

// Next-token probabilities over the whole vocabulary, L(n, .).
struct PolicyDistribution {
    std::vector<double> probs;

    double operator[](TokenId id) const { return probs.at(id); }
};

// The language model used as the search prior and for sampling.
class Policy {
public:
    virtual ~Policy() = default;

    // Writes the next-token distribution for `prefix` into `out`
    // (size kVocabSize). Callers guarantee the prefix is grammar-valid (a
    // prefix may stop inside a note group). Grammar-illegal successors must
    // receive exactly 0.
    virtual void next(std::span<const TokenId> prefix, std::span<double> out) const = 0;

    // Whether an EMOTION control token for `q` was seen during training.
    virtual bool supports_condition(EmotionQuadrant) const { return false; }
};

// Validated entry point: throws GrammarError for an invalid prefix.
PolicyDistribution policy_next(const Policy& policy, std::span<const TokenId> prefix);

// Smallest set of ids, taken in descending probability (ties: lower id),
// whose mass reaches p. Zero-probability ids are never included, and the
// result holds at least one id. Returned in selection order.
std::vector<TokenId> top_p_filter(std::span<const double> dist, double p);

// One draw (one uniform) from the top-p set of the policy's next-token
// distribution, weighted by the unnormalized probabilities in ascending id
// order. `scratch` is reused across calls.
TokenId sample_top_p(const Policy& policy, std::span<const TokenId> prefix, double p, RandomSource& rng,
                   std::vector<double>& scratch);

// Uniform over the grammar-legal successors of the last token.
class UniformPolicy final : public Policy {
public:
    void next(std::span<const TokenId> prefix, std::span<double> out) const override;
};

// Table-driven fixture policy. Lookup order: exact prefix rule, then a rule
// keyed on the kind of the last token, then uniform over legal successors.
// Table mass on illegal successors is dropped and the rest renormalized.
class TablePolicy final : public Policy {
public:
    using Row = std::map<TokenId, double>;

    void set_prefix_rule(std::span<const TokenId> prefix, Row row);
    void set_kind_rule(remi::TokenKind after, Row row);

    void next(std::span<const TokenId> prefix, std::span<double> out) const override;

    // {"prefix_rules": [{"prefix": "START BAR", "next": {"POSITION:1": 1.0}}],
    //  "kind_rules": {"VELOCITY": {"BAR": 0.7, "END": 0.3}}}
    static TablePolicy from_json(const std::string& text);

private:
    std::map<Sequence, Row> prefix_rules_;
    std::map<remi::TokenKind, Row> kind_rules_;
};

}  // namespace puctmusic::models
