#include "puctmusic/models/policy.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "puctmusic/error.hpp"
#include "puctmusic/models/emotion.hpp"
#include "puctmusic/remi/grammar.hpp"

namespace puctmusic::models {

using remi::kVocabSize;

EmotionDistribution::EmotionDistribution(std::array<double, 4> probs) : probs_(probs) {
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) throw InvalidArgument("emotion probabilities must be non-negative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("emotion probabilities must sum to 1");
}

EmotionQuadrant EmotionDistribution::argmax() const noexcept {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs_.size(); ++i) {
        if (probs_[i] > probs_[best]) best = i;
    }
    return static_cast<EmotionQuadrant>(best);
}

PolicyDistribution policy_next(const Policy& policy, std::span<const TokenId> prefix) {
    remi::validate_sequence(prefix, remi::Completeness::Prefix);
    if (prefix.back() == remi::kEndId) throw GrammarError(prefix.size(), "no token may follow END");
    PolicyDistribution dist{std::vector<double>(kVocabSize, 0.0)};
    policy.next(prefix, dist.probs);
    return dist;
}

std::vector<TokenId> top_p_filter(std::span<const double> dist, double p) {
    std::vector<std::pair<double, TokenId>> ranked;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        if (dist[i] > 0.0) ranked.emplace_back(dist[i], static_cast<TokenId>(i));
    }
    if (ranked.empty()) throw InvariantViolation("top_p_filter: distribution has no mass");
    const auto before = [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; };
    // Mass is usually concentrated, so rank a short head first and only sort
    // the tail when the head falls short of p.
    constexpr std::size_t kHead = 16;
    const std::size_t head = std::min(kHead, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(head), ranked.end(), before);
    // Absorbs rounding in the running sum, so p = 1 keeps every nonzero id
    // without demanding an exact 1.0.
    constexpr double kSlack = 1e-12;
    double mass = 0.0;
    std::vector<TokenId> ids;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        if (i == head) std::sort(ranked.begin() + static_cast<std::ptrdiff_t>(head), ranked.end(), before);
        mass += ranked[i].first;
        ids.push_back(ranked[i].second);
        if (mass >= p - kSlack) break;
    }
    return ids;
}

TokenId sample_top_p(const Policy& policy, std::span<const TokenId> prefix, double p, RandomSource& rng,
                     std::vector<double>& scratch) {
    scratch.assign(kVocabSize, 0.0);
    policy.next(prefix, scratch);
    auto ids = top_p_filter(scratch, p);
    std::sort(ids.begin(), ids.end());
    std::vector<double> weights(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) weights[i] = scratch[ids[i]];
    return ids[sample_index(weights, rng)];
}

void UniformPolicy::next(std::span<const TokenId> prefix, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const auto legal = remi::grammar_mask(prefix.back());
    const double p = 1.0 / static_cast<double>(legal.size());
    for (TokenId id : legal) out[id] = p;
}

void TablePolicy::set_prefix_rule(std::span<const TokenId> prefix, Row row) {
    prefix_rules_[Sequence(prefix.begin(), prefix.end())] = std::move(row);
}

void TablePolicy::set_kind_rule(remi::TokenKind after, Row row) {
    kind_rules_[after] = std::move(row);
}

void TablePolicy::next(std::span<const TokenId> prefix, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const Row* row = nullptr;
    if (auto it = prefix_rules_.find(Sequence(prefix.begin(), prefix.end())); it != prefix_rules_.end()) {
        row = &it->second;
    } else if (auto kt = kind_rules_.find(remi::kind_of(prefix.back())); kt != kind_rules_.end()) {
        row = &kt->second;
    }
    double total = 0.0;
    if (row) {
        for (const auto& [id, w] : *row) {
            if (w > 0.0 && remi::is_legal_successor(prefix.back(), id)) {
                out[id] = w;
                total += w;
            }
        }
    }
    if (total > 0.0) {
        for (auto& v : out) v /= total;
        return;
    }
    UniformPolicy{}.next(prefix, out);
}

namespace {

TablePolicy::Row parse_row(const nlohmann::json& j) {
    TablePolicy::Row row;
    for (const auto& [key, value] : j.items()) {
        row[remi::Token::parse(key).id()] = value.get<double>();
    }
    return row;
}

remi::TokenKind parse_kind(const std::string& name) {
    static const std::map<std::string, remi::TokenKind> kinds = {
        {"BAR", remi::TokenKind::Bar},           {"POSITION", remi::TokenKind::Position},
        {"PITCH", remi::TokenKind::Pitch},       {"DURATION", remi::TokenKind::Duration},
        {"VELOCITY", remi::TokenKind::Velocity}, {"TEMPO", remi::TokenKind::Tempo},
        {"START", remi::TokenKind::StartOfMusic}, {"EMOTION", remi::TokenKind::EmotionControl},
    };
    auto it = kinds.find(name);
    if (it == kinds.end()) throw ModelFormatError("unknown token kind '" + name + "'");
    return it->second;
}

}  // namespace

TablePolicy TablePolicy::from_json(const std::string& text) {
    TablePolicy policy;
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.contains("prefix_rules")) {
            for (const auto& rule : j.at("prefix_rules")) {
                policy.set_prefix_rule(remi::sequence_from_key(rule.at("prefix").get<std::string>()),
                                       parse_row(rule.at("next")));
            }
        }
        if (j.contains("kind_rules")) {
            for (const auto& [kind, row] : j.at("kind_rules").items()) {
                policy.set_kind_rule(parse_kind(kind), parse_row(row));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError(std::string("table policy: ") + e.what());
    }
    return policy;
}

}  // namespace puctmusic::models
