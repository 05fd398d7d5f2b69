#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "puctmusic/models/evaluators.hpp"
#include "puctmusic/models/policy.hpp"
#include "puctmusic/random.hpp"

namespace puctmusic::puct {

using models::EmotionDistribution;
using models::EvaluatorBudget;
using remi::Sequence;
using remi::TokenId;

struct DecodeConfig {
    double top_p = 0.9;
    double exploration_c = 1.0;
    std::size_t budget = 50;  // search iterations (and evaluator pairs) per emitted token
    EmotionQuadrant target = EmotionQuadrant::E1;
    std::size_t max_bars = 16;
    std::size_t max_tokens = 2048;
    std::size_t rollout_cap = 64;
    std::uint64_t seed = 0;
    // Keep the chosen child's statistics as the next root. Off by default so
    // that every root sees exactly `budget` fresh visits.
    bool reuse_subtree = false;

    // Throws InvalidArgument.
    void validate() const;
};

struct SearchNode;

struct Edge {
    TokenId token;
    double prior;
    double q = 0.0;
    std::uint64_t visits = 0;
    std::unique_ptr<SearchNode> child;
};

// Edges are in ascending token order. A terminal node (prefix ends with END)
// has no edges.
struct SearchNode {
    std::vector<Edge> edges;
    std::uint64_t node_visits = 1;  // 1 + sum of edge visits
    bool terminal = false;

    std::uint64_t edge_visit_total() const noexcept;
};

struct RolloutResult {
    Sequence sequence;
    EmotionDistribution emotion;
    double realness = 0.0;
    double reward = 0.0;
    // The cap was hit: the open note was finished greedily and a BAR appended.
    bool capped = false;
};

// argmax_l  q + c * prior * sqrt(N(n)) / (1 + N(n, l)); lower token wins ties.
std::size_t select(const SearchNode& node, const DecodeConfig& cfg);

// Node for `prefix` with the top-p candidates of the policy, priors
// renormalized over that set. Throws TerminalNode if the prefix ends with END.
std::unique_ptr<SearchNode> expand(std::span<const TokenId> prefix, const models::Policy& policy,
                                   const DecodeConfig& cfg);

// Samples with top-p from `leaf` until a BAR or END closes a bar, then scores
// the result once with each evaluator. At the rollout cap the open note is
// completed with the policy's argmax tokens and the bar is closed.
RolloutResult simulate(std::span<const TokenId> leaf, const models::Policy& policy,
                       const models::EmotionClassifier& classifier, const models::Discriminator& discriminator,
                       const DecodeConfig& cfg, EvaluatorBudget& budget, RandomSource& rng);

struct PathStep {
    SearchNode* node;
    std::size_t edge;
};

// Running-average update of every (node, edge) on the path, leaf first.
void backpropagate(std::span<const PathStep> path, double reward);

// One selection / expansion / simulation / backpropagation iteration.
RolloutResult search_step(SearchNode& root, std::span<const TokenId> root_prefix, const models::Policy& policy,
                          const models::EmotionClassifier& classifier, const models::Discriminator& discriminator,
                          const DecodeConfig& cfg, EvaluatorBudget& budget, RandomSource& rng);

// Edge index drawn with probability N(root, l) / sum_l N(root, l).
std::size_t choose_token(const SearchNode& root, RandomSource& rng);

struct TraceRecord {
    std::vector<TokenId> candidates;
    std::vector<double> priors;
    std::vector<std::uint64_t> visits;
    std::vector<double> q;
    std::uint64_t root_visits = 0;
    TokenId chosen = 0;
    TokenId emitted = 0;  // differs from `chosen` when the bar limit turns BAR into END
    std::uint64_t e_calls = 0;  // cumulative after this token's search
    std::uint64_t d_calls = 0;
    std::uint64_t capped = 0;  // rollouts closed by the cap so far
};

struct DecodeTrace {
    std::vector<TraceRecord> records;
    bool truncated = false;  // closed early by max_tokens

    std::string to_json() const;
};

struct DecodeResult {
    Sequence sequence;
    DecodeTrace trace;
    EvaluatorBudget budget;
};

// Runs `budget` search iterations per emitted token and samples from the root
// visit distribution until END, max_bars or max_tokens.
DecodeResult decode_piece(std::span<const TokenId> s0, const models::Policy& policy,
                          const models::EmotionClassifier& classifier, const models::Discriminator& discriminator,
                          const DecodeConfig& cfg, RandomSource& rng);
// Seeds its own generator from cfg.seed.
DecodeResult decode_piece(std::span<const TokenId> s0, const models::Policy& policy,
                          const models::EmotionClassifier& classifier, const models::Discriminator& discriminator,
                          const DecodeConfig& cfg);

// Flattened statistics of a tree, keyed by the prefix of each node.
struct NodeStats {
    std::uint64_t node_visits = 0;
    std::map<TokenId, std::pair<std::uint64_t, double>> edges;  // token -> (visits, q)
};
std::map<Sequence, NodeStats> collect_stats(const SearchNode& root, std::span<const TokenId> root_prefix);

}  // namespace puctmusic::puct
