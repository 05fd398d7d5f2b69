#include "puctmusic/puct/search.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "puctmusic/decoding.hpp"
#include "puctmusic/error.hpp"
#include "puctmusic/remi/grammar.hpp"

namespace puctmusic::puct {

using remi::kBarId;
using remi::kEndId;
using remi::kVocabSize;

void DecodeConfig::validate() const {
    if (!(top_p > 0.0 && top_p <= 1.0)) throw InvalidArgument("top_p must be in (0, 1]");
    if (!(exploration_c >= 0.0) || !std::isfinite(exploration_c)) throw InvalidArgument("exploration_c must be >= 0");
    if (budget < 1) throw InvalidArgument("budget must be >= 1");
    if (max_bars < 1) throw InvalidArgument("max_bars must be >= 1");
    if (rollout_cap < 1) throw InvalidArgument("rollout_cap must be >= 1");
    if (max_tokens < 4) throw InvalidArgument("max_tokens must be >= 4");
}

std::uint64_t SearchNode::edge_visit_total() const noexcept {
    std::uint64_t total = 0;
    for (const auto& e : edges) total += e.visits;
    return total;
}

std::size_t select(const SearchNode& node, const DecodeConfig& cfg) {
    if (node.edges.empty()) throw InvariantViolation("select on a node without edges");
    const double sqrt_n = std::sqrt(static_cast<double>(node.node_visits));
    std::size_t best = 0;
    double best_score = 0.0;
    for (std::size_t i = 0; i < node.edges.size(); ++i) {
        const Edge& e = node.edges[i];
        const double score = e.q + cfg.exploration_c * e.prior * sqrt_n / (1.0 + static_cast<double>(e.visits));
        // Edges are ascending by token, so strict > keeps the lower id on ties.
        if (i == 0 || score > best_score) {
            best = i;
            best_score = score;
        }
    }
    return best;
}

std::unique_ptr<SearchNode> expand(std::span<const TokenId> prefix, const models::Policy& policy,
                                   const DecodeConfig& cfg) {
    if (prefix.empty()) throw GrammarError(0, "empty prefix");
    if (prefix.back() == kEndId) throw TerminalNode();
    std::vector<double> dist(kVocabSize, 0.0);
    policy.next(prefix, dist);
    auto ids = models::top_p_filter(dist, cfg.top_p);
    std::sort(ids.begin(), ids.end());
    double total = 0.0;
    for (TokenId id : ids) total += dist[id];
    auto node = std::make_unique<SearchNode>();
    node->edges.reserve(ids.size());
    for (TokenId id : ids) node->edges.push_back(Edge{id, dist[id] / total, 0.0, 0, nullptr});
    return node;
}

RolloutResult simulate(std::span<const TokenId> leaf, const models::Policy& policy,
                       const models::EmotionClassifier& classifier, const models::Discriminator& discriminator,
                       const DecodeConfig& cfg, EvaluatorBudget& budget, RandomSource& rng) {
    RolloutResult out;
    out.sequence.assign(leaf.begin(), leaf.end());
    Sequence& seq = out.sequence;
    bool closed = seq.back() == kEndId || (seq.back() == kBarId && remi::has_complete_bar(seq));
    std::vector<double> scratch;
    for (std::size_t added = 0; !closed && added < cfg.rollout_cap; ++added) {
        const TokenId t = models::sample_top_p(policy, seq, cfg.top_p, rng, scratch);
        seq.push_back(t);
        if (t == kBarId || t == kEndId) closed = remi::has_complete_bar(seq);
    }
    if (!closed) {
        // Cap reached: finish the open note with the policy's most likely
        // tokens, then close the bar so the evaluators see a full bar.
        out.capped = true;
        scratch.assign(remi::kVocabSize, 0.0);
        while (!remi::is_legal_successor(seq.back(), kBarId)) {
            policy.next(seq, scratch);
            seq.push_back(static_cast<TokenId>(std::max_element(scratch.begin(), scratch.end()) - scratch.begin()));
        }
        seq.push_back(kBarId);
    }
    out.emotion = models::classify_emotion(classifier, seq, budget);
    out.realness = models::discriminate(discriminator, seq, budget);
    out.reward = models::conditional_reward(out.emotion, out.realness, cfg.target);
    return out;
}

void backpropagate(std::span<const PathStep> path, double reward) {
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
        Edge& e = it->node->edges[it->edge];
        const double n = static_cast<double>(e.visits);
        e.q = (e.q * n + reward) / (n + 1.0);
        ++e.visits;
        ++it->node->node_visits;
    }
}

RolloutResult search_step(SearchNode& root, std::span<const TokenId> root_prefix, const models::Policy& policy,
                          const models::EmotionClassifier& classifier, const models::Discriminator& discriminator,
                          const DecodeConfig& cfg, EvaluatorBudget& budget, RandomSource& rng) {
    if (root.terminal) throw TerminalNode();
    Sequence prefix(root_prefix.begin(), root_prefix.end());
    std::vector<PathStep> path;
    SearchNode* node = &root;
    while (!node->terminal) {
        const std::size_t i = select(*node, cfg);
        path.push_back({node, i});
        Edge& e = node->edges[i];
        prefix.push_back(e.token);
        if (!e.child) {
            if (e.token == kEndId) {
                e.child = std::make_unique<SearchNode>();
                e.child->terminal = true;
            } else {
                e.child = expand(prefix, policy, cfg);
            }
            break;
        }
        node = e.child.get();
    }
    RolloutResult result = simulate(prefix, policy, classifier, discriminator, cfg, budget, rng);
    backpropagate(path, result.reward);
    return result;
}

std::size_t choose_token(const SearchNode& root, RandomSource& rng) {
    std::vector<double> weights(root.edges.size());
    double total = 0.0;
    for (std::size_t i = 0; i < root.edges.size(); ++i) {
        weights[i] = static_cast<double>(root.edges[i].visits);
        total += weights[i];
    }
    if (total <= 0.0) throw InvariantViolation("choose_token on an unvisited root");
    return sample_index(weights, rng);
}

namespace {

TraceRecord record_root(const SearchNode& root, const EvaluatorBudget& budget, std::uint64_t capped) {
    TraceRecord r;
    for (const auto& e : root.edges) {
        r.candidates.push_back(e.token);
        r.priors.push_back(e.prior);
        r.visits.push_back(e.visits);
        r.q.push_back(e.q);
    }
    r.root_visits = root.node_visits;
    r.e_calls = budget.e_calls;
    r.d_calls = budget.d_calls;
    r.capped = capped;
    return r;
}

}  // namespace

DecodeResult decode_piece(std::span<const TokenId> s0, const models::Policy& policy,
                          const models::EmotionClassifier& classifier, const models::Discriminator& discriminator,
                          const DecodeConfig& cfg, RandomSource& rng) {
    cfg.validate();
    check_initial_prefix(s0);
    DecodeResult out;
    Sequence& seq = out.sequence;
    seq.assign(s0.begin(), s0.end());
    std::uint64_t capped = 0;
    auto root = expand(seq, policy, cfg);
    while (true) {
        if (at_token_limit(seq, cfg.max_tokens)) {
            close_at_limit(seq);
            out.trace.truncated = true;
            break;
        }
        for (std::size_t i = 0; i < cfg.budget; ++i) {
            if (search_step(*root, seq, policy, classifier, discriminator, cfg, out.budget, rng).capped) ++capped;
        }
        TraceRecord rec = record_root(*root, out.budget, capped);
        const std::size_t pick = choose_token(*root, rng);
        Edge& edge = root->edges[pick];
        rec.chosen = edge.token;
        rec.emitted = apply_bar_limit(seq, edge.token, cfg.max_bars);
        seq.push_back(rec.emitted);
        out.trace.records.push_back(std::move(rec));
        if (seq.back() == kEndId) break;
        if (cfg.reuse_subtree && edge.child) {
            std::unique_ptr<SearchNode> next = std::move(edge.child);
            root = std::move(next);
        } else {
            root = expand(seq, policy, cfg);
        }
    }
    return out;
}

DecodeResult decode_piece(std::span<const TokenId> s0, const models::Policy& policy,
                          const models::EmotionClassifier& classifier, const models::Discriminator& discriminator,
                          const DecodeConfig& cfg) {
    SeededRandom rng(cfg.seed);
    return decode_piece(s0, policy, classifier, discriminator, cfg, rng);
}

std::string DecodeTrace::to_json() const {
    nlohmann::json records_json = nlohmann::json::array();
    for (const auto& r : records) {
        records_json.push_back({{"candidates", r.candidates},
                                {"priors", r.priors},
                                {"visits", r.visits},
                                {"q", r.q},
                                {"root_visits", r.root_visits},
                                {"chosen", r.chosen},
                                {"emitted", r.emitted},
                                {"e_calls", r.e_calls},
                                {"d_calls", r.d_calls},
                                {"capped", r.capped}});
    }
    return nlohmann::json{{"records", records_json}, {"truncated", truncated}}.dump();
}

namespace {

void collect(const SearchNode& node, Sequence& prefix, std::map<Sequence, NodeStats>& out) {
    NodeStats& s = out[prefix];
    s.node_visits = node.node_visits;
    for (const auto& e : node.edges) {
        s.edges[e.token] = {e.visits, e.q};
        if (e.child) {
            prefix.push_back(e.token);
            collect(*e.child, prefix, out);
            prefix.pop_back();
        }
    }
}

}  // namespace

std::map<Sequence, NodeStats> collect_stats(const SearchNode& root, std::span<const TokenId> root_prefix) {
    std::map<Sequence, NodeStats> out;
    Sequence prefix(root_prefix.begin(), root_prefix.end());
    collect(root, prefix, out);
    return out;
}

}  // namespace puctmusic::puct
