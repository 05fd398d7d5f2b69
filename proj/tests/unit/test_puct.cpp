#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "puctmusic/error.hpp"
#include "puctmusic/models/ngram.hpp"
#include "puctmusic/puct/search.hpp"
#include "puctmusic/remi/grammar.hpp"
#include "puctmusic/synth.hpp"

using namespace puctmusic;
using namespace puctmusic::puct;
using models::EmotionDistribution;
using remi::Token;
using remi::TokenKind;
using testutil::seq;

namespace {

SearchNode make_node(std::vector<double> q, std::vector<double> priors, std::vector<std::uint64_t> visits,
                     std::uint64_t node_visits) {
    SearchNode n;
    for (std::size_t i = 0; i < q.size(); ++i) {
        n.edges.push_back(Edge{static_cast<TokenId>(i), priors[i], q[i], visits[i], nullptr});
    }
    n.node_visits = node_visits;
    return n;
}

DecodeConfig cfg_with_c(double c) {
    DecodeConfig cfg;
    cfg.exploration_c = c;
    return cfg;
}

// Deterministic one-note-per-step bars that never end by themselves.
models::TablePolicy endless_policy() {
    models::TablePolicy p;
    p.set_kind_rule(TokenKind::StartOfMusic, {{remi::kBarId, 1.0}});
    p.set_kind_rule(TokenKind::Bar, {{Token::position(1).id(), 1.0}});
    p.set_kind_rule(TokenKind::Position, {{Token::pitch(60).id(), 0.5}, {Token::pitch(64).id(), 0.5}});
    p.set_kind_rule(TokenKind::Pitch, {{Token::duration(4).id(), 1.0}});
    p.set_kind_rule(TokenKind::Duration, {{Token::velocity(16).id(), 1.0}});
    p.set_kind_rule(TokenKind::Velocity, {{remi::kBarId, 0.4}, {Token::position(9).id(), 0.6}});
    return p;
}

struct TrainedModels {
    models::NgramPolicy policy;
    models::HeuristicClassifier classifier;
    models::HeuristicDiscriminator discriminator;
};

const TrainedModels& trained() {
    static const TrainedModels m = [] {
        const auto corpus = synth_corpus(10, 4, 2);
        return TrainedModels{models::train_ngram(corpus.sequences, 3, 0.01),
                             models::HeuristicClassifier::fit(corpus.sequences),
                             models::HeuristicDiscriminator::fit(corpus.sequences)};
    }();
    return m;
}

}  // namespace

TEST_SUITE("puct") {
    TEST_CASE("select: c = 0 is greedy on q") {
        auto n = make_node({0.5, 0.2}, {0.1, 0.9}, {3, 3}, 7);
        CHECK(select(n, cfg_with_c(0.0)) == 0);
    }

    TEST_CASE("select: unvisited edges follow prior order") {
        auto n = make_node({0.0, 0.0}, {0.4, 0.6}, {0, 0}, 1);
        CHECK(select(n, cfg_with_c(1.0)) == 1);
        auto m = make_node({0.0, 0.0}, {0.6, 0.4}, {0, 0}, 1);
        CHECK(select(m, cfg_with_c(1.0)) == 0);
    }

    TEST_CASE("select: hand-evaluated scores 0.352 vs 0.646 pick edge 1") {
        auto n = make_node({0.1, 0.3}, {0.8, 0.2}, {10, 1}, 12);
        const double s0 = 0.1 + 0.8 * std::sqrt(12.0) / 11.0;
        const double s1 = 0.3 + 0.2 * std::sqrt(12.0) / 2.0;
        CHECK(s0 == doctest::Approx(0.352).epsilon(1e-3));
        CHECK(s1 == doctest::Approx(0.646).epsilon(1e-3));
        CHECK(select(n, cfg_with_c(1.0)) == 1);
    }

    TEST_CASE("select: exact ties go to the lower token") {
        auto n = make_node({0.2, 0.2, 0.2}, {0.3, 0.3, 0.3}, {1, 1, 1}, 4);
        CHECK(select(n, cfg_with_c(1.0)) == 0);
    }

    TEST_CASE("select: argmax with c = 0 is invariant under a constant shift of q") {
        std::mt19937_64 gen(4);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int t = 0; t < 500; ++t) {
            const std::size_t k = 2 + static_cast<std::size_t>(t % 6);
            std::vector<double> q(k), pri(k, 1.0 / static_cast<double>(k));
            std::vector<std::uint64_t> v(k, 1);
            // Quantized q values so that ties actually occur.
            for (auto& x : q) x = std::round(u(gen) * 4.0) / 4.0;
            const double shift = std::round(u(gen) * 8.0) / 8.0;
            auto a = make_node(q, pri, v, k + 1);
            for (auto& x : q) x += shift;
            auto b = make_node(q, pri, v, k + 1);
            CHECK(select(a, cfg_with_c(0.0)) == select(b, cfg_with_c(0.0)));
        }
    }

    TEST_CASE("expand: fresh statistics and renormalized top-p priors") {
        models::TablePolicy tp;
        const auto prefix = testutil::one_note_prefix();
        tp.set_prefix_rule(prefix, {{remi::kBarId, 0.5}, {Token::position(3).id(), 0.3}, {remi::kEndId, 0.2}});
        DecodeConfig cfg;
        cfg.top_p = 0.7;
        auto node = expand(prefix, tp, cfg);
        CHECK(node->node_visits == 1);
        REQUIRE(node->edges.size() == 2);
        CHECK(node->edges[0].token == remi::kBarId);
        CHECK(node->edges[1].token == Token::position(3).id());
        CHECK(node->edges[0].prior == doctest::Approx(0.625).epsilon(1e-15));
        CHECK(node->edges[1].prior == doctest::Approx(0.375).epsilon(1e-15));
        for (const auto& e : node->edges) {
            CHECK(e.visits == 0);
            CHECK(e.q == 0.0);
            CHECK(e.child == nullptr);
        }
        auto ended = prefix;
        ended.push_back(remi::kBarId);
        ended.push_back(remi::kEndId);
        CHECK_THROWS_AS(expand(ended, tp, cfg), TerminalNode);
    }

    TEST_CASE("simulate: match and mismatch rewards") {
        models::TablePolicy tp;
        tp.set_kind_rule(TokenKind::Velocity, {{remi::kBarId, 1.0}});
        models::TableClassifier tc;
        tc.set_default(EmotionDistribution({0.7, 0.1, 0.1, 0.1}));
        models::TableDiscriminator td;
        td.set_default(0.8);
        DecodeConfig cfg;
        cfg.target = EmotionQuadrant::E1;
        EvaluatorBudget budget;
        SeededRandom rng(1);
        auto r = simulate(testutil::one_note_prefix(), tp, tc, td, cfg, budget, rng);
        CHECK(std::abs(r.reward - 0.56) <= 1e-12);
        CHECK(r.sequence.back() == remi::kBarId);
        CHECK(budget == EvaluatorBudget{1, 1});
        cfg.target = EmotionQuadrant::E2;
        r = simulate(testutil::one_note_prefix(), tp, tc, td, cfg, budget, rng);
        CHECK(std::abs(r.reward - (-0.18)) <= 1e-12);
        CHECK(budget == EvaluatorBudget{2, 2});

        tc.set_default(EmotionDistribution{});
        cfg.target = EmotionQuadrant::E1;
        r = simulate(testutil::one_note_prefix(), tp, tc, td, cfg, budget, rng);
        CHECK(r.reward == 0.25 * 0.8);
    }

    TEST_CASE("simulate: at the cap the open note is finished greedily and the bar closed") {
        DecodeConfig cfg;
        cfg.rollout_cap = 2;
        cfg.target = EmotionQuadrant::E2;
        models::TableClassifier tc;
        tc.set_default(EmotionDistribution({0.1, 0.6, 0.2, 0.1}));
        models::TableDiscriminator td;
        td.set_default(0.5);
        EvaluatorBudget budget;
        SeededRandom rng(2);
        const auto leaf = seq({Token::start(), Token::bar()});
        auto r = simulate(leaf, endless_policy(), tc, td, cfg, budget, rng);
        CHECK(r.capped);
        REQUIRE(r.sequence.size() == 7);
        CHECK(r.sequence[2] == Token::position(1).id());
        CHECK(r.sequence[4] == Token::duration(4).id());
        CHECK(r.sequence[5] == Token::velocity(16).id());
        CHECK(r.sequence[6] == remi::kBarId);
        CHECK(remi::is_valid(r.sequence, remi::Completeness::Prefix));
        CHECK(budget == EvaluatorBudget{1, 1});
        CHECK(std::abs(r.reward - 0.3) <= 1e-12);

        cfg.rollout_cap = 1;
        r = simulate(seq({Token::start(), Token::bar(), Token::position(1)}), endless_policy(), tc, td, cfg, budget, rng);
        CHECK(r.capped);
        CHECK(r.sequence.back() == remi::kBarId);
        CHECK(budget == EvaluatorBudget{2, 2});
    }

    TEST_CASE("backpropagate: running average examples") {
        auto n = make_node({0.0}, {1.0}, {0}, 1);
        PathStep step{&n, 0};
        backpropagate(std::span<const PathStep>(&step, 1), 0.56);
        CHECK(n.edges[0].q == doctest::Approx(0.56));
        CHECK(n.edges[0].visits == 1);
        backpropagate(std::span<const PathStep>(&step, 1), -0.18);
        CHECK(std::abs(n.edges[0].q - 0.19) <= 1e-12);
        CHECK(n.edges[0].visits == 2);
        CHECK(n.node_visits == 3);
    }

    TEST_CASE("backpropagate: q is the mean of every reward along a path") {
        std::mt19937_64 gen(6);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int t = 0; t < 200; ++t) {
            auto a = make_node({0.0, 0.0}, {0.5, 0.5}, {0, 0}, 1);
            auto b = make_node({0.0}, {1.0}, {0}, 1);
            const std::size_t len = 1 + static_cast<std::size_t>(t % 50);
            double sum = 0.0;
            for (std::size_t i = 0; i < len; ++i) {
                const double r = u(gen);
                sum += r;
                std::vector<PathStep> path{{&a, 1}, {&b, 0}};
                backpropagate(path, r);
            }
            CHECK(std::abs(a.edges[1].q - sum / static_cast<double>(len)) <= 1e-9);
            CHECK(std::abs(b.edges[0].q - sum / static_cast<double>(len)) <= 1e-9);
            CHECK(a.edges[1].visits == len);
            CHECK(a.node_visits == 1 + a.edge_visit_total());
            CHECK(b.node_visits == 1 + len);
        }
    }

    TEST_CASE("search_step: conservation, budget, bounded q, reward sign") {
        const auto& m = trained();
        DecodeConfig cfg;
        cfg.target = EmotionQuadrant::E3;
        const Sequence prefix{remi::kStartId, remi::kBarId};
        auto root = expand(prefix, m.policy, cfg);
        EvaluatorBudget budget;
        SeededRandom rng(7);
        const std::size_t d = 300;
        for (std::size_t i = 0; i < d; ++i) {
            auto r = search_step(*root, prefix, m.policy, m.classifier, m.discriminator, cfg, budget, rng);
            CHECK(r.reward >= -1.0);
            CHECK(r.reward <= 1.0);
            CHECK((r.reward >= 0.0) == (r.emotion.argmax() == cfg.target));
            CHECK(r.sequence.size() > prefix.size());
            CHECK(remi::is_valid(r.sequence, remi::Completeness::Prefix));
        }
        CHECK(root->edge_visit_total() == d);
        CHECK(root->node_visits == d + 1);
        CHECK(budget.e_calls == d);
        CHECK(budget.d_calls == d);
        for (const auto& [p, stats] : collect_stats(*root, prefix)) {
            std::uint64_t total = 0;
            for (const auto& [tok, vq] : stats.edges) {
                total += vq.first;
                CHECK(vq.second >= -1.0);
                CHECK(vq.second <= 1.0);
            }
            CHECK(stats.node_visits == 1 + total);
        }
    }

    TEST_CASE("choose_token: degenerate and proportional draws") {
        auto n = make_node({0.0, 0.0, 0.0}, {0.3, 0.3, 0.4}, {50, 0, 0}, 51);
        SeededRandom rng(8);
        for (int i = 0; i < 1000; ++i) CHECK(choose_token(n, rng) == 0);

        auto m = make_node({0.0, 0.0}, {0.5, 0.5}, {30, 20}, 51);
        std::array<int, 2> hits{};
        for (int i = 0; i < 10000; ++i) ++hits[choose_token(m, rng)];
        CHECK(std::abs(hits[0] / 10000.0 - 0.6) <= 0.02);
        CHECK(std::abs(hits[1] / 10000.0 - 0.4) <= 0.02);

        auto z = make_node({0.0}, {1.0}, {0}, 1);
        CHECK_THROWS_AS(choose_token(z, rng), InvariantViolation);
    }

    TEST_CASE("decode: max_bars caps an endless policy at exactly that many bars") {
        models::TableClassifier tc;
        tc.set_default(EmotionDistribution{});
        models::TableDiscriminator td;
        td.set_default(0.5);
        DecodeConfig cfg;
        cfg.budget = 4;
        cfg.max_bars = 16;
        const Sequence s0{remi::kStartId};
        auto r = decode_piece(s0, endless_policy(), tc, td, cfg);
        CHECK(remi::count_bars(r.sequence) == 16);
        CHECK(r.sequence.back() == remi::kEndId);
        CHECK(remi::is_valid(r.sequence));
        CHECK_FALSE(r.trace.truncated);
        CHECK(r.trace.records.back().chosen == remi::kBarId);
        CHECK(r.trace.records.back().emitted == remi::kEndId);
    }

    TEST_CASE("decode: every root sees exactly d visits and (d, d) evaluator calls") {
        const auto& m = trained();
        for (std::size_t d : {1u, 7u, 50u}) {
            DecodeConfig cfg;
            cfg.budget = d;
            cfg.max_bars = 2;
            cfg.seed = 100 + d;
            auto r = decode_piece(Sequence{remi::kStartId}, m.policy, m.classifier, m.discriminator, cfg);
            std::uint64_t prev_e = 0, prev_d = 0;
            for (const auto& rec : r.trace.records) {
                std::uint64_t total = 0;
                for (auto v : rec.visits) total += v;
                CHECK(total == d);
                CHECK(rec.root_visits == d + 1);
                CHECK(rec.e_calls - prev_e == d);
                CHECK(rec.d_calls - prev_d == d);
                prev_e = rec.e_calls;
                prev_d = rec.d_calls;
            }
            CHECK(r.budget.e_calls == d * r.trace.records.size());
            CHECK(r.budget.d_calls == d * r.trace.records.size());
            CHECK(r.sequence.size() == r.trace.records.size() + 1);
        }
    }

    TEST_CASE("decode: fixed seed gives identical sequence and trace") {
        const auto& m = trained();
        DecodeConfig cfg;
        cfg.budget = 10;
        cfg.max_bars = 2;
        cfg.seed = 42;
        auto a = decode_piece(Sequence{remi::kStartId}, m.policy, m.classifier, m.discriminator, cfg);
        auto b = decode_piece(Sequence{remi::kStartId}, m.policy, m.classifier, m.discriminator, cfg);
        CHECK(a.sequence == b.sequence);
        CHECK(a.trace.to_json() == b.trace.to_json());
        cfg.seed = 43;
        auto c = decode_piece(Sequence{remi::kStartId}, m.policy, m.classifier, m.discriminator, cfg);
        CHECK(c.trace.to_json() != a.trace.to_json());
    }

    TEST_CASE("decode: emitted pieces are grammar-valid") {
        const auto& m = trained();
        for (std::uint64_t seed = 0; seed < 6; ++seed) {
            DecodeConfig cfg;
            cfg.budget = 5;
            cfg.max_bars = 3;
            cfg.seed = seed;
            cfg.target = quadrant_from_index(static_cast<int>(seed % 4));
            auto r = decode_piece(Sequence{remi::kStartId}, m.policy, m.classifier, m.discriminator, cfg);
            CHECK(remi::is_valid(r.sequence));
            CHECK(remi::count_bars(r.sequence) <= 3);
        }
    }

    TEST_CASE("decode: the token limit closes the piece early") {
        const auto& m = trained();
        DecodeConfig cfg;
        cfg.budget = 2;
        cfg.max_tokens = 30;
        auto r = decode_piece(Sequence{remi::kStartId}, m.policy, m.classifier, m.discriminator, cfg);
        CHECK(r.trace.truncated);
        CHECK(r.sequence.size() <= 30);
        CHECK(remi::is_valid(r.sequence));
    }

    TEST_CASE("decode: subtree reuse keeps the chosen child's statistics") {
        const auto& m = trained();
        DecodeConfig cfg;
        cfg.budget = 20;
        cfg.max_bars = 2;
        cfg.seed = 5;
        cfg.reuse_subtree = true;
        auto r = decode_piece(Sequence{remi::kStartId}, m.policy, m.classifier, m.discriminator, cfg);
        bool grew = false;
        for (std::size_t i = 0; i + 1 < r.trace.records.size(); ++i) {
            const auto& rec = r.trace.records[i];
            const auto idx = static_cast<std::size_t>(
                std::find(rec.candidates.begin(), rec.candidates.end(), rec.chosen) - rec.candidates.begin());
            CHECK(r.trace.records[i + 1].root_visits == rec.visits[idx] + cfg.budget);
            grew = grew || r.trace.records[i + 1].root_visits > cfg.budget + 1;
        }
        CHECK(grew);
    }

    TEST_CASE("config validation") {
        DecodeConfig cfg;
        cfg.top_p = 0.0;
        CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
        cfg = DecodeConfig{};
        cfg.budget = 0;
        CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
        cfg = DecodeConfig{};
        cfg.exploration_c = -1.0;
        CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
        const auto& m = trained();
        CHECK_THROWS_AS(decode_piece(seq({Token::start(), Token::bar(), Token::end()}), m.policy, m.classifier,
                                     m.discriminator, DecodeConfig{}),
                        GrammarError);
    }
}
