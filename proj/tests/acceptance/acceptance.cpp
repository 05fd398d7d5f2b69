// Acceptance run: one PASS/FAIL line per criterion, each with its runtime limit.
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "oracle.hpp"
#include "puctmusic/generate.hpp"
#include "puctmusic/metrics/metrics.hpp"
#include "puctmusic/models/ngram.hpp"
#include "puctmusic/puct/search.hpp"
#include "puctmusic/remi/grammar.hpp"
#include "puctmusic/synth.hpp"

using namespace puctmusic;
using namespace puctmusic::puct;
using models::EmotionDistribution;
using remi::Token;
using remi::TokenKind;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            if (pass) detail = what;
            pass = false;
        }
    }
};

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int id, const char* title, double limit_s, double elapsed_s, const Verdict& v, const std::string& summary) {
    const bool ok = v.pass && elapsed_s < limit_s;
    if (!ok) ++failures;
    std::string why = v.pass ? summary : v.detail;
    if (v.pass && elapsed_s >= limit_s) why = "over the time limit; " + summary;
    std::printf("AC%-2d %s  %s  [%.2f s / %.0f s]  %s\n", id, ok ? "PASS" : "FAIL", title, elapsed_s, limit_s, why.c_str());
    std::fflush(stdout);
}

template <typename F>
void criterion(int id, const char* title, double limit_s, F&& body) {
    const auto t0 = Clock::now();
    Verdict v;
    std::string summary;
    try {
        summary = body(v);
    } catch (const std::exception& e) {
        v.require(false, std::string("exception: ") + e.what());
    }
    report(id, title, limit_s, std::chrono::duration<double>(Clock::now() - t0).count(), v, summary);
}

SearchNode make_node(std::vector<double> q, std::vector<double> priors, std::vector<std::uint64_t> visits,
                     std::uint64_t node_visits) {
    SearchNode n;
    for (std::size_t i = 0; i < q.size(); ++i) {
        n.edges.push_back(Edge{static_cast<TokenId>(i), priors[i], q[i], visits[i], nullptr});
    }
    n.node_visits = node_visits;
    return n;
}

DecodeConfig with_c(double c) {
    DecodeConfig cfg;
    cfg.exploration_c = c;
    return cfg;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

// Small models for the structural criteria.
struct Toy {
    SynthCorpus corpus = synth_corpus(10, 4, 2);
    models::NgramPolicy policy = models::train_ngram(corpus.sequences, 3, 0.01);
    models::HeuristicClassifier classifier = models::HeuristicClassifier::fit(corpus.sequences);
    models::HeuristicDiscriminator discriminator = models::HeuristicDiscriminator::fit(corpus.sequences);
};

// Models for the steering, validity and determinism runs: 16-bar synthetic
// corpus whose emotion quadrants differ in tempo, register, velocity and mode.
struct Full {
    SynthCorpus corpus = synth_corpus(25, 16, 11);
    models::NgramPolicy policy = models::train_ngram(corpus.sequences, 3, 0.01);
    models::NgramPolicy conditional =
        models::train_ngram(models::with_emotion_controls(corpus.sequences, corpus.labels), 3, 0.01);
    models::HeuristicClassifier classifier = models::HeuristicClassifier::fit(corpus.sequences);
    models::HeuristicDiscriminator discriminator = models::HeuristicDiscriminator::fit(corpus.sequences);

    ModelSet set() const { return ModelSet{&policy, &conditional, &classifier, &discriminator}; }
};

remi::Piece piece_of(std::vector<remi::NoteEvent> notes) {
    remi::Piece p;
    p.notes = std::move(notes);
    p.bars = 1;
    p.sort();
    return p;
}

remi::Piece random_piece(std::mt19937_64& gen) {
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); };
    std::vector<remi::NoteEvent> notes;
    const int n = pick(1, 30);
    const bool off_grid = pick(0, 3) == 0;
    for (int i = 0; i < n; ++i) {
        const int onset = off_grid ? pick(0, 8000) : pick(0, 63) * 120;
        const int duration = off_grid ? pick(1, 3000) : pick(1, 32) * 120;
        notes.push_back({onset, duration, pick(21, 108), pick(1, 127)});
    }
    return piece_of(notes);
}

}  // namespace

int main() {
    std::printf("acceptance run\n");

    criterion(1, "select goldens", 1.0, [](Verdict& v) {
        v.require(select(make_node({0.5, 0.2}, {0.1, 0.9}, {3, 3}, 7), with_c(0.0)) == 0, "c = 0 did not pick the larger q");
        v.require(select(make_node({0.0, 0.0}, {0.6, 0.4}, {0, 0}, 1), with_c(1.0)) == 0,
                  "unvisited edges did not follow the larger prior");
        const double s0 = 0.1 + 0.8 * std::sqrt(12.0) / 11.0;
        const double s1 = 0.3 + 0.2 * std::sqrt(12.0) / 2.0;
        v.require(std::abs(s0 - 0.352) < 5e-4 && std::abs(s1 - 0.646) < 5e-4, "hand scores drifted");
        v.require(select(make_node({0.1, 0.3}, {0.8, 0.2}, {10, 1}, 12), with_c(1.0)) == 1, "0.352 vs 0.646 did not pick edge 1");
        return fmt("scores %.3f vs %.3f -> edge 1", s0, s1);
    });

    criterion(2, "reward equation", 1.0, [](Verdict& v) {
        models::TablePolicy tp;
        tp.set_kind_rule(TokenKind::Velocity, {{remi::kBarId, 1.0}});
        models::TableClassifier tc;
        tc.set_default(EmotionDistribution({0.7, 0.1, 0.1, 0.1}));
        models::TableDiscriminator td;
        td.set_default(0.8);
        DecodeConfig cfg;
        EvaluatorBudget budget;
        SeededRandom rng(1);
        cfg.target = EmotionQuadrant::E1;
        const double match = simulate(testutil::one_note_prefix(), tp, tc, td, cfg, budget, rng).reward;
        cfg.target = EmotionQuadrant::E2;
        const double mismatch = simulate(testutil::one_note_prefix(), tp, tc, td, cfg, budget, rng).reward;
        v.require(std::abs(match - 0.56) <= 1e-12, fmt("match reward %.17g", match));
        v.require(std::abs(mismatch + 0.18) <= 1e-12, fmt("mismatch reward %.17g", mismatch));
        return fmt("match %.15g, mismatch %.15g", match, mismatch);
    });

    criterion(3, "backprop running average", 5.0, [](Verdict& v) {
        std::mt19937_64 gen(3);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::uniform_int_distribution<std::size_t> len_of(1, 50);
        double worst = 0.0;
        for (int t = 0; t < 1000; ++t) {
            auto a = make_node({0.0, 0.0, 0.0}, {0.2, 0.3, 0.5}, {0, 0, 0}, 1);
            auto b = make_node({0.0}, {1.0}, {0}, 1);
            const std::size_t len = len_of(gen);
            double sum = 0.0;
            for (std::size_t i = 0; i < len; ++i) {
                const double r = u(gen);
                sum += r;
                std::vector<PathStep> path{{&a, 2}, {&b, 0}};
                backpropagate(path, r);
            }
            const double mean = sum / static_cast<double>(len);
            worst = std::max({worst, std::abs(a.edges[2].q - mean), std::abs(b.edges[0].q - mean)});
            v.require(a.edges[2].visits == len && b.edges[0].visits == len, "visits differ from stream length");
            v.require(a.edges[0].visits == 0 && a.edges[1].visits == 0, "off-path edges were touched");
        }
        v.require(worst <= 1e-9, fmt("max |Q - mean| = %.3g", worst));
        return fmt("1000 streams, max |Q - mean| = %.2g", worst);
    });

    const Toy toy;

    criterion(4, "conservation and budget parity", 10.0, [&](Verdict& v) {
        std::size_t roots = 0;
        for (std::size_t d : {1u, 7u, 50u}) {
            for (auto q : kAllQuadrants) {
                DecodeConfig cfg;
                cfg.budget = d;
                cfg.max_bars = 2;
                cfg.target = q;
                cfg.seed = 100 + d;
                const auto r = decode_piece(remi::Sequence{remi::kStartId}, toy.policy, toy.classifier, toy.discriminator, cfg);
                std::uint64_t prev_e = 0, prev_d = 0;
                for (const auto& rec : r.trace.records) {
                    ++roots;
                    std::uint64_t sum = 0;
                    for (auto n : rec.visits) sum += n;
                    v.require(sum == d, "sum of root edge visits != d");
                    v.require(rec.root_visits == d + 1, "root node_visits != d + 1");
                    v.require(rec.e_calls - prev_e == d && rec.d_calls - prev_d == d, "budget delta != (d, d)");
                    prev_e = rec.e_calls;
                    prev_d = rec.d_calls;
                }
                v.require(r.budget.e_calls == d * r.trace.records.size(), "total e_calls != d per token");
            }
        }
        return std::to_string(roots) + " roots at d in {1, 7, 50}";
    });

    criterion(5, "oracle equivalence", 30.0, [&](Verdict& v) {
        std::size_t instances = 0, gap_instances = 0;
        for (const auto& inst : oracle::bundled_instances()) {
            ++instances;
            const auto draws = record_stream(2024, inst.iterations * (inst.cfg.rollout_cap + 1));
            ScriptedRandom engine_rng(draws), ref_rng(draws);
            auto root = expand(inst.root, inst.policy, inst.cfg);
            EvaluatorBudget budget;
            for (std::size_t i = 0; i < inst.iterations; ++i) {
                search_step(*root, inst.root, inst.policy, inst.classifier, inst.discriminator, inst.cfg, budget, engine_rng);
            }
            const auto stats = collect_stats(*root, inst.root);
            const auto ref = oracle::reference_puct(inst, inst.iterations, ref_rng);
            v.require(stats.size() == ref.node_visits.size(), inst.name + ": node sets differ");
            for (const auto& [prefix, visits] : ref.node_visits) {
                auto it = stats.find(prefix);
                if (it == stats.end()) {
                    v.require(false, inst.name + ": engine is missing a node");
                    continue;
                }
                v.require(it->second.node_visits == visits, inst.name + ": node visits differ");
                auto edges = ref.edges.find(prefix);
                if (edges == ref.edges.end()) continue;
                for (const auto& [tok, e] : edges->second) {
                    const auto& got = it->second.edges.at(tok);
                    v.require(got.first == e.visits && got.second == e.q, inst.name + ": N or Q differ");
                }
            }

            std::vector<double> expected;
            for (TokenId c : inst.children) expected.push_back(oracle::exact_expected_reward(inst, c));
            auto sorted = expected;
            std::sort(sorted.rbegin(), sorted.rend());
            if (sorted.size() < 2 || sorted[0] - sorted[1] < 0.3) continue;
            ++gap_instances;
            auto cfg_inst = inst;
            SeededRandom rng(5);
            auto groot = expand(cfg_inst.root, cfg_inst.policy, cfg_inst.cfg);
            EvaluatorBudget gb;
            for (int i = 0; i < 200; ++i) {
                search_step(*groot, cfg_inst.root, cfg_inst.policy, cfg_inst.classifier, cfg_inst.discriminator,
                            cfg_inst.cfg, gb, rng);
            }
            std::size_t most = 0;
            for (std::size_t i = 1; i < groot->edges.size(); ++i) {
                if (groot->edges[i].visits > groot->edges[most].visits) most = i;
            }
            const auto best = static_cast<std::size_t>(std::max_element(expected.begin(), expected.end()) - expected.begin());
            v.require(most == best, inst.name + ": most visited child is not the best at d = 200");
        }
        v.require(gap_instances >= 1, "no instance with a gap of at least 0.3");
        return std::to_string(instances) + " instances bit-identical, " + std::to_string(gap_instances) +
               " gap instances resolved at d = 200";
    });

    const Full full;
    const auto models = full.set();
    std::map<Method, std::vector<remi::Sequence>> pieces;
    std::map<Method, std::vector<EmotionQuadrant>> targets;
    double steering_s = 0.0;
    {
        const auto t0 = Clock::now();
        for (Method m : {Method::Sample, Method::Cs, Method::Sbbs, Method::Puct}) {
            GenerationSettings s;
            s.method = m;
            for (std::uint64_t seed : {1u, 2u, 3u}) {
                const auto jobs = make_jobs(kAllQuadrants, 20, seed);
                for (auto& p : generate_batch(s, models, jobs)) pieces[m].push_back(std::move(p.tokens));
                for (const auto& j : jobs) targets[m].push_back(j.target);
            }
        }
        steering_s = std::chrono::duration<double>(Clock::now() - t0).count();
    }

    auto rate = [&](Method m) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < pieces[m].size(); ++i) {
            if (full.classifier.evaluate(pieces[m][i]).argmax() == targets[m][i]) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(pieces[m].size());
    };

    {
        const auto t0 = Clock::now();
        Verdict v;
        const double sample = rate(Method::Sample), sbbs = rate(Method::Sbbs), puct = rate(Method::Puct),
                     cs = rate(Method::Cs);
        v.require(puct >= sample + 0.2, fmt("PUCT %.3f is not 0.2 above sampling %.3f", puct, sample));
        v.require(puct >= sbbs, fmt("PUCT %.3f is below SBBS %.3f", puct, sbbs));
        const double elapsed = steering_s + std::chrono::duration<double>(Clock::now() - t0).count();
        report(6, "steering efficacy", 600.0, elapsed, v,
               fmt("emotion rate: puct %.3f, sbbs %.3f, sample %.3f, cs %.3f", puct, sbbs, sample, cs) +
                   " over 20 x 4 x 3 pieces each");
    }

    criterion(7, "grammar soundness", 600.0, [&](Verdict& v) {
        std::size_t total = 0, bad = 0;
        for (const auto& [m, seqs] : pieces) {
            v.require(seqs.size() == 240, std::string(to_string(m)) + ": expected 240 pieces");
            for (const auto& s : seqs) {
                ++total;
                try {
                    remi::validate_sequence(s);
                } catch (const std::exception&) {
                    ++bad;
                }
            }
        }
        v.require(bad == 0, std::to_string(bad) + " invalid pieces");
        return std::to_string(total - bad) + "/" + std::to_string(total) +
               " valid (sample, cs, sbbs, puct; generation time counted under AC6)";
    });

    criterion(8, "metrics correctness", 10.0, [](Verdict& v) {
        using namespace metrics;
        auto pitches = [](std::initializer_list<int> ps) {
            std::vector<remi::NoteEvent> notes;
            int onset = 0;
            for (int p : ps) {
                notes.push_back({onset, 120, p, 64});
                onset += 120;
            }
            return piece_of(notes);
        };
        v.require(pitch_range(pitches({60})) == 0.0, "PR of one note");
        v.require(pitch_range(pitches({60, 64, 72})) == 12.0, "PR of 60, 64, 72");
        v.require(n_pitch_classes(pitches({60, 72, 84})) == 1, "NPC of octaves");
        v.require(n_pitch_classes(pitches({60, 61, 62, 63, 64, 65, 66, 67, 68, 69, 70, 71})) == 12, "NPC chromatic");
        v.require(n_pitch_classes(pitches({60, 62, 64, 65, 67})) == 5, "NPC of five notes");
        v.require(polyphony(piece_of({{0, 1920, 60, 64}})) == 1.0, "POLY of one held note");
        v.require(polyphony(piece_of({{0, 1920, 60, 64}, {0, 1920, 64, 64}})) == 2.0, "POLY of a dyad");
        v.require(polyphony(piece_of({{0, 960, 60, 64}, {480, 960, 64, 64}})) == 16.0 / 12.0, "POLY of overlap");
        std::mt19937_64 gen(8);
        std::size_t mismatches = 0;
        for (int i = 0; i < 500; ++i) {
            const auto p = random_piece(gen);
            if (polyphony(p) != oracle::polyphony_grid(p)) ++mismatches;
        }
        v.require(mismatches == 0, std::to_string(mismatches) + " of 500 random pieces differ from the grid oracle");
        return std::string("8 fixtures exact, 500/500 random pieces equal the grid oracle");
    });

    criterion(9, "determinism", 120.0, [&](Verdict& v) {
        std::size_t files = 0;
        for (Method m : {Method::Puct, Method::Sbbs, Method::Cs, Method::Sample}) {
            GenerationSettings s;
            s.method = m;
            const nlohmann::json cfg{{"models", "acceptance"}};
            auto a = run_generation(s, models, kAllQuadrants, 1, 7, cfg);
            auto b = run_generation(s, models, kAllQuadrants, 1, 7, cfg);
            const std::string name(to_string(m));
            v.require(a.manifest.to_json() == b.manifest.to_json(), name + ": manifests differ");
            v.require(a.midi == b.midi, name + ": MIDI bytes differ");
            files += a.midi.size() + 1;
        }
        return std::to_string(files) + " files identical across two runs per method";
    });

    criterion(10, "visit-sampling statistics", 10.0, [&](Verdict& v) {
        DecodeConfig cfg;
        cfg.budget = 50;
        cfg.target = EmotionQuadrant::E2;
        const remi::Sequence prefix{remi::kStartId, remi::kBarId};
        auto root = expand(prefix, toy.policy, cfg);
        EvaluatorBudget budget;
        SeededRandom search_rng(10);
        for (std::size_t i = 0; i < cfg.budget; ++i) {
            search_step(*root, prefix, toy.policy, toy.classifier, toy.discriminator, cfg, budget, search_rng);
        }
        const auto hand = make_node({0.0, 0.0, 0.0}, {0.2, 0.3, 0.5}, {30, 15, 5}, 51);
        double worst = 0.0;
        for (const SearchNode* node : {static_cast<const SearchNode*>(root.get()), &hand}) {
            const double d = static_cast<double>(node->edge_visit_total());
            ScriptedRandom draws(record_stream(1010, 10000));
            std::vector<std::size_t> hits(node->edges.size(), 0);
            for (int i = 0; i < 10000; ++i) ++hits[choose_token(*node, draws)];
            for (std::size_t l = 0; l < hits.size(); ++l) {
                const double diff = std::abs(static_cast<double>(hits[l]) / 10000.0 -
                                             static_cast<double>(node->edges[l].visits) / d);
                worst = std::max(worst, diff);
            }
        }
        v.require(worst <= 0.02, fmt("max frequency error %.4f", worst));
        return fmt("max |freq - N/d| = %.4f over 10000 draws per root", worst);
    });

    std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
