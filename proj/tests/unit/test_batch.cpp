#include <doctest.h>

#include <algorithm>

#include "puctmusic/error.hpp"
#include "puctmusic/generate.hpp"
#include "puctmusic/models/ngram.hpp"
#include "puctmusic/remi/grammar.hpp"
#include "puctmusic/remi/midi.hpp"
#include "puctmusic/remi/piece.hpp"
#include "puctmusic/synth.hpp"

using namespace puctmusic;
using models::EvaluatorBudget;

namespace {

struct Fixture {
    SynthCorpus corpus = synth_corpus(6, 2, 8);
    models::NgramPolicy policy = models::train_ngram(corpus.sequences, 3, 0.01);
    models::NgramPolicy conditional =
        models::train_ngram(models::with_emotion_controls(corpus.sequences, corpus.labels), 3, 0.01);
    models::HeuristicClassifier classifier = models::HeuristicClassifier::fit(corpus.sequences);
    models::HeuristicDiscriminator discriminator = models::HeuristicDiscriminator::fit(corpus.sequences);

    ModelSet models() const { return ModelSet{&policy, &conditional, &classifier, &discriminator}; }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

GenerationSettings small(Method m) {
    GenerationSettings s;
    s.method = m;
    s.puct.budget = 4;
    s.puct.max_bars = 2;
    s.sbbs.max_bars = 2;
    s.sampling.max_bars = 2;
    return s;
}

}  // namespace

TEST_SUITE("batch") {
    TEST_CASE("jobs are ordered by emotion and carry derived seeds") {
        const std::vector<EmotionQuadrant> targets{EmotionQuadrant::E2, EmotionQuadrant::E4};
        const auto jobs = make_jobs(targets, 3, 9);
        REQUIRE(jobs.size() == 6);
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            CHECK(jobs[i].target == targets[i / 3]);
            CHECK(jobs[i].seed == derive_seed(9, i));
        }
    }

    TEST_CASE("parallel and serial batches are identical for every method") {
        const auto& f = fixture();
        const auto jobs = make_jobs(kAllQuadrants, 2, 77);
        for (Method m : {Method::Puct, Method::Sbbs, Method::Cs, Method::Sample}) {
            CAPTURE(to_string(m));
            const auto serial = generate_batch(small(m), f.models(), jobs, false);
            const auto parallel = generate_batch(small(m), f.models(), jobs, true);
            REQUIRE(serial.size() == jobs.size());
            for (std::size_t i = 0; i < jobs.size(); ++i) {
                CHECK(serial[i].tokens == parallel[i].tokens);
                CHECK(serial[i].budget == parallel[i].budget);
                CHECK(remi::is_valid(serial[i].tokens));
                CHECK(serial[i].tokens == generate_one(small(m), f.models(), jobs[i]).tokens);
            }
            std::vector<remi::Sequence> seqs;
            for (const auto& p : serial) seqs.push_back(p.tokens);
            const auto a = evaluate_batch(seqs, f.classifier, f.discriminator, false);
            const auto b = evaluate_batch(seqs, f.classifier, f.discriminator, true);
            for (std::size_t i = 0; i < a.size(); ++i) {
                CHECK(a[i].emotion_probs == b[i].emotion_probs);
                CHECK(a[i].realness == b[i].realness);
                CHECK(a[i].poly == b[i].poly);
            }
        }
    }

    TEST_CASE("evaluator budgets per method") {
        const auto& f = fixture();
        const GenerationJob job{EmotionQuadrant::E3, 5};
        const auto cs = generate_one(small(Method::Cs), f.models(), job);
        CHECK(cs.budget == EvaluatorBudget{});
        CHECK(cs.tokens[1] == remi::Token::emotion(EmotionQuadrant::E3).id());
        CHECK(generate_one(small(Method::Sample), f.models(), job).budget == EvaluatorBudget{});
        const auto pu = generate_one(small(Method::Puct), f.models(), job);
        CHECK(pu.budget.e_calls == 4 * (pu.tokens.size() - 1));
        CHECK(generate_one(small(Method::Sbbs), f.models(), job).budget.d_calls == 0);
    }

    TEST_CASE("for_each_index visits every index once and rethrows the first failure") {
        for (bool parallel : {false, true}) {
            std::vector<int> hits(100, 0);
            for_each_index(hits.size(), [&](std::size_t i) { ++hits[i]; }, parallel);
            CHECK(std::count(hits.begin(), hits.end(), 1) == 100);
            try {
                for_each_index(
                    50,
                    [](std::size_t i) {
                        if (i == 7 || i == 30) throw InvalidArgument("job " + std::to_string(i));
                    },
                    parallel);
                FAIL("expected an exception");
            } catch (const InvalidArgument& e) {
                CHECK(std::string(e.what()) == "job 7");
            }
        }
    }

    TEST_CASE("config sections merge onto the defaults and reject unknown keys") {
        GenerationSettings s;
        apply_settings_json(s, {{"puct", {{"budget", 7}, {"top_p", 0.8}}}, {"sbbs", {{"beam_width", 3}}}});
        CHECK(s.puct.budget == 7);
        CHECK(s.puct.top_p == 0.8);
        CHECK(s.puct.exploration_c == 1.0);
        CHECK(s.sbbs.beam_width == 3);
        CHECK(s.sbbs.top_k == 10);
        CHECK_THROWS_AS(apply_settings_json(s, {{"puct", {{"budgett", 1}}}}), InvalidArgument);
        CHECK_THROWS_AS(apply_settings_json(s, {{"mcts", nlohmann::json::object()}}), InvalidArgument);
        CHECK_THROWS_AS(apply_settings_json(s, {{"puct", {{"budget", "many"}}}}), InvalidArgument);
        CHECK_THROWS_AS(apply_settings_json(s, nlohmann::json::array()), InvalidArgument);

        GenerationSettings d;
        const auto puct = method_config_json(d);
        CHECK(puct.at("top_p") == 0.9);
        CHECK(puct.at("budget") == 50);
        CHECK(puct.at("exploration_c") == 1.0);
        CHECK(puct.at("max_bars") == 16);
        d.method = Method::Sbbs;
        CHECK(method_config_json(d).at("beam_width") == 5);
        CHECK(method_config_json(d).at("top_k") == 10);
        d.method = Method::Cs;
        CHECK(method_config_json(d).contains("top_p"));
        CHECK_FALSE(method_config_json(d).contains("beam_width"));
    }

    TEST_CASE("run_generation names files, echoes the config and matches generate_batch") {
        const auto& f = fixture();
        const std::vector<EmotionQuadrant> targets{EmotionQuadrant::E3, EmotionQuadrant::E1};
        const auto s = small(Method::Sbbs);
        const auto run = run_generation(s, f.models(), targets, 2, 4, {{"models", "m"}});
        const auto& m = run.manifest;
        CHECK(m.method == "sbbs");
        CHECK(m.seed == 4);
        CHECK(m.config.at("models") == "m");
        CHECK(m.config.at("count") == 2);
        CHECK(m.config.at("emotions") == nlohmann::json::array({"E3", "E1"}));
        CHECK(m.config.at("sbbs") == method_config_json(s));
        REQUIRE(m.pieces.size() == 4);
        REQUIRE(run.midi.size() == 4);
        CHECK(m.pieces[0].midi == "sbbs_E3_000.mid");
        CHECK(m.pieces[1].midi == "sbbs_E3_001.mid");
        CHECK(m.pieces[2].midi == "sbbs_E1_000.mid");
        const auto jobs = make_jobs(targets, 2, 4);
        const auto batch = generate_batch(s, f.models(), jobs);
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            CHECK(m.pieces[i].tokens == batch[i].tokens);
            CHECK(m.pieces[i].seed == jobs[i].seed);
            CHECK(run.midi[i] == remi::encode_midi(remi::tokens_to_piece(batch[i].tokens)));
        }
        CHECK(run_generation(s, f.models(), targets, 2, 4, {{"models", "m"}}, false).manifest.to_json() == m.to_json());
    }

    TEST_CASE("method names") {
        CHECK(parse_method("puct") == Method::Puct);
        CHECK(parse_method("sbbs") == Method::Sbbs);
        CHECK(to_string(Method::Cs) == "cs");
        CHECK_THROWS_AS(parse_method("greedy"), InvalidArgument);
    }
}
