// puctmusic command-line tool: ingest, train, generate, evaluate, compare.
#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <map>
#include <memory>
#include <optional>

#include "puctmusic/corpus.hpp"
#include "puctmusic/error.hpp"
#include "puctmusic/generate.hpp"
#include "puctmusic/models/ngram.hpp"
#include "puctmusic/remi/grammar.hpp"
#include "puctmusic/remi/midi.hpp"
#include "puctmusic/synth.hpp"

#ifndef PUCTMUSIC_VERSION
#define PUCTMUSIC_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace puctmusic;
using nlohmann::json;

namespace {

constexpr const char* kPolicyFile = "policy.ngram";
constexpr const char* kConditionalFile = "conditional.ngram";
constexpr const char* kClassifierFile = "classifier.json";
constexpr const char* kDiscriminatorFile = "discriminator.json";

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("puctmusic");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("PUCTMUSIC_LOG")) {
        const auto level = spdlog::level::from_str(env);
        // from_str maps unknown names to off; only accept real names.
        if (level != spdlog::level::off || std::string(env) == "off") {
            spdlog::set_level(level);
        } else {
            spdlog::warn("ignoring unknown PUCTMUSIC_LOG level '{}'", env);
        }
    }
}

struct LoadedModels {
    std::optional<models::NgramPolicy> policy;
    std::optional<models::NgramPolicy> conditional;
    std::optional<models::HeuristicClassifier> classifier;
    std::optional<models::HeuristicDiscriminator> discriminator;

    ModelSet view() const {
        return ModelSet{policy ? &*policy : nullptr, conditional ? &*conditional : nullptr,
                        classifier ? &*classifier : nullptr, discriminator ? &*discriminator : nullptr};
    }
};

LoadedModels load_models(const fs::path& dir, bool need_policy) {
    if (!fs::is_directory(dir)) throw IoError("model directory not found: " + dir.string());
    LoadedModels m;
    if (fs::exists(dir / kPolicyFile)) {
        m.policy = models::NgramPolicy::deserialize(read_text_file(dir / kPolicyFile));
    } else if (need_policy) {
        throw IoError("missing " + (dir / kPolicyFile).string());
    }
    if (fs::exists(dir / kConditionalFile)) {
        m.conditional = models::NgramPolicy::deserialize(read_text_file(dir / kConditionalFile));
    }
    m.classifier = models::HeuristicClassifier::from_json(read_text_file(dir / kClassifierFile));
    m.discriminator = models::HeuristicDiscriminator::from_json(read_text_file(dir / kDiscriminatorFile));
    return m;
}

std::vector<EmotionQuadrant> parse_emotions(const std::vector<std::string>& names) {
    std::vector<EmotionQuadrant> out;
    if (names.empty() || (names.size() == 1 && names[0] == "all")) {
        return {kAllQuadrants.begin(), kAllQuadrants.end()};
    }
    for (const auto& n : names) {
        const auto q = parse_quadrant(n);
        if (std::find(out.begin(), out.end(), q) == out.end()) out.push_back(q);
    }
    return out;
}

void print_report(const std::map<EmotionQuadrant, metrics::MetricsReport>& reports) {
    std::printf("%-8s%8s%8s%8s%8s%8s%8s\n", "Emotion", "Pieces", "PR", "NPC", "POLY", "E", "D");
    for (const auto& [q, r] : reports) {
        std::printf("%-8s%8zu%8.2f%8.2f%8.2f%7ld%%%7ld%%\n", std::string(to_string(q)).c_str(), r.pieces, r.pr, r.npc,
                    r.poly, std::lround(r.emotion_rate * 100.0), std::lround(r.discriminator_rate * 100.0));
    }
}

// ---- synth-corpus ---------------------------------------------------------

struct SynthArgs {
    std::size_t per_emotion = 20;
    std::size_t bars = 8;
    std::uint64_t seed = 1;
    std::string out;
    std::string labels;
};

void run_synth(const SynthArgs& a) {
    const auto synth = synth_corpus(a.per_emotion, a.bars, a.seed);
    Corpus corpus;
    for (std::size_t i = 0; i < synth.sequences.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "synth_%s_%04zu", std::string(to_string(synth.labels[i])).c_str(), i);
        corpus.entries.push_back({name, synth.sequences[i], synth.labels[i]});
    }
    write_text_file(a.out, corpus.to_json());
    if (!a.labels.empty()) write_text_file(a.labels, labels_to_csv(corpus));
    spdlog::info("wrote {} synthetic pieces to {}", corpus.entries.size(), a.out);
}

// ---- ingest ----------------------------------------------------------------

struct IngestArgs {
    std::string dir;
    std::string out;
};

void run_ingest(const IngestArgs& a) {
    try {
        auto result = ingest_directory(a.dir);
        for (const auto& w : result.warnings) spdlog::warn("{}", w);
        write_text_file(a.out, result.corpus.to_json());
        spdlog::info("ingested {} pieces into {}", result.corpus.entries.size(), a.out);
    } catch (const NoValidFiles& e) {
        spdlog::error("{}", e.what());
        throw;
    }
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
    std::string corpus;
    std::string labels;
    int order = 3;
    double add_k = 0.01;
    std::string out;
};

void run_train(const TrainArgs& a) {
    Corpus corpus = Corpus::from_json(read_text_file(a.corpus));
    if (corpus.entries.empty()) throw EmptyCorpus();
    if (!a.labels.empty()) apply_labels(corpus, read_labels(a.labels));
    const auto sequences = corpus.sequences();

    const fs::path out(a.out);
    fs::create_directories(out);
    const auto policy = models::train_ngram(sequences, a.order, a.add_k);
    write_text_file(out / kPolicyFile, policy.serialize());
    spdlog::info("policy: order {}, add_k {}, {} contexts", a.order, a.add_k, policy.context_count());

    if (corpus.fully_labelled()) {
        const auto conditional = models::train_ngram(models::with_emotion_controls(sequences, corpus.labels()), a.order, a.add_k);
        write_text_file(out / kConditionalFile, conditional.serialize());
        spdlog::info("conditional policy: {} contexts", conditional.context_count());
    } else {
        std::error_code ec;
        fs::remove(out / kConditionalFile, ec);
        spdlog::info("corpus is not labelled; no conditional policy written");
    }
    write_text_file(out / kClassifierFile, models::HeuristicClassifier::fit(sequences).to_json());
    write_text_file(out / kDiscriminatorFile, models::HeuristicDiscriminator::fit(sequences).to_json());
}

// ---- generate --------------------------------------------------------------

struct GenerateArgs {
    std::string models;
    std::string method = "puct";
    std::vector<std::string> emotions;
    std::size_t count = 20;
    std::uint64_t seed = 0;
    std::string config;
    std::string out;
    bool serial = false;
    std::optional<std::size_t> budget, beam, top_k, max_bars;
    std::optional<double> top_p, exploration_c;
};

GenerationSettings settings_from(const GenerateArgs& a) {
    GenerationSettings s;
    s.method = parse_method(a.method);
    if (!a.config.empty()) {
        json cfg;
        try {
            cfg = json::parse(read_text_file(a.config));
        } catch (const json::exception& e) {
            throw InvalidArgument("config " + a.config + ": " + e.what());
        }
        apply_settings_json(s, cfg);
    }
    if (a.top_p) s.puct.top_p = s.sbbs.top_p = s.sampling.top_p = *a.top_p;
    if (a.max_bars) s.puct.max_bars = s.sbbs.max_bars = s.sampling.max_bars = *a.max_bars;
    if (a.budget) s.puct.budget = *a.budget;
    if (a.exploration_c) s.puct.exploration_c = *a.exploration_c;
    if (a.beam) s.sbbs.beam_width = *a.beam;
    if (a.top_k) s.sbbs.top_k = *a.top_k;
    s.puct.validate();
    s.sbbs.validate();
    s.sampling.validate();
    return s;
}

void run_generate(const GenerateArgs& a) {
    const auto settings = settings_from(a);
    const auto targets = parse_emotions(a.emotions);
    const auto loaded = load_models(a.models, true);
    const auto models = loaded.view();
    if (settings.method == Method::Cs) {
        if (!loaded.conditional) throw UntrainedCondition("cs needs a conditional policy; train with labels first");
        for (auto q : targets) {
            if (!loaded.conditional->supports_condition(q)) {
                throw UntrainedCondition("conditional policy was not trained with " + std::string(to_string(q)));
            }
        }
    }

    spdlog::info("generating {} pieces with {}", targets.size() * a.count, to_string(settings.method));
    auto run = run_generation(settings, models, targets, a.count, a.seed, json{{"models", a.models}}, !a.serial);
    auto& manifest = run.manifest;
    manifest.tool_version = PUCTMUSIC_VERSION;

    const fs::path out(a.out);
    fs::create_directories(out);
    for (std::size_t i = 0; i < manifest.pieces.size(); ++i) {
        const auto& bytes = run.midi[i];
        write_text_file(out / manifest.pieces[i].midi, std::string(bytes.begin(), bytes.end()));
    }
    write_text_file(out / "manifest.json", manifest.to_json());
    print_report(metrics::aggregate(manifest.pieces));
    const auto totals = manifest.budget_totals();
    spdlog::info("wrote {} pieces and manifest.json to {} (e_calls {}, d_calls {})", manifest.pieces.size(), out.string(),
                 totals.e_calls, totals.d_calls);
}

// ---- evaluate --------------------------------------------------------------

struct EvaluateArgs {
    std::string input;
    std::string models;
    std::string json_out;
    bool serial = false;
};

bool same_metrics(const metrics::PieceMetrics& a, const metrics::PieceMetrics& b) {
    return a.pr == b.pr && a.npc == b.npc && a.poly == b.poly && a.emotion_probs == b.emotion_probs &&
           a.predicted == b.predicted && a.realness == b.realness;
}

void run_evaluate(const EvaluateArgs& a) {
    const fs::path input(a.input);
    if (fs::is_directory(input)) {
        if (a.models.empty()) throw InvalidArgument("evaluating a MIDI directory needs --models");
        const auto loaded = load_models(a.models, false);
        auto result = ingest_directory(input);
        for (const auto& w : result.warnings) spdlog::warn("{}", w);
        const auto seqs = result.corpus.sequences();
        const auto m = evaluate_batch(seqs, *loaded.classifier, *loaded.discriminator, !a.serial);
        json pieces = json::array();
        std::array<std::size_t, 4> predicted{};
        double pr = 0, npc = 0, poly = 0;
        std::size_t real = 0;
        std::printf("%-32s%8s%8s%8s%8s%8s\n", "File", "PR", "NPC", "POLY", "Pred", "D");
        for (std::size_t i = 0; i < m.size(); ++i) {
            ++predicted[static_cast<std::size_t>(index_of(m[i].predicted))];
            pr += m[i].pr.value_or(0);
            npc += m[i].npc.value_or(0);
            poly += m[i].poly.value_or(0);
            real += m[i].realness > metrics::kRealThreshold;
            std::printf("%-32s%8.2f%8.2f%8.2f%8s%8.2f\n", result.corpus.entries[i].source.c_str(), m[i].pr.value_or(0),
                        m[i].npc.value_or(0), m[i].poly.value_or(0), std::string(to_string(m[i].predicted)).c_str(),
                        m[i].realness);
            pieces.push_back({{"source", result.corpus.entries[i].source},
                              {"pr", m[i].pr.value_or(0)},
                              {"npc", m[i].npc.value_or(0)},
                              {"poly", m[i].poly.value_or(0)},
                              {"emotion_probs", m[i].emotion_probs},
                              {"predicted", to_string(m[i].predicted)},
                              {"realness", m[i].realness}});
        }
        const double n = static_cast<double>(m.size());
        std::printf("mean PR %.2f  NPC %.2f  POLY %.2f  D %ld%%  predicted E1/E2/E3/E4 %zu/%zu/%zu/%zu\n", pr / n, npc / n,
                    poly / n, std::lround(100.0 * static_cast<double>(real) / n), predicted[0], predicted[1], predicted[2],
                    predicted[3]);
        if (!a.json_out.empty()) write_text_file(a.json_out, json{{"pieces", pieces}}.dump(2) + "\n");
        return;
    }

    const auto manifest = metrics::RunManifest::from_json(read_text_file(input));
    std::string models_dir = a.models;
    if (models_dir.empty()) {
        if (!manifest.config.contains("models")) throw ManifestSchemaError("manifest does not name its models; pass --models");
        models_dir = manifest.config.at("models").get<std::string>();
    }
    const auto loaded = load_models(models_dir, false);
    std::vector<remi::Sequence> seqs;
    for (const auto& p : manifest.pieces) seqs.push_back(p.tokens);
    const auto m = evaluate_batch(seqs, *loaded.classifier, *loaded.discriminator, !a.serial);
    std::vector<metrics::PieceRecord> records = manifest.pieces;
    std::size_t matching = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (same_metrics(records[i].metrics, m[i])) {
            ++matching;
        } else {
            spdlog::warn("piece {} differs from the metrics recorded in the manifest", i);
        }
        records[i].metrics = m[i];
    }
    std::printf("method %s, %zu pieces, %zu/%zu match the recorded metrics\n", manifest.method.c_str(), records.size(),
                matching, records.size());
    const auto reports = metrics::aggregate(records);
    print_report(reports);
    if (!a.json_out.empty()) {
        json j = json::object();
        for (const auto& [q, r] : reports) {
            j[std::string(to_string(q))] = {{"pieces", r.pieces},         {"pr", r.pr},
                                            {"npc", r.npc},               {"poly", r.poly},
                                            {"emotion_rate", r.emotion_rate}, {"discriminator_rate", r.discriminator_rate}};
        }
        write_text_file(a.json_out, json{{"method", manifest.method}, {"aggregates", j}}.dump(2) + "\n");
    }
}

// ---- compare ---------------------------------------------------------------

struct CompareArgs {
    std::vector<std::string> manifests;
    std::string json_out;
};

void run_compare(const CompareArgs& a) {
    std::vector<metrics::RunManifest> ms;
    for (const auto& path : a.manifests) ms.push_back(metrics::RunManifest::from_json(read_text_file(path)));
    const auto table = metrics::compare_table(ms);
    std::fputs(table.to_text().c_str(), stdout);
    if (!a.json_out.empty()) write_text_file(a.json_out, table.to_json());
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Emotion-steered symbolic music generation with PUCT search"};
    app.set_version_flag("--version", std::string(PUCTMUSIC_VERSION));
    app.require_subcommand(1);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth-corpus", "Write a labelled synthetic corpus");
    synth_cmd->add_option("--per-emotion", synth.per_emotion, "Pieces per emotion")->capture_default_str();
    synth_cmd->add_option("--bars", synth.bars, "Bars per piece")->capture_default_str()->check(CLI::PositiveNumber);
    synth_cmd->add_option("--seed", synth.seed, "Master seed")->capture_default_str();
    synth_cmd->add_option("--out", synth.out, "Corpus file")->required();
    synth_cmd->add_option("--labels", synth.labels, "Also write a source,emotion label file");

    IngestArgs ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "Tokenize a directory of MIDI files");
    ingest_cmd->add_option("dir", ingest.dir, "Directory of .mid files")->required();
    ingest_cmd->add_option("--out", ingest.out, "Corpus file")->required();

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train the n-gram policy and fit the heuristic evaluators");
    train_cmd->add_option("--corpus", train.corpus, "Corpus file")->required();
    train_cmd->add_option("--labels", train.labels, "source,emotion label file");
    train_cmd->add_option("--order", train.order, "n-gram order (2-4)")->capture_default_str()->check(CLI::Range(2, 4));
    train_cmd->add_option("--add-k", train.add_k, "Add-k smoothing constant")->capture_default_str();
    train_cmd->add_option("--out", train.out, "Model directory")->required();

    GenerateArgs gen;
    auto* gen_cmd = app.add_subcommand("generate", "Generate pieces and write MIDI files plus a manifest");
    gen_cmd->add_option("--models", gen.models, "Model directory")->required();
    gen_cmd->add_option("--method", gen.method, "puct, sbbs, cs or sample")
        ->capture_default_str()
        ->check(CLI::IsMember({"puct", "sbbs", "cs", "sample"}));
    gen_cmd->add_option("--emotion", gen.emotions, "e1..e4 (repeatable) or all; default all")
        ->check(CLI::IsMember({"e1", "e2", "e3", "e4", "all"}, CLI::ignore_case));
    gen_cmd->add_option("--count", gen.count, "Pieces per emotion")->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
    gen_cmd->add_option("--config", gen.config, "JSON config with puct / sbbs / sampling sections");
    gen_cmd->add_option("--budget", gen.budget, "PUCT iterations per token (d)");
    gen_cmd->add_option("--top-p", gen.top_p, "Nucleus mass p");
    gen_cmd->add_option("--exploration-c", gen.exploration_c, "PUCT exploration constant c");
    gen_cmd->add_option("--beam", gen.beam, "SBBS beam width b");
    gen_cmd->add_option("--top-k", gen.top_k, "SBBS successors per beam k");
    gen_cmd->add_option("--max-bars", gen.max_bars, "Bars per piece");
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();
    gen_cmd->add_flag("--serial", gen.serial, "Generate on one thread");

    EvaluateArgs eval;
    auto* eval_cmd = app.add_subcommand("evaluate", "Score a manifest or a directory of MIDI files");
    eval_cmd->add_option("input", eval.input, "manifest.json or MIDI directory")->required();
    eval_cmd->add_option("--models", eval.models, "Model directory (default: the one named in the manifest)");
    eval_cmd->add_option("--json", eval.json_out, "Write the report as JSON");
    eval_cmd->add_flag("--serial", eval.serial, "Evaluate on one thread");

    CompareArgs cmp;
    auto* cmp_cmd = app.add_subcommand("compare", "Cross-method table from two or more manifests");
    cmp_cmd->add_option("manifests", cmp.manifests, "Manifest files")->required()->expected(2, -1);
    cmp_cmd->add_option("--json", cmp.json_out, "Write the table as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*synth_cmd) run_synth(synth);
        if (*ingest_cmd) run_ingest(ingest);
        if (*train_cmd) run_train(train);
        if (*gen_cmd) run_generate(gen);
        if (*eval_cmd) run_evaluate(eval);
        if (*cmp_cmd) run_compare(cmp);
    } catch (const InvalidArgument& e) {
        spdlog::error("{}", e.what());
        return 1;
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return 2;
    } catch (const InvariantViolation& e) {
        spdlog::critical("internal error: {}", e.what());
        return 3;
    } catch (const std::exception& e) {
        spdlog::critical("internal error: {}", e.what());
        return 3;
    }
    return 0;
}
