#include "puctmusic/generate.hpp"

#include <algorithm>
#include <array>
#include <exception>
#include <initializer_list>
#include <cstdio>
#include <string>

#include "puctmusic/error.hpp"
#include "puctmusic/remi/midi.hpp"
#include "puctmusic/remi/piece.hpp"

namespace puctmusic {

std::string_view to_string(Method m) noexcept {
    switch (m) {
        case Method::Puct: return "puct";
        case Method::Sbbs: return "sbbs";
        case Method::Cs: return "cs";
        case Method::Sample: return "sample";
    }
    return "?";
}

Method parse_method(std::string_view text) {
    for (Method m : {Method::Puct, Method::Sbbs, Method::Cs, Method::Sample}) {
        if (text == to_string(m)) return m;
    }
    throw InvalidArgument("unknown method '" + std::string(text) + "' (expected puct, sbbs, cs or sample)");
}

namespace {

using nlohmann::json;

template <typename T>
void take(const json& section, const char* section_name, const char* key, T& field) {
    auto it = section.find(key);
    if (it == section.end()) return;
    try {
        field = it->get<T>();
    } catch (const json::exception&) {
        throw InvalidArgument(std::string("config: ") + section_name + "." + key + " has the wrong type");
    }
}

void check_keys(const json& section, const char* section_name, std::initializer_list<const char*> keys) {
    if (!section.is_object()) throw InvalidArgument(std::string("config: section '") + section_name + "' must be an object");
    for (const auto& [k, v] : section.items()) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* known) { return k == known; })) {
            throw InvalidArgument("config: unknown key '" + k + "' in section '" + section_name + "'");
        }
    }
}

}  // namespace

void apply_settings_json(GenerationSettings& settings, const json& config) {
    if (!config.is_object()) throw InvalidArgument("config: top level must be an object");
    for (const auto& [name, section] : config.items()) {
        if (name == "puct") {
            check_keys(section, "puct",
                       {"top_p", "exploration_c", "budget", "max_bars", "max_tokens", "rollout_cap", "reuse_subtree"});
            auto& c = settings.puct;
            take(section, "puct", "top_p", c.top_p);
            take(section, "puct", "exploration_c", c.exploration_c);
            take(section, "puct", "budget", c.budget);
            take(section, "puct", "max_bars", c.max_bars);
            take(section, "puct", "max_tokens", c.max_tokens);
            take(section, "puct", "rollout_cap", c.rollout_cap);
            take(section, "puct", "reuse_subtree", c.reuse_subtree);
        } else if (name == "sbbs") {
            check_keys(section, "sbbs", {"beam_width", "top_k", "top_p", "max_bars", "max_tokens"});
            auto& c = settings.sbbs;
            take(section, "sbbs", "beam_width", c.beam_width);
            take(section, "sbbs", "top_k", c.top_k);
            take(section, "sbbs", "top_p", c.top_p);
            take(section, "sbbs", "max_bars", c.max_bars);
            take(section, "sbbs", "max_tokens", c.max_tokens);
        } else if (name == "sampling") {
            check_keys(section, "sampling", {"top_p", "max_bars", "max_tokens"});
            auto& c = settings.sampling;
            take(section, "sampling", "top_p", c.top_p);
            take(section, "sampling", "max_bars", c.max_bars);
            take(section, "sampling", "max_tokens", c.max_tokens);
        } else {
            throw InvalidArgument("config: unknown section '" + name + "'");
        }
    }
}

json method_config_json(const GenerationSettings& settings) {
    switch (settings.method) {
        case Method::Puct: {
            const auto& c = settings.puct;
            return {{"top_p", c.top_p},
                    {"exploration_c", c.exploration_c},
                    {"budget", c.budget},
                    {"max_bars", c.max_bars},
                    {"max_tokens", c.max_tokens},
                    {"rollout_cap", c.rollout_cap},
                    {"reuse_subtree", c.reuse_subtree}};
        }
        case Method::Sbbs: {
            const auto& c = settings.sbbs;
            return {{"beam_width", c.beam_width},
                    {"top_k", c.top_k},
                    {"top_p", c.top_p},
                    {"max_bars", c.max_bars},
                    {"max_tokens", c.max_tokens}};
        }
        case Method::Cs:
        case Method::Sample: {
            const auto& c = settings.sampling;
            return {{"top_p", c.top_p}, {"max_bars", c.max_bars}, {"max_tokens", c.max_tokens}};
        }
    }
    return json::object();
}

GeneratedPiece generate_one(const GenerationSettings& settings, const ModelSet& models, const GenerationJob& job) {
    const remi::Sequence s0{remi::kStartId};
    SeededRandom rng(job.seed);
    GeneratedPiece out;
    switch (settings.method) {
        case Method::Puct: {
            if (!models.policy || !models.classifier || !models.discriminator) {
                throw InvalidArgument("puct needs a policy, a classifier and a discriminator");
            }
            auto cfg = settings.puct;
            cfg.target = job.target;
            cfg.seed = job.seed;
            auto r = puct::decode_piece(s0, *models.policy, *models.classifier, *models.discriminator, cfg, rng);
            out.tokens = std::move(r.sequence);
            out.budget = r.budget;
            break;
        }
        case Method::Sbbs: {
            if (!models.policy || !models.classifier) throw InvalidArgument("sbbs needs a policy and a classifier");
            auto cfg = settings.sbbs;
            cfg.target = job.target;
            cfg.seed = job.seed;
            auto r = baselines::sbbs_decode(s0, *models.policy, *models.classifier, cfg, rng);
            out.tokens = std::move(r.sequence);
            out.budget = r.budget;
            break;
        }
        case Method::Cs: {
            if (!models.conditional_policy) throw InvalidArgument("cs needs a conditional policy");
            auto cfg = settings.sampling;
            cfg.seed = job.seed;
            out.tokens = baselines::cs_decode(s0, *models.conditional_policy, job.target, cfg, rng);
            break;
        }
        case Method::Sample: {
            if (!models.policy) throw InvalidArgument("sample needs a policy");
            auto cfg = settings.sampling;
            cfg.seed = job.seed;
            out.tokens = baselines::sample_decode(s0, *models.policy, cfg, rng);
            break;
        }
    }
    return out;
}

std::vector<GenerationJob> make_jobs(std::span<const EmotionQuadrant> targets, std::size_t count,
                                     std::uint64_t master_seed) {
    std::vector<GenerationJob> jobs;
    jobs.reserve(targets.size() * count);
    for (auto q : targets) {
        for (std::size_t i = 0; i < count; ++i) jobs.push_back({q, derive_seed(master_seed, jobs.size())});
    }
    return jobs;
}

void for_each_index(std::size_t n, const std::function<void(std::size_t)>& fn, bool parallel) {
    if (!parallel) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < count; ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::vector<GeneratedPiece> generate_batch(const GenerationSettings& settings, const ModelSet& models,
                                           std::span<const GenerationJob> jobs, bool parallel) {
    std::vector<GeneratedPiece> out(jobs.size());
    for_each_index(jobs.size(), [&](std::size_t i) { out[i] = generate_one(settings, models, jobs[i]); }, parallel);
    return out;
}

std::vector<metrics::PieceMetrics> evaluate_batch(std::span<const remi::Sequence> pieces,
                                                  const models::EmotionClassifier& classifier,
                                                  const models::Discriminator& discriminator, bool parallel) {
    std::vector<metrics::PieceMetrics> out(pieces.size());
    for_each_index(
        pieces.size(), [&](std::size_t i) { out[i] = metrics::evaluate_piece(pieces[i], classifier, discriminator); },
        parallel);
    return out;
}

RunOutput run_generation(const GenerationSettings& settings, const ModelSet& models,
                         std::span<const EmotionQuadrant> targets, std::size_t count, std::uint64_t seed,
                         json config, bool parallel) {
    if (!models.classifier || !models.discriminator) throw InvalidArgument("scoring needs a classifier and a discriminator");
    const auto jobs = make_jobs(targets, count, seed);
    const auto pieces = generate_batch(settings, models, jobs, parallel);
    std::vector<remi::Sequence> seqs;
    seqs.reserve(pieces.size());
    for (const auto& p : pieces) seqs.push_back(p.tokens);
    const auto scores = evaluate_batch(seqs, *models.classifier, *models.discriminator, parallel);

    RunOutput out;
    auto& m = out.manifest;
    m.method = std::string(to_string(settings.method));
    m.seed = seed;
    json emotions = json::array();
    for (auto q : targets) emotions.push_back(std::string(to_string(q)));
    const bool own_section = settings.method == Method::Puct || settings.method == Method::Sbbs;
    config["count"] = count;
    config["emotions"] = emotions;
    config[own_section ? m.method : "sampling"] = method_config_json(settings);
    m.config = std::move(config);

    std::array<std::size_t, 4> per_emotion{};
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto q = jobs[i].target;
        char name[96];
        std::snprintf(name, sizeof name, "%s_%s_%03zu.mid", m.method.c_str(), std::string(to_string(q)).c_str(),
                      per_emotion[static_cast<std::size_t>(index_of(q))]++);
        out.midi.push_back(remi::encode_midi(remi::tokens_to_piece(seqs[i])));
        metrics::PieceRecord r;
        r.target = q;
        r.seed = jobs[i].seed;
        r.tokens = seqs[i];
        r.midi = name;
        r.metrics = scores[i];
        r.budget = pieces[i].budget;
        m.pieces.push_back(std::move(r));
    }
    return out;
}

}  // namespace puctmusic
