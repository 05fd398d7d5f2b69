#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "puctmusic/baselines/baselines.hpp"
#include "puctmusic/metrics/metrics.hpp"
#include "puctmusic/puct/search.hpp"

namespace puctmusic {

enum class Method { Puct, Sbbs, Cs, Sample };

std::string_view to_string(Method m) noexcept;
// Throws InvalidArgument.
Method parse_method(std::string_view text);

struct GenerationSettings {
    Method method = Method::Puct;
    puct::DecodeConfig puct;
    baselines::SBBSConfig sbbs;
    baselines::SamplingConfig sampling;
};

// Config file shape, one section per decoder:
//   {"puct": {"top_p", "exploration_c", "budget", "max_bars", "max_tokens",
//             "rollout_cap", "reuse_subtree"},
//    "sbbs": {"beam_width", "top_k", "top_p", "max_bars", "max_tokens"},
//    "sampling": {"top_p", "max_bars", "max_tokens"}}
// Missing keys keep their current values. Unknown sections or keys and
// mistyped values throw InvalidArgument.
void apply_settings_json(GenerationSettings& settings, const nlohmann::json& config);
// The section used by settings.method ("sampling" for cs and sample).
nlohmann::json method_config_json(const GenerationSettings& settings);

// Borrowed, read-only models shared by every decode session.
struct ModelSet {
    const models::Policy* policy = nullptr;
    const models::Policy* conditional_policy = nullptr;  // CS only
    const models::EmotionClassifier* classifier = nullptr;
    const models::Discriminator* discriminator = nullptr;
};

struct GenerationJob {
    EmotionQuadrant target = EmotionQuadrant::E1;
    std::uint64_t seed = 0;
};

struct GeneratedPiece {
    remi::Sequence tokens;
    models::EvaluatorBudget budget;
};

// One decode session with its own generator seeded from job.seed.
GeneratedPiece generate_one(const GenerationSettings& settings, const ModelSet& models, const GenerationJob& job);

// `count` jobs per target, in target order; job i uses derive_seed(master, i).
std::vector<GenerationJob> make_jobs(std::span<const EmotionQuadrant> targets, std::size_t count,
                                     std::uint64_t master_seed);

// Runs fn(0..n-1), across OpenMP threads when `parallel` is set. Results must
// be written by index; the first exception (by index) is rethrown.
void for_each_index(std::size_t n, const std::function<void(std::size_t)>& fn, bool parallel);

std::vector<GeneratedPiece> generate_batch(const GenerationSettings& settings, const ModelSet& models,
                                           std::span<const GenerationJob> jobs, bool parallel = true);

std::vector<metrics::PieceMetrics> evaluate_batch(std::span<const remi::Sequence> pieces,
                                                  const models::EmotionClassifier& classifier,
                                                  const models::Discriminator& discriminator, bool parallel = true);

struct RunOutput {
    metrics::RunManifest manifest;  // tool_version left empty for the caller
    std::vector<std::vector<std::uint8_t>> midi;  // one file per manifest piece, named by PieceRecord::midi
};

// Generates `count` pieces per target, scores them and names each file
// "<method>_<emotion>_<nnn>.mid". The manifest config is `config` plus
// "count", "emotions" and the method section of `settings`.
RunOutput run_generation(const GenerationSettings& settings, const ModelSet& models,
                         std::span<const EmotionQuadrant> targets, std::size_t count, std::uint64_t seed,
                         nlohmann::json config = nlohmann::json::object(), bool parallel = true);

}  // namespace puctmusic
