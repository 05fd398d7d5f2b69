#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "puctmusic/models/evaluators.hpp"
#include "puctmusic/remi/piece.hpp"

namespace puctmusic::metrics {

using models::EvaluatorBudget;
using remi::Piece;
using remi::Sequence;

// All three throw EmptyPiece for a piece without notes.
double pitch_range(const Piece& piece);
int n_pitch_classes(const Piece& piece);
// Mean number of sounding notes over the 120-tick steps where at least one
// note sounds. A note sounds on step t when onset <= 120 t < onset + duration.
double polyphony(const Piece& piece);

// Fraction of sequences whose classifier argmax is `target` (0 for an empty set).
double emotion_rate(std::span<const Sequence> pieces, const models::EmotionClassifier& classifier,
                    EmotionQuadrant target);
// Fraction with realness strictly above `threshold`.
double discriminator_rate(std::span<const Sequence> pieces, const models::Discriminator& discriminator,
                          double threshold = 0.5);

inline constexpr double kRealThreshold = 0.5;

struct PieceMetrics {
    // Absent when the piece has no notes.
    std::optional<double> pr;
    std::optional<double> npc;
    std::optional<double> poly;
    std::array<double, 4> emotion_probs{};
    EmotionQuadrant predicted = EmotionQuadrant::E1;
    double realness = 0.0;
};

// Structure metrics plus one classifier and one discriminator evaluation.
// Throws SequenceTooShort without a complete bar.
PieceMetrics evaluate_piece(const Sequence& seq, const models::EmotionClassifier& classifier,
                            const models::Discriminator& discriminator);

struct PieceRecord {
    EmotionQuadrant target = EmotionQuadrant::E1;
    std::uint64_t seed = 0;
    Sequence tokens;
    std::string midi;  // relative to the manifest; may be empty
    PieceMetrics metrics;
    EvaluatorBudget budget;
};

// Per-emotion averages. Structure metrics average over pieces with notes.
struct MetricsReport {
    std::size_t pieces = 0;
    double pr = 0.0;
    double npc = 0.0;
    double poly = 0.0;
    double emotion_rate = 0.0;
    double discriminator_rate = 0.0;
};

std::map<EmotionQuadrant, MetricsReport> aggregate(std::span<const PieceRecord> pieces);

struct RunManifest {
    std::string tool_version;
    std::string method;
    nlohmann::json config = nlohmann::json::object();
    std::uint64_t seed = 0;
    std::vector<PieceRecord> pieces;

    EvaluatorBudget budget_totals() const;

    // Stable bytes: sorted keys, no timestamps.
    std::string to_json() const;
    // Throws ManifestSchemaError.
    static RunManifest from_json(const std::string& text);
};

struct ComparisonRow {
    std::string method;
    std::array<MetricsReport, 4> cells;  // E1..E4
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows;

    // {"methods": [{"method": .., "E1": {"pr": .., ...}, ...}]}
    std::string to_json() const;
    // One block per method: PR, NPC, POLY with two decimals, then E and D as
    // whole percentages, columns E1..E4.
    std::string to_text() const;
};

// Needs at least two manifests, each with pieces for all four emotions.
// Throws ManifestSchemaError naming the first gap.
ComparisonTable compare_table(std::span<const RunManifest> manifests);

}  // namespace puctmusic::metrics
