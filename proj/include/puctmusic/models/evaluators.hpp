#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "puctmusic/models/emotion.hpp"
#include "puctmusic/models/policy.hpp"

namespace puctmusic::models {

// E(s, .): perceived-emotion classifier.
class EmotionClassifier {
public:
    virtual ~EmotionClassifier() = default;
    // `seq` is guaranteed to contain a complete bar.
    virtual EmotionDistribution evaluate(std::span<const TokenId> seq) const = 0;
};

// D(s): probability that a sequence is human-composed.
class Discriminator {
public:
    virtual ~Discriminator() = default;
    virtual double evaluate(std::span<const TokenId> seq) const = 0;
};

// Checked, budgeted calls. Both throw SequenceTooShort when `seq` has no
// complete bar, and otherwise increment their counter by exactly one.
EmotionDistribution classify_emotion(const EmotionClassifier& classifier, std::span<const TokenId> seq,
                                     EvaluatorBudget& budget);
double discriminate(const Discriminator& discriminator, std::span<const TokenId> seq, EvaluatorBudget& budget);

// Reward of a rollout toward `target`:
//   E(s, target) * D(s)                  if argmax E(s) == target
//   (1 - E(s, target)) * (D(s) - 1)      otherwise
double conditional_reward(const EmotionDistribution& emotion, double realness, EmotionQuadrant target);

// Fixture classifier: exact sequence -> distribution, with an optional default.
// Throws InvalidArgument for an unlisted sequence when no default is set.
class TableClassifier final : public EmotionClassifier {
public:
    void set(std::span<const TokenId> seq, EmotionDistribution dist);
    void set_default(EmotionDistribution dist) { default_ = dist; }
    EmotionDistribution evaluate(std::span<const TokenId> seq) const override;

    // {"default": [..4..], "entries": [{"sequence": "START BAR ...", "probs": [..4..]}]}
    static TableClassifier from_json(const std::string& text);

private:
    std::map<Sequence, EmotionDistribution> table_;
    std::optional<EmotionDistribution> default_;
};

class TableDiscriminator final : public Discriminator {
public:
    void set(std::span<const TokenId> seq, double realness);
    void set_default(double realness) { default_ = realness; }
    double evaluate(std::span<const TokenId> seq) const override;

    // {"default": 0.5, "entries": [{"sequence": "START BAR ...", "realness": 0.8}]}
    static TableDiscriminator from_json(const std::string& text);

private:
    std::map<Sequence, double> table_;
    std::optional<double> default_;
};

// Surface features shared by the heuristic models.
struct MusicFeatures {
    double tempo_bpm = 120.0;   // mean over TEMPO tokens; 120 when none
    double note_density = 0.0;  // notes per bar
    double mean_velocity = 0.0;
    std::size_t notes = 0;
    std::array<double, 12> pitch_class_weight{};  // duration-weighted
    std::array<double, 32> duration_histogram{};  // counts per duration bin
};

MusicFeatures extract_features(std::span<const TokenId> seq);

// Krumhansl-Kessler key profiles.
extern const std::array<double, 12> kMajorProfile;
extern const std::array<double, 12> kMinorProfile;

// Best major-key correlation minus best minor-key correlation over the 12
// transpositions. 0 when the histogram is flat or empty.
double mode_score(const std::array<double, 12>& pitch_class_weight);

// Arousal = 0.5 z(tempo) + 0.3 z(density) + 0.2 z(velocity) with z taken
// against corpus statistics; valence = mode_score. Quadrant q scores
// valence_sign(q) * valence + arousal_sign(q) * arousal, softmax at
// temperature 1.
class HeuristicClassifier final : public EmotionClassifier {
public:
    struct Stats {
        double mean = 0.0;
        double stddev = 1.0;
    };

    HeuristicClassifier();
    HeuristicClassifier(Stats tempo, Stats density, Stats velocity);

    // Feature statistics from a reference corpus.
    static HeuristicClassifier fit(std::span<const Sequence> corpus);

    EmotionDistribution evaluate(std::span<const TokenId> seq) const override;
    double arousal(const MusicFeatures& f) const;

    const Stats& tempo() const noexcept { return tempo_; }
    const Stats& density() const noexcept { return density_; }
    const Stats& velocity() const noexcept { return velocity_; }

    std::string to_json() const;
    static HeuristicClassifier from_json(const std::string& text);

private:
    Stats tempo_;
    Stats density_;
    Stats velocity_;
};

// realness = sigmoid(bias + w_grammar * validity + w_entropy * entropy_fit
//                    + w_duration * duration_fit)
// validity: fraction of grammar-legal adjacent pairs.
// entropy_fit: 1 - |H - H_ref| with H the normalized pitch-class entropy and
//              H_ref the corpus mean.
// duration_fit: Bhattacharyya coefficient between the sequence's duration
//               histogram and the corpus histogram.
class HeuristicDiscriminator final : public Discriminator {
public:
    struct Weights {
        double bias = -7.0;
        double grammar = 2.0;
        double entropy = 3.0;
        double duration = 4.0;
    };

    HeuristicDiscriminator();
    HeuristicDiscriminator(double reference_entropy, std::array<double, 32> duration_distribution);
    HeuristicDiscriminator(double reference_entropy, std::array<double, 32> duration_distribution, Weights w);

    static HeuristicDiscriminator fit(std::span<const Sequence> corpus);

    double evaluate(std::span<const TokenId> seq) const override;

    double reference_entropy() const noexcept { return reference_entropy_; }
    const std::array<double, 32>& duration_distribution() const noexcept { return duration_; }

    std::string to_json() const;
    static HeuristicDiscriminator from_json(const std::string& text);

private:
    double reference_entropy_;
    std::array<double, 32> duration_;
    Weights weights_;
};

double pitch_class_entropy(const std::array<double, 12>& pitch_class_weight);

}  // namespace puctmusic::models
