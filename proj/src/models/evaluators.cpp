#include "puctmusic/models/evaluators.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "puctmusic/error.hpp"
#include "puctmusic/remi/grammar.hpp"

namespace puctmusic::models {

using remi::TokenKind;

EmotionDistribution classify_emotion(const EmotionClassifier& classifier, std::span<const TokenId> seq,
                                     EvaluatorBudget& budget) {
    if (!remi::has_complete_bar(seq)) throw SequenceTooShort();
    ++budget.e_calls;
    return classifier.evaluate(seq);
}

double discriminate(const Discriminator& discriminator, std::span<const TokenId> seq, EvaluatorBudget& budget) {
    if (!remi::has_complete_bar(seq)) throw SequenceTooShort();
    ++budget.d_calls;
    return discriminator.evaluate(seq);
}

double conditional_reward(const EmotionDistribution& emotion, double realness, EmotionQuadrant target) {
    const double e = emotion[target];
    if (emotion.argmax() == target) return e * realness;
    return (1.0 - e) * (realness - 1.0);
}

void TableClassifier::set(std::span<const TokenId> seq, EmotionDistribution dist) {
    table_.insert_or_assign(Sequence(seq.begin(), seq.end()), dist);
}

EmotionDistribution TableClassifier::evaluate(std::span<const TokenId> seq) const {
    if (auto it = table_.find(Sequence(seq.begin(), seq.end())); it != table_.end()) return it->second;
    if (default_) return *default_;
    throw InvalidArgument("table classifier has no entry for '" + remi::sequence_key(seq) + "'");
}

void TableDiscriminator::set(std::span<const TokenId> seq, double realness) {
    if (!(realness >= 0.0 && realness <= 1.0)) throw InvalidArgument("realness must be in [0, 1]");
    table_.insert_or_assign(Sequence(seq.begin(), seq.end()), realness);
}

double TableDiscriminator::evaluate(std::span<const TokenId> seq) const {
    if (auto it = table_.find(Sequence(seq.begin(), seq.end())); it != table_.end()) return it->second;
    if (default_) return *default_;
    throw InvalidArgument("table discriminator has no entry for '" + remi::sequence_key(seq) + "'");
}

namespace {

EmotionDistribution parse_probs(const nlohmann::json& j) {
    return EmotionDistribution(j.get<std::array<double, 4>>());
}

}  // namespace

TableClassifier TableClassifier::from_json(const std::string& text) {
    TableClassifier out;
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.contains("default")) out.set_default(parse_probs(j.at("default")));
        for (const auto& e : j.value("entries", nlohmann::json::array())) {
            out.set(remi::sequence_from_key(e.at("sequence").get<std::string>()), parse_probs(e.at("probs")));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError(std::string("table classifier: ") + e.what());
    }
    return out;
}

TableDiscriminator TableDiscriminator::from_json(const std::string& text) {
    TableDiscriminator out;
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.contains("default")) out.set_default(j.at("default").get<double>());
        for (const auto& e : j.value("entries", nlohmann::json::array())) {
            out.set(remi::sequence_from_key(e.at("sequence").get<std::string>()), e.at("realness").get<double>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError(std::string("table discriminator: ") + e.what());
    }
    return out;
}

MusicFeatures extract_features(std::span<const TokenId> seq) {
    MusicFeatures f;
    double tempo_sum = 0.0;
    std::size_t tempo_count = 0;
    double velocity_sum = 0.0;
    std::size_t bars = 0;
    int pitch = 0;
    int duration_bin = 1;
    for (TokenId id : seq) {
        switch (remi::kind_of(id)) {
            case TokenKind::Bar: ++bars; break;
            case TokenKind::Tempo:
                tempo_sum += remi::tempo_from_bin(remi::value_of(id));
                ++tempo_count;
                break;
            case TokenKind::Pitch: pitch = remi::value_of(id); break;
            case TokenKind::Duration: duration_bin = remi::value_of(id); break;
            case TokenKind::Velocity:
                ++f.notes;
                velocity_sum += remi::velocity_from_bin(remi::value_of(id));
                f.pitch_class_weight[static_cast<std::size_t>(pitch % 12)] += duration_bin;
                f.duration_histogram[static_cast<std::size_t>(duration_bin - 1)] += 1.0;
                break;
            default: break;
        }
    }
    // A trailing BAR opens an empty bar that has not been played yet.
    if (!seq.empty() && seq.back() == remi::kBarId && bars > 1) --bars;
    if (tempo_count) f.tempo_bpm = tempo_sum / static_cast<double>(tempo_count);
    f.note_density = static_cast<double>(f.notes) / static_cast<double>(std::max<std::size_t>(bars, 1));
    f.mean_velocity = f.notes ? velocity_sum / static_cast<double>(f.notes) : 0.0;
    return f;
}

const std::array<double, 12> kMajorProfile = {6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88};
const std::array<double, 12> kMinorProfile = {6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17};

namespace {

double best_correlation(const std::array<double, 12>& w, const std::array<double, 12>& profile) {
    double wm = 0.0, pm = 0.0;
    for (int i = 0; i < 12; ++i) {
        wm += w[static_cast<std::size_t>(i)];
        pm += profile[static_cast<std::size_t>(i)];
    }
    wm /= 12.0;
    pm /= 12.0;
    double wvar = 0.0, pvar = 0.0;
    for (int i = 0; i < 12; ++i) {
        wvar += (w[static_cast<std::size_t>(i)] - wm) * (w[static_cast<std::size_t>(i)] - wm);
        pvar += (profile[static_cast<std::size_t>(i)] - pm) * (profile[static_cast<std::size_t>(i)] - pm);
    }
    if (wvar <= 0.0) return 0.0;
    double best = -1.0;
    for (int key = 0; key < 12; ++key) {
        double cov = 0.0;
        for (int i = 0; i < 12; ++i) {
            const double p = profile[static_cast<std::size_t>((i - key + 12) % 12)];
            cov += (w[static_cast<std::size_t>(i)] - wm) * (p - pm);
        }
        best = std::max(best, cov / std::sqrt(wvar * pvar));
    }
    return best;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

HeuristicClassifier::Stats stats_of(const std::vector<double>& xs) {
    HeuristicClassifier::Stats s;
    if (xs.empty()) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    var /= static_cast<double>(xs.size());
    s.stddev = var > 1e-12 ? std::sqrt(var) : 1.0;
    return s;
}

nlohmann::json stats_json(const HeuristicClassifier::Stats& s) { return {{"mean", s.mean}, {"stddev", s.stddev}}; }

HeuristicClassifier::Stats stats_from(const nlohmann::json& j) {
    HeuristicClassifier::Stats s{j.at("mean").get<double>(), j.at("stddev").get<double>()};
    if (!(s.stddev > 0.0)) throw ModelFormatError("heuristic classifier: stddev must be positive");
    return s;
}

}  // namespace

double mode_score(const std::array<double, 12>& pitch_class_weight) {
    return best_correlation(pitch_class_weight, kMajorProfile) - best_correlation(pitch_class_weight, kMinorProfile);
}

HeuristicClassifier::HeuristicClassifier() : tempo_{120.0, 30.0}, density_{4.0, 2.0}, velocity_{64.0, 20.0} {}

HeuristicClassifier::HeuristicClassifier(Stats tempo, Stats density, Stats velocity)
    : tempo_(tempo), density_(density), velocity_(velocity) {
    for (const Stats* s : {&tempo_, &density_, &velocity_}) {
        if (!(s->stddev > 0.0)) throw InvalidArgument("feature stddev must be positive");
    }
}

HeuristicClassifier HeuristicClassifier::fit(std::span<const Sequence> corpus) {
    if (corpus.empty()) throw EmptyCorpus();
    std::vector<double> tempo, density, velocity;
    for (const auto& seq : corpus) {
        const auto f = extract_features(seq);
        tempo.push_back(f.tempo_bpm);
        density.push_back(f.note_density);
        velocity.push_back(f.mean_velocity);
    }
    return HeuristicClassifier(stats_of(tempo), stats_of(density), stats_of(velocity));
}

double HeuristicClassifier::arousal(const MusicFeatures& f) const {
    auto z = [](double x, const Stats& s) { return (x - s.mean) / s.stddev; };
    const double velocity = f.notes ? f.mean_velocity : velocity_.mean;
    return 0.5 * z(f.tempo_bpm, tempo_) + 0.3 * z(f.note_density, density_) + 0.2 * z(velocity, velocity_);
}

EmotionDistribution HeuristicClassifier::evaluate(std::span<const TokenId> seq) const {
    const auto f = extract_features(seq);
    const double a = arousal(f);
    const double v = mode_score(f.pitch_class_weight);
    std::array<double, 4> scores{};
    double top = -1e300;
    for (auto q : kAllQuadrants) {
        const double s = valence_sign(q) * v + arousal_sign(q) * a;
        scores[static_cast<std::size_t>(index_of(q))] = s;
        top = std::max(top, s);
    }
    double sum = 0.0;
    for (auto& s : scores) {
        s = std::exp(s - top);
        sum += s;
    }
    for (auto& s : scores) s /= sum;
    return EmotionDistribution(scores);
}

std::string HeuristicClassifier::to_json() const {
    nlohmann::json j = {{"format", "puctmusic-heuristic-classifier"},
                        {"version", 1},
                        {"tempo", stats_json(tempo_)},
                        {"density", stats_json(density_)},
                        {"velocity", stats_json(velocity_)}};
    return j.dump(2) + "\n";
}

HeuristicClassifier HeuristicClassifier::from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("format") != "puctmusic-heuristic-classifier" || j.at("version") != 1) {
            throw ModelFormatError("heuristic classifier: unsupported format");
        }
        return HeuristicClassifier(stats_from(j.at("tempo")), stats_from(j.at("density")), stats_from(j.at("velocity")));
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError(std::string("heuristic classifier: ") + e.what());
    }
}

double pitch_class_entropy(const std::array<double, 12>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    if (total <= 0.0) return 0.0;
    double h = 0.0;
    for (double x : w) {
        if (x > 0.0) {
            const double p = x / total;
            h -= p * std::log(p);
        }
    }
    return h / std::log(12.0);
}

HeuristicDiscriminator::HeuristicDiscriminator() : reference_entropy_(0.8), duration_{} {
    duration_.fill(1.0 / 32.0);
}

HeuristicDiscriminator::HeuristicDiscriminator(double reference_entropy, std::array<double, 32> duration_distribution)
    : HeuristicDiscriminator(reference_entropy, duration_distribution, Weights{}) {}

HeuristicDiscriminator::HeuristicDiscriminator(double reference_entropy, std::array<double, 32> duration_distribution,
                                               Weights w)
    : reference_entropy_(reference_entropy), duration_(duration_distribution), weights_(w) {
    double sum = 0.0;
    for (double d : duration_) {
        if (d < 0.0) throw InvalidArgument("duration distribution must be non-negative");
        sum += d;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("duration distribution must sum to 1");
}

HeuristicDiscriminator HeuristicDiscriminator::fit(std::span<const Sequence> corpus) {
    if (corpus.empty()) throw EmptyCorpus();
    std::array<double, 32> hist{};
    double entropy_sum = 0.0;
    for (const auto& seq : corpus) {
        const auto f = extract_features(seq);
        entropy_sum += pitch_class_entropy(f.pitch_class_weight);
        for (std::size_t i = 0; i < hist.size(); ++i) hist[i] += f.duration_histogram[i];
    }
    double total = 0.0;
    for (double h : hist) total += h;
    if (total <= 0.0) {
        hist.fill(1.0 / 32.0);
    } else {
        for (auto& h : hist) h /= total;
    }
    return HeuristicDiscriminator(entropy_sum / static_cast<double>(corpus.size()), hist);
}

double HeuristicDiscriminator::evaluate(std::span<const TokenId> seq) const {
    const auto f = extract_features(seq);
    const double validity = remi::grammar_validity_fraction(seq);
    const double entropy_fit = 1.0 - std::abs(pitch_class_entropy(f.pitch_class_weight) - reference_entropy_);
    double duration_fit = 0.0;
    if (f.notes) {
        for (std::size_t i = 0; i < duration_.size(); ++i) {
            duration_fit += std::sqrt(f.duration_histogram[i] / static_cast<double>(f.notes) * duration_[i]);
        }
    }
    return sigmoid(weights_.bias + weights_.grammar * validity + weights_.entropy * entropy_fit +
                   weights_.duration * duration_fit);
}

std::string HeuristicDiscriminator::to_json() const {
    nlohmann::json j = {{"format", "puctmusic-heuristic-discriminator"},
                        {"version", 1},
                        {"reference_entropy", reference_entropy_},
                        {"duration_distribution", duration_},
                        {"weights",
                         {{"bias", weights_.bias},
                          {"grammar", weights_.grammar},
                          {"entropy", weights_.entropy},
                          {"duration", weights_.duration}}}};
    return j.dump(2) + "\n";
}

HeuristicDiscriminator HeuristicDiscriminator::from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("format") != "puctmusic-heuristic-discriminator" || j.at("version") != 1) {
            throw ModelFormatError("heuristic discriminator: unsupported format");
        }
        const auto& w = j.at("weights");
        Weights weights{w.at("bias").get<double>(), w.at("grammar").get<double>(), w.at("entropy").get<double>(),
                        w.at("duration").get<double>()};
        return HeuristicDiscriminator(j.at("reference_entropy").get<double>(),
                                      j.at("duration_distribution").get<std::array<double, 32>>(), weights);
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError(std::string("heuristic discriminator: ") + e.what());
    }
}

}  // namespace puctmusic::models
