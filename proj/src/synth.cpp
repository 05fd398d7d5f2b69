#include "puctmusic/synth.hpp"

#include <array>

#include "puctmusic/error.hpp"
#include "puctmusic/random.hpp"

namespace puctmusic {

using remi::Token;

namespace {

struct Style {
    int tempo_lo, tempo_hi;        // tempo bins
    int velocity_lo, velocity_hi;  // velocity bins
    int step;                      // grid spacing in positions
    double fill;                   // chance that a grid slot holds a note
    int duration_lo, duration_hi;  // duration bins
    bool major;
};

Style style_of(EmotionQuadrant q) {
    const bool fast = arousal_sign(q) > 0;
    const bool major = valence_sign(q) > 0;
    if (fast) return {24, 30, 24, 30, 2, 0.9, 1, 2, major};
    return {4, 10, 8, 14, 4, 0.6, 3, 6, major};
}

int uniform_int(RandomSource& rng, int lo, int hi) {
    const int n = hi - lo + 1;
    const int k = static_cast<int>(rng.uniform() * n);
    return lo + (k < n ? k : n - 1);
}

// Scale degrees in semitones above C, weighted toward the tonic triad.
int draw_pitch(RandomSource& rng, bool major) {
    static constexpr std::array<int, 7> kMajor = {0, 2, 4, 5, 7, 9, 11};
    static constexpr std::array<int, 7> kMinor = {0, 2, 3, 5, 7, 8, 10};
    static constexpr std::array<double, 7> kWeights = {4, 1, 3, 1, 3, 1, 1};
    const auto& scale = major ? kMajor : kMinor;
    const std::size_t degree = sample_index(kWeights, rng);
    const int octave = uniform_int(rng, 0, 1);
    return 60 + 12 * octave + scale[degree];
}

}  // namespace

SynthCorpus synth_corpus(std::size_t per_emotion, std::size_t bars, std::uint64_t seed) {
    if (per_emotion == 0 || bars == 0) throw InvalidArgument("synthetic corpus needs at least one piece and one bar");
    SynthCorpus out;
    std::uint64_t stream = 0;
    for (auto q : kAllQuadrants) {
        const Style s = style_of(q);
        for (std::size_t i = 0; i < per_emotion; ++i) {
            SeededRandom rng(derive_seed(seed, stream++));
            const int tempo = uniform_int(rng, s.tempo_lo, s.tempo_hi);
            remi::Sequence seq{remi::kStartId};
            for (std::size_t b = 0; b < bars; ++b) {
                seq.push_back(remi::kBarId);
                bool first = true;
                for (int pos = 1; pos <= remi::kPositionsPerBar; pos += s.step) {
                    // The downbeat always sounds so each bar carries its tempo.
                    if (pos > 1 && rng.uniform() >= s.fill) continue;
                    seq.push_back(Token::position(pos).id());
                    if (first) seq.push_back(Token::tempo(tempo).id());
                    first = false;
                    seq.push_back(Token::pitch(draw_pitch(rng, s.major)).id());
                    seq.push_back(Token::duration(uniform_int(rng, s.duration_lo, s.duration_hi)).id());
                    seq.push_back(Token::velocity(uniform_int(rng, s.velocity_lo, s.velocity_hi)).id());
                }
            }
            seq.push_back(remi::kEndId);
            out.sequences.push_back(std::move(seq));
            out.labels.push_back(q);
        }
    }
    return out;
}

}  // namespace puctmusic
