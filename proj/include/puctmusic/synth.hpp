#pragma once

#include <cstdint>
#include <vector>

#include "puctmusic/remi/token.hpp"

namespace puctmusic {

// Labelled toy corpus whose quadrants differ on the surface features the
// heuristic classifier reads:
//   E1  fast, dense, loud, major      E2  fast, dense, loud, minor
//   E3  slow, sparse, soft, minor     E4  slow, sparse, soft, major
// Every bar opens with a TEMPO token on its first note.
struct SynthCorpus {
    std::vector<remi::Sequence> sequences;
    std::vector<EmotionQuadrant> labels;
};

SynthCorpus synth_corpus(std::size_t per_emotion, std::size_t bars, std::uint64_t seed);

}  // namespace puctmusic
