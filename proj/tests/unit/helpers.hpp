#pragma once

#include <initializer_list>
#include <random>
#include <string>
#include <vector>

#include "puctmusic/random.hpp"
#include "puctmusic/remi/grammar.hpp"
#include "puctmusic/remi/token.hpp"

namespace testutil {

using puctmusic::remi::Sequence;
using puctmusic::remi::Token;
using puctmusic::remi::TokenId;

inline Sequence seq(std::initializer_list<Token> tokens) {
    Sequence out;
    for (const auto& t : tokens) out.push_back(t.id());
    return out;
}

inline Sequence from_key(const std::string& key) { return puctmusic::remi::sequence_from_key(key); }

// START, BAR, POSITION:1, PITCH:60, DURATION:4, VELOCITY:16
inline Sequence one_note_prefix() {
    return seq({Token::start(), Token::bar(), Token::position(1), Token::pitch(60), Token::duration(4),
                Token::velocity(16)});
}

inline Sequence one_note_prefix_closed() {
    auto s = one_note_prefix();
    s.push_back(puctmusic::remi::kEndId);
    return s;
}

// Random walk through grammar_mask, closed with END at a legal point.
inline Sequence random_walk(std::mt19937_64& gen, std::size_t steps) {
    Sequence s{puctmusic::remi::kStartId};
    for (std::size_t i = 0; i < steps; ++i) {
        auto mask = puctmusic::remi::grammar_mask(s.back());
        std::vector<TokenId> choices;
        for (TokenId id : mask) {
            if (id != puctmusic::remi::kEndId) choices.push_back(id);
        }
        s.push_back(choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(gen)]);
    }
    while (!puctmusic::remi::can_end_after(s)) {
        auto mask = puctmusic::remi::grammar_mask(s.back());
        s.push_back(mask.front() == puctmusic::remi::kBarId && mask.size() > 1 ? mask[1] : mask.front());
    }
    s.push_back(puctmusic::remi::kEndId);
    return s;
}

// Canonical encoding of a random piece: notes in (position, pitch) order,
// distinct pitches per position, optional tempo on a bar's first note.
inline Sequence random_canonical(std::mt19937_64& gen, int bars) {
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); };
    Sequence s{puctmusic::remi::kStartId};
    for (int b = 0; b < bars; ++b) {
        s.push_back(puctmusic::remi::kBarId);
        const int tempo = pick(0, 1) ? pick(1, 32) : 0;
        bool first = true;
        for (int pos = 1; pos <= 16; ++pos) {
            if (pick(0, 3) != 0) continue;
            int pitch = pick(30, 90);
            const int notes = pick(1, 3);
            for (int n = 0; n < notes && pitch <= 127; ++n) {
                s.push_back(Token::position(pos).id());
                if (first && tempo) s.push_back(Token::tempo(tempo).id());
                first = false;
                s.push_back(Token::pitch(pitch).id());
                s.push_back(Token::duration(pick(1, 32)).id());
                s.push_back(Token::velocity(pick(1, 31)).id());
                pitch += pick(1, 7);
            }
        }
    }
    s.push_back(puctmusic::remi::kEndId);
    return s;
}

}  // namespace testutil
