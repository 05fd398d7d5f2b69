#pragma once

#include <span>
#include <vector>

#include "puctmusic/remi/token.hpp"

namespace puctmusic::remi {

struct NoteEvent {
    int onset_ticks = 0;
    int duration_ticks = kTicksPerStep;
    int pitch = 60;
    int velocity = 64;

    friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
};

struct TempoChange {
    int tick = 0;
    double bpm = 120.0;

    friend bool operator==(const TempoChange&, const TempoChange&) = default;
};

// A 4/4 piece at 480 ticks per quarter note. Notes are kept sorted by
// (onset, pitch, duration, velocity); tempo changes by tick.
struct Piece {
    std::vector<NoteEvent> notes;
    std::vector<TempoChange> tempo_changes;
    int bars = 0;

    static constexpr int ticks_per_beat = kTicksPerBeat;

    bool empty() const noexcept { return notes.empty(); }
    void sort();

    friend bool operator==(const Piece&, const Piece&) = default;
};

// Each (POSITION, [TEMPO,] PITCH, DURATION, VELOCITY) group becomes a note at
// onset (bar * 16 + position - 1) * 120 with duration bin * 120 and velocity
// bin * 4 (clamped to 127). BAR tokens advance the bar counter. An EMOTION
// control token is ignored. Throws GrammarError for invalid input.
Piece tokens_to_piece(std::span<const TokenId> seq);

// Canonical encoding: START, then per bar a BAR token followed by its notes in
// (onset, pitch) order, each with its own POSITION token, then END. Onsets
// snap to the nearest 120-tick step; durations and velocities clamp into
// their bins. A tempo change is written before the first note at or after its
// step; later changes mapped to the same note win.
Sequence piece_to_tokens(const Piece& piece);

int quantize_to_step(int ticks) noexcept;

}  // namespace puctmusic::remi
