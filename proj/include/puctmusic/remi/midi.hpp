#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "puctmusic/remi/piece.hpp"

namespace puctmusic::remi {

struct MidiImport {
    Piece piece;
    std::vector<std::string> warnings;
    bool four_four = true;  // false when any time-signature event is not 4/4
};

// Parses a format 0 or 1 Standard MIDI File. Tracks are merged, ticks are
// rescaled to 480 per quarter and snapped to the 120-tick grid. Only note and
// tempo events are kept. A note-on for a pitch that is already sounding closes
// the earlier note at that tick. Non-4/4 time signatures produce a warning and
// the piece is still imported on the 4/4 grid.
MidiImport parse_midi(std::span<const std::uint8_t> bytes);
MidiImport read_midi(const std::filesystem::path& path);

// Format 0, 480 ticks per quarter, channel 0. No tempo event is written for a
// piece without tempo changes, so readers fall back to the SMF default of 120
// bpm. A "bar" marker is written at the start of every bar so the bar count
// survives a round trip.
std::vector<std::uint8_t> encode_midi(const Piece& piece);
void write_midi(const Piece& piece, const std::filesystem::path& path);

}  // namespace puctmusic::remi
