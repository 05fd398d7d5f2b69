#include "puctmusic/remi/piece.hpp"

#include <algorithm>
#include <tuple>

#include "puctmusic/remi/grammar.hpp"

namespace puctmusic::remi {

void Piece::sort() {
    std::stable_sort(notes.begin(), notes.end(), [](const NoteEvent& a, const NoteEvent& b) {
        return std::tie(a.onset_ticks, a.pitch, a.duration_ticks, a.velocity) <
               std::tie(b.onset_ticks, b.pitch, b.duration_ticks, b.velocity);
    });
    std::stable_sort(tempo_changes.begin(), tempo_changes.end(),
                     [](const TempoChange& a, const TempoChange& b) { return a.tick < b.tick; });
}

int quantize_to_step(int ticks) noexcept {
    if (ticks <= 0) return 0;
    return (ticks + kTicksPerStep / 2) / kTicksPerStep;
}

Piece tokens_to_piece(std::span<const TokenId> seq) {
    validate_sequence(seq, Completeness::Complete);

    Piece piece;
    int bar = -1;
    int position = 1;
    NoteEvent pending;
    for (TokenId id : seq) {
        switch (kind_of(id)) {
            case TokenKind::Bar:
                ++bar;
                break;
            case TokenKind::Position:
                position = value_of(id);
                pending = NoteEvent{};
                pending.onset_ticks = (bar * kPositionsPerBar + position - 1) * kTicksPerStep;
                break;
            case TokenKind::Tempo:
                // Two tempos at one onset: the later one wins.
                if (auto it = std::find_if(piece.tempo_changes.begin(), piece.tempo_changes.end(),
                                           [&](const TempoChange& t) { return t.tick == pending.onset_ticks; });
                    it != piece.tempo_changes.end()) {
                    it->bpm = tempo_from_bin(value_of(id));
                } else {
                    piece.tempo_changes.push_back({pending.onset_ticks, tempo_from_bin(value_of(id))});
                }
                break;
            case TokenKind::Pitch:
                pending.pitch = value_of(id);
                break;
            case TokenKind::Duration:
                pending.duration_ticks = value_of(id) * kTicksPerStep;
                break;
            case TokenKind::Velocity:
                pending.velocity = velocity_from_bin(value_of(id));
                piece.notes.push_back(pending);
                break;
            case TokenKind::StartOfMusic:
            case TokenKind::EndOfMusic:
            case TokenKind::EmotionControl:
                break;
        }
    }
    piece.bars = bar + 1;
    piece.sort();
    return piece;
}

Sequence piece_to_tokens(const Piece& piece) {
    struct Quantized {
        int step;
        int pitch;
        int duration_bin;
        int velocity_bin;
    };
    std::vector<Quantized> notes;
    notes.reserve(piece.notes.size());
    for (const auto& n : piece.notes) {
        notes.push_back({quantize_to_step(n.onset_ticks), std::clamp(n.pitch, 0, kPitchCount - 1),
                         std::clamp(quantize_to_step(n.duration_ticks), 1, kDurationBins),
                         velocity_to_bin(n.velocity)});
    }
    std::stable_sort(notes.begin(), notes.end(), [](const Quantized& a, const Quantized& b) {
        return std::tie(a.step, a.pitch, a.duration_bin, a.velocity_bin) <
               std::tie(b.step, b.pitch, b.duration_bin, b.velocity_bin);
    });

    // Tempo token per note index (0 = none).
    std::vector<int> tempo_at(notes.size(), 0);
    auto tempos = piece.tempo_changes;
    std::stable_sort(tempos.begin(), tempos.end(),
                     [](const TempoChange& a, const TempoChange& b) { return a.tick < b.tick; });
    for (const auto& tc : tempos) {
        const int step = quantize_to_step(tc.tick);
        auto it = std::lower_bound(notes.begin(), notes.end(), step,
                                   [](const Quantized& q, int s) { return q.step < s; });
        if (it == notes.end()) continue;
        tempo_at[static_cast<std::size_t>(it - notes.begin())] = tempo_to_bin(tc.bpm);
    }

    int bars = std::max(piece.bars, 1);
    if (!notes.empty()) bars = std::max(bars, notes.back().step / kPositionsPerBar + 1);

    Sequence out;
    out.reserve(2 + static_cast<std::size_t>(bars) + notes.size() * 5);
    out.push_back(kStartId);
    std::size_t i = 0;
    for (int bar = 0; bar < bars; ++bar) {
        out.push_back(kBarId);
        for (; i < notes.size() && notes[i].step / kPositionsPerBar == bar; ++i) {
            const auto& q = notes[i];
            out.push_back(Token::position(q.step % kPositionsPerBar + 1).id());
            if (tempo_at[i] != 0) out.push_back(Token::tempo(tempo_at[i]).id());
            out.push_back(Token::pitch(q.pitch).id());
            out.push_back(Token::duration(q.duration_bin).id());
            out.push_back(Token::velocity(q.velocity_bin).id());
        }
    }
    out.push_back(kEndId);
    return out;
}

}  // namespace puctmusic::remi
