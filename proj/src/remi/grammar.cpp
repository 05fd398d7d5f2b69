#include "puctmusic/remi/grammar.hpp"

#include <array>

#include "puctmusic/error.hpp"

namespace puctmusic::remi {

namespace {

void append_range(std::vector<TokenId>& out, TokenId first, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) out.push_back(static_cast<TokenId>(first + i));
}

struct SuccessorTable {
    std::array<std::vector<TokenId>, 9> by_kind;

    SuccessorTable() {
        auto& bar = by_kind[static_cast<std::size_t>(TokenKind::Bar)];
        bar.push_back(kBarId);
        append_range(bar, kPositionBase, kPositionsPerBar);
        bar.push_back(kEndId);

        auto& position = by_kind[static_cast<std::size_t>(TokenKind::Position)];
        append_range(position, kPitchBase, kPitchCount);
        append_range(position, kTempoBase, kTempoBins);

        append_range(by_kind[static_cast<std::size_t>(TokenKind::Tempo)], kPitchBase, kPitchCount);
        append_range(by_kind[static_cast<std::size_t>(TokenKind::Pitch)], kDurationBase, kDurationBins);
        append_range(by_kind[static_cast<std::size_t>(TokenKind::Duration)], kVelocityBase, kVelocityBins);

        auto& velocity = by_kind[static_cast<std::size_t>(TokenKind::Velocity)];
        velocity.push_back(kBarId);
        append_range(velocity, kPositionBase, kPositionsPerBar);
        velocity.push_back(kEndId);

        by_kind[static_cast<std::size_t>(TokenKind::StartOfMusic)].push_back(kBarId);
        by_kind[static_cast<std::size_t>(TokenKind::EmotionControl)].push_back(kBarId);
        // EndOfMusic has no successors.
    }
};

const SuccessorTable& successors() {
    static const SuccessorTable table;
    return table;
}

bool mid_note_group(TokenId last) {
    const auto k = kind_of(last);
    return k == TokenKind::Position || k == TokenKind::Tempo || k == TokenKind::Pitch ||
           k == TokenKind::Duration;
}

}  // namespace

std::span<const TokenId> grammar_mask(TokenId prev) {
    return successors().by_kind[static_cast<std::size_t>(kind_of(prev))];
}

bool is_legal_successor(TokenId prev, TokenId next) {
    if (next >= kVocabSize) return false;
    const auto k = kind_of(prev);
    const auto n = kind_of(next);
    switch (k) {
        case TokenKind::StartOfMusic:
        case TokenKind::EmotionControl: return n == TokenKind::Bar;
        case TokenKind::Bar: return n == TokenKind::Position || n == TokenKind::Bar || n == TokenKind::EndOfMusic;
        case TokenKind::Position: return n == TokenKind::Tempo || n == TokenKind::Pitch;
        case TokenKind::Tempo: return n == TokenKind::Pitch;
        case TokenKind::Pitch: return n == TokenKind::Duration;
        case TokenKind::Duration: return n == TokenKind::Velocity;
        case TokenKind::Velocity:
            return n == TokenKind::Position || n == TokenKind::Bar || n == TokenKind::EndOfMusic;
        case TokenKind::EndOfMusic: return false;
    }
    return false;
}

std::optional<std::size_t> first_violation(std::span<const TokenId> seq, Completeness mode) {
    if (seq.empty()) return 0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (seq[i] >= kVocabSize) return i;
    }
    if (seq[0] != kStartId) return 0;
    for (std::size_t i = 1; i < seq.size(); ++i) {
        const bool control_slot = i == 1 && is_kind(seq[i], TokenKind::EmotionControl);
        if (control_slot) continue;
        if (!is_legal_successor(seq[i - 1], seq[i])) return i;
    }
    if (mode == Completeness::Complete && mid_note_group(seq.back())) return seq.size();
    return std::nullopt;
}

void validate_sequence(std::span<const TokenId> seq, Completeness mode) {
    if (auto bad = first_violation(seq, mode)) {
        std::string what;
        if (*bad >= seq.size()) {
            what = "incomplete note group at end of sequence";
        } else if (seq[*bad] >= kVocabSize) {
            what = "unknown token id " + std::to_string(seq[*bad]);
        } else if (*bad == 0) {
            what = "sequence must start with START";
        } else {
            what = Token::from_id(seq[*bad]).to_text() + " cannot follow " +
                   Token::from_id(seq[*bad - 1]).to_text();
        }
        throw GrammarError(*bad, what);
    }
}

bool is_valid(std::span<const TokenId> seq, Completeness mode) {
    return !first_violation(seq, mode).has_value();
}

bool can_end_after(std::span<const TokenId> seq) {
    return !seq.empty() && is_legal_successor(seq.back(), kEndId);
}

std::size_t count_bars(std::span<const TokenId> seq) {
    std::size_t n = 0;
    for (TokenId id : seq) n += id == kBarId;
    return n;
}

bool has_complete_bar(std::span<const TokenId> seq) {
    bool open = false;
    for (TokenId id : seq) {
        if (id == kBarId) {
            if (open) return true;
            open = true;
        } else if (id == kEndId && open) {
            return true;
        }
    }
    return false;
}

double grammar_validity_fraction(std::span<const TokenId> seq) {
    if (seq.size() < 2) return 1.0;
    std::size_t legal = 0;
    for (std::size_t i = 1; i < seq.size(); ++i) {
        const bool control_slot = i == 1 && seq[0] == kStartId && seq[i] < kVocabSize &&
                                  is_kind(seq[i], TokenKind::EmotionControl);
        if (control_slot || (seq[i - 1] < kVocabSize && is_legal_successor(seq[i - 1], seq[i]))) ++legal;
    }
    return static_cast<double>(legal) / static_cast<double>(seq.size() - 1);
}

}  // namespace puctmusic::remi
