#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace puctmusic {

enum class EmotionQuadrant : std::uint8_t { E1 = 0, E2 = 1, E3 = 2, E4 = 3 };

inline constexpr std::array<EmotionQuadrant, 4> kAllQuadrants = {
    EmotionQuadrant::E1, EmotionQuadrant::E2, EmotionQuadrant::E3, EmotionQuadrant::E4};

constexpr int index_of(EmotionQuadrant q) noexcept { return static_cast<int>(q); }
EmotionQuadrant quadrant_from_index(int index);
std::string_view to_string(EmotionQuadrant q) noexcept;
// Accepts "E1".."E4" in either case.
EmotionQuadrant parse_quadrant(std::string_view text);

// Circumplex quadrants: valence and arousal are each -1 or +1.
EmotionQuadrant quadrant_from_valence_arousal(int valence, int arousal);
int valence_sign(EmotionQuadrant q) noexcept;
int arousal_sign(EmotionQuadrant q) noexcept;

}  // namespace puctmusic

namespace puctmusic::remi {

using TokenId = std::uint16_t;
using Sequence = std::vector<TokenId>;

enum class TokenKind : std::uint8_t {
    Bar,
    Position,
    Pitch,
    Duration,
    Velocity,
    Tempo,
    StartOfMusic,
    EndOfMusic,
    EmotionControl,
};

inline constexpr int kPositionsPerBar = 16;
inline constexpr int kPitchCount = 128;
inline constexpr int kDurationBins = 32;
inline constexpr int kVelocityBins = 32;
inline constexpr int kTempoBins = 32;

// Id layout, in vocabulary order.
inline constexpr TokenId kBarId = 0;
inline constexpr TokenId kPositionBase = 1;                                   // Position(1) -> 1
inline constexpr TokenId kPitchBase = kPositionBase + kPositionsPerBar;       // Pitch(0) -> 17
inline constexpr TokenId kDurationBase = kPitchBase + kPitchCount;            // Duration(1) -> 145
inline constexpr TokenId kVelocityBase = kDurationBase + kDurationBins;       // Velocity(1) -> 177
inline constexpr TokenId kTempoBase = kVelocityBase + kVelocityBins;          // Tempo(1) -> 209
inline constexpr TokenId kStartId = kTempoBase + kTempoBins;                  // 241
inline constexpr TokenId kEndId = kStartId + 1;                               // 242
inline constexpr TokenId kEmotionBase = kEndId + 1;                           // E1 -> 243
inline constexpr std::size_t kVocabSize = kEmotionBase + 4;                   // 247

// A REMI token. Value ranges are checked by the named constructors:
// Position 1..16, Pitch 0..127, Duration/Velocity/Tempo 1..32.
class Token {
public:
    static Token bar() { return Token(TokenKind::Bar, 0); }
    static Token position(int index);
    static Token pitch(int midi);
    static Token duration(int bin);
    static Token velocity(int bin);
    static Token tempo(int bin);
    static Token start() { return Token(TokenKind::StartOfMusic, 0); }
    static Token end() { return Token(TokenKind::EndOfMusic, 0); }
    static Token emotion(EmotionQuadrant q) { return Token(TokenKind::EmotionControl, index_of(q)); }

    static Token from_id(TokenId id);

    TokenKind kind() const noexcept { return kind_; }
    int value() const noexcept { return value_; }
    TokenId id() const noexcept;

    // "PITCH:60", "BAR", "EMOTION:E1", ...
    std::string to_text() const;
    static Token parse(std::string_view text);

    friend bool operator==(const Token&, const Token&) = default;

private:
    Token(TokenKind kind, int value) : kind_(kind), value_(value) {}

    TokenKind kind_;
    int value_;
};

TokenKind kind_of(TokenId id);
int value_of(TokenId id);
inline bool is_kind(TokenId id, TokenKind kind) { return kind_of(id) == kind; }

// Fixed, ordered alphabet with a bijective id <-> token mapping.
class Vocabulary {
public:
    Vocabulary();

    std::size_t size() const noexcept { return tokens_.size(); }
    const Token& token(TokenId id) const;
    TokenId id(const Token& token) const;
    bool contains(TokenId id) const noexcept { return id < tokens_.size(); }

    // One token per line in id order.
    std::string serialize() const;
    static Vocabulary deserialize(std::string_view text);

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

private:
    std::vector<Token> tokens_;
};

const Vocabulary& vocabulary();

// Line-oriented text form: one TOKENKIND:VALUE per line.
std::string sequence_to_text(std::span<const TokenId> seq);
Sequence sequence_from_text(std::string_view text);
// Space-separated form used as a lookup key by table fixtures.
std::string sequence_key(std::span<const TokenId> seq);
Sequence sequence_from_key(std::string_view key);

// Mapping between bins and musical values.
inline constexpr int kTicksPerBeat = 480;
inline constexpr int kTicksPerStep = 120;
inline constexpr int kTicksPerBar = kTicksPerStep * kPositionsPerBar;

int velocity_from_bin(int bin) noexcept;   // bin * 4, clamped to 127
int velocity_to_bin(int velocity) noexcept;
double tempo_from_bin(int bin) noexcept;   // 30 + 5 * bin bpm
int tempo_to_bin(double bpm) noexcept;

}  // namespace puctmusic::remi
