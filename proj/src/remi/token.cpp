#include "puctmusic/remi/token.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <sstream>

#include "puctmusic/error.hpp"

namespace puctmusic {

EmotionQuadrant quadrant_from_index(int index) {
    if (index < 0 || index > 3) throw InvalidArgument("emotion quadrant index out of range: " + std::to_string(index));
    return static_cast<EmotionQuadrant>(index);
}

std::string_view to_string(EmotionQuadrant q) noexcept {
    switch (q) {
        case EmotionQuadrant::E1: return "E1";
        case EmotionQuadrant::E2: return "E2";
        case EmotionQuadrant::E3: return "E3";
        case EmotionQuadrant::E4: return "E4";
    }
    return "E?";
}

EmotionQuadrant parse_quadrant(std::string_view text) {
    if (text.size() == 2 && (text[0] == 'E' || text[0] == 'e') && text[1] >= '1' && text[1] <= '4') {
        return quadrant_from_index(text[1] - '1');
    }
    throw InvalidArgument("unknown emotion '" + std::string(text) + "' (expected e1..e4)");
}

EmotionQuadrant quadrant_from_valence_arousal(int valence, int arousal) {
    if ((valence != 1 && valence != -1) || (arousal != 1 && arousal != -1)) {
        throw InvalidArgument("valence and arousal must be -1 or 1");
    }
    if (arousal == 1) return valence == 1 ? EmotionQuadrant::E1 : EmotionQuadrant::E2;
    return valence == 1 ? EmotionQuadrant::E4 : EmotionQuadrant::E3;
}

int valence_sign(EmotionQuadrant q) noexcept {
    return (q == EmotionQuadrant::E1 || q == EmotionQuadrant::E4) ? 1 : -1;
}

int arousal_sign(EmotionQuadrant q) noexcept {
    return (q == EmotionQuadrant::E1 || q == EmotionQuadrant::E2) ? 1 : -1;
}

}  // namespace puctmusic

namespace puctmusic::remi {

namespace {

void check_range(std::string_view what, int value, int lo, int hi) {
    if (value < lo || value > hi) {
        throw InvalidArgument(std::string(what) + " value " + std::to_string(value) + " outside [" +
                              std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
}

struct KindName {
    TokenKind kind;
    std::string_view name;
    bool has_value;
};

constexpr std::array<KindName, 9> kKindNames = {{
    {TokenKind::Bar, "BAR", false},
    {TokenKind::Position, "POSITION", true},
    {TokenKind::Pitch, "PITCH", true},
    {TokenKind::Duration, "DURATION", true},
    {TokenKind::Velocity, "VELOCITY", true},
    {TokenKind::Tempo, "TEMPO", true},
    {TokenKind::StartOfMusic, "START", false},
    {TokenKind::EndOfMusic, "END", false},
    {TokenKind::EmotionControl, "EMOTION", true},
}};

const KindName& name_of(TokenKind kind) {
    return kKindNames[static_cast<std::size_t>(kind)];
}

}  // namespace

Token Token::position(int index) {
    check_range("Position", index, 1, kPositionsPerBar);
    return Token(TokenKind::Position, index);
}

Token Token::pitch(int midi) {
    check_range("Pitch", midi, 0, kPitchCount - 1);
    return Token(TokenKind::Pitch, midi);
}

Token Token::duration(int bin) {
    check_range("Duration", bin, 1, kDurationBins);
    return Token(TokenKind::Duration, bin);
}

Token Token::velocity(int bin) {
    check_range("Velocity", bin, 1, kVelocityBins);
    return Token(TokenKind::Velocity, bin);
}

Token Token::tempo(int bin) {
    check_range("Tempo", bin, 1, kTempoBins);
    return Token(TokenKind::Tempo, bin);
}

namespace {

constexpr TokenKind slow_kind(std::size_t id) {
    if (id == kBarId) return TokenKind::Bar;
    if (id < kPitchBase) return TokenKind::Position;
    if (id < kDurationBase) return TokenKind::Pitch;
    if (id < kVelocityBase) return TokenKind::Duration;
    if (id < kTempoBase) return TokenKind::Velocity;
    if (id < kStartId) return TokenKind::Tempo;
    if (id == kStartId) return TokenKind::StartOfMusic;
    if (id == kEndId) return TokenKind::EndOfMusic;
    return TokenKind::EmotionControl;
}

constexpr auto kKindTable = [] {
    std::array<TokenKind, kVocabSize> table{};
    for (std::size_t i = 0; i < kVocabSize; ++i) table[i] = slow_kind(i);
    return table;
}();

}  // namespace

TokenKind kind_of(TokenId id) {
    if (id >= kVocabSize) throw UnknownToken("token id " + std::to_string(id) + " outside vocabulary");
    return kKindTable[id];
}

int value_of(TokenId id) {
    switch (kind_of(id)) {
        case TokenKind::Bar: return 0;
        case TokenKind::Position: return id - kPositionBase + 1;
        case TokenKind::Pitch: return id - kPitchBase;
        case TokenKind::Duration: return id - kDurationBase + 1;
        case TokenKind::Velocity: return id - kVelocityBase + 1;
        case TokenKind::Tempo: return id - kTempoBase + 1;
        case TokenKind::StartOfMusic: return 0;
        case TokenKind::EndOfMusic: return 0;
        case TokenKind::EmotionControl: return id - kEmotionBase;
    }
    return 0;
}

Token Token::from_id(TokenId id) {
    return Token(kind_of(id), value_of(id));
}

TokenId Token::id() const noexcept {
    switch (kind_) {
        case TokenKind::Bar: return kBarId;
        case TokenKind::Position: return static_cast<TokenId>(kPositionBase + value_ - 1);
        case TokenKind::Pitch: return static_cast<TokenId>(kPitchBase + value_);
        case TokenKind::Duration: return static_cast<TokenId>(kDurationBase + value_ - 1);
        case TokenKind::Velocity: return static_cast<TokenId>(kVelocityBase + value_ - 1);
        case TokenKind::Tempo: return static_cast<TokenId>(kTempoBase + value_ - 1);
        case TokenKind::StartOfMusic: return kStartId;
        case TokenKind::EndOfMusic: return kEndId;
        case TokenKind::EmotionControl: return static_cast<TokenId>(kEmotionBase + value_);
    }
    return kBarId;
}

std::string Token::to_text() const {
    const auto& kn = name_of(kind_);
    std::string out(kn.name);
    if (kind_ == TokenKind::EmotionControl) {
        out += ':';
        out += to_string(static_cast<EmotionQuadrant>(value_));
    } else if (kn.has_value) {
        out += ':';
        out += std::to_string(value_);
    }
    return out;
}

Token Token::parse(std::string_view text) {
    while (!text.empty() && (text.back() == '\r' || text.back() == ' ')) text.remove_suffix(1);
    const auto colon = text.find(':');
    const std::string_view name = text.substr(0, colon);
    const std::string_view value = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
    for (const auto& kn : kKindNames) {
        if (kn.name != name) continue;
        if (!kn.has_value) {
            if (!value.empty()) break;
            return Token(kn.kind, 0);
        }
        if (kn.kind == TokenKind::EmotionControl) return emotion(parse_quadrant(value));
        int v = 0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
        if (ec != std::errc{} || ptr != value.data() + value.size()) break;
        switch (kn.kind) {
            case TokenKind::Position: return position(v);
            case TokenKind::Pitch: return pitch(v);
            case TokenKind::Duration: return duration(v);
            case TokenKind::Velocity: return velocity(v);
            case TokenKind::Tempo: return tempo(v);
            default: break;
        }
    }
    throw UnknownToken("cannot parse token '" + std::string(text) + "'");
}

Vocabulary::Vocabulary() {
    tokens_.reserve(kVocabSize);
    for (std::size_t id = 0; id < kVocabSize; ++id) {
        tokens_.push_back(Token::from_id(static_cast<TokenId>(id)));
    }
}

const Token& Vocabulary::token(TokenId id) const {
    if (!contains(id)) throw UnknownToken("token id " + std::to_string(id) + " outside vocabulary");
    return tokens_[id];
}

TokenId Vocabulary::id(const Token& token) const {
    const TokenId id = token.id();
    if (!contains(id) || !(tokens_[id] == token)) throw UnknownToken("token " + token.to_text() + " not in vocabulary");
    return id;
}

std::string Vocabulary::serialize() const {
    std::string out;
    for (const auto& t : tokens_) {
        out += t.to_text();
        out += '\n';
    }
    return out;
}

Vocabulary Vocabulary::deserialize(std::string_view text) {
    Vocabulary v;
    v.tokens_.clear();
    std::size_t start = 0;
    while (start < text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(start, nl - start);
        if (!line.empty()) v.tokens_.push_back(Token::parse(line));
        start = nl + 1;
    }
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
        if (v.tokens_[i].id() != i) throw ModelFormatError("vocabulary order mismatch at line " + std::to_string(i + 1));
    }
    if (v.tokens_.size() != kVocabSize) throw ModelFormatError("vocabulary size mismatch");
    return v;
}

const Vocabulary& vocabulary() {
    static const Vocabulary vocab;
    return vocab;
}

std::string sequence_to_text(std::span<const TokenId> seq) {
    std::string out;
    for (TokenId id : seq) {
        out += Token::from_id(id).to_text();
        out += '\n';
    }
    return out;
}

namespace {

Sequence split_tokens(std::string_view text, auto is_separator) {
    Sequence out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_separator(text[i])) ++i;
        std::size_t j = i;
        while (j < text.size() && !is_separator(text[j])) ++j;
        if (j > i) out.push_back(Token::parse(text.substr(i, j - i)).id());
        i = j;
    }
    return out;
}

}  // namespace

Sequence sequence_from_text(std::string_view text) {
    return split_tokens(text, [](char c) { return c == '\n' || c == '\r'; });
}

std::string sequence_key(std::span<const TokenId> seq) {
    std::string out;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i) out += ' ';
        out += Token::from_id(seq[i]).to_text();
    }
    return out;
}

Sequence sequence_from_key(std::string_view key) {
    return split_tokens(key, [](char c) { return c == ' ' || c == '\n' || c == '\t' || c == '\r'; });
}

int velocity_from_bin(int bin) noexcept { return std::min(127, bin * 4); }

int velocity_to_bin(int velocity) noexcept { return std::clamp((velocity + 2) / 4, 1, kVelocityBins); }

double tempo_from_bin(int bin) noexcept { return 30.0 + 5.0 * bin; }

int tempo_to_bin(double bpm) noexcept {
    return std::clamp(static_cast<int>(std::lround((bpm - 30.0) / 5.0)), 1, kTempoBins);
}

}  // namespace puctmusic::remi
