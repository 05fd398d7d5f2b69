#pragma once

#include <optional>
#include <span>
#include <vector>

#include "puctmusic/remi/token.hpp"

namespace puctmusic::remi {

// REMI successor rules, keyed on the previous token only:
//   START    -> BAR
//   EMOTION  -> BAR
//   BAR      -> POSITION | BAR | END
//   POSITION -> TEMPO | PITCH
//   TEMPO    -> PITCH
//   PITCH    -> DURATION
//   DURATION -> VELOCITY
//   VELOCITY -> POSITION | BAR | END
//   END      -> (nothing)
// An EMOTION control token is legal only at index 1, right after START.

// Ids that may follow `prev`, ascending. Throws UnknownToken for ids outside
// the vocabulary.
std::span<const TokenId> grammar_mask(TokenId prev);
bool is_legal_successor(TokenId prev, TokenId next);

enum class Completeness {
    Complete,  // every note group must be finished
    Prefix,    // may stop in the middle of a note group (search prefixes)
};

// Index of the first violation, or nullopt if valid. A sequence cut in the
// middle of a note group reports index = size() under Completeness::Complete.
std::optional<std::size_t> first_violation(std::span<const TokenId> seq,
                                           Completeness mode = Completeness::Complete);
// Throws GrammarError on the first violation.
void validate_sequence(std::span<const TokenId> seq, Completeness mode = Completeness::Complete);
bool is_valid(std::span<const TokenId> seq, Completeness mode = Completeness::Complete);

// True when END may directly follow the sequence.
bool can_end_after(std::span<const TokenId> seq);

std::size_t count_bars(std::span<const TokenId> seq);
// At least one BAR token that is later closed by another BAR or by END.
bool has_complete_bar(std::span<const TokenId> seq);

// Fraction of adjacent pairs that obey the successor rules (1.0 for length < 2).
double grammar_validity_fraction(std::span<const TokenId> seq);

}  // namespace puctmusic::remi
