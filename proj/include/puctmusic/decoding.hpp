#pragma once

#include <cstddef>
#include <span>

#include "puctmusic/remi/token.hpp"

namespace puctmusic {

using remi::Sequence;
using remi::TokenId;

// Throws GrammarError unless `s0` is a valid open prefix (not ended by END).
void check_initial_prefix(std::span<const TokenId> s0);

// A BAR that would open bar max_bars + 1 is emitted as END instead.
TokenId apply_bar_limit(std::span<const TokenId> seq, TokenId token, std::size_t max_bars);

// True once only the closing END still fits under max_tokens.
inline bool at_token_limit(std::span<const TokenId> seq, std::size_t max_tokens) {
    return seq.size() + 1 >= max_tokens;
}

// Cuts the sequence back to the last point where END is legal and appends END.
void close_at_limit(Sequence& seq);

}  // namespace puctmusic
