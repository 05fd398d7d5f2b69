#include "puctmusic/decoding.hpp"

#include "puctmusic/error.hpp"
#include "puctmusic/remi/grammar.hpp"

namespace puctmusic {

void check_initial_prefix(std::span<const TokenId> s0) {
    remi::validate_sequence(s0, remi::Completeness::Prefix);
    if (s0.back() == remi::kEndId) throw GrammarError(s0.size() - 1, "initial prefix is already finished");
}

TokenId apply_bar_limit(std::span<const TokenId> seq, TokenId token, std::size_t max_bars) {
    if (token == remi::kBarId && remi::count_bars(seq) >= max_bars) return remi::kEndId;
    return token;
}

void close_at_limit(Sequence& seq) {
    while (!seq.empty() && !remi::can_end_after(seq) && seq.back() != remi::kStartId &&
           !remi::is_kind(seq.back(), remi::TokenKind::EmotionControl)) {
        seq.pop_back();
    }
    if (!remi::can_end_after(seq)) seq.push_back(remi::kBarId);
    seq.push_back(remi::kEndId);
}

}  // namespace puctmusic
