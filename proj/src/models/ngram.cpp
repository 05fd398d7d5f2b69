#include "puctmusic/models/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "puctmusic/error.hpp"
#include "puctmusic/remi/grammar.hpp"

namespace puctmusic::models {

using remi::kEmotionBase;
using remi::kVocabSize;
using remi::TokenKind;

namespace {

constexpr int kMaxContext = 3;

// cond (3 bits) | length (2 bits) | up to three 8-bit ids, newest lowest.
std::uint32_t pack_key(int cond, std::span<const TokenId> context) {
    std::uint32_t key = (static_cast<std::uint32_t>(cond) << 26) | (static_cast<std::uint32_t>(context.size()) << 24);
    for (std::size_t i = 0; i < context.size(); ++i) {
        const std::size_t age = context.size() - 1 - i;
        key |= static_cast<std::uint32_t>(context[i]) << (8 * age);
    }
    return key;
}

int key_cond(std::uint32_t key) { return static_cast<int>(key >> 26); }
int key_len(std::uint32_t key) { return static_cast<int>((key >> 24) & 0x3); }

Sequence key_context(std::uint32_t key) {
    const int len = key_len(key);
    Sequence ctx(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) {
        const int age = len - 1 - i;
        ctx[static_cast<std::size_t>(i)] = static_cast<TokenId>((key >> (8 * age)) & 0xFF);
    }
    return ctx;
}

int condition_of(std::span<const TokenId> seq) {
    if (seq.size() > 1 && seq[1] >= kEmotionBase && seq[1] < kVocabSize) return seq[1] - kEmotionBase + 1;
    return 0;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

NgramPolicy train_ngram(std::span<const Sequence> corpus, int order, double add_k) {
    if (corpus.empty()) throw EmptyCorpus();
    if (order < 2 || order > 4) throw InvalidArgument("n-gram order must be in 2..4");
    if (!(add_k > 0.0) || !std::isfinite(add_k)) throw InvalidArgument("add_k must be a positive finite number");

    NgramPolicy model(order, add_k);
    std::map<std::uint32_t, std::map<TokenId, std::uint32_t>> counts;
    Sequence stream;
    for (const auto& seq : corpus) {
        remi::validate_sequence(seq, remi::Completeness::Prefix);
        const int cond = condition_of(seq);
        if (cond) model.conditions_[static_cast<std::size_t>(cond - 1)] = true;
        stream.clear();
        for (std::size_t i = 0; i < seq.size(); ++i) {
            if (cond && i == 1) continue;
            stream.push_back(seq[i]);
        }
        for (std::size_t i = 1; i < stream.size(); ++i) {
            for (int n = 1; n <= order - 1 && static_cast<std::size_t>(n) <= i; ++n) {
                std::span<const TokenId> ctx(stream.data() + i - static_cast<std::size_t>(n), static_cast<std::size_t>(n));
                ++counts[pack_key(0, ctx)][stream[i]];
                if (cond) ++counts[pack_key(cond, ctx)][stream[i]];
            }
        }
    }
    for (const auto& [key, next] : counts) {
        NgramPolicy::Counts c;
        for (const auto& [id, n] : next) {
            c.next.emplace_back(id, n);
            c.total += n;
        }
        model.table_.emplace(key, std::move(c));
    }
    return model;
}

const NgramPolicy::Counts* NgramPolicy::counts(std::optional<EmotionQuadrant> condition,
                                               std::span<const TokenId> context) const {
    if (context.empty() || context.size() > static_cast<std::size_t>(order_ - 1)) return nullptr;
    const int cond = condition ? index_of(*condition) + 1 : 0;
    auto it = table_.find(pack_key(cond, context));
    return it == table_.end() ? nullptr : &it->second;
}

void NgramPolicy::next(std::span<const TokenId> prefix, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const int cond = condition_of(prefix);

    // Newest-last context from the token stream (control token skipped).
    std::array<TokenId, kMaxContext> ctx{};
    std::size_t len = 0;
    const std::size_t want = static_cast<std::size_t>(order_ - 1);
    for (std::size_t i = prefix.size(); i-- > 0 && len < want;) {
        if (cond && i == 1) continue;
        ctx[kMaxContext - 1 - len] = prefix[i];
        ++len;
    }
    const TokenId* newest_first = ctx.data() + kMaxContext;

    const Counts* found = nullptr;
    const bool conditioned = cond && conditions_[static_cast<std::size_t>(cond - 1)];
    for (int pass = conditioned ? 0 : 1; pass < 2 && !found; ++pass) {
        const int c = pass == 0 ? cond : 0;
        for (std::size_t n = len; n >= 1 && !found; --n) {
            auto it = table_.find(pack_key(c, std::span<const TokenId>(newest_first - n, n)));
            if (it != table_.end()) found = &it->second;
        }
    }

    const auto legal = remi::grammar_mask(prefix.back());
    if (!found) {
        const double p = 1.0 / static_cast<double>(legal.size());
        for (TokenId id : legal) out[id] = p;
        return;
    }
    double total = 0.0;
    for (const auto& [id, n] : found->next) {
        if (remi::is_legal_successor(prefix.back(), id)) total += n;
    }
    const double denom = total + add_k_ * static_cast<double>(legal.size());
    for (TokenId id : legal) out[id] = add_k_ / denom;
    for (const auto& [id, n] : found->next) {
        if (remi::is_legal_successor(prefix.back(), id)) out[id] = (n + add_k_) / denom;
    }
}

std::string NgramPolicy::serialize() const {
    std::ostringstream os;
    os << "puctmusic-ngram 1\n";
    os << "order " << order_ << '\n';
    os << "add_k " << format_double(add_k_) << '\n';
    os << "conditions";
    for (int q = 0; q < 4; ++q) {
        if (conditions_[static_cast<std::size_t>(q)]) os << ' ' << to_string(static_cast<EmotionQuadrant>(q));
    }
    os << '\n';
    std::vector<std::uint32_t> keys;
    keys.reserve(table_.size());
    for (const auto& [key, _] : table_) keys.push_back(key);
    std::sort(keys.begin(), keys.end());
    os << "contexts " << keys.size() << '\n';
    for (std::uint32_t key : keys) {
        os << key_cond(key) << ' ' << key_len(key);
        for (TokenId id : key_context(key)) os << ' ' << id;
        os << " :";
        for (const auto& [id, n] : table_.at(key).next) os << ' ' << id << ':' << n;
        os << '\n';
    }
    return os.str();
}

NgramPolicy NgramPolicy::deserialize(std::string_view text) {
    std::istringstream is{std::string(text)};
    auto fail = [](const std::string& what) -> ModelFormatError { return ModelFormatError("n-gram model: " + what); };

    std::string word;
    int version = 0;
    if (!(is >> word >> version) || word != "puctmusic-ngram") throw fail("missing header");
    if (version != 1) throw fail("unsupported version " + std::to_string(version));
    int order = 0;
    double add_k = 0;
    if (!(is >> word >> order) || word != "order") throw fail("missing order");
    if (!(is >> word >> add_k) || word != "add_k") throw fail("missing add_k");
    if (order < 2 || order > 4 || !(add_k > 0.0)) throw fail("bad hyperparameters");
    NgramPolicy model(order, add_k);

    std::string line;
    std::getline(is, line);
    std::getline(is, line);
    {
        std::istringstream ls(line);
        if (!(ls >> word) || word != "conditions") throw fail("missing conditions line");
        while (ls >> word) model.conditions_[static_cast<std::size_t>(index_of(parse_quadrant(word)))] = true;
    }
    std::size_t n = 0;
    if (!(is >> word >> n) || word != "contexts") throw fail("missing contexts count");
    std::getline(is, line);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(is, line)) throw fail("truncated context table");
        std::istringstream ls(line);
        int cond = 0, len = 0;
        if (!(ls >> cond >> len) || cond < 0 || cond > 4 || len < 1 || len > order - 1) throw fail("bad context line " + std::to_string(i + 1));
        Sequence ctx(static_cast<std::size_t>(len));
        for (auto& id : ctx) {
            unsigned v = 0;
            if (!(ls >> v) || v >= kVocabSize) throw fail("bad context id on line " + std::to_string(i + 1));
            id = static_cast<TokenId>(v);
        }
        if (!(ls >> word) || word != ":") throw fail("missing ':' on context line " + std::to_string(i + 1));
        Counts c;
        while (ls >> word) {
            unsigned id = 0, count = 0;
            if (std::sscanf(word.c_str(), "%u:%u", &id, &count) != 2 || id >= kVocabSize) throw fail("bad count '" + word + "'");
            c.next.emplace_back(static_cast<TokenId>(id), count);
            c.total += count;
        }
        model.table_.emplace(pack_key(cond, ctx), std::move(c));
    }
    return model;
}

std::vector<Sequence> with_emotion_controls(std::span<const Sequence> corpus, std::span<const EmotionQuadrant> labels) {
    if (corpus.size() != labels.size()) throw LabelMismatch("corpus and label counts differ");
    std::vector<Sequence> out;
    out.reserve(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        Sequence s = corpus[i];
        if (s.empty() || s[0] != remi::kStartId) throw GrammarError(0, "sequence must start with START");
        if (condition_of(s)) s.erase(s.begin() + 1);
        s.insert(s.begin() + 1, remi::Token::emotion(labels[i]).id());
        out.push_back(std::move(s));
    }
    return out;
}

double perplexity(const Policy& policy, std::span<const Sequence> corpus) {
    std::vector<double> dist(kVocabSize);
    double nll = 0.0;
    std::size_t count = 0;
    for (const auto& seq : corpus) {
        for (std::size_t i = 1; i < seq.size(); ++i) {
            if (i == 1 && condition_of(seq)) continue;
            policy.next(std::span<const TokenId>(seq.data(), i), dist);
            nll -= std::log(dist[seq[i]]);
            ++count;
        }
    }
    if (count == 0) throw EmptyCorpus();
    return std::exp(nll / static_cast<double>(count));
}

}  // namespace puctmusic::models
