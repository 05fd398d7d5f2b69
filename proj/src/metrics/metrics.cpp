#include "puctmusic/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "puctmusic/error.hpp"
#include "puctmusic/remi/grammar.hpp"

namespace puctmusic::metrics {

using nlohmann::json;

namespace {

void require_notes(const Piece& piece) {
    if (piece.notes.empty()) throw EmptyPiece();
}

long long ceil_div(long long a, long long b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }

}  // namespace

double pitch_range(const Piece& piece) {
    require_notes(piece);
    const auto [lo, hi] = std::minmax_element(piece.notes.begin(), piece.notes.end(),
                                              [](const auto& a, const auto& b) { return a.pitch < b.pitch; });
    return static_cast<double>(hi->pitch - lo->pitch);
}

int n_pitch_classes(const Piece& piece) {
    require_notes(piece);
    std::array<bool, 12> seen{};
    for (const auto& n : piece.notes) seen[static_cast<std::size_t>(n.pitch % 12)] = true;
    return static_cast<int>(std::count(seen.begin(), seen.end(), true));
}

double polyphony(const Piece& piece) {
    require_notes(piece);
    // Each note covers steps [ceil(onset / 120), ceil(end / 120)).
    std::vector<std::pair<long long, int>> events;
    events.reserve(piece.notes.size() * 2);
    for (const auto& n : piece.notes) {
        const long long first = ceil_div(n.onset_ticks, remi::kTicksPerStep);
        const long long last = ceil_div(static_cast<long long>(n.onset_ticks) + n.duration_ticks, remi::kTicksPerStep);
        if (first < last) {
            events.emplace_back(first, 1);
            events.emplace_back(last, -1);
        }
    }
    std::sort(events.begin(), events.end());
    long long sounding_steps = 0;
    long long note_steps = 0;
    int active = 0;
    for (std::size_t i = 0; i < events.size(); ++i) {
        active += events[i].second;
        if (i + 1 < events.size() && active > 0) {
            const long long span = events[i + 1].first - events[i].first;
            sounding_steps += span;
            note_steps += span * active;
        }
    }
    if (sounding_steps == 0) return 0.0;
    return static_cast<double>(note_steps) / static_cast<double>(sounding_steps);
}

double emotion_rate(std::span<const Sequence> pieces, const models::EmotionClassifier& classifier,
                    EmotionQuadrant target) {
    if (pieces.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& seq : pieces) {
        if (!remi::has_complete_bar(seq)) throw SequenceTooShort();
        if (classifier.evaluate(seq).argmax() == target) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(pieces.size());
}

double discriminator_rate(std::span<const Sequence> pieces, const models::Discriminator& discriminator,
                          double threshold) {
    if (pieces.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& seq : pieces) {
        if (!remi::has_complete_bar(seq)) throw SequenceTooShort();
        if (discriminator.evaluate(seq) > threshold) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(pieces.size());
}

PieceMetrics evaluate_piece(const Sequence& seq, const models::EmotionClassifier& classifier,
                            const models::Discriminator& discriminator) {
    if (!remi::has_complete_bar(seq)) throw SequenceTooShort();
    PieceMetrics m;
    const Piece piece = remi::tokens_to_piece(seq);
    if (!piece.empty()) {
        m.pr = pitch_range(piece);
        m.npc = n_pitch_classes(piece);
        m.poly = polyphony(piece);
    }
    const auto e = classifier.evaluate(seq);
    m.emotion_probs = e.probs();
    m.predicted = e.argmax();
    m.realness = discriminator.evaluate(seq);
    return m;
}

std::map<EmotionQuadrant, MetricsReport> aggregate(std::span<const PieceRecord> pieces) {
    struct Acc {
        std::size_t n = 0, structured = 0, hits = 0, real = 0;
        double pr = 0, npc = 0, poly = 0;
    };
    std::map<EmotionQuadrant, Acc> acc;
    for (const auto& p : pieces) {
        Acc& a = acc[p.target];
        ++a.n;
        if (p.metrics.pr) {
            ++a.structured;
            a.pr += *p.metrics.pr;
            a.npc += *p.metrics.npc;
            a.poly += *p.metrics.poly;
        }
        if (p.metrics.predicted == p.target) ++a.hits;
        if (p.metrics.realness > kRealThreshold) ++a.real;
    }
    std::map<EmotionQuadrant, MetricsReport> out;
    for (const auto& [q, a] : acc) {
        MetricsReport r;
        r.pieces = a.n;
        if (a.structured) {
            const double s = static_cast<double>(a.structured);
            r.pr = a.pr / s;
            r.npc = a.npc / s;
            r.poly = a.poly / s;
        }
        r.emotion_rate = static_cast<double>(a.hits) / static_cast<double>(a.n);
        r.discriminator_rate = static_cast<double>(a.real) / static_cast<double>(a.n);
        out[q] = r;
    }
    return out;
}

EvaluatorBudget RunManifest::budget_totals() const {
    EvaluatorBudget total;
    for (const auto& p : pieces) {
        total.e_calls += p.budget.e_calls;
        total.d_calls += p.budget.d_calls;
    }
    return total;
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

json report_json(const MetricsReport& r) {
    return {{"pieces", r.pieces},
            {"pr", r.pr},
            {"npc", r.npc},
            {"poly", r.poly},
            {"emotion_rate", r.emotion_rate},
            {"discriminator_rate", r.discriminator_rate}};
}

}  // namespace

std::string RunManifest::to_json() const {
    json pieces_json = json::array();
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        const auto& p = pieces[i];
        pieces_json.push_back({{"index", i},
                               {"emotion", to_string(p.target)},
                               {"seed", p.seed},
                               {"tokens", p.tokens},
                               {"midi", p.midi},
                               {"metrics",
                                {{"pr", optional_json(p.metrics.pr)},
                                 {"npc", optional_json(p.metrics.npc)},
                                 {"poly", optional_json(p.metrics.poly)},
                                 {"emotion_probs", p.metrics.emotion_probs},
                                 {"predicted", to_string(p.metrics.predicted)},
                                 {"realness", p.metrics.realness}}},
                               {"budget", {{"e_calls", p.budget.e_calls}, {"d_calls", p.budget.d_calls}}}});
    }
    json aggregates = json::object();
    for (const auto& [q, r] : aggregate(pieces)) aggregates[std::string(to_string(q))] = report_json(r);
    const auto totals = budget_totals();
    json j = {{"format", "puctmusic-run"},
              {"version", 1},
              {"tool_version", tool_version},
              {"method", method},
              {"seed", seed},
              {"config", config},
              {"pieces", pieces_json},
              {"aggregates", aggregates},
              {"budget", {{"e_calls", totals.e_calls}, {"d_calls", totals.d_calls}}}};
    return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
    RunManifest m;
    try {
        const json j = json::parse(text);
        if (j.at("format") != "puctmusic-run") throw ManifestSchemaError("not a run manifest");
        if (j.at("version") != 1) throw ManifestSchemaError("unsupported manifest version");
        m.tool_version = j.at("tool_version").get<std::string>();
        m.method = j.at("method").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.config = j.at("config");
        for (const auto& pj : j.at("pieces")) {
            PieceRecord p;
            p.target = parse_quadrant(pj.at("emotion").get<std::string>());
            p.seed = pj.at("seed").get<std::uint64_t>();
            p.tokens = pj.at("tokens").get<Sequence>();
            p.midi = pj.at("midi").get<std::string>();
            const auto& mj = pj.at("metrics");
            p.metrics.pr = optional_from(mj.at("pr"));
            p.metrics.npc = optional_from(mj.at("npc"));
            p.metrics.poly = optional_from(mj.at("poly"));
            p.metrics.emotion_probs = mj.at("emotion_probs").get<std::array<double, 4>>();
            p.metrics.predicted = parse_quadrant(mj.at("predicted").get<std::string>());
            p.metrics.realness = mj.at("realness").get<double>();
            p.budget.e_calls = pj.at("budget").at("e_calls").get<std::uint64_t>();
            p.budget.d_calls = pj.at("budget").at("d_calls").get<std::uint64_t>();
            remi::validate_sequence(p.tokens);
            m.pieces.push_back(std::move(p));
        }
    } catch (const json::exception& e) {
        throw ManifestSchemaError(std::string("manifest: ") + e.what());
    } catch (const ManifestSchemaError&) {
        throw;
    } catch (const Error& e) {
        throw ManifestSchemaError(std::string("manifest: ") + e.what());
    }
    return m;
}

ComparisonTable compare_table(std::span<const RunManifest> manifests) {
    if (manifests.size() < 2) throw ManifestSchemaError("comparison needs at least two manifests");
    ComparisonTable table;
    for (const auto& m : manifests) {
        const auto agg = aggregate(m.pieces);
        ComparisonRow row;
        row.method = m.method;
        for (auto q : kAllQuadrants) {
            auto it = agg.find(q);
            if (it == agg.end()) {
                throw ManifestSchemaError("manifest for method '" + m.method + "' has no pieces for emotion " +
                                          std::string(to_string(q)));
            }
            row.cells[static_cast<std::size_t>(index_of(q))] = it->second;
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string ComparisonTable::to_json() const {
    json methods = json::array();
    for (const auto& row : rows) {
        json r = {{"method", row.method}};
        for (auto q : kAllQuadrants) r[std::string(to_string(q))] = report_json(row.cells[static_cast<std::size_t>(index_of(q))]);
        methods.push_back(r);
    }
    return json{{"methods", methods}}.dump(2) + "\n";
}

std::string ComparisonTable::to_text() const {
    std::size_t method_width = 6;
    for (const auto& row : rows) method_width = std::max(method_width, row.method.size());
    char buf[64];
    std::ostringstream os;
    auto pad = [&](const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
    os << pad("Method", method_width) << "  " << pad("Metric", 6);
    for (auto q : kAllQuadrants) {
        std::snprintf(buf, sizeof buf, "%8s", std::string(to_string(q)).c_str());
        os << buf;
    }
    os << '\n';
    for (const auto& row : rows) {
        const std::pair<const char*, double MetricsReport::*> fixed[] = {
            {"PR", &MetricsReport::pr}, {"NPC", &MetricsReport::npc}, {"POLY", &MetricsReport::poly}};
        const std::pair<const char*, double MetricsReport::*> rates[] = {
            {"E", &MetricsReport::emotion_rate}, {"D", &MetricsReport::discriminator_rate}};
        bool first = true;
        auto label = [&](const char* metric) {
            os << pad(first ? row.method : "", method_width) << "  " << pad(metric, 6);
            first = false;
        };
        for (const auto& [name, field] : fixed) {
            label(name);
            for (const auto& cell : row.cells) {
                std::snprintf(buf, sizeof buf, "%8.2f", cell.*field);
                os << buf;
            }
            os << '\n';
        }
        for (const auto& [name, field] : rates) {
            label(name);
            for (const auto& cell : row.cells) {
                std::snprintf(buf, sizeof buf, "%7ld%%", std::lround(cell.*field * 100.0));
                os << buf;
            }
            os << '\n';
        }
    }
    return os.str();
}

}  // namespace puctmusic::metrics
