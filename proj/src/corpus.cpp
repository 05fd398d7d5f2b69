#include "puctmusic/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "puctmusic/error.hpp"
#include "puctmusic/remi/grammar.hpp"
#include "puctmusic/remi/midi.hpp"
#include "puctmusic/remi/piece.hpp"

namespace puctmusic {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<remi::Sequence> Corpus::sequences() const {
    std::vector<remi::Sequence> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.tokens);
    return out;
}

bool Corpus::fully_labelled() const {
    return !entries.empty() && std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.label.has_value(); });
}

std::vector<EmotionQuadrant> Corpus::labels() const {
    std::vector<EmotionQuadrant> out;
    out.reserve(entries.size());
    for (const auto& e : entries) {
        if (!e.label) throw LabelMismatch("corpus entry '" + e.source + "' has no emotion label");
        out.push_back(*e.label);
    }
    return out;
}

std::string Corpus::to_json() const {
    json pieces = json::array();
    for (const auto& e : entries) {
        pieces.push_back({{"source", e.source},
                          {"tokens", e.tokens},
                          {"label", e.label ? json(std::string(to_string(*e.label))) : json(nullptr)}});
    }
    return json{{"format", "puctmusic-corpus"}, {"version", 1}, {"pieces", pieces}}.dump(1) + "\n";
}

Corpus Corpus::from_json(const std::string& text) {
    Corpus c;
    try {
        const json j = json::parse(text);
        if (j.at("format") != "puctmusic-corpus") throw ModelFormatError("not a corpus file");
        if (j.at("version") != 1) throw ModelFormatError("unsupported corpus version");
        for (const auto& pj : j.at("pieces")) {
            CorpusEntry e;
            e.source = pj.at("source").get<std::string>();
            e.tokens = pj.at("tokens").get<remi::Sequence>();
            if (pj.contains("label") && !pj.at("label").is_null()) e.label = parse_quadrant(pj.at("label").get<std::string>());
            remi::validate_sequence(e.tokens);
            c.entries.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw ModelFormatError(std::string("corpus: ") + e.what());
    }
    return c;
}

IngestResult ingest_directory(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".mid" || ext == ".midi") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    IngestResult out;
    for (const auto& path : files) {
        const std::string name = path.filename().string();
        try {
            auto imp = remi::read_midi(path);
            for (const auto& w : imp.warnings) out.warnings.push_back(name + ": " + w);
            if (!imp.four_four) {
                out.warnings.push_back(name + ": skipped, not in 4/4");
                continue;
            }
            if (imp.piece.empty()) {
                out.warnings.push_back(name + ": skipped, no notes");
                continue;
            }
            out.corpus.entries.push_back({name, remi::piece_to_tokens(imp.piece), std::nullopt});
        } catch (const Error& e) {
            out.warnings.push_back(name + ": skipped, " + e.what());
        }
    }
    if (out.corpus.entries.empty()) {
        std::string msg = "no usable MIDI files in " + dir.string();
        for (const auto& w : out.warnings) msg += "\n  " + w;
        throw NoValidFiles(msg);
    }
    return out;
}

std::map<std::string, EmotionQuadrant> read_labels(const fs::path& path) {
    std::istringstream is(read_text_file(path));
    std::map<std::string, EmotionQuadrant> out;
    std::size_t line_no = 0;
    for (std::string line; std::getline(is, line);) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) {
            throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": expected 'source,emotion'");
        }
        out[line.substr(0, comma)] = parse_quadrant(line.substr(comma + 1));
    }
    return out;
}

std::string labels_to_csv(const Corpus& corpus) {
    std::string out;
    for (const auto& e : corpus.entries) {
        if (e.label) out += e.source + "," + std::string(to_string(*e.label)) + "\n";
    }
    return out;
}

void apply_labels(Corpus& corpus, const std::map<std::string, EmotionQuadrant>& labels) {
    std::size_t used = 0;
    for (auto& e : corpus.entries) {
        auto it = labels.find(e.source);
        if (it == labels.end()) throw LabelMismatch("no label for corpus entry '" + e.source + "'");
        e.label = it->second;
        ++used;
    }
    if (used != labels.size()) {
        for (const auto& [source, q] : labels) {
            const bool known = std::any_of(corpus.entries.begin(), corpus.entries.end(),
                                           [&](const auto& e) { return e.source == source; });
            if (!known) throw LabelMismatch("label for unknown corpus entry '" + source + "'");
        }
    }
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace puctmusic
