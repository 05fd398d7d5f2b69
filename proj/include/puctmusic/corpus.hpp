#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "puctmusic/remi/token.hpp"

namespace puctmusic {

struct CorpusEntry {
    std::string source;  // file name or synthetic id
    remi::Sequence tokens;
    std::optional<EmotionQuadrant> label;
};

struct Corpus {
    std::vector<CorpusEntry> entries;

    std::vector<remi::Sequence> sequences() const;
    // Throws LabelMismatch unless every entry is labelled.
    std::vector<EmotionQuadrant> labels() const;
    bool fully_labelled() const;

    // {"format": "puctmusic-corpus", "version": 1,
    //  "pieces": [{"source": .., "tokens": [..], "label": "E1" | null}]}
    std::string to_json() const;
    // Throws ModelFormatError; token streams are validated.
    static Corpus from_json(const std::string& text);
};

struct IngestResult {
    Corpus corpus;
    std::vector<std::string> warnings;
};

// Every .mid / .midi file directly under `dir`, in file-name order. Pieces
// that are not 4/4, fail to parse, or hold no notes are skipped with a warning.
// Throws IoError for a missing directory and NoValidFiles when nothing is left.
IngestResult ingest_directory(const std::filesystem::path& dir);

// "source,emotion" per line; blank lines and lines starting with '#' are
// ignored. Throws IoError / InvalidArgument.
std::map<std::string, EmotionQuadrant> read_labels(const std::filesystem::path& path);
std::string labels_to_csv(const Corpus& corpus);
// Throws LabelMismatch when an entry has no label or a label names no entry.
void apply_labels(Corpus& corpus, const std::map<std::string, EmotionQuadrant>& labels);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace puctmusic
