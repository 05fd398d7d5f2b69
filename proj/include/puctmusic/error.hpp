#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace puctmusic {

// Data errors: bad input, malformed files, violated preconditions on user data.
// The CLI maps these to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A broken internal invariant. The CLI maps this to exit code 3.
class InvariantViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class UnknownToken : public Error {
public:
    using Error::Error;
};

class GrammarError : public Error {
public:
    GrammarError(std::size_t index, const std::string& what)
        : Error("grammar error at index " + std::to_string(index) + ": " + what),
          index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

class IoError : public Error {
public:
    using Error::Error;
};

class MalformedMidi : public Error {
public:
    MalformedMidi(std::size_t offset, const std::string& what)
        : Error("malformed MIDI at byte " + std::to_string(offset) + ": " + what),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class SequenceTooShort : public Error {
public:
    SequenceTooShort() : Error("sequence does not contain a complete bar") {}
};

class EmptyCorpus : public Error {
public:
    EmptyCorpus() : Error("corpus is empty") {}
};

class TerminalNode : public Error {
public:
    TerminalNode() : Error("cannot expand a prefix that ends with END") {}
};

class UntrainedCondition : public Error {
public:
    using Error::Error;
};

class EmptyPiece : public Error {
public:
    EmptyPiece() : Error("piece has no notes") {}
};

class ManifestSchemaError : public Error {
public:
    using Error::Error;
};

class LabelMismatch : public Error {
public:
    using Error::Error;
};

class NoValidFiles : public Error {
public:
    using Error::Error;
};

class ModelFormatError : public Error {
public:
    using Error::Error;
};

}  // namespace puctmusic
