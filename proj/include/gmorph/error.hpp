#ifndef GMORPH_ERROR_HPP
#define GMORPH_ERROR_HPP

#include <stdexcept>
#include <string>

namespace gmorph {

// Bad input data (malformed files, unknown subtags, misaligned corpora).
// The CLI maps these to exit code 1.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed CoNLL-U input; carries the offending line number in the message.
struct ParseError : DataError {
    ParseError(const std::string& msg, long line)
        : DataError(msg + " (line " + std::to_string(line) + ")"),
          line_number(line) {}
    long line_number;
};

// A sentence that violates the tree invariants; carries the sentence id.
struct ValidationError : DataError {
    ValidationError(const std::string& msg, std::string id)
        : DataError(msg + " [sent_id=" + id + "]"), sentence_id(std::move(id)) {}
    std::string sentence_id;
};

// Bad configuration (missing files, invalid values). CLI exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Over-constrained inference (e.g. clamps that zero out every assignment).
struct InconsistencyError : std::runtime_error {
    explicit InconsistencyError(const std::string& msg)
        : std::runtime_error(msg) {}
};

}  // namespace gmorph

#endif  // GMORPH_ERROR_HPP
