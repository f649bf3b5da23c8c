#pragma once

#include <stdexcept>
#include <string>

namespace murgat {

// Base for everything thrown by the engine.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed text input (timestamps, citation groups, programs, schemas).
struct ParseError : Error {
    using Error::Error;
};

// Bad run configuration: missing files, unknown backends, invalid flags.
struct ConfigError : Error {
    using Error::Error;
};

// Data invariant violated (length mismatch, single-class gold, ...).
struct ValidationError : Error {
    using Error::Error;
};

// Judge transport failed after all retries.
struct BackendError : Error {
    BackendError(const std::string& what, int attempts_made)
        : Error(what), attempts(attempts_made) {}
    int attempts = 0;
};

// A citation names a modality the manifest has no track for.  Callers score
// such citations as unsupported instead of aborting the run.
struct ModalityMissingError : Error {
    ModalityMissingError(const std::string& what, std::string qid)
        : Error(what), question_id(std::move(qid)) {}
    std::string question_id;
};

} // namespace murgat
