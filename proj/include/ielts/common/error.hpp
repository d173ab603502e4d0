#pragma once

#include <stdexcept>
#include <string>

namespace ielts {

// Base of every error raised by the library. `code()` is a stable machine
// readable tag; the HTTP layer forwards it verbatim in its error payload.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class InvalidInput : public Error {
public:
    explicit InvalidInput(const std::string& message) : Error("invalid_input", message) {}
    InvalidInput(std::string code, const std::string& message) : Error(std::move(code), message) {}
};

class NotFound : public Error {
public:
    explicit NotFound(const std::string& message) : Error("not_found", message) {}
};

class AttemptLimitReached : public Error {
public:
    AttemptLimitReached() : Error("attempt_limit", "attempt limit reached") {}
};

// Raised when a grammar backend cannot be reached. Distinct from an empty
// issue list, which means the text was checked and nothing was found.
class BackendUnavailable : public Error {
public:
    explicit BackendUnavailable(const std::string& message) : Error("backend_unavailable", message) {}
};

class TrainingDiverged : public Error {
public:
    explicit TrainingDiverged(const std::string& message) : Error("training_diverged", message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("io_error", message) {}
};

}  // namespace ielts
