#pragma once

#include <stdexcept>
#include <string>

namespace contactfit {

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Schema violations, invariant failures, bad arguments. CLI exit code 2.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Malformed input files (JSON, model files, fixtures). CLI exit code 2.
class ParseError : public ValidationError {
public:
    explicit ParseError(const std::string& msg) : ValidationError(msg) {}
};

// Replay cache has no entry for the requested key. CLI exit code 2.
class CacheMissError : public Error {
public:
    explicit CacheMissError(const std::string& msg) : Error(msg) {}
};

// HTTP transport or protocol failure after retries. CLI exit code 3.
class NetworkError : public Error {
public:
    NetworkError(const std::string& msg, int attempts)
        : Error(msg + " (after " + std::to_string(attempts) + " attempts)"),
          attempts_(attempts) {}

    int attempts() const { return attempts_; }

private:
    int attempts_ = 0;
};

// A joint landed at or behind the camera plane during projection.
class ProjectionDomainError : public Error {
public:
    ProjectionDomainError(const std::string& msg, int joint_index)
        : Error(msg), joint_index_(joint_index) {}

    int joint_index() const { return joint_index_; }

private:
    int joint_index_ = -1;
};

// Degenerate point configuration in Procrustes alignment.
class AlignmentError : public ValidationError {
public:
    explicit AlignmentError(const std::string& msg) : ValidationError(msg) {}
};

}  // namespace contactfit
