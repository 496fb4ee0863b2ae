#pragma once

#include <stdexcept>
#include <string>

namespace ragcal {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad or inconsistent configuration. The CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

/// Precondition violated by a caller (bad k, mismatched lengths, ...).
class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& msg) : Error("invalid argument: " + msg) {}
};

/// HTTP-level failure after the retry budget was spent.
class TransportError : public Error {
public:
    TransportError(const std::string& msg, int last_status, int attempts)
        : Error("transport error: " + msg), last_status_(last_status), attempts_(attempts) {}

    int last_status() const noexcept { return last_status_; }
    int attempts() const noexcept { return attempts_; }

private:
    int last_status_;
    int attempts_;
};

/// The server answered, but not with something we can interpret.
class ProtocolError : public Error {
public:
    explicit ProtocolError(const std::string& msg) : Error("protocol error: " + msg) {}
};

/// Statistic is undefined for the given data (e.g. zero variance).
class StatisticsError : public Error {
public:
    explicit StatisticsError(const std::string& msg) : Error(msg) {}
};

/// A pipeline stage failed as a whole (empty corpus, empty dataset, ...).
class PipelineError : public Error {
public:
    explicit PipelineError(const std::string& msg) : Error(msg) {}
};

}  // namespace ragcal
