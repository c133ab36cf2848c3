#pragma once

#include <stdexcept>
#include <string>

namespace cslnet {

/// Failure categories; each maps to a CLI exit code.
enum class ErrorCategory { Config = 2, Data = 3, Divergence = 4, Io = 5 };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }
    int exit_code() const noexcept { return static_cast<int>(category_); }

private:
    ErrorCategory category_;
};

/// Invalid arguments, dimension mismatches and violated preconditions.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::Config, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorCategory::Io, what) {}
};

/// Non-finite loss or activation during training. `epoch` is zero-based, -1 if unknown.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, int epoch = -1)
        : Error(ErrorCategory::Divergence, what), epoch_(epoch) {}

    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

const char* category_name(ErrorCategory category) noexcept;

}  // namespace cslnet
