#pragma once

#include <stdexcept>
#include <string>

namespace chanest {

/// Raised when a quantity that must be inverted is exactly zero, e.g. a ZF
/// coefficient requested for an untrimmed zero channel estimate.
class SingularityError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed or invalid experiment configuration. Carries the offending field
/// and, when known, the 1-based line number in the source text.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message, int line = 0)
        : std::runtime_error(format(field, message, line)), field_(std::move(field)), line_(line)
    {}

    const std::string& field() const noexcept { return field_; }
    int line() const noexcept { return line_; }

private:
    static std::string format(const std::string& field, const std::string& message, int line)
    {
        std::string out;
        if (line > 0)
            out += "line " + std::to_string(line) + ": ";
        if (!field.empty())
            out += "'" + field + "': ";
        return out + message;
    }

    std::string field_;
    int line_;
};

}  // namespace chanest
