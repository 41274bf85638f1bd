#pragma once

#include <stdexcept>
#include <string>

namespace detours {

// Config/schema problems. Carries the offending field path so callers
// (and the CLI) can name it.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& what)
        : std::runtime_error("config error at '" + field + "': " + what),
          field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

class MalformedTimestamp : public std::runtime_error {
public:
    explicit MalformedTimestamp(const std::string& text)
        : std::runtime_error("malformed timestamp: '" + text + "'") {}
};

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace detours
