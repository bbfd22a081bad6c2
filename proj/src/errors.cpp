#include "oclb/errors.hpp"

namespace oclb {

NumericError::NumericError(const std::string& what, std::size_t pivot)
    : Error(what + " (pivot " + std::to_string(pivot) + ")"), pivot_(pivot) {}

ConfigError::ConfigError(const std::string& what, std::size_t line)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

}  // namespace oclb
