#pragma once

#include <stdexcept>
#include <string>

namespace ppmreg {

// Bad user-supplied configuration (shape specs, subsample counts, file
// contents). Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Caller broke an API precondition (wrong subsample size, mismatched
// dimensions). These are bugs, not recoverable conditions.
class ContractViolation : public std::logic_error {
public:
    explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

} // namespace ppmreg
