#pragma once

#include <stdexcept>
#include <string>

namespace crl {

// Error taxonomy, mapped to process exit codes by the CLI:
//   ConfigError        -> 2  (bad flags, infeasible sizes, invalid options)
//   DomainError        -> 3  (data violates a model domain, e.g. logistic Y outside [0,1])
//   StructuralError    -> 3  (broken object invariants, dimension mismatches)
//   NonconvergenceError-> 4  (line-search ladder exhausted and similar numerical failures)
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

struct StructuralError : Error {
    explicit StructuralError(const std::string& msg) : Error(msg) {}
};

struct NonconvergenceError : Error {
    explicit NonconvergenceError(const std::string& msg) : Error(msg) {}
};

}  // namespace crl
