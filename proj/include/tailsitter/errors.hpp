#ifndef TAILSITTER_ERRORS_HPP
#define TAILSITTER_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace tailsitter {

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct DegenerateSpeedError : DomainError {
    using DomainError::DomainError;
};

struct ConditioningError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NearSingularityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Carries the 1-based row of the offending CSV line when known.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string &msg, long row = -1)
        : std::runtime_error(row >= 0 ? "row " + std::to_string(row) + ": " + msg : msg),
          row_index(row) {}
    long row_index;
};

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string &field, const std::string &msg)
        : std::runtime_error(field + ": " + msg), field_name(field) {}
    std::string field_name;
};

} // namespace tailsitter

#endif
