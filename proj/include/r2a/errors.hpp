#pragma once

#include <stdexcept>
#include <string>

namespace r2a {

// Shape or dimension mismatch between operands.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A documented precondition was violated (bad tolerance, domain, parameter).
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// The requested construction is valid in theory but not evaluable in double
// precision at desk scale (temperature or budget blow-up).
struct BudgetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input file.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace r2a
