#pragma once

#include <stdexcept>

namespace xsinc {

// Invalid argument to a library operation (out-of-range duration, bad config).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Estimation cannot proceed: nonpositive denominator, singular fit, empty data.
class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file. The message carries row/field diagnostics.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace xsinc
