#pragma once

#include <stdexcept>
#include <string>

namespace kmeval {

// Malformed input: bad files, shape/dtype violations, inconsistent labels.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite values or a numerically broken model.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration or call-site misuse (bad k, empty sweep, ...).
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace kmeval
