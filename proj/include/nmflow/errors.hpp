#pragma once

#include <stdexcept>
#include <string>

namespace nmflow {

// Bad input: configs, dimensions, parameter ranges.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// The integration left its valid regime (negative probability, norm blow-up,
// trace drift). Usually means dt is too large.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace nmflow
