#pragma once

#include <stdexcept>
#include <string>

namespace spamm {

/// Bad argument, shape or configuration. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// File access or file format failure. The CLI maps this to exit code 3.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FormatError : public IoError {
public:
    using IoError::IoError;
};

} // namespace spamm
