#pragma once

#include <stdexcept>

namespace molcomm {

/// Argument outside the mathematical domain of a model expression.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Caller asked for something the method does not support.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent experiment / simulation configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace molcomm
