#pragma once

#include <stdexcept>
#include <string>

namespace arl {

/// Grid model violates a structural or electrical invariant.
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Experiment configuration failed to parse or validate.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A learner produced a non-finite loss or weight.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller broke an API precondition (dimension mismatch and the like).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace arl
