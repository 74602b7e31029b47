#pragma once

#include <stdexcept>
#include <string>

namespace ivcp {

// Invalid run configuration (bad alpha, bandwidth, solver settings, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// No training observation receives positive kernel weight at the query point.
class EmptyNeighborhoodError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A prediction rule was queried at a point whose nearest grid point is masked.
class UndefinedRuleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace ivcp
