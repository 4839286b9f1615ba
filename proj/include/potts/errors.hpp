#pragma once

#include <stdexcept>
#include <string>

namespace potts {

// Raised when a requested computation would exceed a configured state or step budget.
class BudgetExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad user input (config fields, family names, out-of-range parameters).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace potts
