#pragma once

#include <stdexcept>
#include <string>

namespace neurotok {

// Error taxonomy mirrors the CLI exit-code contract:
//   usage_error -> 1, format_error / data_error -> 2, numeric_error -> 3.

struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent file content (bad header, ragged CSV, truncated body).
struct format_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Structurally valid input whose values violate a contract (NaN sample, empty
// corpus, unsatisfiable draw).
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failure at run time (non-finite activation, zero-norm quantizer input).
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace neurotok
