#pragma once

#include <stdexcept>
#include <string>

namespace stfa {

// Bad input data: unreadable files, malformed manifests, mismatched shapes.
// The CLI maps this to exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: diverging loss, NaN in a computation that promised
// finite output. The CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace stfa
