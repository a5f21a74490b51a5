#pragma once

#include <stdexcept>
#include <string>

namespace liftreg {

// Bad input: malformed files, mismatched grids, out-of-range parameters.
// The command-line tool maps this to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical breakdown during optimization (non-finite loss, failed solve).
// The command-line tool maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace liftreg
