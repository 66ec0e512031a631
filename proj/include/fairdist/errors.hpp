#ifndef FAIRDIST_ERRORS_HPP
#define FAIRDIST_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace fairdist {

// Bad inputs: dimension mismatches, malformed files, invalid configs.
// The CLI maps these to exit code 2.
class validation_error : public std::invalid_argument {
public:
    explicit validation_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// Numerical failures: divergence, degenerate data, non-finite values.
// The CLI maps these to exit code 3.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace fairdist

#endif
