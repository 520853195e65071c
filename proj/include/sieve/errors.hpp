#ifndef SIEVE_ERRORS_HPP
#define SIEVE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace sieve {

// Unreadable/malformed input data (bad CSV, unknown label, ragged row).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// A violated internal contract (permutation mismatch, non-finite loss).
struct InvariantError : std::runtime_error {
    explicit InvariantError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad command line or config file.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sieve

#endif  // SIEVE_ERRORS_HPP
