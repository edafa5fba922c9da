#ifndef QBM_FORGE_ERRORS_HPP
#define QBM_FORGE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace qbm_forge {

// Bad arguments, malformed config, broken invariants in inputs.  CLI exit code 2.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Problem size beyond what the dense simulator supports.  CLI exit code 3.
class CapacityError : public std::runtime_error {
public:
    explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

// File not found, unreadable, or unparseable.  CLI exit code 4.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace qbm_forge

#endif
