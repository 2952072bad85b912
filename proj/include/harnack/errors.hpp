#pragma once

#include <stdexcept>
#include <string>

namespace harnack {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A documented precondition on an argument does not hold.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// sigma(t, x) could not be inverted at an evaluated point.
class SingularDiffusion : public Error {
public:
    using Error::Error;
};

// The simulated state left the finite floating-point range.
class NonFiniteState : public Error {
public:
    NonFiniteState(const std::string& what, long step)
        : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    long step() const noexcept { return step_; }

private:
    long step_;
};

// A Harnack-type inequality was requested on a horizon T <= r0, where it
// cannot hold.
class HorizonTooShort : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool ok, const std::string& message) {
    if (!ok) throw InvalidArgument(message);
}

} // namespace detail

} // namespace harnack
