#pragma once

#include <stdexcept>
#include <string>

namespace dtx {

/// Root of every exception thrown by the library.
class error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: bad dimensions, out-of-range parameters, mismatched sizes.
class parameter_error : public error {
  public:
    using error::error;
};

/// Discount or order outside the domain where a quantity is defined.
class domain_error : public error {
  public:
    using error::error;
};

/// Linear system too ill-conditioned to trust, or a non-finite result.
class numeric_error : public error {
  public:
    using error::error;
};

/// Declared absorbing states violate the self-loop / zero-reward assumptions.
class assumption_error : public error {
  public:
    using error::error;
};

/// Transient block is (numerically) singular: the chain is not absorbing.
class non_absorbing_error : public error {
  public:
    using error::error;
};

class index_error : public error {
  public:
    using error::error;
};

/// Result exceeds the representable range (e.g. combinatorial counts).
class range_error : public error {
  public:
    using error::error;
};

/// A Monte-Carlo estimator needed more trajectory than was simulated.
class truncation_error : public error {
  public:
    using error::error;
};

class io_error : public error {
  public:
    using error::error;
};

namespace detail {

template <class E>
inline void require(bool cond, const std::string &msg) {
    if (!cond) {
        throw E(msg);
    }
}

}  // namespace detail

}  // namespace dtx
