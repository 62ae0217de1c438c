#pragma once

#include <stdexcept>
#include <string>

namespace cob {

/// Base class for every error raised by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition or type invariant.
class validation_error : public error {
public:
    using error::error;
};

/// Malformed text input; carries the 1-based row number when known.
class parse_error : public error {
public:
    parse_error(const std::string& what, std::size_t row)
        : error(what + " (row " + std::to_string(row) + ")"), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

/// A linear system or recursion could not be evaluated.
class numerical_error : public error {
public:
    using error::error;
};

/// Smoother hit a zero predicted probability with nonzero mass behind it.
class degenerate_model_error : public numerical_error {
public:
    degenerate_model_error(std::size_t t, std::size_t regime)
        : numerical_error("degenerate model: predicted probability is zero at t=" + std::to_string(t) +
                          ", regime=" + std::to_string(regime)),
          t_(t),
          regime_(regime) {}

    std::size_t t() const noexcept { return t_; }
    std::size_t regime() const noexcept { return regime_; }

private:
    std::size_t t_;
    std::size_t regime_;
};

}  // namespace cob
