#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>

namespace qcdeform {

using Complex = std::complex<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Base of every numerical failure raised by the toolkit.
class Error : public std::runtime_error {
  public:
	using std::runtime_error::runtime_error;
};

/// A point or parameter lies outside the region where an operation is defined.
class DomainError : public Error {
  public:
	using Error::Error;
};

/// An orbit left the working disk; `index` is the first orbit index outside it.
class EscapeError : public Error {
  public:
	EscapeError(const std::string& what, std::size_t index) : Error(what), index(index) {}
	std::size_t index;
};

/// An iteration did not reach its tolerance; `residual` is the best value achieved.
class ConvergenceError : public Error {
  public:
	ConvergenceError(const std::string& what, double residual) : Error(what), residual(residual) {}
	double residual;
};

/// A derivative that must be nonzero vanished.
class SingularError : public Error {
  public:
	using Error::Error;
};

/// A cycle carries a critical point, so its multiplier cannot be used.
class DegenerateCycleError : public Error {
  public:
	using Error::Error;
};

/// Near-resonant or near-degenerate data make a construction numerically meaningless.
class IllConditionedError : public Error {
  public:
	using Error::Error;
};

/// Invalid user configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
  public:
	using std::runtime_error::runtime_error;
};

inline bool is_finite(Complex z) noexcept { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

inline void require_finite(Complex z, const char* what) {
	if (!is_finite(z)) throw DomainError(std::string(what) + ": non-finite complex value");
}

inline void require_finite(double x, const char* what) {
	if (!std::isfinite(x)) throw DomainError(std::string(what) + ": non-finite value");
}

} // namespace qcdeform
