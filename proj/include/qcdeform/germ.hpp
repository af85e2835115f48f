#pragma once

// Polynomial germs f(z) = c_1 z + c_2 z^2 + ... + c_d z^d fixing the origin,
// their evaluation, iteration along orbits and local inverse branches.

#include <qcdeform/errors.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qcdeform {

inline constexpr double newton_tol = 1e-12;
inline constexpr int max_newton_iters = 64;

namespace detail {

// Horner evaluation of sum_{k>=1} c_k z^k with coeffs[0] = c_1.
inline Complex horner(std::span<const Complex> coeffs, Complex z) noexcept {
	Complex acc{0.0, 0.0};
	for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * z + *it;
	return acc * z;
}

inline Complex horner_derivative(std::span<const Complex> coeffs, Complex z) noexcept {
	Complex acc{0.0, 0.0};
	for (std::size_t k = coeffs.size(); k >= 1; --k) acc = acc * z + static_cast<double>(k) * coeffs[k - 1];
	return acc;
}

inline double min_derivative_on_circle(std::span<const Complex> coeffs, double r, int samples = 64) {
	double best = std::numeric_limits<double>::infinity();
	for (int k = 0; k < samples; ++k) {
		const Complex z = std::polar(r, two_pi * k / samples);
		best = std::min(best, std::abs(horner_derivative(coeffs, z)));
	}
	return best;
}

} // namespace detail

/// Radius of the working disk U when none is declared: the largest r <= 1
/// (scanned in steps of 1/256) such that |f'| > 1e-3 on every sampled circle
/// up to r, then halved.
inline double auto_radius(std::span<const Complex> coeffs) {
	constexpr int steps = 256;
	constexpr double floor_derivative = 1e-3;
	double passing = 0.0;
	for (int j = 1; j <= steps; ++j) {
		const double r = static_cast<double>(j) / steps;
		if (detail::min_derivative_on_circle(coeffs, r) <= floor_derivative) break;
		passing = r;
	}
	if (passing == 0.0) throw DomainError("auto_radius: |f'| is not bounded away from 0 near the origin");
	return 0.5 * passing;
}

/// A holomorphic germ given by polynomial coefficients. Immutable after construction.
class Germ {
  public:
	Germ(std::vector<Complex> coeffs, std::optional<double> alpha = std::nullopt,
	     std::optional<double> radius_U = std::nullopt)
	    : m_coeffs(std::move(coeffs)), m_alpha(alpha) {
		if (m_coeffs.empty()) throw DomainError("Germ: at least the linear coefficient is required");
		for (const auto& c : m_coeffs) require_finite(c, "Germ coefficient");
		if (m_coeffs.front() == Complex{0.0, 0.0}) throw DomainError("Germ: c_1 must be nonzero");
		// Trailing zero coefficients carry no information.
		while (m_coeffs.size() > 1 && m_coeffs.back() == Complex{0.0, 0.0}) m_coeffs.pop_back();
		if (m_alpha) {
			require_finite(*m_alpha, "Germ alpha");
			if (std::abs(m_coeffs.front() - std::polar(1.0, two_pi * *m_alpha)) >= 1e-12)
				throw DomainError("Germ: declared rotation number does not match c_1");
		}
		if (radius_U) {
			if (!std::isfinite(*radius_U) || *radius_U <= 0.0) throw DomainError("Germ: radius_U must be positive");
			m_radius = *radius_U;
		} else {
			m_radius = auto_radius(m_coeffs);
		}
	}

	static Germ identity(double radius_U = 1.0) { return Germ({Complex{1.0, 0.0}}, 0.0, radius_U); }

	std::span<const Complex> coeffs() const noexcept { return m_coeffs; }
	std::optional<double> alpha() const noexcept { return m_alpha; }
	double radius() const noexcept { return m_radius; }
	int degree() const noexcept { return static_cast<int>(m_coeffs.size()); }
	Complex linear_part() const noexcept { return m_coeffs.front(); }

	bool contains(Complex z) const noexcept { return std::abs(z) <= m_radius * (1.0 + 1e-12); }

	// Unchecked evaluation, used by root finders whose iterates may leave U.
	Complex value(Complex z) const noexcept { return detail::horner(m_coeffs, z); }
	Complex slope(Complex z) const noexcept { return detail::horner_derivative(m_coeffs, z); }

	/// Coefficients of f' as a polynomial in z (constant term first).
	std::vector<Complex> derivative_coeffs() const {
		std::vector<Complex> d(m_coeffs.size());
		for (std::size_t k = 0; k < m_coeffs.size(); ++k) d[k] = static_cast<double>(k + 1) * m_coeffs[k];
		return d;
	}

  private:
	std::vector<Complex> m_coeffs;
	std::optional<double> m_alpha;
	double m_radius = 1.0;
};

inline void require_in_domain(const Germ& g, Complex z, const char* what) {
	require_finite(z, what);
	if (!g.contains(z)) throw DomainError(std::string(what) + ": point outside the working disk U");
}

inline Complex eval(const Germ& g, Complex z) {
	require_in_domain(g, z, "eval");
	return g.value(z);
}

inline Complex derivative(const Germ& g, Complex z) {
	require_in_domain(g, z, "derivative");
	return g.slope(z);
}

/// A forward orbit z, f(z), ..., f^n(z) with the chain-rule product (f^n)'(z).
struct Orbit {
	std::vector<Complex> points;
	Complex derivative_product{1.0, 0.0};

	std::size_t steps() const noexcept { return points.empty() ? 0 : points.size() - 1; }
	Complex last() const { return points.back(); }
};

inline Orbit iterate(const Germ& g, Complex z, std::size_t n) {
	require_in_domain(g, z, "iterate");
	Orbit orbit;
	orbit.points.reserve(n + 1);
	orbit.points.push_back(z);
	for (std::size_t k = 0; k < n; ++k) {
		const Complex current = orbit.points.back();
		orbit.derivative_product *= g.slope(current);
		const Complex next = g.value(current);
		if (!is_finite(next) || !g.contains(next))
			throw EscapeError("iterate: orbit left U at index " + std::to_string(k + 1), k + 1);
		orbit.points.push_back(next);
	}
	return orbit;
}

/// Builds an Orbit from already computed forward points (e.g. a reversed backward orbit).
inline Orbit orbit_from_points(const Germ& g, std::vector<Complex> points) {
	Orbit orbit;
	orbit.points = std::move(points);
	for (std::size_t k = 0; k + 1 < orbit.points.size(); ++k) orbit.derivative_product *= g.slope(orbit.points[k]);
	return orbit;
}

/// Newton solve of f(z) = w starting from `guess`.
inline Complex inverse_step(const Germ& g, Complex w, Complex guess) {
	require_finite(w, "inverse_step target");
	require_finite(guess, "inverse_step guess");
	// Relative below |w| = 1 so that tiny targets keep full relative accuracy.
	const double tol = newton_tol * std::min(1.0, std::abs(w));
	Complex z = guess;
	double residual = std::abs(g.value(z) - w);
	for (int it = 0; it < max_newton_iters; ++it) {
		if (residual <= tol) return z;
		const Complex slope = g.slope(z);
		if (std::abs(slope) < 1e-14) throw SingularError("inverse_step: f' vanishes at a Newton iterate");
		z -= (g.value(z) - w) / slope;
		if (!is_finite(z)) break;
		residual = std::abs(g.value(z) - w);
	}
	if (is_finite(z) && residual <= tol) return z;
	throw ConvergenceError("inverse_step: Newton did not reach tolerance", residual);
}

/// Local inverse near the origin: Newton from the linear guess w / c_1, falling
/// back to continuation along the segment [0, w] when that fails.
inline Complex inverse_branch(const Germ& g, Complex w, std::optional<Complex> guess = std::nullopt) {
	try {
		return inverse_step(g, w, guess.value_or(w / g.linear_part()));
	} catch (const Error&) {
	}
	constexpr int stages = 16;
	Complex z{0.0, 0.0};
	for (int s = 1; s <= stages; ++s) z = inverse_step(g, w * (static_cast<double>(s) / stages), z);
	return z;
}

/// Roots of a polynomial given by coefficients (constant term first), by the
/// Aberth–Ehrlich iteration. Degree-0 input yields no roots.
inline std::vector<Complex> polynomial_roots(std::vector<Complex> coeffs) {
	while (!coeffs.empty() && coeffs.back() == Complex{0.0, 0.0}) coeffs.pop_back();
	if (coeffs.size() <= 1) return {};
	const std::size_t n = coeffs.size() - 1;
	const Complex lead = coeffs.back();
	for (auto& c : coeffs) c /= lead;
	auto p = [&](Complex z) {
		Complex acc{0.0, 0.0};
		for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * z + *it;
		return acc;
	};
	auto dp = [&](Complex z) {
		Complex acc{0.0, 0.0};
		for (std::size_t k = n; k >= 1; --k) acc = acc * z + static_cast<double>(k) * coeffs[k];
		return acc;
	};
	double bound = 0.0;
	for (std::size_t k = 0; k < n; ++k) bound = std::max(bound, std::abs(coeffs[k]));
	bound = 1.0 + bound;
	std::vector<Complex> roots(n);
	for (std::size_t k = 0; k < n; ++k) roots[k] = std::polar(0.5 * bound, two_pi * (k + 0.25) / n);
	for (int it = 0; it < 500; ++it) {
		double moved = 0.0;
		for (std::size_t k = 0; k < n; ++k) {
			const Complex pk = p(roots[k]);
			if (pk == Complex{0.0, 0.0}) continue;
			const Complex ratio = pk / dp(roots[k]);
			Complex sum{0.0, 0.0};
			for (std::size_t j = 0; j < n; ++j)
				if (j != k) sum += 1.0 / (roots[k] - roots[j]);
			const Complex step = ratio / (1.0 - ratio * sum);
			roots[k] -= step;
			moved = std::max(moved, std::abs(step) / std::max(1.0, std::abs(roots[k])));
		}
		if (moved < 1e-15) break;
	}
	return roots;
}

inline std::vector<Complex> critical_points(const Germ& g) { return polynomial_roots(g.derivative_coeffs()); }

} // namespace qcdeform
