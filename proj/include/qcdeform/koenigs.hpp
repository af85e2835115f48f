#pragma once

// Koenigs linearization at a repelling cycle: the chart phi with phi(z_i) = 0,
// phi'(z_i) = 1 and phi(f^q(z)) = lambda * phi(z) near z_i, as a truncated
// power series, together with its inverse branch psi_i (psi_i(0) = z_i).

#include <qcdeform/cycles.hpp>
#include <qcdeform/series.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace qcdeform {

struct ChartOptions {
	std::size_t order = 24;
	std::optional<double> radius_cap;
	double psi_margin = 0.1;
	int max_halvings = 20;
};

inline constexpr double chart_residual_tol = 1e-9;
inline constexpr double chart_inverse_tol = 1e-9;

/// Linearizing chart centered at one point of a repelling cycle. Immutable once built.
struct KoenigsChart {
	Cycle cycle;
	int base_index = 0;
	Complex center{0.0, 0.0};
	Complex lambda{0.0, 0.0};
	series::Series coefficients;         // a_0 = 0, a_1 = 1, a_2, ..., a_M (in powers of z - center)
	series::Series inverse_coefficients; // b_0 = 0, b_1 = 1, ... (psi(w) - center)
	double radius = 0.0;                 // validity radius of phi
	double psi_radius = 0.0;             // validity radius of psi (in the w-plane)
	double residual = 0.0;               // measured functional-equation residual (relative)
	double inverse_error = 0.0;          // measured max |psi(phi(z)) - z| on the chart circle

	std::size_t order() const noexcept { return coefficients.size() - 1; }
	bool contains(Complex z) const noexcept { return std::abs(z - center) <= radius * (1.0 + 1e-12); }
	bool psi_contains(Complex w) const noexcept { return std::abs(w) <= psi_radius * (1.0 + 1e-12); }

	Complex phi_raw(Complex z) const noexcept { return series::evaluate(coefficients, z - center); }
	Complex phi_derivative_raw(Complex z) const noexcept {
		return series::evaluate_derivative(coefficients, z - center);
	}
	Complex psi_raw(Complex w) const noexcept {
		Complex z = center + series::evaluate(inverse_coefficients, w);
		const Complex slope = phi_derivative_raw(z);
		if (slope != Complex{0.0, 0.0}) z -= (phi_raw(z) - w) / slope;
		return z;
	}
};

namespace detail {

// Taylor series of f^q - z_i about z_i (constant term forced to 0).
inline series::Series return_map_series(const Germ& g, const Cycle& c, int base, std::size_t order) {
	const int q = c.order;
	series::Series current; // series of f^j(z_i + h)
	for (int j = 0; j < q; ++j) {
		const Complex point = c.points[(base + j) % q];
		const series::Series local = series::taylor_shift(g.coeffs(), point, order);
		if (j == 0) {
			current = local;
			continue;
		}
		series::Series inner = current;
		inner[0] = 0.0; // expansion variable is (f^j(z_i + h) - point)
		current = series::compose(local, inner, order);
	}
	current[0] = 0.0;
	return current;
}

inline series::Series koenigs_coefficients(const series::Series& ret, Complex lambda, std::size_t order) {
	series::Series a(order + 1, Complex{0.0, 0.0});
	a[1] = 1.0;
	series::Series ret_fixed = ret;
	ret_fixed[1] = lambda;
	// powers[j] = (F - z_i)^j truncated
	std::vector<series::Series> powers(order + 1);
	powers[1] = ret_fixed;
	for (std::size_t j = 2; j < order; ++j) powers[j] = series::multiply(powers[j - 1], ret_fixed, order);
	Complex lambda_k = lambda;
	for (std::size_t k = 2; k <= order; ++k) {
		lambda_k *= lambda;
		const Complex denom = lambda_k - lambda;
		if (std::abs(denom) < 1e-10) throw IllConditionedError("build_chart: resonant denominator lambda^k - lambda");
		Complex acc{0.0, 0.0};
		for (std::size_t j = 1; j < k; ++j) acc += a[j] * powers[j][k];
		a[k] = -acc / denom;
	}
	return a;
}

inline double initial_chart_radius(const Germ& g, const Cycle& c, int base) {
	const Complex center = c.points[base];
	double nearest = std::numeric_limits<double>::infinity();
	for (int j = 0; j < c.order; ++j)
		if (j != base) nearest = std::min(nearest, std::abs(c.points[j] - center));
	// Critical points and their first few images bound the disk where phi is univalent.
	for (Complex crit : critical_points(g)) {
		for (int k = 0; k <= 2 * c.order; ++k) {
			if (!is_finite(crit) || std::abs(crit) > 1e6) break;
			const double d = std::abs(crit - center);
			if (d > 0.0) nearest = std::min(nearest, d);
			crit = g.value(crit);
		}
	}
	double r = std::isfinite(nearest) ? 0.5 * nearest : g.radius();
	return std::min(r, g.radius());
}

inline Complex iterate_unchecked(const Germ& g, Complex z, int n) noexcept {
	for (int k = 0; k < n; ++k) z = g.value(z);
	return z;
}

} // namespace detail

/// max over a 64-point circle of |phi(f^q(z)) - lambda phi(z)| relative to max |phi|.
inline double chart_functional_residual(const Germ& g, const KoenigsChart& chart, double radius, int samples = 64) {
	double worst = 0.0;
	double scale = 0.0;
	for (int k = 0; k < samples; ++k) {
		const Complex z = chart.center + std::polar(radius, two_pi * (k + 0.5) / samples);
		const Complex image = detail::iterate_unchecked(g, z, chart.cycle.order);
		const Complex lhs = chart.phi_raw(image);
		const Complex rhs = chart.lambda * chart.phi_raw(z);
		worst = std::max(worst, std::abs(lhs - rhs));
		scale = std::max(scale, std::abs(chart.phi_raw(z)));
	}
	return scale > 0.0 ? worst / scale : worst;
}

inline KoenigsChart build_chart(const Germ& g, const Cycle& c, int base_index, const ChartOptions& opts = {}) {
	if (base_index < 0 || base_index >= c.order) throw DomainError("build_chart: base index out of range");
	if (c.critical) throw DegenerateCycleError("build_chart: cycle contains a critical point");
	if (std::abs(c.multiplier) <= 1.0 + indiff_band) throw DomainError("build_chart: cycle is not repelling");
	if (opts.order < 1) throw DomainError("build_chart: series order must be positive");

	KoenigsChart chart;
	chart.cycle = c;
	chart.base_index = base_index;
	chart.center = c.points[base_index];
	chart.lambda = c.multiplier;
	const auto ret = detail::return_map_series(g, c, base_index, opts.order);
	chart.coefficients = detail::koenigs_coefficients(ret, chart.lambda, opts.order);
	chart.inverse_coefficients = series::revert(chart.coefficients, opts.order);

	double r = detail::initial_chart_radius(g, c, base_index);
	if (opts.radius_cap) r = std::min(r, *opts.radius_cap);
	for (int attempt = 0; attempt <= opts.max_halvings; ++attempt, r *= 0.5) {
		chart.radius = r;
		const double residual = chart_functional_residual(g, chart, r);
		double inverse_error = 0.0;
		double min_phi = std::numeric_limits<double>::infinity();
		for (int k = 0; k < 64; ++k) {
			const Complex z = chart.center + std::polar(r, two_pi * (k + 0.5) / 64);
			const Complex w = chart.phi_raw(z);
			min_phi = std::min(min_phi, std::abs(w));
			inverse_error = std::max(inverse_error, std::abs(chart.psi_raw(w) - z));
		}
		if (residual < chart_residual_tol && inverse_error < chart_inverse_tol) {
			chart.residual = residual;
			chart.inverse_error = inverse_error;
			chart.psi_radius = (1.0 - opts.psi_margin) * min_phi;
			return chart;
		}
	}
	throw IllConditionedError("build_chart: functional-equation residual check failed after radius halvings");
}

/// One chart per point of the cycle (base indices 0..q-1).
inline std::vector<KoenigsChart> build_cycle_charts(const Germ& g, const Cycle& c, const ChartOptions& opts = {}) {
	std::vector<KoenigsChart> charts;
	charts.reserve(c.order);
	for (int i = 0; i < c.order; ++i) charts.push_back(build_chart(g, c, i, opts));
	return charts;
}

inline Complex phi(const KoenigsChart& chart, Complex z) {
	require_finite(z, "phi");
	if (!chart.contains(z)) throw DomainError("phi: point outside the chart disk");
	return chart.phi_raw(z);
}

inline Complex phi_derivative(const KoenigsChart& chart, Complex z) {
	require_finite(z, "phi_derivative");
	if (!chart.contains(z)) throw DomainError("phi_derivative: point outside the chart disk");
	return chart.phi_derivative_raw(z);
}

inline Complex psi(const KoenigsChart& chart, Complex w) {
	require_finite(w, "psi");
	if (!chart.psi_contains(w)) throw DomainError("psi: point outside the inverse-chart disk");
	return chart.psi_raw(w);
}

} // namespace qcdeform
