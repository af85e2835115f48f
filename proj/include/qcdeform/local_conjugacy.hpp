#pragma once

// The explicit quasi-conformal conjugacy k = psi_i o L^{-1} o K o L o phi_i near
// a repelling cycle, the deformed germ f1 = k o f o k^{-1}, and numerical checks
// of its multiplier and holomorphy.

#include <qcdeform/beltrami.hpp>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace qcdeform {

/// k on the union of the chart disks around the points of one cycle.
struct LocalConjugacy {
	std::vector<KoenigsChart> charts; // charts[i] centered at cycle.points[i]
	TorusShear shear;

	const Cycle& cycle() const { return charts.front().cycle; }
	double jacobian_factor() const noexcept { return 1.0 - std::norm(shear.mu_K); }
};

inline LocalConjugacy make_local_conjugacy(const Germ& g, const Cycle& c, Complex target,
                                           const ChartOptions& opts = {}) {
	LocalConjugacy lc{build_cycle_charts(g, c, opts), shear_coefficient(c.multiplier, target)};
	if (lc.jacobian_factor() <= 0.0) throw IllConditionedError("make_local_conjugacy: k reverses orientation");
	return lc;
}

namespace detail {

inline const KoenigsChart& chart_for(const LocalConjugacy& lc, Complex z, const char* what) {
	const KoenigsChart* best = nullptr;
	for (const auto& chart : lc.charts)
		if (chart.contains(z) && (!best || std::abs(z - chart.center) < std::abs(z - best->center))) best = &chart;
	if (!best) throw DomainError(std::string(what) + ": point outside every chart disk");
	return *best;
}

// psi o L^{-1} o S o L o phi on one chart, with `shift` added to the L-branch.
template <class Shear>
Complex conjugate_through_chart(const KoenigsChart& chart, Complex z, Shear&& shear, int shift, const char* what) {
	require_finite(z, what);
	if (!chart.contains(z)) throw DomainError(std::string(what) + ": point outside the chart disk");
	const Complex w = chart.phi_raw(z);
	if (w == Complex{0.0, 0.0}) return chart.center;
	const Complex xi = std::log(w) / Complex{0.0, two_pi} + static_cast<double>(shift);
	const Complex w_new = std::exp(Complex{0.0, two_pi} * shear(xi));
	if (!chart.psi_contains(w_new)) throw DomainError(std::string(what) + ": image outside the inverse-chart disk");
	return chart.psi_raw(w_new);
}

} // namespace detail

/// k(z); `branch` selects log(phi) + branch, which must not change the value.
inline Complex k_eval(const LocalConjugacy& lc, Complex z, int branch = 0) {
	const auto& chart = detail::chart_for(lc, z, "k_eval");
	return detail::conjugate_through_chart(
	    chart, z, [&](Complex xi) { return shear_apply(lc.shear, xi); }, branch, "k_eval");
}

inline Complex k_inverse(const LocalConjugacy& lc, Complex w) {
	const auto& chart = detail::chart_for(lc, w, "k_inverse");
	return detail::conjugate_through_chart(
	    chart, w, [&](Complex zeta) { return shear_inverse(lc.shear, zeta); }, 0, "k_inverse");
}

struct DeformedLocalGerm {
	LocalConjugacy conj;
	Germ germ;
};

/// f1(z) = k(f(k^{-1}(z))).
inline Complex deformed_eval(const DeformedLocalGerm& d, Complex z) {
	const Complex pre = k_inverse(d.conj, z);
	if (!d.germ.contains(pre)) throw DomainError("deformed_eval: k^{-1}(z) outside U");
	const Complex image = d.germ.value(pre);
	try {
		return k_eval(d.conj, image);
	} catch (const DomainError& e) {
		throw DomainError(std::string("deformed_eval (k after f): ") + e.what());
	}
}

inline Complex deformed_iterate(const DeformedLocalGerm& d, Complex z, int q) {
	for (int j = 0; j < q; ++j) z = deformed_eval(d, z);
	return z;
}

/// Derivative at `center` by the trapezoid rule on the Cauchy integral over a circle.
template <class Fn>
Complex cauchy_derivative(Fn&& fn, Complex center, double radius, int points = 256) {
	const Complex base = fn(center);
	Complex acc{0.0, 0.0};
	for (int k = 0; k < points; ++k) {
		const Complex u = std::polar(1.0, two_pi * k / points);
		acc += (fn(center + radius * u) - base) / u;
	}
	return acc / (static_cast<double>(points) * radius);
}

struct MultiplierEstimate {
	Complex value{0.0, 0.0};
	Complex half_radius_value{0.0, 0.0};
	double radius = 0.0;
	double disagreement = 0.0; // relative difference of the two radii
	int halvings = 0;
};

inline constexpr double multiplier_agreement_tol = 1e-5;
inline constexpr int multiplier_max_halvings = 12;

/// Multiplier of f1^q at `base`, starting from `radius` (default chart radius / 4)
/// and halving while any stage leaves its domain.
inline MultiplierEstimate measure_multiplier(const DeformedLocalGerm& d, Complex base, int q,
                                             std::optional<double> radius = std::nullopt) {
	if (q < 1) throw DomainError("measure_multiplier: order must be positive");
	double rho = radius.value_or(detail::chart_for(d.conj, base, "measure_multiplier").radius / 4.0);
	auto fq = [&](Complex z) { return deformed_iterate(d, z, q); };
	for (int h = 0; h <= multiplier_max_halvings; ++h, rho *= 0.5) {
		try {
			MultiplierEstimate est;
			est.value = cauchy_derivative(fq, base, rho);
			est.half_radius_value = cauchy_derivative(fq, base, rho / 2.0);
			est.radius = rho;
			est.halvings = h;
			est.disagreement = std::abs(est.value - est.half_radius_value) / std::abs(est.value);
			if (est.disagreement > multiplier_agreement_tol)
				throw IllConditionedError("measure_multiplier: two-radius estimates disagree (relative " +
				                          std::to_string(est.disagreement) + ")");
			return est;
		} catch (const DomainError&) {
		}
	}
	throw DomainError("measure_multiplier: no admissible radius around the base point");
}

/// Wirtinger derivatives (d/dz, d/dconj z) by 4-point central differences.
template <class Fn>
std::pair<Complex, Complex> wirtinger(Fn&& fn, Complex z, double step) {
	const Complex fx = (fn(z + step) - fn(z - step)) / (2.0 * step);
	const Complex fy = (fn(z + Complex{0.0, step}) - fn(z - Complex{0.0, step})) / (2.0 * step);
	const Complex i{0.0, 1.0};
	return {0.5 * (fx - i * fy), 0.5 * (fx + i * fy)};
}

/// max |d f / d conj z| / |d f / dz| over 64 points (8 radii x 8 angles) of the disk.
template <class Fn>
double holomorphy_residual(Fn&& fn, Complex center, double radius) {
	const double step = 1e-5 * radius;
	double worst = 0.0;
	for (int j = 0; j < 8; ++j)
		for (int k = 0; k < 8; ++k) {
			const Complex z = center + std::polar(radius * (j + 0.5) / 8.0, two_pi * (k + 0.5) / 8.0);
			const auto [dz, dzbar] = wirtinger(fn, z, step);
			worst = std::max(worst, std::abs(dzbar) / std::abs(dz));
		}
	return worst;
}

} // namespace qcdeform
