#pragma once

// Invariant Beltrami differentials attached to repelling cycles.
//
// Near a repelling cycle of multiplier lambda, L(w) = log(w) / (2 pi i) turns
// multiplication by lambda on phi-coordinates into translation by tau = L(lambda)
// on C/Z. The real-linear map K with K(1) = 1, K(tau) = tau' descends to a
// torus shear whose constant Beltrami coefficient, pulled back through L o phi
// and transported along the dynamics, gives an f-invariant differential on the
// basin of the cycle for the inverse dynamics.

#include <qcdeform/koenigs.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace qcdeform {

/// tau = (arg lambda - i log|lambda|) / (2 pi), principal branch; Im tau < 0.
inline Complex tau_of(Complex lambda) {
	require_finite(lambda, "tau_of");
	if (std::abs(lambda) <= 1.0) throw DomainError("tau_of: |lambda| must exceed 1");
	return Complex{std::arg(lambda), -std::log(std::abs(lambda))} / two_pi;
}

struct TorusShear {
	Complex lambda;
	Complex lambda_prime;
	Complex tau;
	Complex tau_prime;    // tau + Log(lambda'/lambda) / (2 pi i)
	Complex mu_K;         // closed form -Log(l'/l) / (2 log|l| + Log(l'/l))
	Complex mu_K_linear;  // (tau - tau') / (tau' - conj(tau))
	Complex a;            // K(xi) = a xi + b conj(xi)
	Complex b;
};

inline constexpr double shear_degeneracy_margin = 1e-9;

inline TorusShear shear_coefficient(Complex lambda, Complex lambda_prime) {
	TorusShear s;
	s.lambda = lambda;
	s.lambda_prime = lambda_prime;
	s.tau = tau_of(lambda);
	if (std::abs(lambda_prime) <= 1.0 || !is_finite(lambda_prime))
		throw DomainError("shear_coefficient: |lambda'| must exceed 1");
	const Complex log_ratio = std::log(lambda_prime / lambda);
	// tau' sits on the branch of L(lambda') reached from tau by Log(lambda'/lambda);
	// it agrees with the principal L(lambda') modulo 1.
	s.tau_prime = s.tau + log_ratio / Complex{0.0, two_pi};
	s.mu_K = -log_ratio / (2.0 * std::log(std::abs(lambda)) + log_ratio);
	const Complex diff = s.tau - std::conj(s.tau);
	s.mu_K_linear = (s.tau - s.tau_prime) / (s.tau_prime - std::conj(s.tau));
	s.a = (s.tau_prime - std::conj(s.tau)) / diff;
	s.b = (s.tau - s.tau_prime) / diff;
	if (std::abs(s.mu_K) >= 1.0 - shear_degeneracy_margin)
		throw IllConditionedError("shear_coefficient: |mu_K| too close to 1");
	return s;
}

/// The shear K(xi) = a xi + b conj(xi) on C (commutes with xi -> xi + 1).
inline Complex shear_apply(const TorusShear& s, Complex xi) noexcept { return s.a * xi + s.b * std::conj(xi); }

inline Complex shear_inverse(const TorusShear& s, Complex zeta) noexcept {
	const double det = std::norm(s.a) - std::norm(s.b);
	return (std::conj(s.a) * zeta - s.b * std::conj(zeta)) / det;
}

/// Beltrami coefficient of h o g at z for holomorphic g, given mu_h(g(z)) and g'(z).
inline Complex pullback_by_holomorphic(Complex mu_at_gz, Complex g_prime) {
	if (g_prime == Complex{0.0, 0.0}) throw SingularError("pullback_by_holomorphic: zero derivative");
	return mu_at_gz * (std::conj(g_prime) / g_prime);
}

/// mu(f^j(z)) = mu(z) (f^j)'(z) / conj((f^j)'(z)).
inline Complex transport_forward(Complex mu_at_z, const Orbit& orbit) {
	const Complex d = orbit.derivative_product;
	if (d == Complex{0.0, 0.0}) throw SingularError("transport_forward: zero derivative product");
	return mu_at_z * d / std::conj(d);
}

struct FieldEntry {
	KoenigsChart chart;
	TorusShear shear;
};

inline constexpr double puncture_radius = 1e-8;

/// conj(H')/H' for H = L o phi at w: the unit factor turning mu_K into the
/// Beltrami coefficient of K o L o phi.
inline Complex chart_rotation(const FieldEntry& e, Complex w) {
	Complex offset = w - e.chart.center;
	if (std::abs(offset) < puncture_radius) {
		// (L o phi)' is singular at the cycle point; use the puncture circle instead.
		offset = offset == Complex{0.0, 0.0} ? Complex{puncture_radius, 0.0}
		                                     : offset * (puncture_radius / std::abs(offset));
		w = e.chart.center + offset;
	}
	const Complex value = phi(e.chart, w);
	const Complex lphi_prime = phi_derivative(e.chart, w) / (Complex{0.0, two_pi} * value);
	return pullback_by_holomorphic(Complex{1.0, 0.0}, lphi_prime);
}

/// Beltrami coefficient of K o L o phi at w in the chart disk.
inline Complex chart_beltrami(const FieldEntry& e, Complex w) { return e.shear.mu_K * chart_rotation(e, w); }

/// Recipe for mu_Lambda: one entry per deformed cycle.
class BeltramiFieldSpec {
  public:
	BeltramiFieldSpec(Germ germ, std::vector<FieldEntry> entries, int transport_depth = 200)
	    : m_germ(std::move(germ)), m_entries(std::move(entries)), m_depth(transport_depth) {
		if (m_depth < 1) throw DomainError("BeltramiFieldSpec: transport depth must be positive");
		for (std::size_t i = 0; i < m_entries.size(); ++i) {
			if (std::abs(m_entries[i].shear.lambda_prime) <= 1.0)
				throw DomainError("BeltramiFieldSpec: every target multiplier must satisfy |lambda'| > 1");
			for (std::size_t j = 0; j < i; ++j)
				for (const auto& a : m_entries[i].chart.cycle.points)
					for (const auto& b : m_entries[j].chart.cycle.points)
						if (std::abs(a - b) < dedup_eps)
							throw DomainError("BeltramiFieldSpec: two entries share a cycle");
		}
	}

	const Germ& germ() const noexcept { return m_germ; }
	const std::vector<FieldEntry>& entries() const noexcept { return m_entries; }
	int transport_depth() const noexcept { return m_depth; }

  private:
	Germ m_germ;
	std::vector<FieldEntry> m_entries;
	int m_depth;
};

/// Builds an entry deforming cycle `c` to multiplier `target`, charted at z_1.
inline FieldEntry make_entry(const Germ& g, const Cycle& c, Complex target, const ChartOptions& opts = {}) {
	return FieldEntry{build_chart(g, c, 0, opts), shear_coefficient(c.multiplier, target)};
}

enum class ProbeStatus { inside_chart, transported, no_basin, escaped, newton_failure };

struct FieldProbe {
	Complex value{0.0, 0.0};
	Complex rotation{0.0, 0.0}; // value = mu_K of the claiming entry times this unit factor
	ProbeStatus status = ProbeStatus::no_basin;
	int entry = -1;   // index of the claiming entry
	int steps = 0;    // backward steps taken before entering its chart disk
	int overlaps = 0; // further entries whose disk also contained the entry point
};

namespace detail {

// Guess for f^{-1}(w): linearize at the cycle point preceding the nearest one,
// otherwise the linear inverse at the origin.
inline Complex backward_guess(const BeltramiFieldSpec& spec, Complex w) {
	const Germ& g = spec.germ();
	double best = std::numeric_limits<double>::infinity();
	Complex guess = w / g.linear_part();
	for (const auto& e : spec.entries()) {
		const auto& pts = e.chart.cycle.points;
		const int q = e.chart.cycle.order;
		for (int j = 0; j < q; ++j) {
			const double d = std::abs(w - pts[j]);
			if (d < best && d < 4.0 * e.chart.radius * std::abs(e.chart.lambda)) {
				best = d;
				const Complex prev = pts[(j + q - 1) % q];
				guess = prev + (w - pts[j]) / g.slope(prev);
			}
		}
	}
	return guess;
}

} // namespace detail

/// Evaluates mu_Lambda at z with full bookkeeping of how the value was obtained.
inline FieldProbe probe_field(const BeltramiFieldSpec& spec, Complex z) {
	const Germ& g = spec.germ();
	require_in_domain(g, z, "field_value");
	FieldProbe probe;
	std::vector<Complex> backward{z};
	for (int step = 0; step <= spec.transport_depth(); ++step) {
		const Complex w = backward.back();
		for (std::size_t i = 0; i < spec.entries().size(); ++i) {
			if (!spec.entries()[i].chart.contains(w)) continue;
			if (probe.entry >= 0) {
				++probe.overlaps;
				continue;
			}
			probe.entry = static_cast<int>(i);
		}
		if (probe.entry >= 0) {
			const FieldEntry& e = spec.entries()[probe.entry];
			const Complex rotation = chart_rotation(e, w);
			probe.steps = step;
			if (step == 0) {
				probe.rotation = rotation;
				probe.status = ProbeStatus::inside_chart;
			} else {
				std::vector<Complex> forward(backward.rbegin(), backward.rend());
				probe.rotation = transport_forward(rotation, orbit_from_points(g, std::move(forward)));
				probe.status = ProbeStatus::transported;
			}
			probe.value = e.shear.mu_K * probe.rotation;
			return probe;
		}
		if (step == spec.transport_depth()) break;
		Complex prev;
		try {
			prev = inverse_branch(g, w, detail::backward_guess(spec, w));
		} catch (const Error&) {
			probe.status = ProbeStatus::newton_failure;
			return probe;
		}
		if (!g.contains(prev)) {
			probe.status = ProbeStatus::escaped;
			return probe;
		}
		backward.push_back(prev);
	}
	probe.status = ProbeStatus::no_basin;
	return probe;
}

inline Complex field_value(const BeltramiFieldSpec& spec, Complex z) { return probe_field(spec, z).value; }

} // namespace qcdeform
