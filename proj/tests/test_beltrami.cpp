#include <qcdeform/beltrami.hpp>
#include <qcdeform/local_conjugacy.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace qcdeform;

namespace {

Germ quadratic() { return Germ({2.0, 1.0}); }

Cycle origin_cycle(const Germ& g) {
	for (const auto& c : find_cycles(g, 1, 16).cycles)
		if (std::abs(c.points[0]) < 1e-12) return c;
	throw std::runtime_error("origin not found");
}

BeltramiFieldSpec one_cycle_spec(Complex target) {
	const Germ g = quadratic();
	return BeltramiFieldSpec(g, {make_entry(g, origin_cycle(g), target)});
}

} // namespace

TEST(Tau, Examples) {
	EXPECT_NEAR(std::abs(tau_of(std::exp(two_pi)) - Complex(0.0, -1.0)), 0.0, 1e-15);
	EXPECT_NEAR(std::abs(tau_of(2.0) - Complex(0.0, -std::log(2.0) / two_pi)), 0.0, 1e-16);
	EXPECT_NEAR(std::abs(tau_of(std::exp(two_pi) * std::polar(1.0, two_pi * 0.25)) - Complex(0.25, -1.0)), 0.0, 1e-15);
	EXPECT_THROW(tau_of(1.0), DomainError);
	EXPECT_THROW(tau_of(Complex(0.3, 0.2)), DomainError);
}

TEST(Shear, Examples) {
	EXPECT_EQ(shear_coefficient(2.0, 2.0).mu_K, Complex(0.0));
	const auto s = shear_coefficient(2.0, 4.0);
	EXPECT_NEAR(std::abs(s.mu_K + 1.0 / 3.0), 0.0, 1e-12);
	EXPECT_NEAR(std::abs(s.mu_K_linear + 1.0 / 3.0), 0.0, 1e-12);
	const Complex target = 2.0 * std::polar(1.0, std::numbers::pi / 2.0);
	const auto r = shear_coefficient(2.0, target);
	const Complex closed = -Complex(0.0, std::numbers::pi / 2.0) / (2.0 * std::log(2.0) + Complex(0.0, std::numbers::pi / 2.0));
	EXPECT_NEAR(std::abs(r.mu_K - closed), 0.0, 1e-12);
	EXPECT_NEAR(std::abs(r.mu_K_linear - closed), 0.0, 1e-12);
	EXPECT_THROW(shear_coefficient(2.0, 0.9), DomainError);
}

TEST(Shear, ClosedFormAgreesWithLinearAlgebra) {
	std::mt19937_64 rng(5);
	std::uniform_real_distribution<double> modulus(1.05, 6.0), angle(-3.1, 3.1);
	for (int k = 0; k < 100; ++k) {
		const Complex lambda = std::polar(modulus(rng), angle(rng));
		const Complex target = std::polar(modulus(rng), angle(rng));
		TorusShear s;
		try {
			s = shear_coefficient(lambda, target);
		} catch (const IllConditionedError&) {
			continue;
		}
		EXPECT_LT(std::abs(s.mu_K - s.mu_K_linear), 1e-12);
		EXPECT_LT(std::abs(s.mu_K), 1.0);
		EXPECT_LT(s.tau.imag(), 0.0);
		EXPECT_LT(s.tau_prime.imag(), 0.0);
		// K(1) = 1, K(tau) = tau', and tau' = L(target) modulo 1.
		EXPECT_LT(std::abs(shear_apply(s, 1.0) - 1.0), 1e-14);
		EXPECT_LT(std::abs(shear_apply(s, s.tau) - s.tau_prime), 1e-13);
		const Complex principal = std::log(target) / Complex(0.0, two_pi);
		const double shift = (s.tau_prime - principal).real();
		EXPECT_LT(std::abs(shift - std::round(shift)), 1e-12);
		EXPECT_LT(std::abs((s.tau_prime - principal).imag()), 1e-12);
		// Constant Beltrami coefficient of K.
		EXPECT_LT(std::abs(s.b / s.a - s.mu_K), 1e-12);
		const Complex xi{0.3, -0.7};
		EXPECT_LT(std::abs(shear_inverse(s, shear_apply(s, xi)) - xi), 1e-13);
	}
}

TEST(Shear, DegenerateShearRejected) {
	// |mu_K| tends to 1 exactly when |lambda'| tends to 1.
	EXPECT_THROW(shear_coefficient(2.0, 1.0 + 1e-12), IllConditionedError);
	EXPECT_NO_THROW(shear_coefficient(2.0, 1.01));
}

TEST(Pullback, Examples) {
	EXPECT_EQ(pullback_by_holomorphic(Complex(0.2, 0.1), 3.0), Complex(0.2, 0.1));
	EXPECT_NEAR(std::abs(pullback_by_holomorphic(-1.0 / 3.0, Complex(0.0, 1.0)) - 1.0 / 3.0), 0.0, 1e-16);
	const Complex mu{0.3, -0.4};
	EXPECT_NEAR(std::abs(pullback_by_holomorphic(mu, Complex(1.3, -2.2))), std::abs(mu), 1e-16);
	EXPECT_THROW(pullback_by_holomorphic(mu, 0.0), SingularError);
}

TEST(Transport, Examples) {
	const Germ g({2.0, 1.0}, std::nullopt, 0.5);
	const Complex mu{0.1, 0.25};
	EXPECT_EQ(transport_forward(mu, iterate(g, 0.1, 0)), mu);
	EXPECT_NEAR(std::abs(transport_forward(mu, iterate(g, 0.1, 2)) - mu), 0.0, 1e-16);
	const auto orbit = iterate(g, Complex(0.05, 0.1), 2);
	const Complex forward = transport_forward(mu, orbit);
	EXPECT_LT(std::abs(pullback_by_holomorphic(forward, orbit.derivative_product) - mu), 1e-12);
}

TEST(Field, InsideChartMatchesComposition) {
	const auto spec = one_cycle_spec(3.0);
	const auto& e = spec.entries()[0];
	for (int k = 0; k < 16; ++k) {
		const Complex z = std::polar(e.chart.radius * 0.7, two_pi * (k + 0.1) / 16.0);
		const auto probe = probe_field(spec, z);
		EXPECT_EQ(probe.status, ProbeStatus::inside_chart);
		const Complex lphi_prime = phi_derivative(e.chart, z) / (Complex(0.0, two_pi) * phi(e.chart, z));
		EXPECT_LT(std::abs(probe.value - pullback_by_holomorphic(e.shear.mu_K, lphi_prime)), 1e-15);
		EXPECT_NEAR(std::abs(probe.value), std::abs(e.shear.mu_K), 1e-14);
	}
}

TEST(Field, ZeroOutsideEveryBasin) {
	// 1.5 z - z^2: repelling origin, attracting fixed point 1/2, critical value 9/16.
	// The backward orbit of 0.55 crosses the critical value and leaves U.
	const Germ g({1.5, -1.0}, std::nullopt, 0.7);
	const BeltramiFieldSpec spec(g, {make_entry(g, find_cycles(g, 1, 16).cycles.at(0), 2.0)});
	ASSERT_LT(std::abs(spec.entries()[0].chart.center), 1e-14);
	const auto probe = probe_field(spec, Complex(0.55, 0.0));
	EXPECT_EQ(probe.value, Complex(0.0));
	EXPECT_NE(probe.status, ProbeStatus::inside_chart);
	EXPECT_NE(probe.status, ProbeStatus::transported);
	EXPECT_EQ(field_value(BeltramiFieldSpec(g, {}), Complex(0.05, 0.02)), Complex(0.0));
	EXPECT_THROW(field_value(spec, Complex(0.9, 0.0)), DomainError);
}

TEST(Field, InvariantUnderDynamics) {
	const auto spec = one_cycle_spec(Complex(0.0, 3.0));
	const Germ& g = spec.germ();
	std::mt19937_64 rng(17);
	std::uniform_real_distribution<double> u(-1.0, 1.0);
	int checked = 0;
	while (checked < 500) {
		const Complex z{0.25 * u(rng), 0.25 * u(rng)};
		if (!g.contains(g.value(z))) continue;
		const Complex mu = field_value(spec, z);
		if (mu == Complex(0.0)) continue;
		const Complex image = field_value(spec, g.value(z));
		const Complex slope = g.slope(z);
		EXPECT_LT(std::abs(image - mu * slope / std::conj(slope)), 1e-8);
		++checked;
	}
}

TEST(Field, BoundedByShear) {
	const auto spec = one_cycle_spec(3.0);
	const double mu_K = std::abs(spec.entries()[0].shear.mu_K);
	for (int i = -20; i <= 20; ++i)
		for (int j = -20; j <= 20; ++j) {
			const Complex z{0.02 * i, 0.02 * j};
			if (!spec.germ().contains(z)) continue;
			EXPECT_LE(std::abs(field_value(spec, z)), mu_K + 1e-14);
		}
}

TEST(Field, HolomorphicInTarget) {
	const Germ g = quadratic();
	const Cycle c = origin_cycle(g);
	const auto chart = build_chart(g, c, 0);
	const Complex z{0.03, 0.02};
	auto at = [&](Complex target) {
		return field_value(BeltramiFieldSpec(g, {FieldEntry{chart, shear_coefficient(c.multiplier, target)}}), z);
	};
	const auto [d, dbar] = wirtinger(at, Complex(3.0), 1e-4);
	EXPECT_GT(std::abs(d), 1e-3);
	EXPECT_LT(std::abs(dbar), 1e-6);
}

TEST(Spec, RejectsDuplicateCycles) {
	const Germ g = quadratic();
	const Cycle c = origin_cycle(g);
	EXPECT_THROW(BeltramiFieldSpec(g, {make_entry(g, c, 3.0), make_entry(g, c, 4.0)}), DomainError);
	EXPECT_THROW(BeltramiFieldSpec(g, {make_entry(g, c, 3.0)}, 0), DomainError);
}

TEST(Spec, OverlapsAreCounted) {
	// Two cycles of 2z + z^2 whose charts are both reached: the origin and the 2-cycle.
	const Germ g({2.0, 1.0}, std::nullopt, 2.0);
	const auto census = find_cycles(g, 1, 16);
	const Cycle two = find_cycles(g, 2, 16).cycles.at(0);
	const BeltramiFieldSpec spec(g, {make_entry(g, census.cycles.at(0), 3.0), make_entry(g, two, 5.0)});
	const auto probe = probe_field(spec, Complex(0.01, 0.0));
	EXPECT_EQ(probe.entry, 0);
	EXPECT_EQ(probe.overlaps, 0);
}
