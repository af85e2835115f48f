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

DeformedLocalGerm deform(Complex target) {
	const Germ g = quadratic();
	return DeformedLocalGerm{make_local_conjugacy(g, origin_cycle(g), target), g};
}

} // namespace

TEST(LocalConjugacy, IdentityWhenTargetUnchanged) {
	const auto d = deform(2.0);
	const double r = d.conj.charts[0].radius / 2.0;
	for (int k = 0; k < 32; ++k) {
		const Complex z = std::polar(r, two_pi * k / 32.0);
		EXPECT_LT(std::abs(k_eval(d.conj, z) - z), 1e-12);
		EXPECT_LT(std::abs(k_inverse(d.conj, z) - z), 1e-12);
		EXPECT_LT(std::abs(deformed_eval(d, z / 2.0) - d.germ.value(z / 2.0)), 1e-12);
	}
	const auto est = measure_multiplier(d, 0.0, 1);
	EXPECT_LT(std::abs(est.value - 2.0), 1e-8);
}

TEST(LocalConjugacy, FixesCyclePoints) {
	const auto d = deform(3.0);
	const Complex center = d.conj.charts[0].center;
	EXPECT_EQ(k_eval(d.conj, center), center);
	EXPECT_EQ(k_inverse(d.conj, center), center);
	EXPECT_LT(std::abs(deformed_eval(d, center) - center), 1e-30);
	EXPECT_GT(d.conj.jacobian_factor(), 0.0);
}

TEST(LocalConjugacy, BranchIndependent) {
	const auto d = deform(Complex(0.0, 4.0));
	const double r = d.conj.charts[0].radius / 8.0;
	for (int k = 0; k < 16; ++k) {
		const Complex z = std::polar(r, two_pi * (k + 0.5) / 16.0);
		const Complex base = k_eval(d.conj, z);
		EXPECT_LT(std::abs(k_eval(d.conj, z, 1) - base), 1e-12);
		EXPECT_LT(std::abs(k_eval(d.conj, z, -2) - base), 1e-12);
	}
}

TEST(LocalConjugacy, InverseRoundTrip) {
	const auto d = deform(3.0);
	std::mt19937_64 rng(23);
	std::uniform_real_distribution<double> u(0.0, 1.0);
	const double r = d.conj.charts[0].radius / 2.0;
	for (int k = 0; k < 100; ++k) {
		const Complex z = std::polar(r * std::sqrt(u(rng)), two_pi * u(rng));
		EXPECT_LT(std::abs(k_inverse(d.conj, k_eval(d.conj, z)) - z), 1e-10);
	}
}

TEST(LocalConjugacy, BeltramiCoefficientOfKMatchesField) {
	const Germ g = quadratic();
	const Cycle c = origin_cycle(g);
	const Complex target{1.0, 3.0};
	const auto lc = make_local_conjugacy(g, c, target);
	const BeltramiFieldSpec spec(g, {FieldEntry{lc.charts[0], lc.shear}});
	for (int k = 0; k < 24; ++k) {
		const Complex z = std::polar(lc.charts[0].radius * 0.2 * (1 + k % 3), two_pi * (k + 0.25) / 24.0);
		const auto [dz, dzbar] = wirtinger([&](Complex s) { return k_eval(lc, s); }, z, 1e-5 * std::abs(z));
		EXPECT_LT(std::abs(dzbar / dz - field_value(spec, z)), 1e-6);
	}
}

TEST(LocalConjugacy, ConjugacyIdentity) {
	const auto d = deform(3.0);
	std::mt19937_64 rng(29);
	std::uniform_real_distribution<double> u(0.0, 1.0);
	const double r = d.conj.charts[0].radius;
	int checked = 0;
	while (checked < 200) {
		const Complex z = std::polar(r * std::sqrt(u(rng)), two_pi * u(rng));
		if (std::abs(d.germ.value(z)) > 0.9 * r) continue;
		Complex lhs, rhs;
		try {
			lhs = k_eval(d.conj, d.germ.value(z));
			rhs = deformed_eval(d, k_eval(d.conj, z));
		} catch (const DomainError&) {
			continue;
		}
		EXPECT_LT(std::abs(lhs - rhs), 1e-9);
		++checked;
	}
}

TEST(LocalConjugacy, MultiplierExamples) {
	EXPECT_LT(std::abs(measure_multiplier(deform(3.0), 0.0, 1).value - 3.0), 1e-6);
	const Complex rotated = 2.0 * std::polar(1.0, std::numbers::pi / 4.0);
	EXPECT_LT(std::abs(measure_multiplier(deform(rotated), 0.0, 1).value - rotated), 1e-6);
}

TEST(LocalConjugacy, MultiplierLawSweep) {
	for (int k = 0; k < 20; ++k) {
		// |lambda'/lambda| in [0.6, 2], arguments spread around the circle.
		const double ratio = 0.6 * std::pow(2.0 / 0.6, k / 19.0);
		const Complex target = std::polar(2.0 * ratio, two_pi * k / 20.0 - 3.0);
		const auto est = measure_multiplier(deform(target), 0.0, 1);
		EXPECT_LT(std::abs(est.value - target) / std::abs(target), 1e-5) << target;
	}
}

TEST(LocalConjugacy, HolomorphyControls) {
	const auto d = deform(3.0);
	const auto est = measure_multiplier(d, 0.0, 1);
	const double f_residual = holomorphy_residual([&](Complex z) { return d.germ.value(z); }, 0.0, 0.2);
	EXPECT_LT(f_residual, 1e-7);
	const double deformed = holomorphy_residual([&](Complex z) { return deformed_eval(d, z); }, 0.0, est.radius);
	EXPECT_LT(deformed, 1e-5);
	const double k_residual =
	    holomorphy_residual([&](Complex z) { return k_eval(d.conj, z); }, 0.0, d.conj.charts[0].radius / 4.0);
	EXPECT_GT(k_residual, std::abs(d.conj.shear.mu_K) / 2.0);
}

TEST(LocalConjugacy, TwoCyclePermutedAndDeformed) {
	const Germ g({2.0, 1.0}, std::nullopt, 2.0);
	const Cycle c = find_cycles(g, 2, 16).cycles.at(0);
	const Complex target{-3.0, 5.0};
	const DeformedLocalGerm d{make_local_conjugacy(g, c, target), g};
	for (int i = 0; i < 2; ++i) EXPECT_LT(std::abs(deformed_eval(d, c.points[i]) - c.points[1 - i]), 1e-10);
	const auto est = measure_multiplier(d, c.points[0], 2);
	EXPECT_LT(std::abs(est.value - target) / std::abs(target), 1e-5);
}

TEST(LocalConjugacy, DeformedEvalNamesStage) {
	const auto d = deform(1.2);
	try {
		deformed_eval(d, d.conj.charts[0].radius * 0.9);
		FAIL() << "expected a domain error";
	} catch (const DomainError& e) {
		EXPECT_NE(std::string(e.what()).find("k"), std::string::npos);
	}
}
