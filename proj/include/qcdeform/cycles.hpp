#pragma once

// Periodic orbits of a germ inside its working disk: Newton search on
// f^q(z) - z from a deterministic seed set, primitive-period filtering,
// deduplication and the attracting / indifferent / repelling trichotomy.

#include <qcdeform/germ.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <tuple>
#include <vector>

namespace qcdeform {

enum class CycleKind { attracting, indifferent, repelling };

inline std::string_view to_string(CycleKind kind) noexcept {
	switch (kind) {
	case CycleKind::attracting: return "attracting";
	case CycleKind::indifferent: return "indifferent";
	case CycleKind::repelling: return "repelling";
	}
	return "unknown";
}

inline constexpr double dedup_eps = 1e-9;
inline constexpr double indiff_band = 1e-9;
inline constexpr double critical_slope = 1e-14;

struct Cycle {
	std::vector<Complex> points; // z_1, ..., z_q with f(z_i) = z_{i+1}
	int order = 0;
	Complex multiplier{0.0, 0.0};
	CycleKind kind = CycleKind::attracting;
	bool critical = false; // some f'(z_i) vanishes; unusable for deformation

	bool usable() const noexcept { return !critical; }
};

inline CycleKind classify(Complex lambda, double band = indiff_band) {
	require_finite(lambda, "classify");
	const double modulus = std::abs(lambda);
	if (modulus < 1.0 - band) return CycleKind::attracting;
	if (modulus > 1.0 + band) return CycleKind::repelling;
	return CycleKind::indifferent;
}

/// Chain-rule multiplier prod f'(z_i) of a numerical cycle.
inline Complex multiplier_of(const Germ& g, std::span<const Complex> points) {
	if (points.empty()) throw DomainError("multiplier_of: empty cycle");
	Complex product{1.0, 0.0};
	for (const auto& z : points) {
		require_finite(z, "multiplier_of");
		const Complex slope = g.slope(z);
		if (std::abs(slope) < critical_slope) throw DegenerateCycleError("multiplier_of: f' vanishes on the cycle");
		product *= slope;
	}
	return product;
}

struct CycleSearchDiagnostics {
	std::size_t seeds = 0;
	std::size_t non_converged = 0;
	std::size_t outside_domain = 0;
	std::size_t non_primitive = 0;
	std::size_t duplicates = 0;
};

struct CycleCensus {
	std::vector<Cycle> cycles;
	CycleSearchDiagnostics diagnostics;

	std::vector<Cycle> usable() const {
		std::vector<Cycle> out;
		for (const auto& c : cycles)
			if (c.usable()) out.push_back(c);
		return out;
	}
};

namespace detail {

// f^q(z) together with (f^q)'(z), without domain checks.
inline std::pair<Complex, Complex> iterate_with_slope(const Germ& g, Complex z, int q) noexcept {
	Complex slope{1.0, 0.0};
	for (int k = 0; k < q; ++k) {
		slope *= g.slope(z);
		z = g.value(z);
	}
	return {z, slope};
}

inline std::vector<Complex> cycle_seeds(double radius, int seed_grid) {
	std::vector<Complex> seeds;
	seeds.reserve(static_cast<std::size_t>(seed_grid) * seed_grid + 8 * 32);
	for (int iy = 0; iy < seed_grid; ++iy)
		for (int ix = 0; ix < seed_grid; ++ix) {
			const double x = -radius + (2.0 * ix + 1.0) * radius / seed_grid;
			const double y = -radius + (2.0 * iy + 1.0) * radius / seed_grid;
			seeds.emplace_back(x, y);
		}
	// High-order cycles cluster angularly near the origin.
	for (int c = 1; c <= 8; ++c)
		for (int k = 0; k < 32; ++k) seeds.push_back(std::polar(radius * c / 8.0, two_pi * (k + 0.5) / 32.0));
	return seeds;
}

inline std::optional<Complex> newton_periodic(const Germ& g, Complex z, int q) {
	const double escape = 1e6 * (1.0 + g.radius());
	for (int it = 0; it < max_newton_iters; ++it) {
		auto [fz, slope] = iterate_with_slope(g, z, q);
		const Complex residual = fz - z;
		const Complex dF = slope - 1.0;
		if (!is_finite(residual) || std::abs(dF) == 0.0) return std::nullopt;
		const Complex step = residual / dF;
		z -= step;
		if (!is_finite(z) || std::abs(z) > escape) return std::nullopt;
		if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(z))) {
			auto [fz2, unused] = iterate_with_slope(g, z, q);
			(void)unused;
			if (std::abs(fz2 - z) < 1e-10 * std::max(1.0, std::abs(z))) return z;
			return std::nullopt;
		}
	}
	auto [fz, unused] = iterate_with_slope(g, z, q);
	(void)unused;
	if (is_finite(fz) && std::abs(fz - z) < 1e-10 * std::max(1.0, std::abs(z))) return z;
	return std::nullopt;
}

// Sort key for deterministic ordering: modulus quantized to 1e-10, then argument.
inline std::tuple<std::int64_t, double> ordering_key(Complex z) {
	return {static_cast<std::int64_t>(std::llround(std::abs(z) * 1e10)), std::arg(z)};
}

} // namespace detail

/// All distinct primitive period-q cycles in U reachable by Newton from the
/// seed set, sorted by (|z_1|, arg z_1) with z_1 the smallest point of each cycle.
inline CycleCensus find_cycles(const Germ& g, int q, int seed_grid) {
	if (q < 1) throw DomainError("find_cycles: order must be positive");
	if (seed_grid < 1) throw DomainError("find_cycles: seed grid must be positive");
	CycleCensus census;
	const auto seeds = detail::cycle_seeds(g.radius(), seed_grid);
	census.diagnostics.seeds = seeds.size();

	std::vector<int> proper_divisors;
	for (int d = 1; d < q; ++d)
		if (q % d == 0) proper_divisors.push_back(d);

	for (const auto& seed : seeds) {
		const auto root = detail::newton_periodic(g, seed, q);
		if (!root) {
			++census.diagnostics.non_converged;
			continue;
		}
		std::vector<Complex> points{*root};
		for (int k = 1; k < q; ++k) points.push_back(g.value(points.back()));
		if (!std::all_of(points.begin(), points.end(), [&](Complex z) { return g.contains(z); })) {
			++census.diagnostics.outside_domain;
			continue;
		}
		const bool divides = std::any_of(proper_divisors.begin(), proper_divisors.end(), [&](int d) {
			return std::abs(detail::iterate_with_slope(g, *root, d).first - *root) < dedup_eps;
		});
		if (divides) {
			++census.diagnostics.non_primitive;
			continue;
		}
		const bool seen = std::any_of(census.cycles.begin(), census.cycles.end(), [&](const Cycle& c) {
			for (const auto& a : c.points)
				for (const auto& b : points)
					if (std::abs(a - b) < dedup_eps) return true;
			return false;
		});
		if (seen) {
			++census.diagnostics.duplicates;
			continue;
		}
		// Rotate so that z_1 is the smallest point under the ordering key.
		const auto first = std::min_element(points.begin(), points.end(), [](Complex a, Complex b) {
			return detail::ordering_key(a) < detail::ordering_key(b);
		});
		std::rotate(points.begin(), first, points.end());
		// Regenerate by forward iteration from the chosen z_1 so f(z_i) = z_{i+1} holds exactly as computed.
		for (int k = 1; k < q; ++k) points[k] = g.value(points[k - 1]);

		Cycle cycle;
		cycle.order = q;
		cycle.points = std::move(points);
		Complex product{1.0, 0.0};
		for (const auto& z : cycle.points) {
			const Complex slope = g.slope(z);
			if (std::abs(slope) < critical_slope) cycle.critical = true;
			product *= slope;
		}
		cycle.multiplier = product;
		cycle.kind = classify(product);
		census.cycles.push_back(std::move(cycle));
	}
	std::sort(census.cycles.begin(), census.cycles.end(), [](const Cycle& a, const Cycle& b) {
		return detail::ordering_key(a.points.front()) < detail::ordering_key(b.points.front());
	});
	return census;
}

/// Repelling, non-critical cycles of order q (the ones a deformation can act on).
inline std::vector<Cycle> repelling_cycles(const Germ& g, int q, int seed_grid) {
	std::vector<Cycle> out;
	for (auto& c : find_cycles(g, q, seed_grid).cycles)
		if (c.usable() && c.kind == CycleKind::repelling) out.push_back(std::move(c));
	return out;
}

} // namespace qcdeform
