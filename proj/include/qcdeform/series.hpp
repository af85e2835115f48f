#pragma once

// Truncated complex power series sum_{k=0}^{M} s_k h^k stored densely.

#include <qcdeform/errors.hpp>

#include <span>
#include <vector>

namespace qcdeform::series {

using Series = std::vector<Complex>;

inline Series multiply(std::span<const Complex> a, std::span<const Complex> b, std::size_t order) {
	Series out(order + 1, Complex{0.0, 0.0});
	for (std::size_t i = 0; i < a.size() && i <= order; ++i) {
		if (a[i] == Complex{0.0, 0.0}) continue;
		for (std::size_t j = 0; j < b.size() && i + j <= order; ++j) out[i + j] += a[i] * b[j];
	}
	return out;
}

/// Taylor coefficients of the polynomial sum_{k>=1} c_k z^k (coeffs[0] = c_1)
/// about `center`, truncated to `order`.
inline Series taylor_shift(std::span<const Complex> coeffs, Complex center, std::size_t order) {
	// Dense coefficients with the zero constant term, then synthetic division
	// (repeated Horner) to re-expand about the center.
	Series p(coeffs.size() + 1, Complex{0.0, 0.0});
	for (std::size_t k = 0; k < coeffs.size(); ++k) p[k + 1] = coeffs[k];
	const std::size_t n = p.size() - 1;
	for (std::size_t i = 0; i < n; ++i)
		for (std::size_t k = n - 1; k + 1 > i; --k) {
			p[k] += center * p[k + 1];
			if (k == 0) break;
		}
	p.resize(order + 1, Complex{0.0, 0.0});
	return p;
}

/// outer(inner(h)) for inner with zero constant term.
inline Series compose(std::span<const Complex> outer, std::span<const Complex> inner, std::size_t order) {
	Series result(order + 1, Complex{0.0, 0.0});
	for (std::size_t k = outer.size(); k-- > 0;) {
		result = multiply(result, inner, order);
		result[0] += outer[k];
	}
	return result;
}

inline Complex evaluate(std::span<const Complex> s, Complex h) noexcept {
	Complex acc{0.0, 0.0};
	for (auto it = s.rbegin(); it != s.rend(); ++it) acc = acc * h + *it;
	return acc;
}

inline Complex evaluate_derivative(std::span<const Complex> s, Complex h) noexcept {
	Complex acc{0.0, 0.0};
	for (std::size_t k = s.size(); k-- > 1;) acc = acc * h + static_cast<double>(k) * s[k];
	return acc;
}

/// Multiplicative inverse 1/s of a series with s_0 != 0.
inline Series reciprocal(std::span<const Complex> s, std::size_t order) {
	if (s.empty() || s[0] == Complex{0.0, 0.0}) throw SingularError("series::reciprocal: zero constant term");
	Series out(order + 1, Complex{0.0, 0.0});
	out[0] = 1.0 / s[0];
	for (std::size_t k = 1; k <= order; ++k) {
		Complex acc{0.0, 0.0};
		for (std::size_t j = 1; j <= k && j < s.size(); ++j) acc += s[j] * out[k - j];
		out[k] = -acc / s[0];
	}
	return out;
}

/// Compositional inverse t of s (s_0 = 0, s_1 != 0) by Lagrange inversion:
/// t_n = (1/n) [h^{n-1}] (h / s(h))^n.
inline Series revert(std::span<const Complex> s, std::size_t order) {
	if (s.size() < 2 || s[1] == Complex{0.0, 0.0}) throw SingularError("series::revert: zero linear term");
	const Series shifted(s.begin() + 1, s.end()); // s(h) / h
	const Series quotient = reciprocal(shifted, order);
	Series out(order + 1, Complex{0.0, 0.0});
	Series power{Complex{1.0, 0.0}};
	for (std::size_t n = 1; n <= order; ++n) {
		power = multiply(power, quotient, order);
		out[n] = power[n - 1] / static_cast<double>(n);
	}
	return out;
}

} // namespace qcdeform::series
