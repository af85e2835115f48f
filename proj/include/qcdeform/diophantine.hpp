#pragma once

// Continued fractions with exact convergents, and a windowed finite-data
// version of the Cremer condition limsup (log log q_{n+1}) / q_n > log d.

#include <qcdeform/errors.hpp>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

namespace qcdeform {

using BigInt = boost::multiprecision::cpp_int;

struct Convergent {
	BigInt p;
	BigInt q;
};

/// alpha = [0; a_1, a_2, ...]; convergents[k - 1] = p_k / q_k.
struct ContinuedFraction {
	std::vector<BigInt> partial_quotients;
	std::vector<Convergent> convergents;
};

inline ContinuedFraction convergents_of(const std::vector<BigInt>& quotients, std::size_t n) {
	if (n > quotients.size()) throw DomainError("convergents_of: fewer quotients than requested convergents");
	ContinuedFraction cf;
	cf.partial_quotients.assign(quotients.begin(), quotients.begin() + static_cast<std::ptrdiff_t>(n));
	// p_{-1} = 1, p_0 = 0, q_{-1} = 0, q_0 = 1.
	BigInt p_prev = 1, p = 0, q_prev = 0, q = 1;
	for (const auto& a : cf.partial_quotients) {
		if (a <= 0) throw DomainError("convergents_of: partial quotients must be positive");
		BigInt p_next = a * p + p_prev, q_next = a * q + q_prev;
		p_prev = std::move(p), p = std::move(p_next);
		q_prev = std::move(q), q = std::move(q_next);
		cf.convergents.push_back({p, q});
	}
	return cf;
}

inline ContinuedFraction convergents_of(const std::vector<long long>& quotients, std::size_t n) {
	return convergents_of(std::vector<BigInt>(quotients.begin(), quotients.end()), n);
}

/// Natural log of a positive big integer from its bit length and top 53 bits.
inline double log_big(const BigInt& x) {
	if (x <= 0) throw DomainError("log_big: argument must be positive");
	const std::size_t bits = boost::multiprecision::msb(x) + 1;
	if (bits <= 53) return std::log(x.convert_to<double>());
	const std::size_t shift = bits - 53;
	const BigInt top = x >> shift;
	return std::log(top.convert_to<double>()) + static_cast<double>(shift) * std::numbers::ln2;
}

struct CremerRow {
	std::size_t n = 0;         // 1-based convergent index
	BigInt q;                  // q_n
	std::optional<double> ratio; // log log q_{n+1} / q_n, empty when q_{n+1} < 3
	std::optional<double> margin; // ratio - log d
};

/// One row per n with q_{n+1} available.
inline std::vector<CremerRow> cremer_table(const ContinuedFraction& cf, int d) {
	if (d < 2) throw DomainError("cremer_table: degree must be at least 2");
	std::vector<CremerRow> rows;
	const auto& c = cf.convergents;
	for (std::size_t k = 0; k + 1 < c.size(); ++k) {
		CremerRow row{k + 1, c[k].q, std::nullopt, std::nullopt};
		if (c[k + 1].q >= 3) {
			// q_n beyond double range sends the ratio to 0, which is what it is to 1e-308.
			const double qn = c[k].q.convert_to<double>();
			row.ratio = std::log(log_big(c[k + 1].q)) / qn;
			row.margin = *row.ratio - std::log(static_cast<double>(d));
		}
		rows.push_back(std::move(row));
	}
	return rows;
}

/// max over the last `window` indices n of (log log q_{n+1}) / q_n, minus log d.
/// A positive value only witnesses the condition inside the window.
inline double cremer_margin(const ContinuedFraction& cf, int d, std::size_t window) {
	if (window < 1) throw DomainError("cremer_margin: window must be positive");
	if (cf.convergents.size() < window + 1) throw DomainError("cremer_margin: need at least window + 1 convergents");
	const auto rows = cremer_table(cf, d);
	std::optional<double> best;
	for (std::size_t k = rows.size() - window; k < rows.size(); ++k)
		if (rows[k].margin && (!best || *rows[k].margin > *best)) best = rows[k].margin;
	if (!best) throw DomainError("cremer_margin: every index in the window has q_{n+1} < 3");
	return *best;
}

/// Quotients a_1 = first, a_{n+1} = ceil(exp(exp(2 q_n)) / q_n), so that
/// q_{n+1} >= exp(exp(2 q_n)). Stops before the first quotient that cannot be
/// held exactly (exp(2 q_n) above `max_log`), or at max_count.
inline std::vector<BigInt> tower_quotients(const BigInt& first, std::size_t max_count, double max_log = 200.0) {
	using Float = boost::multiprecision::cpp_bin_float_100;
	if (first <= 0) throw DomainError("tower_quotients: first quotient must be positive");
	std::vector<BigInt> a{first};
	BigInt q_prev = 1, q = first; // q_0, q_1
	while (a.size() < max_count) {
		const double inner = 2.0 * q.convert_to<double>();
		if (std::exp(inner) > max_log) break;
		const Float target = boost::multiprecision::exp(boost::multiprecision::exp(Float(inner))) / Float(q);
		BigInt next = boost::multiprecision::ceil(target).convert_to<BigInt>();
		BigInt q_next = next * q + q_prev;
		a.push_back(std::move(next));
		q_prev = std::move(q);
		q = std::move(q_next);
	}
	return a;
}

} // namespace qcdeform
