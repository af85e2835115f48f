#include <qcdeform/diophantine.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace qcdeform;

namespace {

std::vector<long long> constant_quotients(long long a, std::size_t n) { return std::vector<long long>(n, a); }

} // namespace

TEST(Convergents, GoldenMeanIsFibonacciExactly) {
	const auto cf = convergents_of(constant_quotients(1, 80), 80);
	const auto fib = oracle::fibonacci_denominators(80);
	ASSERT_EQ(cf.convergents.size(), 80u);
	for (std::size_t k = 0; k < 80; ++k) {
		EXPECT_EQ(cf.convergents[k].q, BigInt(fib[k])) << k;
		// p_k = q_{k-1} for [0; 1, 1, ...].
		EXPECT_EQ(cf.convergents[k].p, k == 0 ? BigInt(1) : BigInt(fib[k - 1])) << k;
	}
}

TEST(Convergents, PellDenominators) {
	const auto cf = convergents_of(constant_quotients(2, 6), 6);
	const long long expected[] = {2, 5, 12, 29, 70, 169};
	for (int k = 0; k < 6; ++k) EXPECT_EQ(cf.convergents[k].q, BigInt(expected[k]));
}

TEST(Convergents, SingleQuotient) {
	const auto cf = convergents_of(std::vector<long long>{7}, 1);
	EXPECT_EQ(cf.convergents[0].p, BigInt(1));
	EXPECT_EQ(cf.convergents[0].q, BigInt(7));
}

TEST(Convergents, RecurrenceAndCoprimality) {
	std::vector<long long> a;
	for (int k = 1; k <= 40; ++k) a.push_back(k % 5 + 1);
	const auto cf = convergents_of(a, a.size());
	for (std::size_t k = 1; k < cf.convergents.size(); ++k) {
		EXPECT_GT(cf.convergents[k].q, cf.convergents[k - 1].q);
		EXPECT_EQ(boost::multiprecision::gcd(cf.convergents[k].p, cf.convergents[k].q), BigInt(1));
		// p_k q_{k-1} - p_{k-1} q_k = (-1)^{k-1}, 1-based k.
		const BigInt det = cf.convergents[k].p * cf.convergents[k - 1].q - cf.convergents[k - 1].p * cf.convergents[k].q;
		EXPECT_EQ(abs(det), BigInt(1));
	}
}

TEST(Convergents, RejectsBadInput) {
	EXPECT_THROW(convergents_of(std::vector<long long>{1, 0, 2}, 3), DomainError);
	EXPECT_THROW(convergents_of(std::vector<long long>{1, 2}, 3), DomainError);
}

TEST(LogBig, MatchesDoubleAndBitLength) {
	EXPECT_NEAR(log_big(BigInt(1000)), std::log(1000.0), 1e-15);
	BigInt big = 1;
	big <<= 5000;
	big *= 3;
	EXPECT_NEAR(log_big(big), 5000 * std::log(2.0) + std::log(3.0), 1e-9);
}

TEST(Cremer, GoldenMeanNotWitnessed) {
	const auto cf = convergents_of(constant_quotients(1, 40), 40);
	EXPECT_LT(cremer_margin(cf, 2, 20), 0.0);
	EXPECT_LT(cremer_margin(cf, 2, 39), 0.0);
}

TEST(Cremer, PolynomialGrowthNotWitnessed) {
	std::vector<long long> a;
	for (int k = 1; k <= 40; ++k) a.push_back(k);
	EXPECT_LT(cremer_margin(convergents_of(a, a.size()), 2, 20), 0.0);
}

TEST(Cremer, WindowMonotone) {
	std::vector<long long> a;
	for (int k = 1; k <= 30; ++k) a.push_back((k * 7) % 11 + 1);
	const auto cf = convergents_of(a, a.size());
	double previous = -std::numeric_limits<double>::infinity();
	for (std::size_t w = 1; w < 30; ++w) {
		const double m = cremer_margin(cf, 3, w);
		EXPECT_GE(m, previous);
		previous = m;
	}
}

TEST(Cremer, InsufficientData) {
	const auto cf = convergents_of(constant_quotients(1, 3), 3); // q = 1, 2, 3
	EXPECT_THROW(cremer_margin(cf, 2, 3), DomainError);
	EXPECT_THROW(cremer_margin(cf, 2, 0), DomainError);
	// Only n = 1 has q_{n+1} = 2 < 3 in this one-index window.
	EXPECT_THROW(cremer_margin(convergents_of(constant_quotients(1, 2), 2), 2, 1), DomainError);
	EXPECT_THROW(cremer_table(cf, 1), DomainError);
}

TEST(Cremer, TowerQuotients) {
	// a_2 = ceil(e^{e^2}), computed here in long double.
	const auto a = tower_quotients(1, 10);
	ASSERT_EQ(a.size(), 2u); // q_2 = 1619 makes a_3 astronomically large
	EXPECT_EQ(a[1], BigInt(static_cast<long long>(std::ceil(std::exp(std::exp(2.0L))))));
	const auto b = tower_quotients(2, 10);
	ASSERT_EQ(b.size(), 2u);
	const long double bound = std::exp(std::exp(4.0L));
	const long double a2 = b[1].convert_to<long double>();
	EXPECT_GE(2.0L * a2, bound);
	EXPECT_LT(2.0L * a2, bound + 2.0L + bound * 1e-15L);
}

TEST(Cremer, TowerMarginPositiveAtEveryIndex) {
	for (long long first : {1, 2}) {
		const auto a = tower_quotients(first, 10);
		const auto cf = convergents_of(a, a.size());
		const auto rows = cremer_table(cf, 2);
		ASSERT_FALSE(rows.empty());
		for (const auto& row : rows) {
			ASSERT_TRUE(row.margin.has_value());
			EXPECT_GT(*row.ratio, 2.0 - 1e-12);
			EXPECT_GT(*row.margin, 0.0);
		}
		EXPECT_GT(cremer_margin(cf, 2, rows.size()), 0.0);
	}
}
