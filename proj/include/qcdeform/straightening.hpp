#pragma once

// Numerical straightening of a Beltrami coefficient on a square box.
//
// The normalized solution of dbar h = mu dh is written h = z + C rho, where C is
// the Cauchy transform and rho solves rho = mu (1 + S rho) with S the Beurling
// transform. On an N x N cell-centered grid both operators are discrete
// convolutions whose kernels are the exact integrals of 1/v and 1/v^2 over one
// cell; they are applied by zero-padded (free-space) FFT convolution, so rho is
// not periodized. An affine post-composition then fixes 0 and 1.

#include <qcdeform/beltrami.hpp>
#include <qcdeform/fft.hpp>
#include <qcdeform/local_conjugacy.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace qcdeform {

/// Cell-centered N x N grid on the square |Re(z - c)|, |Im(z - c)| <= half_width.
struct GridGeometry {
	int N = 0;
	Complex center{0.0, 0.0};
	double half_width = 1.0;

	double cell() const noexcept { return 2.0 * half_width / N; }
	std::size_t count() const noexcept { return static_cast<std::size_t>(N) * N; }
	std::size_t index(int row, int col) const noexcept { return static_cast<std::size_t>(row) * N + col; }
	Complex node(int row, int col) const noexcept {
		return center + Complex{-half_width + (col + 0.5) * cell(), -half_width + (row + 0.5) * cell()};
	}
	/// Fractional (col, row) coordinates; node (r, c) sits at exactly (c, r).
	std::pair<double, double> fractional(Complex z) const noexcept {
		const Complex d = z - center;
		return {(d.real() + half_width) / cell() - 0.5, (d.imag() + half_width) / cell() - 0.5};
	}
	bool in_frame(int row, int col, double frame) const noexcept {
		const Complex d = node(row, col) - center;
		const double inner = (1.0 - frame) * half_width;
		return std::abs(d.real()) > inner || std::abs(d.imag()) > inner;
	}
};

inline void validate(const GridGeometry& geo) {
	if (geo.N < 8) throw DomainError("GridGeometry: N must be at least 8");
	require_finite(geo.center, "GridGeometry center");
	if (!std::isfinite(geo.half_width) || geo.half_width <= 0.0)
		throw DomainError("GridGeometry: half width must be positive");
}

struct SolverConfig {
	int N = 1024;
	std::optional<double> half_width; // default 2 radius_U for germ pipelines
	Complex center{0.0, 0.0};
	double tol = 1e-8;  // L2 change between sweeps
	int max_sweeps = 200;
	double frame = 0.05; // fraction of the half width where mu is forced to 0
};

inline constexpr double mu_sup_bound = 1.0 - 1e-3;

struct SolverDiagnostics {
	int sweeps = 0;
	std::vector<double> changes; // L2 change per sweep
	double sup_mu = 0.0;
	Complex h_zero_raw{0.0, 0.0}; // z + C rho at 0 and 1 before normalization
	Complex h_one_raw{1.0, 0.0};
	double min_jacobian = 0.0; // min over interior nodes of |h_z|^2 - |h_zbar|^2

	double final_change() const { return changes.empty() ? 0.0 : changes.back(); }
};

namespace detail {

inline constexpr std::array<double, 4> gauss_nodes{-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                                   0.8611363115940526};
inline constexpr std::array<double, 4> gauss_weights{0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                                     0.3478548451374538};

template <class Fn>
Complex gauss_rectangle(double x0, double x1, double y0, double y1, Fn&& fn) {
	const double hx = 0.5 * (x1 - x0), hy = 0.5 * (y1 - y0);
	const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
	Complex acc{0.0, 0.0};
	for (int i = 0; i < 4; ++i)
		for (int j = 0; j < 4; ++j)
			acc += gauss_weights[i] * gauss_weights[j] * fn(Complex{cx + hx * gauss_nodes[i], cy + hy * gauss_nodes[j]});
	return acc * (hx * hy);
}

inline bool far_rectangle(double x0, double x1, double y0, double y1) {
	const double size = std::max(x1 - x0, y1 - y0);
	return std::hypot(0.5 * (x0 + x1), 0.5 * (y0 + y1)) > 16.0 * size;
}

// G(v) = -i (v Log v - v): mixed antiderivative of 1/v in the closed right half plane.
inline Complex inverse_antiderivative(Complex v) {
	if (v == Complex{0.0, 0.0}) return {0.0, 0.0};
	return Complex{0.0, -1.0} * (v * std::log(v) - v);
}

inline Complex inverse_integral_quadrant(double x0, double x1, double y0, double y1) {
	if (x1 <= 0.0) return -inverse_integral_quadrant(-x1, -x0, -y1, -y0); // 1/v is odd
	auto G = [](double x, double y) { return inverse_antiderivative(Complex{x, y}); };
	return G(x1, y1) - G(x1, y0) - G(x0, y1) + G(x0, y0);
}

} // namespace detail

/// Integral of 1/v over the rectangle [x0, x1] x [y0, y1] (integrable if it contains 0).
inline Complex integral_of_inverse(double x0, double x1, double y0, double y1) {
	if (detail::far_rectangle(x0, x1, y0, y1))
		return detail::gauss_rectangle(x0, x1, y0, y1, [](Complex v) { return 1.0 / v; });
	// Split along the axes so that every piece lies in a closed quadrant.
	std::vector<std::pair<double, double>> xs{{x0, x1}}, ys{{y0, y1}};
	if (x0 < 0.0 && x1 > 0.0) xs = {{x0, 0.0}, {0.0, x1}};
	if (y0 < 0.0 && y1 > 0.0) ys = {{y0, 0.0}, {0.0, y1}};
	Complex acc{0.0, 0.0};
	for (const auto& [a, b] : xs)
		for (const auto& [c, d] : ys) acc += detail::inverse_integral_quadrant(a, b, c, d);
	return acc;
}

/// Principal-value integral of 1/v^2 over a rectangle whose edges avoid 0; 0 for
/// a rectangle centered at 0.
inline Complex integral_of_inverse_square(double x0, double x1, double y0, double y1) {
	if (x0 < 0.0 && x1 > 0.0 && y0 < 0.0 && y1 > 0.0) {
		if (std::abs(x0 + x1) > 1e-12 * (x1 - x0) || std::abs(y0 + y1) > 1e-12 * (y1 - y0))
			throw DomainError("integral_of_inverse_square: principal value needs a centered cell");
		return {0.0, 0.0};
	}
	if (detail::far_rectangle(x0, x1, y0, y1))
		return detail::gauss_rectangle(x0, x1, y0, y1, [](Complex v) { return 1.0 / (v * v); });
	// Integrate -1/v in x, then dy / (x + iy) = -i dLog along each vertical edge.
	const Complex i{0.0, 1.0};
	auto edge = [](double x, double ya, double yb) { return std::log(Complex{x, yb} / Complex{x, ya}); };
	return i * (edge(x1, y0, y1) - edge(x0, y0, y1));
}

/// Discrete Cauchy and Beurling operators on one grid geometry, applied by
/// zero-padded FFT convolution. Kernels are built once; reuse across solves.
class BeurlingSolver {
  public:
	explicit BeurlingSolver(GridGeometry geo)
	    : m_geo(geo), m_padded(2 * geo.N), m_cauchy(2 * geo.N), m_beurling(2 * geo.N), m_work(2 * geo.N) {
		validate(m_geo);
		build_kernels();
	}

	const GridGeometry& geometry() const noexcept { return m_geo; }

	void apply_cauchy(std::span<const Complex> x, std::span<Complex> out) { convolve(x, m_cauchy, out); }
	void apply_beurling(std::span<const Complex> x, std::span<Complex> out) { convolve(x, m_beurling, out); }

  private:
	void build_kernels() {
		const int N = m_geo.N, M = m_padded;
		const double s = m_geo.cell();
		const double inv_pi = 1.0 / std::numbers::pi;
		m_cauchy.clear();
		m_beurling.clear();
		// Offsets (m, n) = (col, row) differences in [-(N-1), N-1]; C is odd and S even.
		for (int n = -(N - 1); n <= N - 1; ++n)
			for (int m = 0; m <= N - 1; ++m) {
				if (m == 0 && n < 0) continue;
				const double x0 = (m - 0.5) * s, x1 = (m + 0.5) * s, y0 = (n - 0.5) * s, y1 = (n + 0.5) * s;
				const Complex kc = (m == 0 && n == 0) ? Complex{0.0, 0.0} : inv_pi * integral_of_inverse(x0, x1, y0, y1);
				const Complex ks = -inv_pi * integral_of_inverse_square(x0, x1, y0, y1);
				const int r = (n + M) % M, c = (m + M) % M;
				const int rr = (-n + M) % M, cc = (-m + M) % M;
				m_cauchy.at(r, c) = kc;
				m_beurling.at(r, c) = ks;
				m_cauchy.at(rr, cc) = -kc;
				m_beurling.at(rr, cc) = ks;
			}
		m_cauchy.forward();
		m_beurling.forward();
		const double scale = 1.0 / (static_cast<double>(M) * M);
		for (auto& v : m_cauchy.values()) v *= scale;
		for (auto& v : m_beurling.values()) v *= scale;
	}

	void convolve(std::span<const Complex> x, const fft::Buffer2D& kernel_hat, std::span<Complex> out) {
		const int N = m_geo.N;
		if (x.size() != m_geo.count() || out.size() != m_geo.count())
			throw DomainError("BeurlingSolver: field size does not match the grid");
		m_work.clear();
		for (int r = 0; r < N; ++r)
			std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(r) * N, N, m_work.values().begin() + static_cast<std::ptrdiff_t>(r) * m_padded);
		m_work.forward();
		auto w = m_work.values();
		auto k = kernel_hat.values();
		for (std::size_t i = 0; i < w.size(); ++i) w[i] *= k[i];
		m_work.backward();
		for (int r = 0; r < N; ++r)
			std::copy_n(m_work.values().begin() + static_cast<std::ptrdiff_t>(r) * m_padded, N,
			            out.begin() + static_cast<std::ptrdiff_t>(r) * N);
	}

	GridGeometry m_geo;
	int m_padded;
	fft::Buffer2D m_cauchy;
	fft::Buffer2D m_beurling;
	fft::Buffer2D m_work;
};

/// A solved, normalized quasi-conformal map sampled at the cell centers.
class GridMap {
  public:
	GridMap(GridGeometry geo, std::vector<Complex> samples, std::vector<Complex> rho, std::vector<Complex> mu,
	        Complex offset, Complex scale, SolverDiagnostics diagnostics)
	    : m_geo(geo), m_samples(std::move(samples)), m_rho(std::move(rho)), m_mu(std::move(mu)), m_offset(offset),
	      m_scale(scale), m_diag(std::move(diagnostics)) {
		for (std::size_t i = 0; i < m_rho.size(); ++i)
			if (m_rho[i] != Complex{0.0, 0.0}) m_support.push_back(i);
	}

	const GridGeometry& geometry() const noexcept { return m_geo; }
	std::span<const Complex> samples() const noexcept { return m_samples; }
	std::span<const Complex> rho() const noexcept { return m_rho; }
	std::span<const Complex> mu_input() const noexcept { return m_mu; }
	const SolverDiagnostics& diagnostics() const noexcept { return m_diag; }
	Complex sample(int row, int col) const { return m_samples[m_geo.index(row, col)]; }

	/// True where bicubic interpolation of the samples is used.
	bool interpolable(Complex z) const noexcept {
		const auto [fx, fy] = m_geo.fractional(z);
		return fx >= 1.0 && fy >= 1.0 && fx <= m_geo.N - 2.0 && fy <= m_geo.N - 2.0;
	}

	/// h(z): bicubic inside the grid, direct quadrature of z + C rho elsewhere.
	Complex operator()(Complex z) const {
		require_finite(z, "GridMap");
		if (interpolable(z)) return interpolate(z).value;
		return eval_direct(z);
	}

	/// (z + sum_q rho_q (1/pi) int_cell 1/(z - u) - offset) / scale, exact per cell.
	Complex eval_direct(Complex z) const {
		const double half = 0.5 * m_geo.cell();
		Complex acc = z;
		for (std::size_t idx : m_support) {
			const int row = static_cast<int>(idx / m_geo.N), col = static_cast<int>(idx % m_geo.N);
			const Complex d = z - m_geo.node(row, col);
			acc += m_rho[idx] * integral_of_inverse(d.real() - half, d.real() + half, d.imag() - half, d.imag() + half) /
			       std::numbers::pi;
		}
		return (acc - m_offset) / m_scale;
	}

	struct Interpolated {
		Complex value;
		Complex d_dx; // derivatives with respect to Re z and Im z
		Complex d_dy;
	};

	Interpolated interpolate(Complex z) const {
		const auto [fx, fy] = m_geo.fractional(z);
		const int N = m_geo.N;
		const int c0 = std::clamp(static_cast<int>(std::floor(fx)) - 1, 0, N - 4);
		const int r0 = std::clamp(static_cast<int>(std::floor(fy)) - 1, 0, N - 4);
		double wx[4], dwx[4], wy[4], dwy[4];
		lagrange(fx - c0, wx, dwx);
		lagrange(fy - r0, wy, dwy);
		Interpolated out{{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}};
		for (int a = 0; a < 4; ++a)
			for (int b = 0; b < 4; ++b) {
				const Complex v = m_samples[m_geo.index(r0 + a, c0 + b)];
				out.value += wy[a] * wx[b] * v;
				out.d_dx += wy[a] * dwx[b] * v;
				out.d_dy += dwy[a] * wx[b] * v;
			}
		out.d_dx /= m_geo.cell();
		out.d_dy /= m_geo.cell();
		return out;
	}

	/// h^{-1}(w): coarse grid search, neighbour descent, then Newton on the interpolant.
	Complex inverse(Complex w) const {
		require_finite(w, "GridMap::inverse");
		const int N = m_geo.N;
		const int stride = std::max(1, N / 64);
		int best_r = 0, best_c = 0;
		double best = std::numeric_limits<double>::infinity();
		for (int r = stride / 2; r < N; r += stride)
			for (int c = stride / 2; c < N; c += stride) {
				const double d = std::abs(sample(r, c) - w);
				if (d < best) best = d, best_r = r, best_c = c;
			}
		for (bool moved = true; moved;) {
			moved = false;
			for (int dr = -1; dr <= 1; ++dr)
				for (int dc = -1; dc <= 1; ++dc) {
					const int r = best_r + dr, c = best_c + dc;
					if (r < 0 || c < 0 || r >= N || c >= N) continue;
					const double d = std::abs(sample(r, c) - w);
					if (d < best) best = d, best_r = r, best_c = c, moved = true;
				}
		}
		Complex z = m_geo.node(best_r, best_c);
		const double tol = 1e-13 * std::max(1.0, std::abs(w));
		double residual = std::numeric_limits<double>::infinity();
		for (int it = 0; it < 30; ++it) {
			const auto [value, dx, dy] = local_jet(z);
			const Complex r = w - value;
			residual = std::abs(r);
			if (residual <= tol) return z;
			// Real 2x2 Newton system for (u, v) = h(x, y).
			const double a = dx.real(), b = dy.real(), c = dx.imag(), d = dy.imag();
			const double det = a * d - b * c;
			if (!(std::abs(det) > 0.0)) throw SingularError("GridMap::inverse: vanishing Jacobian");
			const double sx = (d * r.real() - b * r.imag()) / det;
			const double sy = (-c * r.real() + a * r.imag()) / det;
			z += Complex{sx, sy};
			if (!is_finite(z)) break;
		}
		const auto jet = local_jet(z);
		residual = std::abs(w - jet.value);
		if (residual <= 1e-10 * std::max(1.0, std::abs(w))) return z;
		throw ConvergenceError("GridMap::inverse: Newton on the interpolant did not converge", residual);
	}

  private:
	static void lagrange(double t, double* w, double* dw) {
		w[0] = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
		w[1] = t * (t - 2.0) * (t - 3.0) / 2.0;
		w[2] = -t * (t - 1.0) * (t - 3.0) / 2.0;
		w[3] = t * (t - 1.0) * (t - 2.0) / 6.0;
		dw[0] = -(3.0 * t * t - 12.0 * t + 11.0) / 6.0;
		dw[1] = (3.0 * t * t - 10.0 * t + 6.0) / 2.0;
		dw[2] = -(3.0 * t * t - 8.0 * t + 3.0) / 2.0;
		dw[3] = (3.0 * t * t - 6.0 * t + 2.0) / 6.0;
	}

	Interpolated local_jet(Complex z) const {
		if (interpolable(z)) return interpolate(z);
		const double h = 1e-6 * m_geo.cell();
		return {eval_direct(z), (eval_direct(z + h) - eval_direct(z - h)) / (2.0 * h),
		        (eval_direct(z + Complex{0.0, h}) - eval_direct(z - Complex{0.0, h})) / (2.0 * h)};
	}

	GridGeometry m_geo;
	std::vector<Complex> m_samples;
	std::vector<Complex> m_rho;
	std::vector<Complex> m_mu;
	Complex m_offset;
	Complex m_scale;
	SolverDiagnostics m_diag;
	std::vector<std::size_t> m_support;
};

namespace detail {

// Fourth-order central differences of the samples at a node.
inline std::pair<Complex, Complex> node_derivatives(const GridMap& map, int row, int col) {
	const double s = map.geometry().cell();
	auto d4 = [&](Complex m2, Complex m1, Complex p1, Complex p2) { return (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * s); };
	const Complex hx = d4(map.sample(row, col - 2), map.sample(row, col - 1), map.sample(row, col + 1), map.sample(row, col + 2));
	const Complex hy = d4(map.sample(row - 2, col), map.sample(row - 1, col), map.sample(row + 1, col), map.sample(row + 2, col));
	return {hx, hy};
}

inline double min_jacobian(const GridGeometry& geo, std::span<const Complex> h) {
	const double s = geo.cell();
	double worst = std::numeric_limits<double>::infinity();
	for (int r = 1; r + 1 < geo.N; ++r)
		for (int c = 1; c + 1 < geo.N; ++c) {
			const Complex hx = (h[geo.index(r, c + 1)] - h[geo.index(r, c - 1)]) / (2.0 * s);
			const Complex hy = (h[geo.index(r + 1, c)] - h[geo.index(r - 1, c)]) / (2.0 * s);
			const Complex dz = 0.5 * (hx - Complex{0.0, 1.0} * hy);
			const Complex dzbar = 0.5 * (hx + Complex{0.0, 1.0} * hy);
			worst = std::min(worst, std::norm(dz) - std::norm(dzbar));
		}
	return worst;
}

} // namespace detail

/// Beltrami coefficient (dbar h)/(dh) of the sampled map at the node nearest z,
/// from fourth-order central differences (needs two nodes on every side).
inline Complex beltrami_of(const GridMap& map, Complex z) {
	require_finite(z, "beltrami_of");
	const auto& geo = map.geometry();
	const auto [fx, fy] = geo.fractional(z);
	const int col = static_cast<int>(std::lround(fx)), row = static_cast<int>(std::lround(fy));
	if (row < 2 || col < 2 || row > geo.N - 3 || col > geo.N - 3)
		throw DomainError("beltrami_of: point within two cells of the grid boundary");
	const auto [hx, hy] = detail::node_derivatives(map, row, col);
	const Complex i{0.0, 1.0};
	const Complex dz = 0.5 * (hx - i * hy);
	const Complex dzbar = 0.5 * (hx + i * hy);
	if (std::abs(dz) < 1e-10) throw SingularError("beltrami_of: degenerate cell (|dh| below 1e-10)");
	return dzbar / dz;
}

/// Solves dbar h = mu dh for mu sampled at the nodes of the solver's grid.
inline GridMap solve_beltrami(BeurlingSolver& solver, std::vector<Complex> mu, double tol = 1e-8,
                              int max_sweeps = 200, double frame = 0.05) {
	const GridGeometry& geo = solver.geometry();
	if (mu.size() != geo.count()) throw DomainError("solve_beltrami: mu does not match the grid");
	if (!(tol > 0.0) || max_sweeps < 1) throw DomainError("solve_beltrami: bad tolerance or sweep budget");
	SolverDiagnostics diag;
	for (int r = 0; r < geo.N; ++r)
		for (int c = 0; c < geo.N; ++c) {
			Complex& m = mu[geo.index(r, c)];
			require_finite(m, "solve_beltrami mu");
			if (geo.in_frame(r, c, frame)) m = 0.0;
			diag.sup_mu = std::max(diag.sup_mu, std::abs(m));
		}
	if (diag.sup_mu > mu_sup_bound) throw DomainError("solve_beltrami: sup |mu| exceeds 1 - 1e-3");

	const double area = geo.cell() * geo.cell();
	std::vector<Complex> rho(geo.count(), Complex{0.0, 0.0}), s_rho(geo.count());
	int growth = 0;
	for (int sweep = 1;; ++sweep) {
		solver.apply_beurling(rho, s_rho);
		double change = 0.0;
		for (std::size_t i = 0; i < rho.size(); ++i) {
			const Complex next = mu[i] * (1.0 + s_rho[i]);
			change += std::norm(next - rho[i]);
			rho[i] = next;
		}
		change = std::sqrt(change * area);
		if (!std::isfinite(change)) throw ConvergenceError("solve_beltrami: non-finite iterate", change);
		if (!diag.changes.empty() && change > diag.changes.back()) ++growth;
		else growth = 0;
		diag.changes.push_back(change);
		diag.sweeps = sweep;
		if (change < tol) break;
		if (growth >= 10) throw ConvergenceError("solve_beltrami: Neumann iteration is not contracting", change);
		if (sweep >= max_sweeps)
			throw ConvergenceError("solve_beltrami: sweep budget exhausted at L2 change " + std::to_string(change),
			                       change);
	}

	std::vector<Complex> h(geo.count());
	solver.apply_cauchy(rho, h);
	for (int r = 0; r < geo.N; ++r)
		for (int c = 0; c < geo.N; ++c) h[geo.index(r, c)] += geo.node(r, c);

	// Normalization uses the exact quadrature so that h(0) = 0 and h(1) = 1 hold to rounding.
	const GridMap raw(geo, {}, rho, {}, 0.0, 1.0, {});
	diag.h_zero_raw = raw.eval_direct(0.0);
	diag.h_one_raw = raw.eval_direct(1.0);
	const Complex scale = diag.h_one_raw - diag.h_zero_raw;
	if (std::abs(scale) < 1e-12) throw SingularError("solve_beltrami: h(1) = h(0)");
	for (auto& v : h) v = (v - diag.h_zero_raw) / scale;
	diag.min_jacobian = detail::min_jacobian(geo, h);
	return GridMap(geo, std::move(h), std::move(rho), std::move(mu), diag.h_zero_raw, scale, std::move(diag));
}

/// Convenience overload building a one-off solver.
template <class Field>
GridMap solve_beltrami(const GridGeometry& geo, Field&& mu_at, const SolverConfig& cfg = {}) {
	BeurlingSolver solver(geo);
	std::vector<Complex> mu(geo.count());
	for (int r = 0; r < geo.N; ++r)
		for (int c = 0; c < geo.N; ++c) mu[geo.index(r, c)] = mu_at(geo.node(r, c));
	return solve_beltrami(solver, std::move(mu), cfg.tol, cfg.max_sweeps, cfg.frame);
}

struct BeltramiResidual {
	double median = 0.0;
	double p95 = 0.0;
	double max = 0.0;
	double l2 = 0.0;
	std::size_t points = 0;
};

/// Pointwise |beltrami_of(h) - mu| over nodes two cells away from the grid edge.
inline BeltramiResidual beltrami_residual(const GridMap& map, bool support_only = false) {
	const auto& geo = map.geometry();
	std::vector<double> errors;
	double l2 = 0.0;
	for (int r = 2; r < geo.N - 2; ++r)
		for (int c = 2; c < geo.N - 2; ++c) {
			const Complex mu = map.mu_input()[geo.index(r, c)];
			if (support_only && mu == Complex{0.0, 0.0}) continue;
			const double e = std::abs(beltrami_of(map, geo.node(r, c)) - mu);
			errors.push_back(e);
			l2 += e * e;
		}
	BeltramiResidual out;
	out.points = errors.size();
	if (errors.empty()) return out;
	std::sort(errors.begin(), errors.end());
	out.median = errors[errors.size() / 2];
	out.p95 = errors[static_cast<std::size_t>(0.95 * (errors.size() - 1))];
	out.max = errors.back();
	out.l2 = std::sqrt(l2 * geo.cell() * geo.cell());
	return out;
}

/// mu_Lambda sampled at every node, with the per-node unit factors so that the
/// field for other target multipliers can be re-assembled without new orbits.
struct FieldSampling {
	GridGeometry geometry;
	std::vector<int> entry;        // claiming entry per node, -1 if none
	std::vector<Complex> rotation; // mu = mu_K[entry] * rotation
	std::size_t inside_chart = 0, transported = 0, no_basin = 0, escaped = 0, newton_failures = 0, overlaps = 0;

	std::vector<Complex> assemble(std::span<const Complex> mu_K) const {
		std::vector<Complex> mu(entry.size(), Complex{0.0, 0.0});
		for (std::size_t i = 0; i < entry.size(); ++i)
			if (entry[i] >= 0) mu[i] = mu_K[entry[i]] * rotation[i];
		return mu;
	}
};

inline FieldSampling sample_field(const BeltramiFieldSpec& spec, const GridGeometry& geo) {
	FieldSampling out{geo, std::vector<int>(geo.count(), -1), std::vector<Complex>(geo.count(), Complex{0.0, 0.0})};
	if (spec.entries().empty()) return out;
	for (int r = 0; r < geo.N; ++r)
		for (int c = 0; c < geo.N; ++c) {
			const Complex z = geo.node(r, c);
			if (!spec.germ().contains(z)) continue;
			const auto probe = probe_field(spec, z);
			out.overlaps += probe.overlaps;
			switch (probe.status) {
			case ProbeStatus::inside_chart: ++out.inside_chart; break;
			case ProbeStatus::transported: ++out.transported; break;
			case ProbeStatus::no_basin: ++out.no_basin; break;
			case ProbeStatus::escaped: ++out.escaped; break;
			case ProbeStatus::newton_failure: ++out.newton_failures; break;
			}
			if (probe.entry >= 0 && (probe.status == ProbeStatus::inside_chart || probe.status == ProbeStatus::transported)) {
				out.entry[geo.index(r, c)] = probe.entry;
				out.rotation[geo.index(r, c)] = probe.rotation;
			}
		}
	return out;
}

inline std::vector<Complex> shear_values(const BeltramiFieldSpec& spec) {
	std::vector<Complex> mu_K;
	for (const auto& e : spec.entries()) mu_K.push_back(e.shear.mu_K);
	return mu_K;
}

/// Grid for a germ pipeline: default box of half width 2 radius_U, which must
/// keep U inside the region where mu is not forced to 0.
inline GridGeometry germ_geometry(const Germ& g, const SolverConfig& cfg) {
	GridGeometry geo{cfg.N, cfg.center, cfg.half_width.value_or(2.0 * g.radius())};
	validate(geo);
	const double inner = (1.0 - cfg.frame) * geo.half_width;
	if (std::abs(cfg.center.real()) + g.radius() > inner || std::abs(cfg.center.imag()) + g.radius() > inner)
		throw DomainError("germ_geometry: the box does not contain U inside its border frame");
	return geo;
}

/// g_Lambda = h o f o h^{-1}, evaluated through the sampled h.
class DeformedGerm {
  public:
	DeformedGerm(std::shared_ptr<const GridMap> h, Germ source, BeltramiFieldSpec field)
	    : m_h(std::move(h)), m_source(std::move(source)), m_field(std::move(field)) {}

	const GridMap& map() const noexcept { return *m_h; }
	std::shared_ptr<const GridMap> shared_map() const noexcept { return m_h; }
	const Germ& source() const noexcept { return m_source; }
	const BeltramiFieldSpec& field() const noexcept { return m_field; }

	Complex operator()(Complex zeta) const {
		const Complex z = m_h->inverse(zeta);
		if (!m_source.contains(z)) throw DomainError("DeformedGerm: h^{-1}(zeta) outside U");
		return (*m_h)(m_source.value(z));
	}

	Complex iterate(Complex zeta, int q) const {
		for (int k = 0; k < q; ++k) zeta = (*this)(zeta);
		return zeta;
	}

  private:
	std::shared_ptr<const GridMap> m_h;
	Germ m_source;
	BeltramiFieldSpec m_field;
};

inline DeformedGerm global_deform(const BeltramiFieldSpec& spec, BeurlingSolver& solver, const SolverConfig& cfg = {}) {
	const auto sampling = sample_field(spec, solver.geometry());
	auto map = std::make_shared<const GridMap>(
	    solve_beltrami(solver, sampling.assemble(shear_values(spec)), cfg.tol, cfg.max_sweeps, cfg.frame));
	return DeformedGerm(std::move(map), spec.germ(), spec);
}

inline DeformedGerm global_deform(const BeltramiFieldSpec& spec, const SolverConfig& cfg = {}) {
	BeurlingSolver solver(germ_geometry(spec.germ(), cfg));
	return global_deform(spec, solver, cfg);
}

inline constexpr double global_agreement_tol = 1e-3;

/// Multiplier of g_Lambda^q at h(z_cycle). The contour is the h-image scale of a
/// z-circle of radius `s` (default half the distance from z_cycle to the edge of U).
inline MultiplierEstimate measure_global_multiplier(const DeformedGerm& d, Complex z_cycle, int q,
                                                    std::optional<double> s = std::nullopt) {
	if (q < 1) throw DomainError("measure_global_multiplier: order must be positive");
	const GridMap& h = d.map();
	const Complex center = h(z_cycle);
	double radius_z = s.value_or(0.5 * (d.source().radius() - std::abs(z_cycle)));
	auto gq = [&](Complex zeta) { return d.iterate(zeta, q); };
	for (int halving = 0; halving <= 8; ++halving, radius_z *= 0.5) {
		double rho = std::numeric_limits<double>::infinity();
		for (int k = 0; k < 64; ++k)
			rho = std::min(rho, std::abs(h(z_cycle + std::polar(radius_z, two_pi * k / 64.0)) - center));
		rho *= 0.5;
		try {
			MultiplierEstimate est;
			est.value = cauchy_derivative(gq, center, rho);
			est.half_radius_value = cauchy_derivative(gq, center, rho / 2.0);
			est.radius = rho;
			est.halvings = halving;
			est.disagreement = std::abs(est.value - est.half_radius_value) / std::abs(est.value);
			if (est.disagreement > global_agreement_tol)
				throw IllConditionedError("measure_global_multiplier: two-radius estimates disagree (relative " +
				                          std::to_string(est.disagreement) + ")");
			return est;
		} catch (const DomainError&) {
		}
	}
	throw DomainError("measure_global_multiplier: no admissible contour around h(z_cycle)");
}

/// Wirtinger d/d conj(a) of a parameter function by central differences.
template <class Fn>
Complex dbar_in_parameter(Fn&& fn, Complex at, double step) {
	return wirtinger(std::forward<Fn>(fn), at, step).second;
}

/// Charts of the cycles that move with the parameter t: every target is 1/t.
struct MotionTemplate {
	Germ germ;
	std::vector<KoenigsChart> charts;
	int transport_depth = 200;
};

/// t -> h_t for the constant multiplier sequence 1/t. The grid, kernels and the
/// basin structure of mu are shared by every t.
class HolomorphicMotion {
  public:
	HolomorphicMotion(MotionTemplate tpl, const SolverConfig& cfg)
	    : m_tpl(std::move(tpl)), m_cfg(cfg), m_solver(germ_geometry(m_tpl.germ, cfg)),
	      m_sampling(sample_field(spec_at(0.5), m_solver.geometry())) {}

	BeltramiFieldSpec spec_at(Complex t) const {
		require_finite(t, "HolomorphicMotion t");
		if (!(std::abs(t) > 0.0 && std::abs(t) < 1.0)) throw DomainError("HolomorphicMotion: need 0 < |t| < 1");
		std::vector<FieldEntry> entries;
		for (const auto& chart : m_tpl.charts) entries.push_back({chart, shear_coefficient(chart.lambda, 1.0 / t)});
		return BeltramiFieldSpec(m_tpl.germ, std::move(entries), m_tpl.transport_depth);
	}

	std::shared_ptr<const GridMap> map_at(Complex t) {
		if (m_last && m_last_t == t) return m_last;
		const auto mu = m_sampling.assemble(shear_values(spec_at(t)));
		m_last = std::make_shared<const GridMap>(solve_beltrami(m_solver, mu, m_cfg.tol, m_cfg.max_sweeps, m_cfg.frame));
		m_last_t = t;
		return m_last;
	}

	Complex sample(Complex t, Complex z) { return (*map_at(t))(z); }
	const FieldSampling& sampling() const noexcept { return m_sampling; }
	const GridGeometry& geometry() const noexcept { return m_solver.geometry(); }

  private:
	MotionTemplate m_tpl;
	SolverConfig m_cfg;
	BeurlingSolver m_solver;
	FieldSampling m_sampling;
	std::shared_ptr<const GridMap> m_last;
	Complex m_last_t{0.0, 0.0};
};

inline Complex motion_sample(const MotionTemplate& tpl, Complex t, Complex z, const SolverConfig& cfg = {}) {
	HolomorphicMotion motion(tpl, cfg);
	return motion.sample(t, z);
}

} // namespace qcdeform
