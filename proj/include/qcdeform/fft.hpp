#pragma once

// Thin RAII layer over FFTW for square complex 2D transforms.

#include <qcdeform/errors.hpp>

#include <fftw3.h>

#include <cstring>
#include <memory>
#include <mutex>
#include <span>

namespace qcdeform::fft {

namespace detail {

// FFTW planning is not thread-safe.
inline std::mutex& planner_mutex() {
	static std::mutex m;
	return m;
}

struct FreeDeleter {
	void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};

struct PlanDeleter {
	void operator()(fftw_plan_s* p) const noexcept {
		std::lock_guard lock(planner_mutex());
		fftw_destroy_plan(p);
	}
};

} // namespace detail

/// An M x M complex buffer with in-place forward and backward plans.
class Buffer2D {
  public:
	explicit Buffer2D(int m) : m_size(m) {
		if (m <= 0) throw DomainError("fft::Buffer2D: size must be positive");
		const std::size_t count = static_cast<std::size_t>(m) * m;
		m_data.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * count)));
		if (!m_data) throw std::bad_alloc();
		std::lock_guard lock(detail::planner_mutex());
		m_forward.reset(fftw_plan_dft_2d(m, m, m_data.get(), m_data.get(), FFTW_FORWARD, FFTW_ESTIMATE));
		m_backward.reset(fftw_plan_dft_2d(m, m, m_data.get(), m_data.get(), FFTW_BACKWARD, FFTW_ESTIMATE));
		if (!m_forward || !m_backward) throw Error("fft::Buffer2D: FFTW planning failed");
		clear();
	}

	int size() const noexcept { return m_size; }
	std::size_t count() const noexcept { return static_cast<std::size_t>(m_size) * m_size; }

	// fftw_complex is layout-compatible with std::complex<double>.
	std::span<Complex> values() noexcept { return {reinterpret_cast<Complex*>(m_data.get()), count()}; }
	std::span<const Complex> values() const noexcept {
		return {reinterpret_cast<const Complex*>(m_data.get()), count()};
	}
	Complex& at(int row, int col) noexcept { return values()[static_cast<std::size_t>(row) * m_size + col]; }

	void clear() noexcept { std::memset(m_data.get(), 0, sizeof(fftw_complex) * count()); }
	void forward() noexcept { fftw_execute(m_forward.get()); }
	void backward() noexcept { fftw_execute(m_backward.get()); }

  private:
	int m_size;
	std::unique_ptr<fftw_complex, detail::FreeDeleter> m_data;
	std::unique_ptr<fftw_plan_s, detail::PlanDeleter> m_forward;
	std::unique_ptr<fftw_plan_s, detail::PlanDeleter> m_backward;
};

} // namespace qcdeform::fft
