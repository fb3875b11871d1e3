#include "rho/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <stdexcept>

namespace rho {

namespace {
// FFTW's planner is not re-entrant.
std::mutex planner_mutex;
}  // namespace

struct Fft::Plans {
  fftw_complex* buffer = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;

  ~Plans() {
    std::lock_guard lock(planner_mutex);
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
    if (buffer) fftw_free(buffer);
  }
};

Fft::Fft(std::size_t n) : n_(n), plans_(std::make_unique<Plans>()) {
  if (n == 0) throw std::invalid_argument("Fft: length must be positive");
  std::lock_guard lock(planner_mutex);
  plans_->buffer = fftw_alloc_complex(n);
  if (!plans_->buffer) throw std::bad_alloc();
  const int len = static_cast<int>(n);
  // FFTW_ESTIMATE keeps plans, and therefore results, independent of timing.
  plans_->fwd = fftw_plan_dft_1d(len, plans_->buffer, plans_->buffer, FFTW_FORWARD, FFTW_ESTIMATE);
  plans_->bwd = fftw_plan_dft_1d(len, plans_->buffer, plans_->buffer, FFTW_BACKWARD, FFTW_ESTIMATE);
  if (!plans_->fwd || !plans_->bwd) throw std::runtime_error("Fft: FFTW planning failed");
}

// Plans are executed on their own aligned buffer; caller storage has no
// alignment guarantee.
void Fft::run(void* plan, std::span<std::complex<double>> data) {
  auto* buf = reinterpret_cast<std::complex<double>*>(plans_->buffer);
  std::copy(data.begin(), data.end(), buf);
  fftw_execute(static_cast<fftw_plan>(plan));
  std::copy(buf, buf + n_, data.begin());
}

Fft::~Fft() = default;
Fft::Fft(Fft&&) noexcept = default;
Fft& Fft::operator=(Fft&&) noexcept = default;

void Fft::forward(std::span<std::complex<double>> data) {
  if (data.size() != n_) throw std::invalid_argument("Fft::forward: length mismatch");
  run(plans_->fwd, data);
}

void Fft::inverse(std::span<std::complex<double>> data) {
  if (data.size() != n_) throw std::invalid_argument("Fft::inverse: length mismatch");
  run(plans_->bwd, data);
  const double scale = 1.0 / static_cast<double>(n_);
  for (auto& z : data) z *= scale;
}

}  // namespace rho
