#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>

namespace rho {

/// In-place complex DFT of fixed length backed by FFTW. forward() computes
/// X_k = sum_j x_j exp(-2 pi i jk / n); inverse() includes the 1/n factor.
/// A plan is not shareable between threads.
class Fft {
 public:
  explicit Fft(std::size_t n);
  ~Fft();
  Fft(Fft&&) noexcept;
  Fft& operator=(Fft&&) noexcept;
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  std::size_t size() const { return n_; }
  void forward(std::span<std::complex<double>> data);
  void inverse(std::span<std::complex<double>> data);

 private:
  struct Plans;
  void run(void* plan, std::span<std::complex<double>> data);
  std::size_t n_;
  std::unique_ptr<Plans> plans_;
};

}  // namespace rho
