#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

namespace nlsr::detail {

// Out-of-place 1-D complex FFTW plans, created once per size. Planning goes
// through a global mutex (the FFTW planner is not reentrant); execution via
// fftw_execute_dft on caller-owned arrays is thread-safe. FFTW_ESTIMATE keeps
// the chosen algorithm, and therefore every rounding pattern, reproducible.
class FftPlan {
public:
  explicit FftPlan(std::size_t n) : n_(n) {
    std::vector<std::complex<double>> in(n), out(n);
    auto* pin = reinterpret_cast<fftw_complex*>(in.data());
    auto* pout = reinterpret_cast<fftw_complex*>(out.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    forward_ = fftw_plan_dft_1d(static_cast<int>(n), pin, pout, FFTW_FORWARD, flags);
    backward_ = fftw_plan_dft_1d(static_cast<int>(n), pin, pout, FFTW_BACKWARD, flags);
  }
  ~FftPlan() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  // out_k = sum_j in_j e^{-2 pi i jk/n}
  void forward(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) const {
    fftw_execute_dft(forward_, const_cast<fftw_complex*>(reinterpret_cast<const fftw_complex*>(in.data())),
                     reinterpret_cast<fftw_complex*>(out.data()));
  }
  // out_j = sum_k in_k e^{+2 pi i jk/n}
  void backward(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) const {
    fftw_execute_dft(backward_, const_cast<fftw_complex*>(reinterpret_cast<const fftw_complex*>(in.data())),
                     reinterpret_cast<fftw_complex*>(out.data()));
  }

  std::size_t size() const noexcept { return n_; }

private:
  std::size_t n_;
  fftw_plan forward_{};
  fftw_plan backward_{};
};

inline const FftPlan& fft_plan(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, std::unique_ptr<FftPlan>> plans;
  std::lock_guard lock(mutex);
  auto& slot = plans[n];
  if (!slot) slot = std::make_unique<FftPlan>(n);
  return *slot;
}

} // namespace nlsr::detail
