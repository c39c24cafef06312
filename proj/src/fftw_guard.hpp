#pragma once

// FFTW planning is not thread-safe; execution on distinct arrays is. All
// planner calls in the library go through this mutex.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>

namespace roughwave::detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

inline FftwBuffer<fftw_complex> alloc_complex(std::size_t n) {
  return FftwBuffer<fftw_complex>(fftw_alloc_complex(n));
}

inline FftwBuffer<double> alloc_real(std::size_t n) {
  return FftwBuffer<double>(fftw_alloc_real(n));
}

class Plan {
 public:
  Plan() = default;
  explicit Plan(fftw_plan p) : plan_(p) {}
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  Plan(Plan&& o) noexcept : plan_(o.plan_) { o.plan_ = nullptr; }
  Plan& operator=(Plan&& o) noexcept {
    if (this != &o) {
      reset();
      plan_ = o.plan_;
      o.plan_ = nullptr;
    }
    return *this;
  }
  ~Plan() { reset(); }

  fftw_plan get() const { return plan_; }

 private:
  void reset() {
    if (plan_) {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
      plan_ = nullptr;
    }
  }
  fftw_plan plan_ = nullptr;
};

inline Plan plan_c2c(int n, fftw_complex* in, fftw_complex* out, int sign) {
  std::lock_guard<std::mutex> lock(fftw_planner_mutex());
  return Plan(fftw_plan_dft_1d(n, in, out, sign, FFTW_ESTIMATE));
}

inline Plan plan_r2c(int n, double* in, fftw_complex* out) {
  std::lock_guard<std::mutex> lock(fftw_planner_mutex());
  return Plan(fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE));
}

}  // namespace roughwave::detail
