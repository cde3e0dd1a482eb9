#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <new>
#include <utility>
#include <vector>

namespace rbdf {

// FFTW-aligned storage so every buffer can be handed to the new-array
// execute functions of a plan created on a different buffer.
template <class T>
struct FftwAllocator {
  using value_type = T;

  FftwAllocator() noexcept = default;
  template <class U>
  FftwAllocator(const FftwAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    void* p = fftw_malloc(n * sizeof(T));
    if (p == nullptr && n != 0) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }

  template <class U>
  bool operator==(const FftwAllocator<U>&) const noexcept { return true; }
};

using Complex = std::complex<double>;
using RealBuffer = std::vector<double, FftwAllocator<double>>;
using ComplexBuffer = std::vector<Complex, FftwAllocator<Complex>>;

namespace detail {

// Plan creation is not thread-safe in FFTW; execution with new arrays is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

/// Real <-> half-complex 2D transform pair on an Ny x Nx array (x2 major,
/// x1 contiguous). Spectral arrays are Ny x (Nx/2+1).
///
/// Normalization: `backward` evaluates f(x) = sum_k c_k e^{ik.x} and
/// `forward` returns the coefficients c_k, i.e. it carries the 1/(Nx Ny).
/// Plans use FFTW_ESTIMATE so the chosen algorithm, and hence every bit of
/// output, is reproducible from process to process.
class FftPlan2D {
 public:
  FftPlan2D(int nx, int ny) : nx_(nx), ny_(ny) {
    RealBuffer real(physical_size());
    ComplexBuffer spec(spectral_size());
    std::lock_guard lock(detail::fftw_planner_mutex());
    forward_ = fftw_plan_dft_r2c_2d(ny_, nx_, real.data(),
                                    reinterpret_cast<fftw_complex*>(spec.data()),
                                    FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r_2d(ny_, nx_, reinterpret_cast<fftw_complex*>(spec.data()),
                                     real.data(), FFTW_ESTIMATE);
  }

  FftPlan2D(const FftPlan2D&) = delete;
  FftPlan2D& operator=(const FftPlan2D&) = delete;

  ~FftPlan2D() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }

  std::size_t physical_size() const { return static_cast<std::size_t>(nx_) * ny_; }
  std::size_t spectral_size() const { return static_cast<std::size_t>(ny_) * (nx_ / 2 + 1); }

  /// `in` is preserved (out-of-place r2c).
  void forward(const RealBuffer& in, ComplexBuffer& out) const {
    out.resize(spectral_size());
    fftw_execute_dft_r2c(forward_, const_cast<double*>(in.data()),
                         reinterpret_cast<fftw_complex*>(out.data()));
    const double scale = 1.0 / static_cast<double>(physical_size());
    for (auto& c : out) c *= scale;
  }

  /// `in` is preserved: c2r destroys its input, so a per-thread scratch copy
  /// is transformed instead.
  void backward(const ComplexBuffer& in, RealBuffer& out) const {
    thread_local ComplexBuffer scratch;
    scratch.assign(in.begin(), in.end());
    out.resize(physical_size());
    fftw_execute_dft_c2r(backward_, reinterpret_cast<fftw_complex*>(scratch.data()),
                         out.data());
  }

  /// Shared plan for a grid size; plans are immutable after construction.
  static std::shared_ptr<const FftPlan2D> get(int nx, int ny) {
    static std::mutex cache_mutex;
    static std::map<std::pair<int, int>, std::shared_ptr<const FftPlan2D>> cache;
    std::lock_guard lock(cache_mutex);
    auto& slot = cache[{nx, ny}];
    if (!slot) slot = std::make_shared<const FftPlan2D>(nx, ny);
    return slot;
  }

 private:
  int nx_;
  int ny_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

}  // namespace rbdf
