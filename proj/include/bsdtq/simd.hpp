#pragma once

// Dense double-precision kernels used by the tree and transform inner loops.
//
// Every kernel has a scalar reference implementation plus vectorized variants
// (AVX2+FMA on x86-64, NEON on AArch64). The active backend is chosen once at
// startup from the CPU features; set BSDTQ_KERNELS=scalar to force the
// reference path. Vectorized variants reassociate sums, so results agree with
// the scalar path to rounding, not bit-for-bit. Within one backend every call
// is deterministic.

#include <cstddef>
#include <span>
#include <string_view>

namespace bsdtq::simd {

enum class Backend { Scalar, Avx2, Neon };

std::string_view backend_name(Backend backend) noexcept;

// Backend currently used by the free functions below.
Backend active_backend() noexcept;

// Best backend supported by this CPU and build.
Backend detect_backend() noexcept;

// Returns false (and leaves the backend unchanged) if `backend` is not
// available on this machine.
bool set_backend(Backend backend) noexcept;

bool backend_available(Backend backend) noexcept;

double dispatch_dot(const double* a, const double* b, std::size_t n) noexcept;
void dispatch_axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;

// Below one vector width every backend reduces to the same sequential loop,
// so short inputs skip the indirect call.
inline constexpr std::size_t kShortLength = 4;

// sum_i a[i] * b[i]
inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  const std::size_t n = a.size();
  if (n < kShortLength) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
  }
  return dispatch_dot(a.data(), b.data(), n);
}

// y[i] += alpha * x[i]
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  const std::size_t n = x.size();
  if (n < kShortLength) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
    return;
  }
  dispatch_axpy(alpha, x.data(), y.data(), n);
}

// out[r] = dot(row r of m, x) for a row-major rows x x.size() matrix.
void gemv(std::span<const double> m, std::span<const double> x, std::span<double> out) noexcept;

// Per-backend entry points; exposed for equivalence tests and benchmarks.
namespace scalar {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace scalar

namespace avx2 {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace avx2

namespace neon {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace neon

}  // namespace bsdtq::simd
