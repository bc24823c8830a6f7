#include <atomic>
#include <cstdlib>
#include <cstring>

#include "bsdtq/simd.hpp"

namespace bsdtq::simd {

namespace {

using DotFn = double (*)(const double*, const double*, std::size_t) noexcept;
using AxpyFn = void (*)(double, const double*, double*, std::size_t) noexcept;

struct Table {
  Backend backend;
  DotFn dot;
  AxpyFn axpy;
};

constexpr Table kScalar{Backend::Scalar, &scalar::dot, &scalar::axpy};
constexpr Table kAvx2{Backend::Avx2, &avx2::dot, &avx2::axpy};
constexpr Table kNeon{Backend::Neon, &neon::dot, &neon::axpy};

const Table* table_for(Backend backend) noexcept {
  switch (backend) {
    case Backend::Avx2:
      return &kAvx2;
    case Backend::Neon:
      return &kNeon;
    case Backend::Scalar:
      break;
  }
  return &kScalar;
}

const Table* initial_table() noexcept {
  const char* forced = std::getenv("BSDTQ_KERNELS");
  if (forced != nullptr && std::strcmp(forced, "scalar") == 0) return &kScalar;
  return table_for(detect_backend());
}

std::atomic<const Table*>& current() noexcept {
  static std::atomic<const Table*> table{initial_table()};
  return table;
}

}  // namespace

std::string_view backend_name(Backend backend) noexcept {
  switch (backend) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
    case Backend::Neon:
      return "neon";
  }
  return "unknown";
}

bool backend_available(Backend backend) noexcept {
  switch (backend) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::Neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend detect_backend() noexcept {
  if (backend_available(Backend::Avx2)) return Backend::Avx2;
  if (backend_available(Backend::Neon)) return Backend::Neon;
  return Backend::Scalar;
}

Backend active_backend() noexcept { return current().load(std::memory_order_relaxed)->backend; }

bool set_backend(Backend backend) noexcept {
  if (!backend_available(backend)) return false;
  current().store(table_for(backend), std::memory_order_relaxed);
  return true;
}

double dispatch_dot(const double* a, const double* b, std::size_t n) noexcept {
  return current().load(std::memory_order_relaxed)->dot(a, b, n);
}

void dispatch_axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  current().load(std::memory_order_relaxed)->axpy(alpha, x, y, n);
}

void gemv(std::span<const double> m, std::span<const double> x, std::span<double> out) noexcept {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = dot(m.subspan(r * cols, cols), x);
}

}  // namespace bsdtq::simd
