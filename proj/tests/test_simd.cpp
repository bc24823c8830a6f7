#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bsdtq/simd.hpp"
#include "support.hpp"

using namespace bsdtq;
namespace ts = testing_support;

namespace {

struct BackendGuard {
  simd::Backend saved = simd::active_backend();
  ~BackendGuard() { simd::set_backend(saved); }
};

std::vector<simd::Backend> available() {
  std::vector<simd::Backend> out;
  for (auto b : {simd::Backend::Scalar, simd::Backend::Avx2, simd::Backend::Neon}) {
    if (simd::backend_available(b)) out.push_back(b);
  }
  return out;
}

double reference_dot(const Vector& a, const Vector& b) {
  long double acc = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<long double>(a[i]) * b[i];
  return static_cast<double>(acc);
}

}  // namespace

TEST(Simd, ScalarAlwaysAvailable) {
  EXPECT_TRUE(simd::backend_available(simd::Backend::Scalar));
  EXPECT_TRUE(simd::backend_available(simd::detect_backend()));
}

TEST(Simd, SetBackendRejectsUnavailable) {
  BackendGuard guard;
  for (auto b : {simd::Backend::Avx2, simd::Backend::Neon}) {
    if (!simd::backend_available(b)) {
      const auto before = simd::active_backend();
      EXPECT_FALSE(simd::set_backend(b));
      EXPECT_EQ(simd::active_backend(), before);
    }
  }
  EXPECT_TRUE(simd::set_backend(simd::Backend::Scalar));
  EXPECT_EQ(simd::active_backend(), simd::Backend::Scalar);
}

TEST(Simd, DotMatchesExtendedPrecisionOnEveryBackend) {
  std::mt19937_64 gen(11);
  for (auto backend : available()) {
    BackendGuard guard;
    ASSERT_TRUE(simd::set_backend(backend));
    for (std::size_t n = 0; n <= 67; ++n) {
      const Vector a = ts::gaussian(gen, n);
      const Vector b = ts::gaussian(gen, n);
      double scale = 0.0;
      for (std::size_t i = 0; i < n; ++i) scale += std::fabs(a[i] * b[i]);
      EXPECT_NEAR(simd::dot(a, b), reference_dot(a, b), 1e-14 * (scale + 1.0))
          << simd::backend_name(backend) << " n=" << n;
    }
  }
}

TEST(Simd, VectorKernelsAgreeWithScalarReference) {
  std::mt19937_64 gen(12);
  for (std::size_t n = 0; n <= 67; ++n) {
    const Vector a = ts::gaussian(gen, n);
    const Vector b = ts::gaussian(gen, n);
    const Vector y0 = ts::gaussian(gen, n);
    const double ref = simd::scalar::dot(a.data(), b.data(), n);
    Vector y_ref = y0;
    simd::scalar::axpy(0.37, a.data(), y_ref.data(), n);
    double scale = 1.0;
    for (std::size_t i = 0; i < n; ++i) scale += std::fabs(a[i] * b[i]);

    EXPECT_NEAR(simd::avx2::dot(a.data(), b.data(), n), ref, 1e-14 * scale);
    EXPECT_NEAR(simd::neon::dot(a.data(), b.data(), n), ref, 1e-14 * scale);
    for (auto axpy : {&simd::avx2::axpy, &simd::neon::axpy}) {
      if (axpy == &simd::avx2::axpy && !simd::backend_available(simd::Backend::Avx2)) continue;
      Vector y = y0;
      axpy(0.37, a.data(), y.data(), n);
      for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y[i], y_ref[i], 1e-15 * (1.0 + std::fabs(y_ref[i])));
    }
  }
}

TEST(Simd, ShortInputsAreBitIdenticalAcrossBackends) {
  std::mt19937_64 gen(13);
  for (std::size_t n = 0; n < simd::kShortLength; ++n) {
    const Vector a = ts::gaussian(gen, n);
    const Vector b = ts::gaussian(gen, n);
    const double ref = simd::scalar::dot(a.data(), b.data(), n);
    for (auto backend : available()) {
      BackendGuard guard;
      simd::set_backend(backend);
      EXPECT_EQ(simd::dot(a, b), ref);
    }
    if (simd::backend_available(simd::Backend::Avx2)) {
      EXPECT_EQ(simd::avx2::dot(a.data(), b.data(), n), ref);
    }
  }
}

TEST(Simd, GemvIsRowwiseDot) {
  std::mt19937_64 gen(14);
  for (auto backend : available()) {
    BackendGuard guard;
    simd::set_backend(backend);
    const Matrix m = ts::gaussian_matrix(gen, 5, 19);
    const Vector x = ts::gaussian(gen, 19);
    Vector out(5);
    simd::gemv(m.data(), x, out);
    for (std::size_t r = 0; r < 5; ++r) EXPECT_EQ(out[r], simd::dot(m.row(r), x));
  }
}

TEST(Simd, AxpyHandlesZeroAlphaAndEmpty) {
  Vector y{1.0, 2.0, 3.0, 4.0, 5.0};
  const Vector x{9.0, 9.0, 9.0, 9.0, 9.0};
  simd::axpy(0.0, x, y);
  EXPECT_EQ(y, (Vector{1.0, 2.0, 3.0, 4.0, 5.0}));
  Vector empty;
  simd::axpy(2.0, empty, empty);
  EXPECT_EQ(simd::dot(empty, empty), 0.0);
}
