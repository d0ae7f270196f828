#pragma once

// Dense double-precision kernels used by the probe forward/backward passes and
// cosine similarities. Every kernel has a scalar reference implementation; an
// AVX2+FMA variant is compiled separately and chosen at runtime when the CPU
// supports it. The two are equivalence-tested in tests/unit/test_kernels.cpp.

#include <cstddef>
#include <span>
#include <string_view>

namespace latprobe::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  std::string_view name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = A x + bias, A is rows x cols row-major; bias may be null
  void (*gemv)(const double* a, const double* x, const double* bias, double* y, std::size_t rows,
               std::size_t cols);
  // y[i] = x[i] * m[i]
  void (*mul)(const double* x, const double* m, double* y, std::size_t n);
};

const KernelTable& scalar_table() noexcept;

/// Null when the AVX2 variant was not built or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table() noexcept;

/// Table in use. Defaults to the best supported ISA.
const KernelTable& active() noexcept;

/// Forces a specific ISA; returns false (and leaves the selection unchanged)
/// when it is unavailable. Not thread-safe with concurrent kernel calls.
bool select(Isa isa) noexcept;

/// Restores the default (best supported) selection.
void select_best() noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline void gemv(std::span<const double> a, std::span<const double> x, std::span<const double> bias,
                 std::span<double> y) {
  active().gemv(a.data(), x.data(), bias.empty() ? nullptr : bias.data(), y.data(), y.size(),
                x.size());
}

inline void mul(std::span<const double> x, std::span<const double> m, std::span<double> y) {
  active().mul(x.data(), m.data(), y.data(), x.size());
}

}  // namespace latprobe::simd
