#include <atomic>

#include "latprobe/simd/kernels.hpp"

namespace latprobe::simd {

#if defined(LATPROBE_HAVE_AVX2)
namespace detail {
const KernelTable& avx2_table_unchecked() noexcept;
}
#endif

namespace {

bool cpu_has_avx2() noexcept {
#if defined(LATPROBE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__)) && \
    (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& best() noexcept {
  if (const KernelTable* t = avx2_table()) return *t;
  return scalar_table();
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> table{&best()};
  return table;
}

}  // namespace

const KernelTable* avx2_table() noexcept {
#if defined(LATPROBE_HAVE_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? &detail::avx2_table_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() noexcept { return *current().load(std::memory_order_relaxed); }

bool select(Isa isa) noexcept {
  const KernelTable* t = isa == Isa::scalar ? &scalar_table() : avx2_table();
  if (!t) return false;
  current().store(t, std::memory_order_relaxed);
  return true;
}

void select_best() noexcept { current().store(&best(), std::memory_order_relaxed); }

}  // namespace latprobe::simd
