#include "peval/kernels.hpp"

#include <vector>

#include "peval/errors.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define PEVAL_HAVE_AVX2_BUILD 1
#include <immintrin.h>
#else
#define PEVAL_HAVE_AVX2_BUILD 0
#endif

namespace peval::kernels {

#if PEVAL_HAVE_AVX2_BUILD

bool avx2_supported() { return __builtin_cpu_supports("avx2") != 0; }

namespace {

__m256d load_tail(const double* x, std::size_t n) {
  alignas(32) double buf[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) buf[i] = x[i];
  return _mm256_load_pd(buf);
}

double collapse(__m256d v) {
  // (l0+l2, l1+l3) then one horizontal add: matches the scalar tree exactly.
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  __m128d s = _mm_add_pd(lo, hi);
  __m128d odd = _mm_unpackhi_pd(s, s);
  return _mm_cvtsd_f64(_mm_add_sd(s, odd));
}

// Same iterative pairwise fold as the scalar backend, lane for lane. The
// working buffer stays in plain doubles (unaligned load/store) to avoid
// vector-typed containers.
template <class Fetch>
double fold_lanes(std::size_t nlanes, Fetch&& fetch) {
  std::vector<double> level(4 * ((nlanes + 1) / 2));
  std::size_t count = 0;
  for (std::size_t j = 0; j + 1 < nlanes; j += 2)
    _mm256_storeu_pd(level.data() + 4 * count++, _mm256_add_pd(fetch(j), fetch(j + 1)));
  if (nlanes % 2 == 1) _mm256_storeu_pd(level.data() + 4 * count++, fetch(nlanes - 1));
  while (count > 1) {
    std::size_t out = 0;
    for (std::size_t j = 0; j + 1 < count; j += 2)
      _mm256_storeu_pd(level.data() + 4 * out++,
                       _mm256_add_pd(_mm256_loadu_pd(level.data() + 4 * j), _mm256_loadu_pd(level.data() + 4 * (j + 1))));
    if (count % 2 == 1) {
      _mm256_storeu_pd(level.data() + 4 * out, _mm256_loadu_pd(level.data() + 4 * (count - 1)));
      ++out;
    }
    count = out;
  }
  return collapse(_mm256_loadu_pd(level.data()));
}

}  // namespace

double sum_avx2(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return 0.0;
  const std::size_t nlanes = (n + 3) / 4;
  return fold_lanes(nlanes, [&](std::size_t j) -> __m256d {
    const std::size_t base = 4 * j;
    if (base + 4 <= n) return _mm256_loadu_pd(x.data() + base);
    return load_tail(x.data() + base, n - base);
  });
}

double dot_avx2(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw validation_error("kernels::dot: size mismatch");
  const std::size_t n = a.size();
  if (n == 0) return 0.0;
  const std::size_t nlanes = (n + 3) / 4;
  return fold_lanes(nlanes, [&](std::size_t j) -> __m256d {
    const std::size_t base = 4 * j;
    if (base + 4 <= n) return _mm256_mul_pd(_mm256_loadu_pd(a.data() + base), _mm256_loadu_pd(b.data() + base));
    return _mm256_mul_pd(load_tail(a.data() + base, n - base), load_tail(b.data() + base, n - base));
  });
}

#else

bool avx2_supported() { return false; }

double sum_avx2(std::span<const double>) { throw validation_error("AVX2 backend not built on this architecture"); }

double dot_avx2(std::span<const double>, std::span<const double>) {
  throw validation_error("AVX2 backend not built on this architecture");
}

#endif

}  // namespace peval::kernels
