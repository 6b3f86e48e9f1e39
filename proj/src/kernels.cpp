#include "peval/kernels.hpp"

#include <array>
#include <cstdlib>
#include <cstring>
#include <vector>

#include "peval/errors.hpp"

namespace peval::kernels {

namespace {

using Lane = std::array<double, 4>;

Lane load_lane(const double* x, std::size_t n) {
  Lane v{0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) v[i] = x[i];
  return v;
}

Lane add_lane(const Lane& a, const Lane& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]};
}

double collapse(const Lane& v) { return (v[0] + v[2]) + (v[1] + v[3]); }

// Pairwise fold over whole 4-wide lanes; `fetch(j)` yields lane j.
template <class Fetch>
Lane fold_lanes(std::size_t nlanes, Fetch&& fetch) {
  std::vector<Lane> level;
  level.reserve((nlanes + 1) / 2);
  for (std::size_t j = 0; j + 1 < nlanes; j += 2) level.push_back(add_lane(fetch(j), fetch(j + 1)));
  if (nlanes % 2 == 1) level.push_back(fetch(nlanes - 1));
  while (level.size() > 1) {
    std::size_t out = 0;
    for (std::size_t j = 0; j + 1 < level.size(); j += 2) level[out++] = add_lane(level[j], level[j + 1]);
    if (level.size() % 2 == 1) level[out++] = level.back();
    level.resize(out);
  }
  return level[0];
}

}  // namespace

double sum_scalar(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return 0.0;
  const std::size_t nlanes = (n + 3) / 4;
  return collapse(fold_lanes(nlanes, [&](std::size_t j) {
    const std::size_t base = 4 * j;
    return load_lane(x.data() + base, std::min<std::size_t>(4, n - base));
  }));
}

double dot_scalar(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw validation_error("kernels::dot: size mismatch");
  const std::size_t n = a.size();
  if (n == 0) return 0.0;
  const std::size_t nlanes = (n + 3) / 4;
  return collapse(fold_lanes(nlanes, [&](std::size_t j) {
    const std::size_t base = 4 * j;
    const std::size_t len = std::min<std::size_t>(4, n - base);
    Lane v{0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < len; ++i) v[i] = a[base + i] * b[base + i];
    return v;
  }));
}

namespace {

struct Dispatch {
  double (*sum)(std::span<const double>);
  double (*dot)(std::span<const double>, std::span<const double>);
  Backend backend;
};

Dispatch make_dispatch(Backend b) {
  if (b == Backend::avx2) return {&sum_avx2, &dot_avx2, Backend::avx2};
  return {&sum_scalar, &dot_scalar, Backend::scalar};
}

Backend initial_backend() {
  const char* env = std::getenv("PEVAL_KERNELS");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0) {
      if (!avx2_supported()) throw validation_error("PEVAL_KERNELS=avx2 but AVX2 is unavailable");
      return Backend::avx2;
    }
    // anything else (incl. "auto") falls through to detection
  }
  return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

Dispatch& dispatch() {
  static Dispatch d = make_dispatch(initial_backend());
  return d;
}

}  // namespace

Backend active_backend() { return dispatch().backend; }

void set_backend(Backend b) {
  if (b == Backend::avx2 && !avx2_supported()) throw validation_error("AVX2 backend unavailable on this CPU");
  dispatch() = make_dispatch(b);
}

std::string backend_name(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

double sum(std::span<const double> x) { return dispatch().sum(x); }

double dot(std::span<const double> a, std::span<const double> b) { return dispatch().dot(a, b); }

double sum_squares(std::span<const double> x) { return dispatch().dot(x, x); }

}  // namespace peval::kernels
