#ifndef PEVAL_KERNELS_HPP
#define PEVAL_KERNELS_HPP

#include <cstddef>
#include <span>
#include <string>

namespace peval::kernels {

// Deterministic reduction kernels used by the estimators. All backends
// evaluate the same fixed reduction tree, so results are bit-identical no
// matter which backend runs:
//
//   1. The input is split into 4-wide lanes v_j = (x[4j], .., x[4j+3]);
//      the final partial lane is zero-padded.
//   2. The lane vectors are combined pairwise: the list (v_0..v_{m-1})
//      is folded into (v_0+v_1, v_2+v_3, ...), an odd trailing vector is
//      carried up unchanged, until one vector remains.
//   3. The 4 lanes (l0,l1,l2,l3) collapse as (l0+l2) + (l1+l3).
//
// dot() multiplies elementwise first (one rounding per product, no FMA)
// and feeds the products through the same tree.

enum class Backend { scalar, avx2 };

/// Backend currently used by sum/dot. Chosen at startup: AVX2 when the CPU
/// supports it, overridable with PEVAL_KERNELS=scalar|avx2|auto.
Backend active_backend();

/// Force a backend. Throws validation_error if unsupported on this machine.
void set_backend(Backend b);

bool avx2_supported();

std::string backend_name(Backend b);

double sum(std::span<const double> x);
double dot(std::span<const double> a, std::span<const double> b);
double sum_squares(std::span<const double> x);

// Reference implementations, always available (used by the equivalence tests).
double sum_scalar(std::span<const double> x);
double dot_scalar(std::span<const double> a, std::span<const double> b);
double sum_avx2(std::span<const double> x);
double dot_avx2(std::span<const double> a, std::span<const double> b);

}  // namespace peval::kernels

#endif
