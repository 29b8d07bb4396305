// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include "placerec/kernels.hpp"

namespace placerec::kernels {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

inline __m256d load_u32_as_pd(const std::uint32_t* p) {
  // Histogram counts stay far below 2^31, so the signed conversion is exact.
  return _mm256_cvtepi32_pd(_mm_loadu_si128(reinterpret_cast<const __m128i*>(p)));
}

double chi_squared_avx2(const std::uint32_t* a, const std::uint32_t* b, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d acc0 = zero;
  __m256d acc1 = zero;
  std::size_t i = 0;
  const auto term = [&](std::size_t at) {
    const __m256d va = load_u32_as_pd(a + at);
    const __m256d vb = load_u32_as_pd(b + at);
    const __m256d s = _mm256_add_pd(va, vb);
    const __m256d d = _mm256_sub_pd(va, vb);
    const __m256d nonzero = _mm256_cmp_pd(s, zero, _CMP_NEQ_OQ);
    const __m256d q = _mm256_div_pd(_mm256_mul_pd(d, d), _mm256_blendv_pd(one, s, nonzero));
    return _mm256_and_pd(q, nonzero);
  };
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, term(i));
    acc1 = _mm256_add_pd(acc1, term(i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, term(i));
  double total = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
    const double s = static_cast<double>(a[i]) + static_cast<double>(b[i]);
    if (s == 0.0) continue;
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    total += d * d / s;
  }
  return total;
}

// Products are rounded before the subtraction (no fused multiply-subtract) so
// that identical inputs give exactly zero, as in the scalar reference.
inline double scaled_diff_sq_avx2_inline(const double* a, __m256d vsa, double sa, const double* b,
                                         __m256d vsb, double sb, std::size_t n, __m256d& acc0,
                                         __m256d& acc1) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_mul_pd(vsa, _mm256_loadu_pd(a + i)), _mm256_mul_pd(vsb, _mm256_loadu_pd(b + i)));
    const __m256d d1 =
        _mm256_sub_pd(_mm256_mul_pd(vsa, _mm256_loadu_pd(a + i + 4)), _mm256_mul_pd(vsb, _mm256_loadu_pd(b + i + 4)));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d d0 = _mm256_sub_pd(_mm256_mul_pd(vsa, _mm256_loadu_pd(a + i)), _mm256_mul_pd(vsb, _mm256_loadu_pd(b + i)));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
  }
  double tail = 0.0;
  for (; i < n; ++i) {
    const double d = sa * a[i] - sb * b[i];
    tail += d * d;
  }
  return tail;
}

double scaled_diff_sq_avx2(const double* a, double sa, const double* b, double sb, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  const double tail =
      scaled_diff_sq_avx2_inline(a, _mm256_set1_pd(sa), sa, b, _mm256_set1_pd(sb), sb, n, acc0, acc1);
  return hsum(_mm256_add_pd(acc0, acc1)) + tail;
}

double sum_avx2(const double* v, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(v + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(v + i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(v + i));
  double total = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) total += v[i];
  return total;
}

double centered_sum_sq_avx2(const double* v, double center, std::size_t n) {
  const __m256d c = _mm256_set1_pd(center);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(v + i), c);
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(v + i + 4), c);
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(v + i), c);
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
  }
  double total = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
    const double d = v[i] - center;
    total += d * d;
  }
  return total;
}

void shift_costs_avx2(const double* a_doubled, double sa, const double* b, double sb, std::size_t rows,
                      std::size_t cols, double* out) {
  const __m256d vsa = _mm256_set1_pd(sa);
  const __m256d vsb = _mm256_set1_pd(sb);
  const std::size_t vector_end = cols - cols % 4;
  std::size_t k = 0;
  // Four shifts per pass share every load of b.
  for (; k + 4 <= cols; k += 4) {
    __m256d acc[4] = {_mm256_setzero_pd(), _mm256_setzero_pd(), _mm256_setzero_pd(), _mm256_setzero_pd()};
    double tail[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t r = 0; r < rows; ++r) {
      const double* ar = a_doubled + r * 2 * cols + k;
      const double* br = b + r * cols;
      for (std::size_t c = 0; c < vector_end; c += 4) {
        const __m256d vb = _mm256_mul_pd(vsb, _mm256_loadu_pd(br + c));
        for (std::size_t j = 0; j < 4; ++j) {
          const __m256d d = _mm256_fmsub_pd(vsa, _mm256_loadu_pd(ar + c + j), vb);
          acc[j] = _mm256_fmadd_pd(d, d, acc[j]);
        }
      }
      for (std::size_t c = vector_end; c < cols; ++c) {
        for (std::size_t j = 0; j < 4; ++j) {
          const double d = sa * ar[c + j] - sb * br[c];
          tail[j] += d * d;
        }
      }
    }
    for (std::size_t j = 0; j < 4; ++j) out[k + j] = hsum(acc[j]) + tail[j];
  }
  for (; k < cols; ++k) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    double tail = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      tail += scaled_diff_sq_avx2_inline(a_doubled + r * 2 * cols + k, vsa, sa, b + r * cols, vsb, sb, cols, acc0,
                                         acc1);
    }
    out[k] = hsum(_mm256_add_pd(acc0, acc1)) + tail;
  }
}

}  // namespace

namespace detail {
const KernelTable kAvx2Table{chi_squared_avx2, scaled_diff_sq_avx2, sum_avx2, centered_sum_sq_avx2,
                             shift_costs_avx2};
}  // namespace detail

}  // namespace placerec::kernels
