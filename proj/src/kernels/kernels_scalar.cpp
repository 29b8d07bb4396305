#include "placerec/kernels.hpp"

namespace placerec::kernels {

namespace {

double chi_squared_scalar(const std::uint32_t* a, const std::uint32_t* b, std::size_t n) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = static_cast<double>(a[i]) + static_cast<double>(b[i]);
    if (s == 0.0) continue;
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    total += d * d / s;
  }
  return total;
}

double scaled_diff_sq_scalar(const double* a, double sa, const double* b, double sb, std::size_t n) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = sa * a[i] - sb * b[i];
    total += d * d;
  }
  return total;
}

double sum_scalar(const double* v, std::size_t n) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += v[i];
  return total;
}

double centered_sum_sq_scalar(const double* v, double center, std::size_t n) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = v[i] - center;
    total += d * d;
  }
  return total;
}

void shift_costs_scalar(const double* a_doubled, double sa, const double* b, double sb, std::size_t rows,
                        std::size_t cols, double* out) {
  for (std::size_t k = 0; k < cols; ++k) {
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      // a[r][(c + k) mod cols] == a_doubled[r][c + k]
      total += scaled_diff_sq_scalar(a_doubled + r * 2 * cols + k, sa, b + r * cols, sb, cols);
    }
    out[k] = total;
  }
}

}  // namespace

namespace detail {
const KernelTable kScalarTable{chi_squared_scalar, scaled_diff_sq_scalar, sum_scalar, centered_sum_sq_scalar,
                               shift_costs_scalar};
}  // namespace detail

}  // namespace placerec::kernels
