#pragma once

// Arithmetic inner loops of the matcher. Each kernel has a portable scalar
// reference and, on x86-64, an AVX2+FMA variant chosen at startup when the CPU
// supports it. Setting PLACEREC_KERNELS=scalar in the environment pins the
// scalar reference.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace placerec::kernels {

enum class Backend { kScalar, kAvx2 };

std::string_view to_string(Backend backend);

struct KernelTable {
  /// sum_i (a_i - b_i)^2 / (a_i + b_i), zero-denominator terms skipped.
  double (*chi_squared)(const std::uint32_t* a, const std::uint32_t* b, std::size_t n);
  /// sum_i (sa * a_i - sb * b_i)^2
  double (*scaled_diff_sq)(const double* a, double sa, const double* b, double sb, std::size_t n);
  /// sum_i v_i
  double (*sum)(const double* v, std::size_t n);
  /// sum_i (v_i - center)^2
  double (*centered_sum_sq)(const double* v, double center, std::size_t n);
  /// For every circular column shift k in [0, cols):
  ///   out[k] = sum_{r,c} (sa * a[r][c] - sb * b[r][(c - k) mod cols])^2
  ///          = sum_{r,c} (sa * a[r][(c + k) mod cols] - sb * b[r][c])^2
  /// `a_doubled` holds each row of a twice back to back (rows x 2*cols), so
  /// only the query side needs the doubled copy.
  void (*shift_costs)(const double* a_doubled, double sa, const double* b, double sb, std::size_t rows,
                      std::size_t cols, double* out);
};

bool available(Backend backend);
const KernelTable& table(Backend backend);

/// Backend used by the convenience wrappers below.
Backend active_backend();
/// Throws ConfigError when `backend` is not available on this machine.
void set_active_backend(Backend backend);

inline const KernelTable& active() { return table(active_backend()); }

double chi_squared(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);
double scaled_diff_sq(std::span<const double> a, double sa, std::span<const double> b, double sb);
double sum(std::span<const double> v);
double centered_sum_sq(std::span<const double> v, double center);
void shift_costs(std::span<const double> a_doubled, double sa, std::span<const double> b, double sb,
                 std::size_t rows, std::size_t cols, std::span<double> out);

namespace detail {
extern const KernelTable kScalarTable;
#if defined(PLACEREC_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
}  // namespace detail

}  // namespace placerec::kernels
