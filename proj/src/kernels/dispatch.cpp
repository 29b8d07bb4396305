#include <atomic>
#include <cstdlib>
#include <string>

#include "placerec/error.hpp"
#include "placerec/kernels.hpp"

namespace placerec::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(PLACEREC_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  if (const char* forced = std::getenv("PLACEREC_KERNELS"); forced != nullptr && std::string(forced) == "scalar") {
    return Backend::kScalar;
  }
  return cpu_has_avx2() ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<Backend>& active_slot() {
  static std::atomic<Backend> slot{initial_backend()};
  return slot;
}

}  // namespace

std::string_view to_string(Backend backend) {
  return backend == Backend::kAvx2 ? "avx2" : "scalar";
}

bool available(Backend backend) {
  if (backend == Backend::kScalar) return true;
  static const bool has_avx2 = cpu_has_avx2();
  return has_avx2;
}

const KernelTable& table(Backend backend) {
#if defined(PLACEREC_HAVE_AVX2)
  if (backend == Backend::kAvx2 && available(Backend::kAvx2)) return detail::kAvx2Table;
#endif
  return detail::kScalarTable;
}

Backend active_backend() { return active_slot().load(std::memory_order_relaxed); }

void set_active_backend(Backend backend) {
  if (!available(backend)) {
    throw ConfigError("kernel backend '" + std::string(to_string(backend)) + "' is not available on this CPU");
  }
  active_slot().store(backend, std::memory_order_relaxed);
}

double chi_squared(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  if (a.size() != b.size()) throw DataError("chi-squared distance needs equal-length histograms");
  return active().chi_squared(a.data(), b.data(), a.size());
}

double scaled_diff_sq(std::span<const double> a, double sa, std::span<const double> b, double sb) {
  if (a.size() != b.size()) throw DataError("vector length mismatch");
  return active().scaled_diff_sq(a.data(), sa, b.data(), sb, a.size());
}

double sum(std::span<const double> v) { return active().sum(v.data(), v.size()); }

double centered_sum_sq(std::span<const double> v, double center) {
  return active().centered_sum_sq(v.data(), center, v.size());
}

void shift_costs(std::span<const double> a_doubled, double sa, std::span<const double> b, double sb,
                 std::size_t rows, std::size_t cols, std::span<double> out) {
  if (a_doubled.size() != 2 * rows * cols || b.size() != rows * cols || out.size() != cols) {
    throw DataError("shift_costs: inconsistent matrix dimensions");
  }
  active().shift_costs(a_doubled.data(), sa, b.data(), sb, rows, cols, out.data());
}

}  // namespace placerec::kernels
