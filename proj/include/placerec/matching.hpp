#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "placerec/descriptors.hpp"

namespace placerec {

enum class MatrixKind { kStructure, kIntensity, kFused };
std::string_view to_string(MatrixKind kind);

/// Which (query, reference) pairs may be matched. Default-constructed masks
/// allow everything.
class CandidateMask {
 public:
  CandidateMask() = default;

  /// Same-sequence matching: a reference is a candidate only when its id is at
  /// least `window` keyframes away from the query id.
  static CandidateMask exclusion_window(std::span<const std::int64_t> query_ids,
                                        std::span<const std::int64_t> reference_ids, std::int64_t window);

  bool allows_all() const { return allowed_.empty(); }
  bool allows(std::size_t query, std::size_t reference) const {
    return allowed_.empty() || allowed_[query * cols_ + reference] != 0;
  }

 private:
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> allowed_;
};

/// Queries x references matrix of signature differences, row-major.
struct DifferenceMatrix {
  MatrixKind kind = MatrixKind::kStructure;
  std::vector<std::int64_t> query_ids;
  std::vector<std::int64_t> reference_ids;
  std::vector<double> values;
  CandidateMask mask;

  std::size_t rows() const { return query_ids.size(); }
  std::size_t cols() const { return reference_ids.size(); }
  double at(std::size_t q, std::size_t r) const { return values[q * cols() + r]; }
  double& at(std::size_t q, std::size_t r) { return values[q * cols() + r]; }
  std::span<const double> row(std::size_t q) const { return {values.data() + q * cols(), cols()}; }
};

DifferenceMatrix make_difference_matrix(MatrixKind kind, std::vector<std::int64_t> query_ids,
                                        std::vector<std::int64_t> reference_ids, CandidateMask mask = {});

// --- pairwise distances -----------------------------------------------------

/// sum (h1 - h2)^2 / (h1 + h2) over entries with a nonzero denominator.
double chi_squared_distance(std::span<const std::uint32_t> h1, std::span<const std::uint32_t> h2);
/// Same value, skipping 64-entry chunks that are empty in both histograms.
double chi_squared_distance(const DelightHistogram& h1, const DelightHistogram& h2);

/// || s1/|s1| - s2/|s2| ||. Two zero vectors are at distance 0; a zero vector
/// is at distance 2 from any nonzero vector.
double euclidean_signature_distance(std::span<const double> s1, std::span<const double> s2);

enum class VariantSearch {
  /// min over all 4 x 4 (query variant, reference variant) pairs; symmetric.
  kSymmetric,
  /// min over query variant 0 against the 4 reference variants.
  kQueryCanonical,
};

enum class M2dpChannel { kStructure, kIntensity };

double min_variant_distance(const DelightSignature& a, const DelightSignature& b,
                            VariantSearch search = VariantSearch::kSymmetric);
double min_variant_distance(const M2dpSignature& a, const M2dpSignature& b, M2dpChannel channel,
                            VariantSearch search = VariantSearch::kSymmetric);

struct ShiftedDistance {
  double distance = 0.0;
  int shift = 0;  // applied to b's columns
};

/// min over circular column shifts of b of the normalized Euclidean distance.
ShiftedDistance scan_context_distance(std::span<const double> a, std::span<const double> b, int rows, int cols);

struct JointShiftedDistance {
  double structure = 0.0;
  double intensity = 0.0;
  int shift = 0;
};

/// One shift for both channels: the one minimizing
/// structure_weight * d_structure + d_intensity (first minimum on ties).
JointShiftedDistance scan_context_joint_distance(const ScanContextSignature& a, const ScanContextSignature& b,
                                                 double structure_weight);

// --- matrices ---------------------------------------------------------------

struct MatchOptions {
  VariantSearch variant_search = VariantSearch::kSymmetric;
  /// w_s of the fusion; also ranks shifts in the joint Scan Context search.
  double structure_weight = 2.0;
  bool scan_context_joint_shift = true;
  /// Same-sequence matching excludes temporally close references.
  std::optional<std::int64_t> exclusion_window;
  int jobs = 1;
};

struct DifferenceMatrices {
  /// Absent for DELIGHT, which only has an intensity channel.
  std::optional<DifferenceMatrix> structure;
  DifferenceMatrix intensity;
  /// Scan Context with joint shift search: both channels at the shared shift.
  std::optional<DifferenceMatrix> joint_structure;
  std::optional<DifferenceMatrix> joint_intensity;
};

/// Throws DataError for empty inputs or mismatched signature dimensions.
DifferenceMatrices build_difference_matrices(std::span<const DelightSignature> queries,
                                             std::span<const std::int64_t> query_ids,
                                             std::span<const DelightSignature> references,
                                             std::span<const std::int64_t> reference_ids,
                                             const MatchOptions& options);
DifferenceMatrices build_difference_matrices(std::span<const M2dpSignature> queries,
                                             std::span<const std::int64_t> query_ids,
                                             std::span<const M2dpSignature> references,
                                             std::span<const std::int64_t> reference_ids,
                                             const MatchOptions& options);
DifferenceMatrices build_difference_matrices(std::span<const ScanContextSignature> queries,
                                             std::span<const std::int64_t> query_ids,
                                             std::span<const ScanContextSignature> references,
                                             std::span<const std::int64_t> reference_ids,
                                             const MatchOptions& options);

/// Row-wise (x - mean) / std with the population standard deviation, over the
/// row's candidates. Rows with zero spread (or no candidates) become all zeros
/// and are counted in `degenerate_rows`.
DifferenceMatrix normalize_rows(const DifferenceMatrix& d, std::size_t* degenerate_rows = nullptr);

/// w_s * N_row(D_s) + N_row(D_i).
DifferenceMatrix fuse(const DifferenceMatrix& structure, const DifferenceMatrix& intensity, double structure_weight,
                      std::size_t* degenerate_rows = nullptr);

/// The matrix the matcher ranks by default: the fused one when a structure
/// channel exists (joint-shift variant for Scan Context), otherwise intensity.
DifferenceMatrix default_ranking_matrix(const DifferenceMatrices& m, double structure_weight,
                                        std::size_t* degenerate_rows = nullptr);

struct QueryMatch {
  std::int64_t query_id = 0;
  /// Empty when the query had no candidate reference.
  std::optional<std::int64_t> reference_id;
  std::size_t reference_index = 0;
  double difference = 0.0;
};

struct MatchResult {
  std::vector<QueryMatch> queries;
};

/// Row argmin over candidates; ties go to the smallest reference id.
MatchResult match(const DifferenceMatrix& d);

}  // namespace placerec
