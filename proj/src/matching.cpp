#include "placerec/matching.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "placerec/error.hpp"
#include "placerec/kernels.hpp"
#include "placerec/parallel.hpp"

namespace placerec {

std::string_view to_string(MatrixKind kind) {
  switch (kind) {
    case MatrixKind::kStructure:
      return "structure";
    case MatrixKind::kIntensity:
      return "intensity";
    case MatrixKind::kFused:
      return "fused";
  }
  return "unknown";
}

CandidateMask CandidateMask::exclusion_window(std::span<const std::int64_t> query_ids,
                                              std::span<const std::int64_t> reference_ids, std::int64_t window) {
  CandidateMask mask;
  mask.cols_ = reference_ids.size();
  mask.allowed_.assign(query_ids.size() * reference_ids.size(), 0);
  for (std::size_t q = 0; q < query_ids.size(); ++q) {
    for (std::size_t r = 0; r < reference_ids.size(); ++r) {
      const std::int64_t gap = query_ids[q] > reference_ids[r] ? query_ids[q] - reference_ids[r]
                                                                : reference_ids[r] - query_ids[q];
      mask.allowed_[q * mask.cols_ + r] = gap >= window ? 1 : 0;
    }
  }
  return mask;
}

DifferenceMatrix make_difference_matrix(MatrixKind kind, std::vector<std::int64_t> query_ids,
                                        std::vector<std::int64_t> reference_ids, CandidateMask mask) {
  DifferenceMatrix d;
  d.kind = kind;
  d.values.assign(query_ids.size() * reference_ids.size(), 0.0);
  d.query_ids = std::move(query_ids);
  d.reference_ids = std::move(reference_ids);
  d.mask = std::move(mask);
  return d;
}

// --- pairwise distances -----------------------------------------------------

double chi_squared_distance(std::span<const std::uint32_t> h1, std::span<const std::uint32_t> h2) {
  if (h1.size() != h2.size()) throw DataError("chi-squared distance: histogram lengths differ");
  return kernels::chi_squared(h1, h2);
}

double chi_squared_distance(const DelightHistogram& h1, const DelightHistogram& h2) {
  if (h1.counts.size() != kDelightLength || h2.counts.size() != kDelightLength) {
    throw DataError("chi-squared distance: DELIGHT histogram has the wrong length");
  }
  const auto& k = kernels::active();
  std::uint64_t occupied = h1.occupancy | h2.occupancy;
  double total = 0.0;
  while (occupied != 0) {
    const int chunk = __builtin_ctzll(occupied);
    occupied &= occupied - 1;
    const std::size_t offset = static_cast<std::size_t>(chunk) * kDelightChunk;
    total += k.chi_squared(h1.counts.data() + offset, h2.counts.data() + offset, kDelightChunk);
  }
  return total;
}

namespace {

double inverse_norm(std::span<const double> v) {
  const double norm_sq = kernels::active().centered_sum_sq(v.data(), 0.0, v.size());
  return norm_sq > 0.0 ? 1.0 / std::sqrt(norm_sq) : 0.0;
}

/// Distance between normalized vectors given their inverse norms (0 marks a zero vector).
double normalized_distance(std::span<const double> a, double inv_a, std::span<const double> b, double inv_b) {
  if (inv_a == 0.0 || inv_b == 0.0) return (inv_a == 0.0 && inv_b == 0.0) ? 0.0 : 2.0;
  return std::sqrt(kernels::active().scaled_diff_sq(a.data(), inv_a, b.data(), inv_b, a.size()));
}

}  // namespace

double euclidean_signature_distance(std::span<const double> s1, std::span<const double> s2) {
  if (s1.size() != s2.size()) throw DataError("Euclidean distance: signature lengths differ");
  return normalized_distance(s1, inverse_norm(s1), s2, inverse_norm(s2));
}

double min_variant_distance(const DelightSignature& a, const DelightSignature& b, VariantSearch search) {
  const std::size_t query_variants = search == VariantSearch::kSymmetric ? kPcaVariants : 1;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < query_variants; ++i) {
    for (std::size_t j = 0; j < kPcaVariants; ++j) {
      best = std::min(best, chi_squared_distance(a.variants[i], b.variants[j]));
    }
  }
  return best;
}

namespace {

const std::vector<double>& channel_of(const M2dpVariant& v, M2dpChannel channel) {
  return channel == M2dpChannel::kStructure ? v.structure : v.intensity;
}

void check_same_shape(const M2dpSignature& a, const M2dpSignature& b) {
  for (std::size_t k = 0; k < kPcaVariants; ++k) {
    if (a.variants[k].structure.size() != b.variants[0].structure.size() ||
        a.variants[k].intensity.size() != b.variants[0].intensity.size() ||
        b.variants[k].structure.size() != b.variants[0].structure.size() ||
        b.variants[k].intensity.size() != b.variants[0].intensity.size()) {
      throw DataError("M2DP signatures were computed with different parameters");
    }
  }
}

}  // namespace

double min_variant_distance(const M2dpSignature& a, const M2dpSignature& b, M2dpChannel channel,
                            VariantSearch search) {
  check_same_shape(a, b);
  const std::size_t query_variants = search == VariantSearch::kSymmetric ? kPcaVariants : 1;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < query_variants; ++i) {
    for (std::size_t j = 0; j < kPcaVariants; ++j) {
      best = std::min(best, euclidean_signature_distance(channel_of(a.variants[i], channel),
                                                         channel_of(b.variants[j], channel)));
    }
  }
  return best;
}

namespace {

std::vector<double> double_rows(std::span<const double> m, std::size_t rows, std::size_t cols) {
  std::vector<double> out(2 * rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(m.data() + r * cols, cols, out.data() + r * 2 * cols);
    std::copy_n(m.data() + r * cols, cols, out.data() + r * 2 * cols + cols);
  }
  return out;
}

/// A Scan Context channel prepared for repeated shift searches. Only the query
/// side of a comparison needs the doubled rows.
struct PreparedGrid {
  std::span<const double> values;
  std::vector<double> doubled;
  double inv_norm = 0.0;
};

PreparedGrid prepare_query_grid(std::span<const double> values, std::size_t rows, std::size_t cols) {
  return {values, double_rows(values, rows, cols), inverse_norm(values)};
}

PreparedGrid prepare_reference_grid(std::span<const double> values) { return {values, {}, inverse_norm(values)}; }

/// Distance for every shift of b; constant when either grid is all zero.
void shift_distances(const PreparedGrid& a, const PreparedGrid& b, std::size_t rows, std::size_t cols,
                     std::span<double> out) {
  if (a.inv_norm == 0.0 || b.inv_norm == 0.0) {
    std::fill(out.begin(), out.end(), (a.inv_norm == 0.0 && b.inv_norm == 0.0) ? 0.0 : 2.0);
    return;
  }
  kernels::active().shift_costs(a.doubled.data(), a.inv_norm, b.values.data(), b.inv_norm, rows, cols, out.data());
  for (double& v : out) v = std::sqrt(v);
}

ShiftedDistance best_shift(std::span<const double> distances) {
  ShiftedDistance best{distances[0], 0};
  for (std::size_t k = 1; k < distances.size(); ++k) {
    if (distances[k] < best.distance) best = {distances[k], static_cast<int>(k)};
  }
  return best;
}

void check_grid(const ScanContextSignature& s, int rows, int cols) {
  const auto cells = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  if (s.rings != rows || s.sectors != cols || s.structure.size() != cells || s.intensity.size() != cells) {
    throw DataError("Scan Context signatures were computed with different grid sizes");
  }
}

}  // namespace

ShiftedDistance scan_context_distance(std::span<const double> a, std::span<const double> b, int rows, int cols) {
  if (rows <= 0 || cols <= 0 || a.size() != b.size() ||
      a.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw DataError("Scan Context distance: matrix dimensions differ");
  }
  const auto r = static_cast<std::size_t>(rows);
  const auto c = static_cast<std::size_t>(cols);
  std::vector<double> distances(c);
  shift_distances(prepare_query_grid(a, r, c), prepare_reference_grid(b), r, c, distances);
  return best_shift(distances);
}

JointShiftedDistance scan_context_joint_distance(const ScanContextSignature& a, const ScanContextSignature& b,
                                                 double structure_weight) {
  check_grid(a, a.rings, a.sectors);
  check_grid(b, a.rings, a.sectors);
  const auto r = static_cast<std::size_t>(a.rings);
  const auto c = static_cast<std::size_t>(a.sectors);
  std::vector<double> ds(c);
  std::vector<double> di(c);
  shift_distances(prepare_query_grid(a.structure, r, c), prepare_reference_grid(b.structure), r, c, ds);
  shift_distances(prepare_query_grid(a.intensity, r, c), prepare_reference_grid(b.intensity), r, c, di);
  JointShiftedDistance best{ds[0], di[0], 0};
  double best_cost = structure_weight * ds[0] + di[0];
  for (std::size_t k = 1; k < c; ++k) {
    const double cost = structure_weight * ds[k] + di[k];
    if (cost < best_cost) {
      best_cost = cost;
      best = {ds[k], di[k], static_cast<int>(k)};
    }
  }
  return best;
}

// --- matrices ---------------------------------------------------------------

namespace {

struct MatrixFrame {
  std::vector<std::int64_t> query_ids;
  std::vector<std::int64_t> reference_ids;
  CandidateMask mask;

  DifferenceMatrix make(MatrixKind kind) const { return make_difference_matrix(kind, query_ids, reference_ids, mask); }
};

MatrixFrame make_frame(std::size_t n_queries, std::span<const std::int64_t> query_ids, std::size_t n_references,
                       std::span<const std::int64_t> reference_ids, const MatchOptions& options) {
  if (n_queries == 0 || n_references == 0) throw DataError("difference matrix needs queries and references");
  if (query_ids.size() != n_queries || reference_ids.size() != n_references) {
    throw DataError("difference matrix: id list length does not match signature count");
  }
  MatrixFrame frame;
  frame.query_ids.assign(query_ids.begin(), query_ids.end());
  frame.reference_ids.assign(reference_ids.begin(), reference_ids.end());
  if (options.exclusion_window) {
    frame.mask = CandidateMask::exclusion_window(query_ids, reference_ids, *options.exclusion_window);
  }
  return frame;
}

/// Visits every candidate pair, parallel over rows.
template <class Fn>
void for_each_candidate(const MatrixFrame& frame, int jobs, Fn&& fn) {
  const std::size_t cols = frame.reference_ids.size();
  parallel_for(frame.query_ids.size(), jobs, [&](std::size_t q) {
    for (std::size_t r = 0; r < cols; ++r) {
      if (frame.mask.allows(q, r)) fn(q, r);
    }
  });
}

}  // namespace

DifferenceMatrices build_difference_matrices(std::span<const DelightSignature> queries,
                                             std::span<const std::int64_t> query_ids,
                                             std::span<const DelightSignature> references,
                                             std::span<const std::int64_t> reference_ids,
                                             const MatchOptions& options) {
  const MatrixFrame frame = make_frame(queries.size(), query_ids, references.size(), reference_ids, options);
  DifferenceMatrices out{std::nullopt, frame.make(MatrixKind::kIntensity), std::nullopt, std::nullopt};
  for_each_candidate(frame, options.jobs, [&](std::size_t q, std::size_t r) {
    out.intensity.at(q, r) = min_variant_distance(queries[q], references[r], options.variant_search);
  });
  return out;
}

DifferenceMatrices build_difference_matrices(std::span<const M2dpSignature> queries,
                                             std::span<const std::int64_t> query_ids,
                                             std::span<const M2dpSignature> references,
                                             std::span<const std::int64_t> reference_ids,
                                             const MatchOptions& options) {
  const MatrixFrame frame = make_frame(queries.size(), query_ids, references.size(), reference_ids, options);
  for (const auto& s : references) check_same_shape(queries[0], s);
  for (const auto& s : queries) check_same_shape(s, references[0]);

  // Inverse norms per (signature, variant, channel), computed once.
  struct Norms {
    std::array<double, kPcaVariants> structure{};
    std::array<double, kPcaVariants> intensity{};
  };
  const auto norms_of = [](std::span<const M2dpSignature> set) {
    std::vector<Norms> out(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
      for (std::size_t k = 0; k < kPcaVariants; ++k) {
        out[i].structure[k] = inverse_norm(set[i].variants[k].structure);
        out[i].intensity[k] = inverse_norm(set[i].variants[k].intensity);
      }
    }
    return out;
  };
  const auto query_norms = norms_of(queries);
  const auto reference_norms = norms_of(references);
  const std::size_t query_variants = options.variant_search == VariantSearch::kSymmetric ? kPcaVariants : 1;

  DifferenceMatrices out{frame.make(MatrixKind::kStructure), frame.make(MatrixKind::kIntensity), std::nullopt,
                         std::nullopt};
  for_each_candidate(frame, options.jobs, [&](std::size_t q, std::size_t r) {
    double best_s = std::numeric_limits<double>::infinity();
    double best_i = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < query_variants; ++i) {
      const auto& a = queries[q].variants[i];
      for (std::size_t j = 0; j < kPcaVariants; ++j) {
        const auto& b = references[r].variants[j];
        best_s = std::min(best_s, normalized_distance(a.structure, query_norms[q].structure[i], b.structure,
                                                      reference_norms[r].structure[j]));
        best_i = std::min(best_i, normalized_distance(a.intensity, query_norms[q].intensity[i], b.intensity,
                                                      reference_norms[r].intensity[j]));
      }
    }
    out.structure->at(q, r) = best_s;
    out.intensity.at(q, r) = best_i;
  });
  return out;
}

DifferenceMatrices build_difference_matrices(std::span<const ScanContextSignature> queries,
                                             std::span<const std::int64_t> query_ids,
                                             std::span<const ScanContextSignature> references,
                                             std::span<const std::int64_t> reference_ids,
                                             const MatchOptions& options) {
  const MatrixFrame frame = make_frame(queries.size(), query_ids, references.size(), reference_ids, options);
  const int rows = queries[0].rings;
  const int cols = queries[0].sectors;
  for (const auto& s : queries) check_grid(s, rows, cols);
  for (const auto& s : references) check_grid(s, rows, cols);
  const auto r_count = static_cast<std::size_t>(rows);
  const auto c_count = static_cast<std::size_t>(cols);

  struct Prepared {
    PreparedGrid structure;
    PreparedGrid intensity;
  };
  std::vector<Prepared> prepared_queries;
  prepared_queries.reserve(queries.size());
  for (const auto& s : queries) {
    prepared_queries.push_back(
        {prepare_query_grid(s.structure, r_count, c_count), prepare_query_grid(s.intensity, r_count, c_count)});
  }
  std::vector<Prepared> prepared_references;
  prepared_references.reserve(references.size());
  for (const auto& s : references) {
    prepared_references.push_back({prepare_reference_grid(s.structure), prepare_reference_grid(s.intensity)});
  }

  DifferenceMatrices out{frame.make(MatrixKind::kStructure), frame.make(MatrixKind::kIntensity), std::nullopt,
                         std::nullopt};
  if (options.scan_context_joint_shift) {
    out.joint_structure = frame.make(MatrixKind::kStructure);
    out.joint_intensity = frame.make(MatrixKind::kIntensity);
  }
  const double w = options.structure_weight;
  for_each_candidate(frame, options.jobs, [&](std::size_t q, std::size_t r) {
    thread_local std::vector<double> ds;
    thread_local std::vector<double> di;
    ds.resize(c_count);
    di.resize(c_count);
    shift_distances(prepared_queries[q].structure, prepared_references[r].structure, r_count, c_count, ds);
    shift_distances(prepared_queries[q].intensity, prepared_references[r].intensity, r_count, c_count, di);
    out.structure->at(q, r) = best_shift(ds).distance;
    out.intensity.at(q, r) = best_shift(di).distance;
    if (out.joint_structure) {
      std::size_t best_k = 0;
      double best_cost = w * ds[0] + di[0];
      for (std::size_t k = 1; k < c_count; ++k) {
        const double cost = w * ds[k] + di[k];
        if (cost < best_cost) {
          best_cost = cost;
          best_k = k;
        }
      }
      out.joint_structure->at(q, r) = ds[best_k];
      out.joint_intensity->at(q, r) = di[best_k];
    }
  });
  return out;
}

DifferenceMatrix normalize_rows(const DifferenceMatrix& d, std::size_t* degenerate_rows) {
  DifferenceMatrix out = make_difference_matrix(d.kind, d.query_ids, d.reference_ids, d.mask);
  std::size_t degenerate = 0;
  std::vector<double> candidates;
  const auto& k = kernels::active();
  for (std::size_t q = 0; q < d.rows(); ++q) {
    candidates.clear();
    for (std::size_t r = 0; r < d.cols(); ++r) {
      if (d.mask.allows(q, r)) candidates.push_back(d.at(q, r));
    }
    if (candidates.empty()) {
      ++degenerate;
      continue;
    }
    const double n = static_cast<double>(candidates.size());
    const double mean = k.sum(candidates.data(), candidates.size()) / n;
    const double stddev = std::sqrt(k.centered_sum_sq(candidates.data(), mean, candidates.size()) / n);
    if (!(stddev > 0.0)) {
      ++degenerate;
      continue;
    }
    for (std::size_t r = 0; r < d.cols(); ++r) {
      if (d.mask.allows(q, r)) out.at(q, r) = (d.at(q, r) - mean) / stddev;
    }
  }
  if (degenerate_rows != nullptr) *degenerate_rows = degenerate;
  return out;
}

DifferenceMatrix fuse(const DifferenceMatrix& structure, const DifferenceMatrix& intensity, double structure_weight,
                      std::size_t* degenerate_rows) {
  if (structure.rows() != intensity.rows() || structure.cols() != intensity.cols() ||
      structure.query_ids != intensity.query_ids || structure.reference_ids != intensity.reference_ids) {
    throw DataError("fusion needs structure and intensity matrices over the same ids");
  }
  std::size_t degenerate_s = 0;
  std::size_t degenerate_i = 0;
  const DifferenceMatrix ns = normalize_rows(structure, &degenerate_s);
  const DifferenceMatrix ni = normalize_rows(intensity, &degenerate_i);
  DifferenceMatrix out = make_difference_matrix(MatrixKind::kFused, structure.query_ids, structure.reference_ids,
                                                structure.mask);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = structure_weight * ns.values[i] + ni.values[i];
  if (degenerate_rows != nullptr) *degenerate_rows = degenerate_s + degenerate_i;
  return out;
}

DifferenceMatrix default_ranking_matrix(const DifferenceMatrices& m, double structure_weight,
                                        std::size_t* degenerate_rows) {
  if (m.joint_structure && m.joint_intensity) {
    return fuse(*m.joint_structure, *m.joint_intensity, structure_weight, degenerate_rows);
  }
  if (m.structure) return fuse(*m.structure, m.intensity, structure_weight, degenerate_rows);
  if (degenerate_rows != nullptr) *degenerate_rows = 0;
  return m.intensity;
}

MatchResult match(const DifferenceMatrix& d) {
  MatchResult result;
  result.queries.reserve(d.rows());
  for (std::size_t q = 0; q < d.rows(); ++q) {
    QueryMatch m;
    m.query_id = d.query_ids[q];
    for (std::size_t r = 0; r < d.cols(); ++r) {
      if (!d.mask.allows(q, r)) continue;
      const double v = d.at(q, r);
      const bool better = !m.reference_id || v < m.difference ||
                          (v == m.difference && d.reference_ids[r] < *m.reference_id);
      if (better) {
        m.reference_id = d.reference_ids[r];
        m.reference_index = r;
        m.difference = v;
      }
    }
    result.queries.push_back(m);
  }
  return result;
}

}  // namespace placerec
