#pragma once

// Precision-recall scoring of row-argmin matches against ground-truth
// positions.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "placerec/matching.hpp"

namespace placerec {

/// Queries x references: true iff the ground-truth positions are closer than
/// `threshold` (strictly) and the pair is a matching candidate.
struct GroundTruthRelation {
  std::vector<std::int64_t> query_ids;
  std::vector<std::int64_t> reference_ids;
  std::vector<std::uint8_t> values;
  double threshold = 0.0;

  bool at(std::size_t q, std::size_t r) const { return values[q * reference_ids.size() + r] != 0; }
  bool matchable(std::size_t q) const;
  std::size_t matchable_queries() const;
};

/// Throws DataError when a position is missing or the lists disagree in length.
GroundTruthRelation build_ground_truth(std::span<const std::int64_t> query_ids,
                                       std::span<const std::optional<Eigen::Vector3d>> query_positions,
                                       std::span<const std::int64_t> reference_ids,
                                       std::span<const std::optional<Eigen::Vector3d>> reference_positions,
                                       double threshold, const CandidateMask& mask = {});

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t accepted = 0;
  std::size_t true_positives = 0;
};

struct PrCurve {
  /// One point per distinct match difference, loosest last.
  std::vector<PrPoint> points;
  double auc = 0.0;
  double max_recall_at_full_precision = 0.0;
  /// Loosest threshold with precision 1; empty when none exists.
  std::optional<double> full_precision_threshold;
  std::size_t matchable_queries = 0;
};

/// Sweeps the acceptance threshold over the sorted distinct match differences.
/// A query is accepted when its difference is <= the threshold and is a true
/// positive when its matched reference is ground-truth true. Recall divides by
/// the number of queries with at least one true reference. AUC integrates the
/// (recall, precision) points with the trapezoid rule after prepending
/// (0, highest precision). Throws DegenerateError when no query is matchable
/// and DataError when ids disagree.
PrCurve pr_curve(const MatchResult& matches, const GroundTruthRelation& gt);

struct RecognizedPlace {
  std::int64_t query_id = 0;
  std::optional<Eigen::Vector3d> gt_position;
  std::optional<std::int64_t> reference_id;
  double difference = 0.0;
  bool recognized = false;
};

/// Flags the queries accepted at `threshold` (none when it is empty).
std::vector<RecognizedPlace> export_recognized_places(
    const MatchResult& matches, const GroundTruthRelation& gt,
    std::span<const std::optional<Eigen::Vector3d>> query_positions, std::optional<double> threshold);

/// CSV writers. A non-empty fingerprint is written as a "# fingerprint" line
/// after the header.
void write_pr_curve_csv(std::ostream& out, const PrCurve& curve, const std::string& fingerprint = {});
void write_summary_csv(std::ostream& out, const PrCurve& curve, const std::string& fingerprint = {});
void write_recognized_csv(std::ostream& out, std::span<const RecognizedPlace> places,
                          const std::string& fingerprint = {});

}  // namespace placerec
