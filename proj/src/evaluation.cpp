#include "placerec/evaluation.hpp"

#include <algorithm>
#include <ostream>

#include "placerec/error.hpp"
#include "placerec/text_format.hpp"

namespace placerec {

using text::format_double;

bool GroundTruthRelation::matchable(std::size_t q) const {
  const std::size_t cols = reference_ids.size();
  return std::any_of(values.begin() + static_cast<std::ptrdiff_t>(q * cols),
                     values.begin() + static_cast<std::ptrdiff_t>((q + 1) * cols),
                     [](std::uint8_t v) { return v != 0; });
}

std::size_t GroundTruthRelation::matchable_queries() const {
  std::size_t n = 0;
  for (std::size_t q = 0; q < query_ids.size(); ++q) n += matchable(q) ? 1 : 0;
  return n;
}

GroundTruthRelation build_ground_truth(std::span<const std::int64_t> query_ids,
                                       std::span<const std::optional<Eigen::Vector3d>> query_positions,
                                       std::span<const std::int64_t> reference_ids,
                                       std::span<const std::optional<Eigen::Vector3d>> reference_positions,
                                       double threshold, const CandidateMask& mask) {
  if (query_ids.size() != query_positions.size() || reference_ids.size() != reference_positions.size()) {
    throw DataError("ground truth: id and position lists differ in length");
  }
  if (!(threshold > 0.0)) throw ConfigError("ground-truth threshold must be positive");
  for (std::size_t i = 0; i < query_positions.size(); ++i) {
    if (!query_positions[i]) throw DataError("query " + std::to_string(query_ids[i]) + " has no ground-truth position");
  }
  for (std::size_t i = 0; i < reference_positions.size(); ++i) {
    if (!reference_positions[i]) {
      throw DataError("reference " + std::to_string(reference_ids[i]) + " has no ground-truth position");
    }
  }
  GroundTruthRelation gt;
  gt.query_ids.assign(query_ids.begin(), query_ids.end());
  gt.reference_ids.assign(reference_ids.begin(), reference_ids.end());
  gt.threshold = threshold;
  gt.values.assign(query_ids.size() * reference_ids.size(), 0);
  for (std::size_t q = 0; q < query_ids.size(); ++q) {
    for (std::size_t r = 0; r < reference_ids.size(); ++r) {
      const double d = (*query_positions[q] - *reference_positions[r]).norm();
      gt.values[q * reference_ids.size() + r] = (d < threshold && mask.allows(q, r)) ? 1 : 0;
    }
  }
  return gt;
}

namespace {

struct Scored {
  double difference;
  bool correct;
};

std::vector<Scored> score_matches(const MatchResult& matches, const GroundTruthRelation& gt) {
  if (matches.queries.size() != gt.query_ids.size()) {
    throw DataError("evaluation: match table and ground truth cover different queries");
  }
  std::vector<Scored> scored;
  for (std::size_t q = 0; q < matches.queries.size(); ++q) {
    const QueryMatch& m = matches.queries[q];
    if (m.query_id != gt.query_ids[q]) throw DataError("evaluation: query ids disagree with ground truth");
    if (!m.reference_id) continue;
    if (m.reference_index >= gt.reference_ids.size() || gt.reference_ids[m.reference_index] != *m.reference_id) {
      throw DataError("evaluation: reference id " + std::to_string(*m.reference_id) + " not in ground truth");
    }
    scored.push_back({m.difference, gt.at(q, m.reference_index)});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) { return a.difference < b.difference; });
  return scored;
}

}  // namespace

PrCurve pr_curve(const MatchResult& matches, const GroundTruthRelation& gt) {
  const std::vector<Scored> scored = score_matches(matches, gt);
  PrCurve curve;
  curve.matchable_queries = gt.matchable_queries();
  if (curve.matchable_queries == 0) {
    throw DegenerateError("evaluation: no query has a ground-truth match, recall is undefined");
  }
  const double denominator = static_cast<double>(curve.matchable_queries);
  std::size_t accepted = 0;
  std::size_t true_positives = 0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    ++accepted;
    true_positives += scored[i].correct ? 1 : 0;
    if (i + 1 < scored.size() && scored[i + 1].difference == scored[i].difference) continue;
    PrPoint p;
    p.threshold = scored[i].difference;
    p.accepted = accepted;
    p.true_positives = true_positives;
    p.precision = static_cast<double>(true_positives) / static_cast<double>(accepted);
    p.recall = static_cast<double>(true_positives) / denominator;
    curve.points.push_back(p);
    if (true_positives == accepted) {
      curve.max_recall_at_full_precision = p.recall;
      curve.full_precision_threshold = p.threshold;
    }
  }
  if (curve.points.empty()) return curve;

  double best_precision = 0.0;
  for (const PrPoint& p : curve.points) best_precision = std::max(best_precision, p.precision);
  double prev_recall = 0.0;
  double prev_precision = best_precision;
  for (const PrPoint& p : curve.points) {
    curve.auc += (p.recall - prev_recall) * (p.precision + prev_precision) / 2.0;
    prev_recall = p.recall;
    prev_precision = p.precision;
  }
  return curve;
}

std::vector<RecognizedPlace> export_recognized_places(
    const MatchResult& matches, const GroundTruthRelation& gt,
    std::span<const std::optional<Eigen::Vector3d>> query_positions, std::optional<double> threshold) {
  if (matches.queries.size() != query_positions.size() || matches.queries.size() != gt.query_ids.size()) {
    throw DataError("recognized places: match table and positions cover different queries");
  }
  std::vector<RecognizedPlace> places;
  places.reserve(matches.queries.size());
  for (std::size_t q = 0; q < matches.queries.size(); ++q) {
    const QueryMatch& m = matches.queries[q];
    RecognizedPlace p;
    p.query_id = m.query_id;
    p.gt_position = query_positions[q];
    p.reference_id = m.reference_id;
    p.difference = m.difference;
    p.recognized = threshold.has_value() && m.reference_id.has_value() && m.difference <= *threshold;
    places.push_back(p);
  }
  return places;
}

namespace {

void write_fingerprint(std::ostream& out, const std::string& fingerprint) {
  if (!fingerprint.empty()) out << "# fingerprint " << fingerprint << '\n';
}

}  // namespace

void write_pr_curve_csv(std::ostream& out, const PrCurve& curve, const std::string& fingerprint) {
  out << "threshold,precision,recall\n";
  write_fingerprint(out, fingerprint);
  for (const PrPoint& p : curve.points) {
    out << format_double(p.threshold) << ',' << format_double(p.precision) << ',' << format_double(p.recall) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const PrCurve& curve, const std::string& fingerprint) {
  out << "auc,max_recall_at_full_precision,full_precision_threshold,matchable_queries\n";
  write_fingerprint(out, fingerprint);
  out << format_double(curve.auc) << ',' << format_double(curve.max_recall_at_full_precision) << ','
      << (curve.full_precision_threshold ? format_double(*curve.full_precision_threshold) : std::string()) << ','
      << curve.matchable_queries << '\n';
}

void write_recognized_csv(std::ostream& out, std::span<const RecognizedPlace> places, const std::string& fingerprint) {
  out << "query_id,gt_x,gt_y,gt_z,reference_id,difference,recognized\n";
  write_fingerprint(out, fingerprint);
  for (const RecognizedPlace& p : places) {
    out << p.query_id << ',';
    if (p.gt_position) {
      out << format_double(p.gt_position->x()) << ',' << format_double(p.gt_position->y()) << ','
          << format_double(p.gt_position->z());
    } else {
      out << ",,";
    }
    out << ',' << (p.reference_id ? std::to_string(*p.reference_id) : std::string()) << ','
        << (p.reference_id ? format_double(p.difference) : std::string()) << ',' << (p.recognized ? 1 : 0) << '\n';
  }
}

}  // namespace placerec
