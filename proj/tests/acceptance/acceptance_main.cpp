// End-to-end acceptance checks. Prints one PASS/FAIL/SKIP line per check and
// exits nonzero when any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/SVD>

#include "descriptor_oracles.hpp"
#include "placerec/alignment.hpp"
#include "placerec/error.hpp"
#include "placerec/pipeline.hpp"
#include "test_support.hpp"

namespace placerec {
namespace {

using Clock = std::chrono::steady_clock;

// Tolerances and bounds.
constexpr double kInvarianceTolerance = 1e-6;
constexpr double kInvarianceSeconds = 60.0;
constexpr double kSvdTolerance = 1e-6;
constexpr double kFusionTolerance = 1e-12;
constexpr double kMomentTolerance = 1e-9;
constexpr double kStructureAucFloor = 0.95;
constexpr double kStructureRecallFloor = 0.8;
constexpr double kIntensityAucDrop = 0.2;
constexpr double kCorpusSeconds = 120.0;
constexpr double kFilterDescribeMs = 10.0;
constexpr double kDelightMs = 5.0;
constexpr double kQueryMs = 50.0;
constexpr std::size_t kPerfPoints = 2700;
constexpr std::size_t kPerfReferences = 1000;
constexpr double kKittiPolarMean = 2706.2;
constexpr double kKittiVoxelMean = 1610.6;
constexpr double kKittiBand = 0.3;

// Out-and-back street: keyframe id k sits at x = k - 90 on the way out
// (ids 0..289) and at x = 490 - k on the way back (ids 290..490).
constexpr IdRange kQueries{300, 490};
constexpr IdRange kReferences{90, 289};

int failures = 0;

void report(const std::string& status, const std::string& name, const std::string& detail) {
  std::cout << status << "  " << name << ": " << detail << std::endl;
  if (status == "FAIL") ++failures;
}

void check(bool ok, const std::string& name, const std::string& detail) { report(ok ? "PASS" : "FAIL", name, detail); }

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int worker_count() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

WorldSpec corpus_spec() {
  WorldSpec spec;
  spec.seed = 7;
  spec.trajectory.waypoints = {{-90.0, 0.0}, {200.0, 0.0}, {0.0, 0.0}};
  spec.trajectory.speed = 1.0;
  spec.sensor.rays_per_keyframe = 800;
  return spec;
}

PerturbationSpec intensity_change() {
  PerturbationSpec p;
  p.legs = {1};
  p.intensity_gain = 0.8;
  p.intensity_offset = 15.0;
  p.element_jitter = 120.0;
  p.point_noise = 8.0;
  return p;
}

PerturbationSpec combined_change() {
  PerturbationSpec p = intensity_change();
  p.vegetation_resample = 0.3;
  return p;
}

std::vector<Keyframe> corpus(const PerturbationSpec& perturbation) {
  const WorldSpec spec = corpus_spec();
  return perturb(generate(spec), perturbation, spec.seed).keyframes;
}

struct Archives {
  SignatureArchive queries;
  SignatureArchive references;
};

Archives describe_corpus(const std::vector<Keyframe>& keyframes, DescriptorKind kind, const PipelineConfig& config) {
  const auto scans = imitate_sequence(keyframes, default_filter(kind), config.scan);
  DescribeOptions options;
  options.jobs = worker_count();
  return {describe_scans(select_scans(scans, kQueries), kind, config, options),
          describe_scans(select_scans(scans, kReferences), kind, config, options)};
}

/// PR curves of every matrix the descriptor produces, plus its default ranking.
struct CorpusResult {
  std::map<MatrixKind, PrCurve> curves;
  MatrixKind default_ranking = MatrixKind::kFused;
};

CorpusResult evaluate_corpus(const std::vector<Keyframe>& keyframes, DescriptorKind kind,
                             const PipelineConfig& config) {
  const Archives a = describe_corpus(keyframes, kind, config);
  MatchRequest request;
  request.jobs = worker_count();
  const MatchOutputs out = match_archives(a.queries, a.references, config, request);
  CorpusResult result;
  result.default_ranking = out.table.ranked_by;
  const auto curve_of = [&](const DifferenceMatrix& d, MatrixKind ranked_by) {
    MatchTable table;
    table.fingerprint = config.fingerprint();
    table.descriptor = kind;
    table.ranked_by = ranked_by;
    table.matches = match(d);
    return evaluate_matches(table, a.queries, a.references, config).curve;
  };
  result.curves[MatrixKind::kIntensity] = curve_of(out.matrices.intensity, MatrixKind::kIntensity);
  if (out.matrices.structure) {
    result.curves[MatrixKind::kStructure] = curve_of(*out.matrices.structure, MatrixKind::kStructure);
  }
  if (out.fused) result.curves[MatrixKind::kFused] = curve_of(*out.fused, MatrixKind::kFused);
  return result;
}

std::string curve_text(const PrCurve& c) {
  return "AUC " + fmt(c.auc) + ", max recall " + fmt(c.max_recall_at_full_precision);
}

// --- invariance ---------------------------------------------------------------

void check_invariance() {
  const auto start = Clock::now();
  const PipelineConfig config;
  const auto keyframes = corpus({});
  const auto polar = imitate_sequence(keyframes, FilterKind::kPolar, config.scan);
  const auto voxel = imitate_sequence(keyframes, FilterKind::kVoxel, config.scan);
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> pick(0, polar.size() - 1);
  std::uniform_int_distribution<int> sector(1, config.scan_context.sectors - 1);
  double worst_delight = 0.0, worst_m2dp = 0.0, worst_sc = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = pick(rng);
    const RigidTransform t = testing::random_transform(rng, 50.0);
    const AlignedCloudSet a = pca_align(polar[k].points);
    const AlignedCloudSet b = pca_align(transform_cloud(t, polar[k].points));
    worst_delight = std::max(worst_delight, min_variant_distance(describe_delight(a, config.delight),
                                                                 describe_delight(b, config.delight)));
    const M2dpSignature ma = describe_m2dp(a, config.m2dp), mb = describe_m2dp(b, config.m2dp);
    worst_m2dp = std::max({worst_m2dp, min_variant_distance(ma, mb, M2dpChannel::kStructure),
                           min_variant_distance(ma, mb, M2dpChannel::kIntensity)});

    // Turn the scan about the sensor's vertical axis (camera y) by whole sectors.
    RigidTransform yaw;
    yaw.rotation = Eigen::AngleAxisd(sector(rng) * 2.0 * testing::kPi / config.scan_context.sectors,
                                     Eigen::Vector3d::UnitY())
                       .toRotationMatrix();
    const ScanContextSignature sa = describe_scan_context(pca_align(voxel[k].points), config.scan_context);
    const ScanContextSignature sb =
        describe_scan_context(pca_align(transform_cloud(yaw, voxel[k].points)), config.scan_context);
    const int rings = config.scan_context.rings, sectors = config.scan_context.sectors;
    worst_sc = std::max({worst_sc, scan_context_distance(sa.structure, sb.structure, rings, sectors).distance,
                         scan_context_distance(sa.intensity, sb.intensity, rings, sectors).distance});
  }
  const double elapsed = seconds_since(start);
  check(worst_delight < kInvarianceTolerance && worst_m2dp < kInvarianceTolerance && worst_sc < kInvarianceTolerance &&
            elapsed < kInvarianceSeconds,
        "rigid-motion invariance",
        "50 scans, worst distance DELIGHT " + fmt(worst_delight) + ", M2DP " + fmt(worst_m2dp) +
            ", Scan Context (sector yaw) " + fmt(worst_sc) + ", " + fmt(elapsed, 3) + " s");
}

// --- descriptor oracles -------------------------------------------------------

Eigen::VectorXd sign_fixed(Eigen::VectorXd v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  return v[best] < 0 ? Eigen::VectorXd(-v) : v;
}

void check_oracles() {
  std::mt19937_64 rng(77);
  const DelightParams dp;
  const M2dpParams mp;
  const ScanContextParams sp;
  int delight_ok = 0, m2dp_ok = 0, sc_ok = 0;
  double svd_gap = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const PointCloud cloud = testing::random_cloud(rng, 2000, {40, 25, 8});
    const AlignedCloudSet aligned = pca_align(cloud);

    const DelightSignature d = describe_delight(aligned, dp);
    bool ok = true;
    for (std::size_t k = 0; k < kPcaVariants; ++k) {
      const auto expected = testing::brute_force_delight(aligned.variants[k], dp.inner_radius, dp.outer_radius);
      ok = ok && std::equal(expected.begin(), expected.end(), d.variants[k].counts.begin());
    }
    delight_ok += ok;

    const PointCloud& v0 = aligned.variants[0];
    const Eigen::MatrixXd a = testing::brute_force_m2dp_matrix(v0, mp);
    const M2dpVariant m = describe_m2dp_variant(v0, mp);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd expected(a.rows() + a.cols());
    expected << sign_fixed(svd.matrixU().col(0)), sign_fixed(svd.matrixV().col(0));
    const Eigen::Map<const Eigen::VectorXd> got(m.structure.data(), static_cast<Eigen::Index>(m.structure.size()));
    const double gap = got.size() == expected.size() ? (got - expected).cwiseAbs().maxCoeff() : 1.0;
    svd_gap = std::max(svd_gap, gap);
    m2dp_ok += m2dp_projection_matrix(v0, mp, m2dp_max_radius(v0)) == a && gap < kSvdTolerance &&
               m.intensity == testing::brute_force_m2dp_intensity(v0, mp);

    const PointCloud flat = testing::random_cloud(rng, 2000, {45, 45, 10});
    const ScanContextSignature s = describe_scan_context(flat, sp);
    const ScanContextSignature e = testing::brute_force_scan_context(flat, sp);
    bool sc_match = s.intensity == e.intensity;
    for (std::size_t c = 0; c < s.structure.size(); ++c) {
      sc_match = sc_match && std::abs(s.structure[c] - e.structure[c]) <= 1e-9;
    }
    sc_ok += sc_match;
  }
  check(delight_ok == 20 && m2dp_ok == 20 && sc_ok == 20, "descriptor oracles",
        "20 clouds of 2000 points: DELIGHT " + std::to_string(delight_ok) + "/20, M2DP " + std::to_string(m2dp_ok) +
            "/20 (singular vector gap " + fmt(svd_gap) + "), Scan Context " + std::to_string(sc_ok) + "/20");
}

// --- fusion ----------------------------------------------------------------------

void check_fusion() {
  std::mt19937_64 rng(88);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  std::vector<std::int64_t> q(8), r(12);
  std::iota(q.begin(), q.end(), 0);
  std::iota(r.begin(), r.end(), 100);
  DifferenceMatrix s = make_difference_matrix(MatrixKind::kStructure, q, r);
  DifferenceMatrix i = make_difference_matrix(MatrixKind::kIntensity, q, r);
  for (auto& v : s.values) v = u(rng);
  for (auto& v : i.values) v = 10.0 * u(rng);
  const double w = 2.0;
  const DifferenceMatrix fused = fuse(s, i, w);
  const DifferenceMatrix ns = normalize_rows(s);

  // Oracle: the textbook formula with long double accumulators.
  const auto normalized = [](const DifferenceMatrix& d, std::size_t row, std::size_t col) {
    long double mean = 0, var = 0;
    for (std::size_t c = 0; c < d.cols(); ++c) mean += d.at(row, c);
    mean /= d.cols();
    for (std::size_t c = 0; c < d.cols(); ++c) var += (d.at(row, c) - mean) * (d.at(row, c) - mean);
    return static_cast<double>((d.at(row, col) - mean) / std::sqrt(var / d.cols()));
  };
  double worst = 0.0, mean_gap = 0.0, std_gap = 0.0;
  for (std::size_t row = 0; row < q.size(); ++row) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t col = 0; col < r.size(); ++col) {
      const double expected = w * normalized(s, row, col) + normalized(i, row, col);
      worst = std::max(worst, std::abs(fused.at(row, col) - expected));
      sum += ns.at(row, col);
      sq += ns.at(row, col) * ns.at(row, col);
    }
    const double mean = sum / static_cast<double>(r.size());
    mean_gap = std::max(mean_gap, std::abs(mean));
    std_gap = std::max(std_gap, std::abs(std::sqrt(sq / static_cast<double>(r.size()) - mean * mean) - 1.0));
  }
  check(worst <= kFusionTolerance && mean_gap <= kMomentTolerance && std_gap <= kMomentTolerance, "fusion formula",
        "8x12 worst gap " + fmt(worst) + ", row mean " + fmt(mean_gap) + ", row std - 1 " + fmt(std_gap));
}

// --- synthetic corpora --------------------------------------------------------


void check_intensity_change() {
  const PipelineConfig config;
  const CorpusResult clean = evaluate_corpus(corpus({}), DescriptorKind::kScanContext, config);
  const auto start = Clock::now();
  const CorpusResult changed = evaluate_corpus(corpus(intensity_change()), DescriptorKind::kScanContext, config);
  const double elapsed = seconds_since(start);
  const PrCurve& structure = changed.curves.at(MatrixKind::kStructure);
  const double drop = clean.curves.at(MatrixKind::kIntensity).auc - changed.curves.at(MatrixKind::kIntensity).auc;
  check(structure.auc >= kStructureAucFloor && structure.max_recall_at_full_precision >= kStructureRecallFloor &&
            drop >= kIntensityAucDrop && elapsed < kCorpusSeconds,
        "intensity change",
        "Scan Context structure " + curve_text(structure) + "; intensity AUC " +
            fmt(clean.curves.at(MatrixKind::kIntensity).auc) + " -> " +
            fmt(changed.curves.at(MatrixKind::kIntensity).auc) + " (drop " + fmt(drop) + "); " +
            std::to_string(structure.matchable_queries) + " matchable queries, " + fmt(elapsed, 3) + " s");
}

void check_combined_change() {
  const PipelineConfig config;
  const auto keyframes = corpus(combined_change());
  std::map<DescriptorKind, CorpusResult> results;
  for (const DescriptorKind kind : {DescriptorKind::kDelight, DescriptorKind::kM2dp, DescriptorKind::kScanContext}) {
    results[kind] = evaluate_corpus(keyframes, kind, config);
  }
  const auto default_auc = [&](DescriptorKind kind) {
    const CorpusResult& r = results.at(kind);
    return r.curves.at(r.default_ranking).auc;
  };
  const double sc = default_auc(DescriptorKind::kScanContext), m2dp = default_auc(DescriptorKind::kM2dp),
               delight = default_auc(DescriptorKind::kDelight);
  check(sc >= m2dp && m2dp >= delight, "descriptor ordering",
        "default-ranking AUC Scan Context " + fmt(sc) + " >= M2DP " + fmt(m2dp) + " >= DELIGHT " + fmt(delight));

  const CorpusResult& s = results.at(DescriptorKind::kScanContext);
  const PrCurve& fused = s.curves.at(MatrixKind::kFused);
  const PrCurve& structure = s.curves.at(MatrixKind::kStructure);
  check(fused.max_recall_at_full_precision >= structure.max_recall_at_full_precision, "fusion helps recall",
        "Scan Context fused " + curve_text(fused) + " vs structure " + curve_text(structure));
}

// --- hand-computed PR cases ---------------------------------------------------

struct HandQuery {
  double difference;
  bool correct;
  bool matchable = true;
};

// Query q has references 2q (ground-truth true when matchable) and 2q + 1.
PrCurve hand_curve(const std::vector<HandQuery>& queries) {
  const std::size_t n = queries.size();
  GroundTruthRelation gt;
  MatchResult matches;
  for (std::size_t q = 0; q < n; ++q) {
    gt.query_ids.push_back(static_cast<std::int64_t>(q));
    gt.reference_ids.push_back(static_cast<std::int64_t>(2 * q));
    gt.reference_ids.push_back(static_cast<std::int64_t>(2 * q + 1));
  }
  gt.values.assign(n * 2 * n, 0);
  gt.threshold = 10.0;
  for (std::size_t q = 0; q < n; ++q) {
    if (queries[q].matchable) gt.values[q * 2 * n + 2 * q] = 1;
    QueryMatch m;
    m.query_id = static_cast<std::int64_t>(q);
    m.reference_index = queries[q].correct ? 2 * q : 2 * q + 1;
    m.reference_id = static_cast<std::int64_t>(m.reference_index);
    m.difference = queries[q].difference;
    matches.queries.push_back(m);
  }
  return pr_curve(matches, gt);
}

void check_hand_cases() {
  struct Expected {
    std::vector<HandQuery> queries;
    double auc;
    double max_recall;
  };
  const std::vector<Expected> cases{
      {{{0.1, true}, {0.2, false}, {0.3, true}, {0.4, true}}, 55.0 / 96.0, 0.25},
      {{{0.1, true}, {0.2, true}, {0.3, false}, {0.4, true}, {0.05, false, false}}, 83.0 / 240.0, 0.0},
      {{{0.5, true}, {0.5, false}, {0.9, true}, {0.2, true}}, 61.0 / 96.0, 0.25},
  };
  int ok = 0;
  std::string detail;
  for (const auto& c : cases) {
    const PrCurve curve = hand_curve(c.queries);
    ok += std::abs(curve.auc - c.auc) <= 1e-12 && curve.max_recall_at_full_precision == c.max_recall;
    detail += (detail.empty() ? "" : ", ") + fmt(curve.auc, 6) + "/" + fmt(curve.max_recall_at_full_precision);
  }
  check(ok == 3, "hand PR cases", std::to_string(ok) + "/3 match (AUC/max recall: " + detail + ")");
}

// --- performance --------------------------------------------------------------

template <class Fn>
double median_ms(int repeats, Fn&& fn) {
  std::vector<double> times;
  for (int i = 0; i < repeats; ++i) {
    const auto start = Clock::now();
    fn();
    times.push_back(1e3 * seconds_since(start));
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

void check_performance() {
  const PipelineConfig config;
  const auto keyframes = corpus({});
  const auto raw = imitate_sequence(keyframes, FilterKind::kPolar, config.scan);
  // The densest polar scan, trimmed to a fixed size.
  auto densest = std::max_element(raw.begin(), raw.end(), [](const auto& a, const auto& b) {
    return a.points.size() < b.points.size();
  });
  PointCloud scan = densest->points;
  if (scan.size() < kPerfPoints) {
    report("FAIL", "performance", "no scan with " + std::to_string(kPerfPoints) + " points");
    return;
  }
  std::mt19937_64 rng(99);
  std::shuffle(scan.begin(), scan.end(), rng);
  scan.resize(kPerfPoints);

  volatile double sink = 0.0;
  const double describe_sc = median_ms(21, [&] {
    const FilteredScan f = apply_filter(0, scan, FilterKind::kVoxel, config.scan);
    sink = sink + describe_scan_context(pca_align(f.points), config.scan_context).structure[0];
  });
  const double describe_delight_ms = median_ms(21, [&] {
    sink = sink + static_cast<double>(describe_delight(pca_align(scan), config.delight).variants[0].counts[0]);
  });

  // 1000 references: corpus signatures, repeated with their columns turned.
  const auto voxel = imitate_sequence(keyframes, FilterKind::kVoxel, config.scan);
  std::vector<ScanContextSignature> references;
  std::vector<std::int64_t> reference_ids;
  const ScanContextParams& sp = config.scan_context;
  for (std::size_t i = 0; references.size() < kPerfReferences; ++i) {
    ScanContextSignature s = describe_scan_context(pca_align(voxel[i % voxel.size()].points), sp);
    const int shift = static_cast<int>(i / voxel.size()) * 7;
    s.structure = circular_shift_columns(s.structure, sp.rings, sp.sectors, shift);
    s.intensity = circular_shift_columns(s.intensity, sp.rings, sp.sectors, shift);
    references.push_back(std::move(s));
    reference_ids.push_back(static_cast<std::int64_t>(i));
  }
  const std::vector<ScanContextSignature> query{describe_scan_context(pca_align(voxel[400].points), sp)};
  const std::vector<std::int64_t> query_id{400};
  MatchOptions options;
  options.jobs = 1;
  const double query_ms = median_ms(11, [&] {
    const DifferenceMatrices m = build_difference_matrices(query, query_id, references, reference_ids, options);
    sink = sink + match(default_ranking_matrix(m, config.structure_weight)).queries[0].difference;
  });
  check(describe_sc < kFilterDescribeMs && describe_delight_ms < kDelightMs && query_ms < kQueryMs, "performance",
        "single thread, " + std::to_string(kPerfPoints) + "-point scan: voxel filter + Scan Context " +
            fmt(describe_sc, 3) + " ms, DELIGHT " + fmt(describe_delight_ms, 3) + " ms, Scan Context query vs " +
            std::to_string(kPerfReferences) + " signatures " + fmt(query_ms, 3) + " ms");
}

// --- KITTI point counts -------------------------------------------------------

void check_kitti() {
  const char* path = std::getenv("PLACEREC_KITTI06");
  if (path == nullptr || *path == '\0') {
    report("SKIP", "KITTI point counts", "set PLACEREC_KITTI06 to a keyframe file of KITTI sequence 06");
    return;
  }
  const PipelineConfig config;
  const auto keyframes = load_sequence(path);
  const auto mean_points = [&](FilterKind kind) {
    const auto scans = imitate_sequence(keyframes, kind, config.scan);
    double total = 0.0;
    for (const auto& s : scans) total += static_cast<double>(s.points.size());
    return total / static_cast<double>(std::max<std::size_t>(1, scans.size()));
  };
  const double polar = mean_points(FilterKind::kPolar), voxel = mean_points(FilterKind::kVoxel);
  check(std::abs(polar / kKittiPolarMean - 1.0) <= kKittiBand && std::abs(voxel / kKittiVoxelMean - 1.0) <= kKittiBand,
        "KITTI point counts",
        "mean polar " + fmt(polar, 6) + " (expected " + fmt(kKittiPolarMean, 6) + "), voxel " + fmt(voxel, 6) +
            " (expected " + fmt(kKittiVoxelMean, 6) + "), band +-" + fmt(100 * kKittiBand, 3) + "%");
}

void guarded(const std::string& name, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    report("FAIL", name, std::string("threw: ") + e.what());
  }
}

}  // namespace
}  // namespace placerec

int main() {
  using namespace placerec;
  guarded("rigid-motion invariance", check_invariance);
  guarded("descriptor oracles", check_oracles);
  guarded("fusion formula", check_fusion);
  guarded("intensity change", check_intensity_change);
  guarded("descriptor ordering", check_combined_change);
  guarded("hand PR cases", check_hand_cases);
  guarded("performance", check_performance);
  guarded("KITTI point counts", check_kitti);
  std::cout << (failures == 0 ? "all checks passed" : std::to_string(failures) + " check(s) failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
