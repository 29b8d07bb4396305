#pragma once

// Pipeline stages shared by the command-line tool and the tests. The in-memory
// functions do the work; the run_* functions add file handling and
// fingerprint checks around them.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "placerec/archive.hpp"
#include "placerec/config.hpp"
#include "placerec/evaluation.hpp"
#include "placerec/matching.hpp"
#include "placerec/synth.hpp"

namespace placerec {

/// Receives non-fatal warnings. Null means ignore.
using WarningSink = std::function<void(std::string_view)>;

/// Inclusive keyframe id range.
struct IdRange {
  std::int64_t first = 0;
  std::int64_t last = 0;
  bool contains(std::int64_t id) const { return id >= first && id <= last; }
};
/// Parses "a:b". Throws ConfigError.
IdRange parse_id_range(std::string_view text);

std::vector<FilteredScan> select_scans(std::vector<FilteredScan> scans, const std::optional<IdRange>& range);

struct DescribeOptions {
  /// Fail on degenerate scans instead of storing all-zero signatures.
  bool strict = false;
  int jobs = 1;
};

/// Aligns and describes every scan. Scans whose description is degenerate get
/// zero signatures and a warning unless `options.strict` is set. Warns when the
/// scans were not filtered the way the descriptor expects.
SignatureArchive describe_scans(const std::vector<FilteredScan>& scans, DescriptorKind kind,
                                const PipelineConfig& config, const DescribeOptions& options,
                                const WarningSink& warn = {});

struct MatchRequest {
  /// Applies the configured exclusion window (same-sequence matching).
  bool same_sequence = false;
  /// Overrides the window; also enables masking for different archives.
  std::optional<std::int64_t> exclusion_window;
  /// Matrix ranked by match(); default is fused when a structure channel exists.
  std::optional<MatrixKind> rank_by;
  int jobs = 1;
};

struct MatchOutputs {
  DifferenceMatrices matrices;
  /// Fused matrix; empty for DELIGHT.
  std::optional<DifferenceMatrix> fused;
  std::size_t degenerate_rows = 0;
  MatchTable table;
};

/// Throws ConfigError for archives of different descriptors or configurations.
MatchOutputs match_archives(const SignatureArchive& queries, const SignatureArchive& references,
                            const PipelineConfig& config, const MatchRequest& request, const WarningSink& warn = {});

struct EvaluationOutputs {
  GroundTruthRelation ground_truth;
  PrCurve curve;
  std::vector<RecognizedPlace> recognized;
};

EvaluationOutputs evaluate_matches(const MatchTable& table, const SignatureArchive& queries,
                                   const SignatureArchive& references, const PipelineConfig& config);

// --- file-level stages ------------------------------------------------------

struct ImitateArgs {
  std::filesystem::path keyframes;
  FilterKind filter = FilterKind::kVoxel;
  std::optional<IdRange> ids;
  /// Single archive output.
  std::optional<std::filesystem::path> output;
  /// One archive per keyframe, named scan_<id>.txt.
  std::optional<std::filesystem::path> per_keyframe_dir;
};

struct ImitateReport {
  std::size_t scans = 0;
  double mean_points = 0.0;
};

ImitateReport run_imitate(const ImitateArgs& args, const PipelineConfig& config);

struct DescribeArgs {
  std::vector<std::filesystem::path> scan_archives;
  DescriptorKind kind = DescriptorKind::kScanContext;
  std::filesystem::path output;
  DescribeOptions options;
};

/// Returns the number of degenerate scans.
std::size_t run_describe(const DescribeArgs& args, const PipelineConfig& config, const WarningSink& warn);

struct MatchArgs {
  std::filesystem::path queries;
  /// Empty: match the query archive against itself.
  std::optional<std::filesystem::path> references;
  std::filesystem::path output_dir;
  MatchRequest request;
};

/// Writes D_structure.csv and D_fused.csv (when present), D_intensity.csv and matches.csv.
MatchOutputs run_match(const MatchArgs& args, const PipelineConfig& config, const WarningSink& warn);

struct EvaluateArgs {
  std::filesystem::path match_table;
  std::filesystem::path queries;
  std::optional<std::filesystem::path> references;
  std::filesystem::path output_dir;
};

/// Writes pr_curve.csv, summary.csv and recognized.csv.
EvaluationOutputs run_evaluate(const EvaluateArgs& args, const PipelineConfig& config);

struct PipelineArgs {
  std::filesystem::path query_keyframes;
  std::optional<std::filesystem::path> reference_keyframes;
  std::optional<IdRange> query_ids;
  std::optional<IdRange> reference_ids;
  DescriptorKind kind = DescriptorKind::kScanContext;
  std::optional<FilterKind> filter;
  std::filesystem::path output_dir;
  DescribeOptions describe;
  MatchRequest match;
};

/// imitate -> describe -> match -> evaluate, keeping every intermediate file.
EvaluationOutputs run_pipeline(const PipelineArgs& args, const PipelineConfig& config, const WarningSink& warn);

struct SynthArgs {
  std::filesystem::path spec;
  std::filesystem::path output;
  /// Also write "leg,first_id,last_id" here.
  std::optional<std::filesystem::path> legs_csv;
};

SynthSequence run_synth(const SynthArgs& args);

}  // namespace placerec
