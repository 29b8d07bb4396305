#include "placerec/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "placerec/alignment.hpp"
#include "placerec/error.hpp"
#include "placerec/keyframe_io.hpp"
#include "placerec/parallel.hpp"
#include "placerec/text_format.hpp"

namespace placerec {

namespace fs = std::filesystem;

IdRange parse_id_range(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ConfigError("id range must look like 'first:last'");
  const auto first = text::parse_int(text.substr(0, colon));
  const auto last = text::parse_int(text.substr(colon + 1));
  if (!first || !last || *first > *last) throw ConfigError("invalid id range '" + std::string(text) + "'");
  return {*first, *last};
}

std::vector<FilteredScan> select_scans(std::vector<FilteredScan> scans, const std::optional<IdRange>& range) {
  if (!range) return scans;
  std::erase_if(scans, [&](const FilteredScan& s) { return !range->contains(s.keyframe_id); });
  return scans;
}

namespace {

void emit(const WarningSink& warn, const std::string& message) {
  if (warn) warn(message);
}

DelightSignature zero_delight() { return {}; }

M2dpSignature zero_m2dp(const M2dpParams& params) {
  M2dpSignature s;
  for (auto& v : s.variants) {
    v.structure.assign(static_cast<std::size_t>(params.structure_length()), 0.0);
    v.intensity.assign(static_cast<std::size_t>(params.bin_count()), 0.0);
  }
  return s;
}

ScanContextSignature zero_scan_context(const ScanContextParams& params) {
  ScanContextSignature s;
  s.rings = params.rings;
  s.sectors = params.sectors;
  const auto cells = static_cast<std::size_t>(params.rings) * static_cast<std::size_t>(params.sectors);
  s.structure.assign(cells, 0.0);
  s.intensity.assign(cells, 0.0);
  return s;
}

}  // namespace

SignatureArchive describe_scans(const std::vector<FilteredScan>& scans, DescriptorKind kind,
                                const PipelineConfig& config, const DescribeOptions& options,
                                const WarningSink& warn) {
  config.validate();
  SignatureArchive archive;
  archive.config = config;
  archive.kind = kind;
  archive.filter = scans.empty() ? default_filter(kind) : scans.front().filter_kind;
  for (const auto& s : scans) {
    if (s.filter_kind != archive.filter) throw DataError("scan archive mixes polar and voxel filtered scans");
  }
  if (archive.filter != default_filter(kind)) {
    emit(warn, std::string(to_string(kind)) + " is normally paired with the " +
                   std::string(to_string(default_filter(kind))) + " filter, got " +
                   std::string(to_string(archive.filter)) + " filtered scans");
  }
  const std::size_t n = scans.size();
  archive.ids.resize(n);
  archive.gt_positions.resize(n);
  archive.degenerate.assign(n, 0);
  switch (kind) {
    case DescriptorKind::kDelight:
      archive.delight.resize(n);
      break;
    case DescriptorKind::kM2dp:
      archive.m2dp.resize(n);
      break;
    case DescriptorKind::kScanContext:
      archive.scan_context.resize(n);
      break;
  }
  std::vector<std::string> failures(n);
  parallel_for(n, options.jobs, [&](std::size_t i) {
    const FilteredScan& scan = scans[i];
    archive.ids[i] = scan.keyframe_id;
    archive.gt_positions[i] = scan.gt_position;
    try {
      const AlignedCloudSet aligned = pca_align(scan.points);
      switch (kind) {
        case DescriptorKind::kDelight:
          archive.delight[i] = describe_delight(aligned, config.delight);
          break;
        case DescriptorKind::kM2dp:
          archive.m2dp[i] = describe_m2dp(aligned, config.m2dp);
          break;
        case DescriptorKind::kScanContext:
          archive.scan_context[i] = describe_scan_context(aligned, config.scan_context);
          break;
      }
    } catch (const DegenerateError& e) {
      if (options.strict) {
        throw DegenerateError("scan " + std::to_string(scan.keyframe_id) + ": " + e.what());
      }
      failures[i] = e.what();
      archive.degenerate[i] = 1;
      switch (kind) {
        case DescriptorKind::kDelight:
          archive.delight[i] = zero_delight();
          break;
        case DescriptorKind::kM2dp:
          archive.m2dp[i] = zero_m2dp(config.m2dp);
          break;
        case DescriptorKind::kScanContext:
          archive.scan_context[i] = zero_scan_context(config.scan_context);
          break;
      }
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    if (!failures[i].empty()) {
      emit(warn, "scan " + std::to_string(archive.ids[i]) + " is degenerate (" + failures[i] +
                     "); stored an all-zero signature");
    }
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (archive.ids[i] <= archive.ids[i - 1]) throw DataError("scan ids must be strictly increasing");
  }
  return archive;
}

MatchOutputs match_archives(const SignatureArchive& queries, const SignatureArchive& references,
                            const PipelineConfig& config, const MatchRequest& request, const WarningSink& warn) {
  const std::string fingerprint = config.fingerprint();
  require_fingerprint(queries.config.fingerprint(), fingerprint, "query signature archive");
  require_fingerprint(references.config.fingerprint(), fingerprint, "reference signature archive");
  if (queries.kind != references.kind) {
    throw ConfigError("cannot compare " + std::string(to_string(queries.kind)) + " with " +
                      std::string(to_string(references.kind)) + " signatures");
  }
  if (queries.size() == 0 || references.size() == 0) throw DataError("signature archives must not be empty");

  MatchOptions options;
  options.variant_search = config.variant_search;
  options.structure_weight = config.structure_weight;
  options.scan_context_joint_shift = config.scan_context_joint_shift;
  options.jobs = request.jobs;
  if (request.exclusion_window) {
    options.exclusion_window = request.exclusion_window;
  } else if (request.same_sequence) {
    options.exclusion_window = config.exclusion_window;
  }

  MatchOutputs out;
  switch (queries.kind) {
    case DescriptorKind::kDelight:
      out.matrices = build_difference_matrices(std::span(queries.delight), queries.ids, std::span(references.delight),
                                               references.ids, options);
      break;
    case DescriptorKind::kM2dp:
      out.matrices = build_difference_matrices(std::span(queries.m2dp), queries.ids, std::span(references.m2dp),
                                               references.ids, options);
      break;
    case DescriptorKind::kScanContext:
      out.matrices = build_difference_matrices(std::span(queries.scan_context), queries.ids,
                                               std::span(references.scan_context), references.ids, options);
      break;
  }
  if (out.matrices.structure) {
    out.fused = default_ranking_matrix(out.matrices, config.structure_weight, &out.degenerate_rows);
    if (out.degenerate_rows != 0) {
      emit(warn, std::to_string(out.degenerate_rows) + " constant difference-matrix rows were normalized to zero");
    }
  }

  const MatrixKind ranking = request.rank_by.value_or(out.fused ? MatrixKind::kFused : MatrixKind::kIntensity);
  const DifferenceMatrix* ranked = nullptr;
  switch (ranking) {
    case MatrixKind::kFused:
      if (!out.fused) throw ConfigError("DELIGHT has no structure channel, so there is no fused matrix");
      ranked = &*out.fused;
      break;
    case MatrixKind::kStructure:
      if (!out.matrices.structure) throw ConfigError("DELIGHT has no structure channel");
      ranked = &*out.matrices.structure;
      break;
    case MatrixKind::kIntensity:
      ranked = &out.matrices.intensity;
      break;
  }
  out.table.fingerprint = fingerprint;
  out.table.descriptor = queries.kind;
  out.table.ranked_by = ranking;
  out.table.exclusion_window = options.exclusion_window;
  out.table.matches = match(*ranked);
  return out;
}

EvaluationOutputs evaluate_matches(const MatchTable& table, const SignatureArchive& queries,
                                   const SignatureArchive& references, const PipelineConfig& config) {
  const std::string fingerprint = config.fingerprint();
  require_fingerprint(table.fingerprint, fingerprint, "match table");
  require_fingerprint(queries.config.fingerprint(), fingerprint, "query signature archive");
  require_fingerprint(references.config.fingerprint(), fingerprint, "reference signature archive");
  if (table.descriptor != queries.kind || table.descriptor != references.kind) {
    throw ConfigError("match table and signature archives describe different descriptors");
  }

  CandidateMask mask;
  if (table.exclusion_window) {
    mask = CandidateMask::exclusion_window(queries.ids, references.ids, *table.exclusion_window);
  }
  EvaluationOutputs out;
  out.ground_truth = build_ground_truth(queries.ids, queries.gt_positions, references.ids, references.gt_positions,
                                        config.gt_threshold, mask);

  std::map<std::int64_t, std::size_t> reference_index;
  for (std::size_t r = 0; r < references.ids.size(); ++r) reference_index[references.ids[r]] = r;
  MatchResult matches = table.matches;
  if (matches.queries.size() != queries.ids.size()) {
    throw DataError("match table has " + std::to_string(matches.queries.size()) + " rows but the query archive has " +
                    std::to_string(queries.ids.size()) + " signatures");
  }
  for (std::size_t q = 0; q < matches.queries.size(); ++q) {
    QueryMatch& m = matches.queries[q];
    if (m.query_id != queries.ids[q]) throw DataError("match table query ids disagree with the query archive");
    if (!m.reference_id) continue;
    const auto it = reference_index.find(*m.reference_id);
    if (it == reference_index.end()) {
      throw DataError("matched reference " + std::to_string(*m.reference_id) + " is not in the reference archive");
    }
    m.reference_index = it->second;
  }
  out.curve = pr_curve(matches, out.ground_truth);
  out.recognized = export_recognized_places(matches, out.ground_truth, queries.gt_positions,
                                            out.curve.full_precision_threshold);
  return out;
}

// --- file-level stages ------------------------------------------------------

namespace {

template <class Fn>
void write_file(const fs::path& path, Fn&& write) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write(out);
  if (!out) throw DataError("write failed for " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::vector<FilteredScan> imitate_file(const fs::path& keyframes, FilterKind filter, const PipelineConfig& config) {
  const auto sequence = load_sequence(keyframes);
  if (sequence.empty()) throw DataError(keyframes.string() + ": keyframe file is empty");
  return imitate_sequence(sequence, filter, config.scan);
}

std::vector<FilteredScan> load_scans(const std::vector<fs::path>& paths, const PipelineConfig& config) {
  std::vector<FilteredScan> scans;
  for (const auto& path : paths) {
    ScanArchive archive = load_scan_archive(path);
    require_fingerprint(archive.config.fingerprint(), config.fingerprint(), path.string());
    for (auto& s : archive.scans) scans.push_back(std::move(s));
  }
  std::sort(scans.begin(), scans.end(),
            [](const FilteredScan& a, const FilteredScan& b) { return a.keyframe_id < b.keyframe_id; });
  for (std::size_t i = 1; i < scans.size(); ++i) {
    if (scans[i].keyframe_id == scans[i - 1].keyframe_id) {
      throw DataError("scan " + std::to_string(scans[i].keyframe_id) + " appears twice");
    }
  }
  return scans;
}

void write_match_outputs(const fs::path& dir, const MatchOutputs& out) {
  ensure_dir(dir);
  const std::string& fp = out.table.fingerprint;
  if (out.matrices.structure) {
    write_file(dir / "D_structure.csv", [&](std::ostream& o) { write_matrix_csv(o, *out.matrices.structure, fp); });
  }
  write_file(dir / "D_intensity.csv", [&](std::ostream& o) { write_matrix_csv(o, out.matrices.intensity, fp); });
  if (out.fused) write_file(dir / "D_fused.csv", [&](std::ostream& o) { write_matrix_csv(o, *out.fused, fp); });
  write_file(dir / "matches.csv", [&](std::ostream& o) { write_match_table(o, out.table); });
}

void write_evaluation_outputs(const fs::path& dir, const EvaluationOutputs& out, const std::string& fp) {
  ensure_dir(dir);
  write_file(dir / "pr_curve.csv", [&](std::ostream& o) { write_pr_curve_csv(o, out.curve, fp); });
  write_file(dir / "summary.csv", [&](std::ostream& o) { write_summary_csv(o, out.curve, fp); });
  write_file(dir / "recognized.csv", [&](std::ostream& o) { write_recognized_csv(o, out.recognized, fp); });
}

bool same_file(const fs::path& a, const fs::path& b) {
  std::error_code ec;
  return fs::equivalent(a, b, ec);
}

}  // namespace

ImitateReport run_imitate(const ImitateArgs& args, const PipelineConfig& config) {
  if (!args.output && !args.per_keyframe_dir) throw ConfigError("imitate needs an output archive or directory");
  const auto scans = select_scans(imitate_file(args.keyframes, args.filter, config), args.ids);
  if (scans.empty()) throw DataError("no keyframe falls inside the requested id range");
  if (args.output) save_scan_archive(*args.output, config, scans);
  if (args.per_keyframe_dir) {
    ensure_dir(*args.per_keyframe_dir);
    for (const auto& s : scans) {
      save_scan_archive(*args.per_keyframe_dir / ("scan_" + std::to_string(s.keyframe_id) + ".txt"), config,
                        std::span(&s, 1));
    }
  }
  ImitateReport report;
  report.scans = scans.size();
  for (const auto& s : scans) report.mean_points += static_cast<double>(s.points.size());
  report.mean_points /= static_cast<double>(scans.size());
  return report;
}

std::size_t run_describe(const DescribeArgs& args, const PipelineConfig& config, const WarningSink& warn) {
  if (args.scan_archives.empty()) throw ConfigError("describe needs at least one scan archive");
  const auto scans = load_scans(args.scan_archives, config);
  if (scans.empty()) throw DataError("scan archives contain no scans");
  const SignatureArchive archive = describe_scans(scans, args.kind, config, args.options, warn);
  save_signature_archive(args.output, archive);
  return static_cast<std::size_t>(std::count(archive.degenerate.begin(), archive.degenerate.end(), 1));
}

MatchOutputs run_match(const MatchArgs& args, const PipelineConfig& config, const WarningSink& warn) {
  const SignatureArchive queries = load_signature_archive(args.queries);
  MatchRequest request = args.request;
  MatchOutputs out;
  if (!args.references || same_file(args.queries, *args.references)) {
    request.same_sequence = true;
    out = match_archives(queries, queries, config, request, warn);
  } else {
    const SignatureArchive references = load_signature_archive(*args.references);
    out = match_archives(queries, references, config, request, warn);
  }
  write_match_outputs(args.output_dir, out);
  return out;
}

EvaluationOutputs run_evaluate(const EvaluateArgs& args, const PipelineConfig& config) {
  std::ifstream in(args.match_table);
  if (!in) throw DataError("cannot open " + args.match_table.string());
  const MatchTable table = read_match_table(in, args.match_table.string());
  const SignatureArchive queries = load_signature_archive(args.queries);
  EvaluationOutputs out;
  if (!args.references || same_file(args.queries, *args.references)) {
    out = evaluate_matches(table, queries, queries, config);
  } else {
    out = evaluate_matches(table, queries, load_signature_archive(*args.references), config);
  }
  write_evaluation_outputs(args.output_dir, out, config.fingerprint());
  return out;
}

EvaluationOutputs run_pipeline(const PipelineArgs& args, const PipelineConfig& config, const WarningSink& warn) {
  ensure_dir(args.output_dir);
  const FilterKind filter = args.filter.value_or(default_filter(args.kind));
  const bool separate_references = args.reference_keyframes.has_value() || args.reference_ids.has_value();

  ImitateArgs imitate;
  imitate.keyframes = args.query_keyframes;
  imitate.filter = filter;
  imitate.ids = args.query_ids;
  imitate.output = args.output_dir / "scans_query.txt";
  run_imitate(imitate, config);
  if (separate_references) {
    imitate.keyframes = args.reference_keyframes.value_or(args.query_keyframes);
    imitate.ids = args.reference_ids;
    imitate.output = args.output_dir / "scans_reference.txt";
    run_imitate(imitate, config);
  }

  DescribeArgs describe;
  describe.kind = args.kind;
  describe.options = args.describe;
  describe.scan_archives = {args.output_dir / "scans_query.txt"};
  describe.output = args.output_dir / "signatures_query.txt";
  run_describe(describe, config, warn);
  std::optional<fs::path> reference_signatures;
  if (separate_references) {
    describe.scan_archives = {args.output_dir / "scans_reference.txt"};
    describe.output = args.output_dir / "signatures_reference.txt";
    run_describe(describe, config, warn);
    reference_signatures = describe.output;
  }

  MatchArgs match;
  match.queries = args.output_dir / "signatures_query.txt";
  match.references = reference_signatures;
  match.output_dir = args.output_dir;
  match.request = args.match;
  run_match(match, config, warn);

  EvaluateArgs evaluate;
  evaluate.match_table = args.output_dir / "matches.csv";
  evaluate.queries = match.queries;
  evaluate.references = reference_signatures;
  evaluate.output_dir = args.output_dir;
  return run_evaluate(evaluate, config);
}

SynthSequence run_synth(const SynthArgs& args) {
  const WorldSpec spec = load_world_spec(args.spec);
  SynthSequence sequence = perturb(generate(spec), spec.perturbation, spec.seed);
  save_sequence(args.output, sequence.keyframes);
  if (args.legs_csv) {
    write_file(*args.legs_csv, [&](std::ostream& o) {
      o << "leg,first_id,last_id\n";
      const auto ranges = leg_id_ranges(sequence);
      for (std::size_t leg = 0; leg < ranges.size(); ++leg) {
        o << leg << ',' << ranges[leg].first << ',' << ranges[leg].second << '\n';
      }
    });
  }
  return sequence;
}

}  // namespace placerec
