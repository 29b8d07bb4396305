// placerec: imitate LiDAR scans from visual-odometry keyframes, describe them
// and run place recognition.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 degenerate computation.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "placerec/error.hpp"
#include "placerec/kernels.hpp"
#include "placerec/pipeline.hpp"

namespace {

using namespace placerec;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDegenerate = 3;

/// Config file path plus per-field flag overrides.
struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App& app) {
    app.add_option("--config", file, "key = value configuration file")->check(CLI::ExistingFile);
    static const std::pair<const char*, const char*> kFields[] = {
        {"range", "scan range r in meters"},
        {"polar_resolution", "polar filter resolution in degrees"},
        {"voxel_cell", "voxel cell size x,y,z in meters"},
        {"delight_inner_radius", "DELIGHT inner sphere radius"},
        {"delight_outer_radius", "DELIGHT outer sphere radius"},
        {"m2dp_rings", "M2DP rings l"},
        {"m2dp_sectors", "M2DP sectors t"},
        {"m2dp_azimuth_planes", "M2DP azimuth planes p"},
        {"m2dp_elevation_planes", "M2DP elevation planes q"},
        {"sc_rings", "Scan Context rings"},
        {"sc_sectors", "Scan Context sectors"},
        {"sc_max_radius", "Scan Context radius"},
        {"sc_center", "Scan Context grid origin: sensor or centroid"},
        {"structure_weight", "structure weight w_s of the fusion"},
        {"gt_threshold", "ground-truth distance threshold in meters"},
        {"exclusion_window", "same-sequence exclusion window in keyframes"},
        {"variant_search", "symmetric or query_canonical"},
        {"sc_joint_shift", "joint Scan Context shift search (true/false)"},
    };
    for (const auto& [key, help] : kFields) {
      std::string flag = std::string("--") + key;
      for (char& c : flag) {
        if (c == '_') c = '-';
      }
      app.add_option(flag, overrides[key], help);
    }
  }

  PipelineConfig resolve() const {
    KeyValues kv;
    if (!file.empty()) kv = KeyValues::load(file);
    for (const auto& [key, value] : overrides) {
      if (!value.empty()) kv.set(key, value);
    }
    PipelineConfig config;
    apply_config(config, kv);
    kv.reject_unused();
    return config;
  }
};

void print_warning(std::string_view message) { std::cerr << "warning: " << message << '\n'; }

template <class T>
T parse_enum(const std::string& text, std::optional<T> (*parse)(std::string_view), const char* what) {
  const auto value = parse(text);
  if (!value) throw ConfigError(std::string("unknown ") + what + " '" + text + "'");
  return *value;
}

std::optional<IdRange> id_range(const std::string& text) {
  if (text.empty()) return std::nullopt;
  return parse_id_range(text);
}

std::optional<MatrixKind> rank_by(const std::string& text) {
  if (text.empty()) return std::nullopt;
  if (text == "fused") return MatrixKind::kFused;
  if (text == "structure") return MatrixKind::kStructure;
  if (text == "intensity") return MatrixKind::kIntensity;
  throw ConfigError("--rank-by must be fused, structure or intensity");
}

void print_summary(const EvaluationOutputs& out) {
  std::cout << "auc " << out.curve.auc << "\nmax_recall_at_full_precision " << out.curve.max_recall_at_full_precision
            << "\nmatchable_queries " << out.curve.matchable_queries << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Place recognition on imitated LiDAR scans from visual odometry"};
  app.require_subcommand(1);
  int jobs = 1;
  std::string kernels = "auto";
  app.add_option("--jobs,-j", jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--kernels", kernels, "arithmetic kernels: auto, scalar or avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  // imitate
  auto* imitate = app.add_subcommand("imitate", "build filtered scans from a keyframe file");
  ConfigFlags imitate_config;
  imitate_config.attach(*imitate);
  std::string imitate_input, imitate_output, imitate_dir, imitate_filter = "voxel", imitate_ids;
  imitate->add_option("keyframes", imitate_input, "keyframe file")->required()->check(CLI::ExistingFile);
  imitate->add_option("-o,--output", imitate_output, "scan archive to write");
  imitate->add_option("--per-keyframe", imitate_dir, "write one scan file per keyframe into this directory");
  imitate->add_option("--filter", imitate_filter, "polar or voxel")->check(CLI::IsMember({"polar", "voxel"}));
  imitate->add_option("--ids", imitate_ids, "keep scans with ids first:last");

  // describe
  auto* describe = app.add_subcommand("describe", "compute signatures for scan archives");
  ConfigFlags describe_config;
  describe_config.attach(*describe);
  std::vector<std::string> describe_inputs;
  std::string describe_output, describe_kind;
  bool describe_strict = false;
  describe->add_option("scans", describe_inputs, "scan archives")->required()->check(CLI::ExistingFile);
  describe->add_option("-d,--descriptor", describe_kind, "delight, m2dp or scan_context")->required();
  describe->add_option("-o,--output", describe_output, "signature archive to write")->required();
  describe->add_flag("--strict", describe_strict, "fail on degenerate scans");

  // match
  auto* match = app.add_subcommand("match", "difference matrices and best matches");
  ConfigFlags match_config;
  match_config.attach(*match);
  std::string match_queries, match_references, match_dir, match_rank;
  std::optional<std::int64_t> match_window;
  match->add_option("queries", match_queries, "query signature archive")->required()->check(CLI::ExistingFile);
  match->add_option("references", match_references, "reference signature archive (default: the query archive)")
      ->check(CLI::ExistingFile);
  match->add_option("-o,--output-dir", match_dir, "output directory")->required();
  match->add_option("--rank-by", match_rank, "matrix to rank: fused, structure or intensity");
  match->add_option("--exclude-within", match_window, "force an exclusion window of this many keyframes");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "precision-recall evaluation of a match table");
  ConfigFlags evaluate_config;
  evaluate_config.attach(*evaluate);
  std::string evaluate_table, evaluate_queries, evaluate_references, evaluate_dir;
  evaluate->add_option("matches", evaluate_table, "matches.csv from the match stage")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("queries", evaluate_queries, "query signature archive")->required()->check(CLI::ExistingFile);
  evaluate->add_option("references", evaluate_references, "reference signature archive")->check(CLI::ExistingFile);
  evaluate->add_option("-o,--output-dir", evaluate_dir, "output directory")->required();

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "imitate, describe, match and evaluate in one run");
  ConfigFlags pipeline_config;
  pipeline_config.attach(*pipeline);
  std::string pipeline_queries, pipeline_references, pipeline_dir, pipeline_kind, pipeline_filter, pipeline_qids,
      pipeline_rids, pipeline_rank;
  std::optional<std::int64_t> pipeline_window;
  bool pipeline_strict = false;
  pipeline->add_option("queries", pipeline_queries, "query keyframe file")->required()->check(CLI::ExistingFile);
  pipeline->add_option("references", pipeline_references, "reference keyframe file")->check(CLI::ExistingFile);
  pipeline->add_option("-d,--descriptor", pipeline_kind, "delight, m2dp or scan_context")->required();
  pipeline->add_option("-o,--output-dir", pipeline_dir, "output directory")->required();
  pipeline->add_option("--filter", pipeline_filter, "override the descriptor's usual filter")
      ->check(CLI::IsMember({"polar", "voxel"}));
  pipeline->add_option("--query-ids", pipeline_qids, "query keyframe ids first:last");
  pipeline->add_option("--reference-ids", pipeline_rids, "reference keyframe ids first:last");
  pipeline->add_option("--rank-by", pipeline_rank, "matrix to rank: fused, structure or intensity");
  pipeline->add_option("--exclude-within", pipeline_window, "force an exclusion window of this many keyframes");
  pipeline->add_flag("--strict", pipeline_strict, "fail on degenerate scans");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic keyframe sequence");
  std::string synth_spec, synth_output, synth_legs;
  synth->add_option("spec", synth_spec, "world spec (key = value)")->required()->check(CLI::ExistingFile);
  synth->add_option("-o,--output", synth_output, "keyframe file to write")->required();
  synth->add_option("--legs", synth_legs, "also write leg id ranges as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (kernels == "scalar") kernels::set_active_backend(kernels::Backend::kScalar);
    if (kernels == "avx2") kernels::set_active_backend(kernels::Backend::kAvx2);

    if (*imitate) {
      ImitateArgs args;
      args.keyframes = imitate_input;
      args.filter = parse_enum<FilterKind>(imitate_filter, parse_filter_kind, "filter");
      args.ids = id_range(imitate_ids);
      if (!imitate_output.empty()) args.output = imitate_output;
      if (!imitate_dir.empty()) args.per_keyframe_dir = imitate_dir;
      const ImitateReport report = run_imitate(args, imitate_config.resolve());
      std::cout << "scans " << report.scans << "\nmean_points " << report.mean_points << '\n';
    } else if (*describe) {
      DescribeArgs args;
      args.scan_archives.assign(describe_inputs.begin(), describe_inputs.end());
      args.kind = parse_enum<DescriptorKind>(describe_kind, parse_descriptor_kind, "descriptor");
      args.output = describe_output;
      args.options.strict = describe_strict;
      args.options.jobs = jobs;
      const std::size_t degenerate = run_describe(args, describe_config.resolve(), print_warning);
      std::cout << "degenerate_scans " << degenerate << '\n';
    } else if (*match) {
      MatchArgs args;
      args.queries = match_queries;
      if (!match_references.empty()) args.references = match_references;
      args.output_dir = match_dir;
      args.request.rank_by = rank_by(match_rank);
      args.request.exclusion_window = match_window;
      args.request.jobs = jobs;
      const MatchOutputs out = run_match(args, match_config.resolve(), print_warning);
      std::cout << "queries " << out.table.matches.queries.size() << '\n';
    } else if (*evaluate) {
      EvaluateArgs args;
      args.match_table = evaluate_table;
      args.queries = evaluate_queries;
      if (!evaluate_references.empty()) args.references = evaluate_references;
      args.output_dir = evaluate_dir;
      print_summary(run_evaluate(args, evaluate_config.resolve()));
    } else if (*pipeline) {
      PipelineArgs args;
      args.query_keyframes = pipeline_queries;
      if (!pipeline_references.empty()) args.reference_keyframes = pipeline_references;
      args.query_ids = id_range(pipeline_qids);
      args.reference_ids = id_range(pipeline_rids);
      args.kind = parse_enum<DescriptorKind>(pipeline_kind, parse_descriptor_kind, "descriptor");
      if (!pipeline_filter.empty()) args.filter = parse_enum<FilterKind>(pipeline_filter, parse_filter_kind, "filter");
      args.output_dir = pipeline_dir;
      args.describe.strict = pipeline_strict;
      args.describe.jobs = jobs;
      args.match.rank_by = rank_by(pipeline_rank);
      args.match.exclusion_window = pipeline_window;
      args.match.jobs = jobs;
      print_summary(run_pipeline(args, pipeline_config.resolve(), print_warning));
    } else if (*synth) {
      SynthArgs args;
      args.spec = synth_spec;
      args.output = synth_output;
      if (!synth_legs.empty()) args.legs_csv = synth_legs;
      const SynthSequence sequence = run_synth(args);
      std::cout << "keyframes " << sequence.keyframes.size() << '\n';
      const auto legs = leg_id_ranges(sequence);
      for (std::size_t leg = 0; leg < legs.size(); ++leg) {
        std::cout << "leg " << leg << ' ' << legs[leg].first << ':' << legs[leg].second << '\n';
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DegenerateError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDegenerate;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
