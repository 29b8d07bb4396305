#pragma once

// Pipeline configuration and the plain "key = value" file format it is read
// from.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "placerec/descriptors.hpp"
#include "placerec/matching.hpp"
#include "placerec/scan_imitation.hpp"

namespace placerec {

/// Parsed "key = value" lines. '#' starts a comment line. Every lookup marks the
/// key as used so that leftovers (typos) can be rejected.
class KeyValues {
 public:
  static KeyValues parse(std::istream& in, const std::string& source);
  static KeyValues load(const std::filesystem::path& path);

  bool has(std::string_view key) const;
  void set(const std::string& key, const std::string& value);

  std::optional<std::string> get_string(std::string_view key) const;
  std::optional<double> get_double(std::string_view key) const;
  std::optional<std::int64_t> get_int(std::string_view key) const;
  std::optional<bool> get_bool(std::string_view key) const;
  /// Comma- or whitespace-separated numbers.
  std::optional<std::vector<double>> get_doubles(std::string_view key) const;

  /// Throws ConfigError naming the first key nobody asked for.
  void reject_unused() const;

 private:
  struct Value {
    std::string text;
    std::string where;
  };
  const Value* find(std::string_view key) const;
  [[noreturn]] void fail(const Value& value, std::string_view key, const std::string& message) const;

  std::map<std::string, Value, std::less<>> values_;
  mutable std::set<std::string, std::less<>> used_;
};

enum class DescriptorKind { kDelight, kM2dp, kScanContext };
std::string_view to_string(DescriptorKind kind);
std::optional<DescriptorKind> parse_descriptor_kind(std::string_view name);
/// Polar for DELIGHT and M2DP, voxel for Scan Context.
FilterKind default_filter(DescriptorKind kind);

struct PipelineConfig {
  ScanParams scan;
  DelightParams delight;
  M2dpParams m2dp;
  ScanContextParams scan_context;
  double structure_weight = 2.0;
  double gt_threshold = 10.0;
  /// Applied when a query archive is matched against itself.
  std::int64_t exclusion_window = 100;
  VariantSearch variant_search = VariantSearch::kSymmetric;
  bool scan_context_joint_shift = true;

  /// Throws ConfigError for non-positive sizes or inconsistent values.
  void validate() const;
  /// Every field as sorted "key = value" lines; parse of this text gives back
  /// the same config.
  std::string canonical() const;
  /// Hex FNV-1a of canonical().
  std::string fingerprint() const;
};

/// Overrides the fields present in `kv`, then validates.
void apply_config(PipelineConfig& config, const KeyValues& kv);

}  // namespace placerec
