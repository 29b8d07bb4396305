#pragma once

// On-disk formats between pipeline stages. Scan and signature archives carry
// the full pipeline configuration plus its fingerprint; CSV exports carry the
// fingerprint in a "# fingerprint <hex>" line after the header.
//
// Scan archive:
//   PLACEREC-SCANS 1
//   FINGERPRINT <hex>
//   PARAM <key> = <value>                  (one per config field)
//   SCAN <id> <filter> <n_points> [gx gy gz]
//   <x> <y> <z> <intensity>                (n_points lines)
//
// Signature archive:
//   PLACEREC-SIGNATURES 1
//   DESCRIPTOR <delight|m2dp|scan_context>
//   FILTER <polar|voxel>
//   BINARIZATION bin-mean-above-cloud-mean
//   FINGERPRINT <hex>
//   PARAM ...
//   SIG <id> <ok|degenerate> [gx gy gz]
//   payload lines (see write_signature_archive)

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "placerec/config.hpp"
#include "placerec/descriptors.hpp"
#include "placerec/matching.hpp"
#include "placerec/scan_imitation.hpp"

namespace placerec {

inline constexpr const char* kBinarizationRule = "bin-mean-above-cloud-mean";

struct ScanArchive {
  PipelineConfig config;
  std::vector<FilteredScan> scans;
};

void write_scan_archive(std::ostream& out, const PipelineConfig& config, std::span<const FilteredScan> scans);
ScanArchive read_scan_archive(std::istream& in, const std::string& source = "<stream>");
void save_scan_archive(const std::filesystem::path& path, const PipelineConfig& config,
                       std::span<const FilteredScan> scans);
ScanArchive load_scan_archive(const std::filesystem::path& path);

struct SignatureArchive {
  PipelineConfig config;
  DescriptorKind kind = DescriptorKind::kScanContext;
  FilterKind filter = FilterKind::kVoxel;
  std::vector<std::int64_t> ids;
  std::vector<std::optional<Eigen::Vector3d>> gt_positions;
  /// Nonzero when the scan was degenerate and the signature is all zeros.
  std::vector<std::uint8_t> degenerate;
  /// Only the vector matching `kind` is filled.
  std::vector<DelightSignature> delight;
  std::vector<M2dpSignature> m2dp;
  std::vector<ScanContextSignature> scan_context;

  std::size_t size() const { return ids.size(); }
};

void write_signature_archive(std::ostream& out, const SignatureArchive& archive);
SignatureArchive read_signature_archive(std::istream& in, const std::string& source = "<stream>");
void save_signature_archive(const std::filesystem::path& path, const SignatureArchive& archive);
SignatureArchive load_signature_archive(const std::filesystem::path& path);

/// Throws ConfigError unless `found` equals `expected`.
void require_fingerprint(const std::string& found, const std::string& expected, const std::string& what);

/// Header "query_id,<reference ids...>", then the fingerprint line, then one row
/// per query; entries outside the candidate mask are left empty.
void write_matrix_csv(std::ostream& out, const DifferenceMatrix& d, const std::string& fingerprint);

struct MatchTable {
  std::string fingerprint;
  MatrixKind ranked_by = MatrixKind::kFused;
  DescriptorKind descriptor = DescriptorKind::kScanContext;
  /// Exclusion window used for the candidate mask; empty when none applied.
  std::optional<std::int64_t> exclusion_window;
  MatchResult matches;
};

/// "query_id,reference_id,difference" rows; metadata in '#' lines.
void write_match_table(std::ostream& out, const MatchTable& table);
MatchTable read_match_table(std::istream& in, const std::string& source = "<stream>");

}  // namespace placerec
