#include "placerec/archive.hpp"

#include <fstream>
#include <sstream>

#include "placerec/error.hpp"
#include "placerec/keyframe_io.hpp"
#include "placerec/text_format.hpp"

namespace placerec {

using text::format_double;

namespace {

void write_config_block(std::ostream& out, const PipelineConfig& config) {
  out << "FINGERPRINT " << config.fingerprint() << '\n';
  std::istringstream lines(config.canonical());
  std::string line;
  while (std::getline(lines, line)) out << "PARAM " << line << '\n';
}

void write_gt(std::ostream& out, const std::optional<Eigen::Vector3d>& gt) {
  if (gt) out << ' ' << format_double(gt->x()) << ' ' << format_double(gt->y()) << ' ' << format_double(gt->z());
}

std::optional<Eigen::Vector3d> parse_gt(const std::vector<std::string_view>& tokens, std::size_t first,
                                        const text::LineReader& reader) {
  if (tokens.size() == first) return std::nullopt;
  if (tokens.size() != first + 3) reader.fail("expected three ground-truth coordinates");
  Eigen::Vector3d gt;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto v = text::parse_double(tokens[first + i]);
    if (!v) reader.fail("invalid ground-truth coordinate '" + std::string(tokens[first + i]) + "'");
    gt[static_cast<Eigen::Index>(i)] = *v;
  }
  return gt;
}

/// Reads the magic line plus keyword lines up to the config block's end.
/// Returns the first line after the PARAM block in `line` (empty at EOF).
struct Header {
  std::map<std::string, std::string> fields;
  PipelineConfig config;
};

Header read_header(text::LineReader& reader, const std::string& magic, std::string& line) {
  Header header;
  if (!reader.next(line) || text::tokenize(line) != std::vector<std::string_view>{magic, "1"}) {
    reader.fail("not a '" + magic + " 1' file");
  }
  KeyValues params;
  std::string fingerprint;
  while (true) {
    if (!reader.next(line)) {
      line.clear();
      break;
    }
    const auto tokens = text::tokenize(line);
    if (tokens.front() == "PARAM") {
      const auto eq = line.find('=');
      const auto key_start = line.find("PARAM") + 5;
      if (eq == std::string::npos) reader.fail("malformed PARAM line");
      std::string key = line.substr(key_start, eq - key_start);
      std::string value = line.substr(eq + 1);
      const auto strip = [](std::string& s) {
        s.erase(0, s.find_first_not_of(" \t"));
        s.erase(s.find_last_not_of(" \t\r") + 1);
      };
      strip(key);
      strip(value);
      if (params.has(key)) reader.fail("duplicate PARAM '" + key + "'");
      params.set(key, value);
    } else if (tokens.size() == 2 && (tokens.front() == "FINGERPRINT" || tokens.front() == "DESCRIPTOR" ||
                                      tokens.front() == "FILTER" || tokens.front() == "BINARIZATION")) {
      header.fields[std::string(tokens.front())] = std::string(tokens[1]);
    } else {
      break;
    }
  }
  try {
    apply_config(header.config, params);
    params.reject_unused();
  } catch (const ConfigError& e) {
    reader.fail(std::string("bad archive parameters: ") + e.what());
  }
  const auto fp = header.fields.find("FINGERPRINT");
  if (fp == header.fields.end()) reader.fail("missing FINGERPRINT line");
  if (fp->second != header.config.fingerprint()) {
    reader.fail("FINGERPRINT " + fp->second + " does not match the PARAM block (" + header.config.fingerprint() + ")");
  }
  return header;
}

template <class Fn>
void save_to(const std::filesystem::path& path, Fn&& write) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write(out);
  if (!out) throw DataError("write failed for " + path.string());
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

}  // namespace

void require_fingerprint(const std::string& found, const std::string& expected, const std::string& what) {
  if (found != expected) {
    throw ConfigError(what + " was produced with configuration " + found + " but the current configuration is " +
                      expected);
  }
}

// --- scans ------------------------------------------------------------------

void write_scan_archive(std::ostream& out, const PipelineConfig& config, std::span<const FilteredScan> scans) {
  out << "PLACEREC-SCANS 1\n";
  write_config_block(out, config);
  for (const FilteredScan& s : scans) {
    out << "SCAN " << s.keyframe_id << ' ' << to_string(s.filter_kind) << ' ' << s.points.size();
    write_gt(out, s.gt_position);
    out << '\n';
    for (const auto& p : s.points) write_point_line(out, p);
  }
}

ScanArchive read_scan_archive(std::istream& in, const std::string& source) {
  text::LineReader reader(in, source);
  std::string line;
  ScanArchive archive;
  archive.config = read_header(reader, "PLACEREC-SCANS", line).config;
  std::string error;
  bool have_line = !line.empty();
  while (have_line) {
    const auto tokens = text::tokenize(line);
    if (tokens.front() != "SCAN" || (tokens.size() != 4 && tokens.size() != 7)) {
      reader.fail("expected 'SCAN <id> <filter> <n_points> [gx gy gz]'");
    }
    FilteredScan scan;
    const auto id = text::parse_int(tokens[1]);
    if (!id) reader.fail("invalid scan id '" + std::string(tokens[1]) + "'");
    if (!archive.scans.empty() && *id <= archive.scans.back().keyframe_id) {
      reader.fail("scan ids must be strictly increasing");
    }
    scan.keyframe_id = *id;
    const auto kind = parse_filter_kind(tokens[2]);
    if (!kind) reader.fail("unknown filter '" + std::string(tokens[2]) + "'");
    scan.filter_kind = *kind;
    const auto n = text::parse_int(tokens[3]);
    if (!n || *n < 0) reader.fail("invalid point count");
    scan.gt_position = parse_gt(tokens, 4, reader);
    scan.points.reserve(static_cast<std::size_t>(*n));
    for (std::int64_t i = 0; i < *n; ++i) {
      if (!reader.next(line)) reader.fail("scan " + std::to_string(scan.keyframe_id) + " is truncated");
      auto p = parse_point_line(line, error);
      if (!p) reader.fail(error);
      scan.points.push_back(*p);
    }
    archive.scans.push_back(std::move(scan));
    have_line = reader.next(line);
  }
  return archive;
}

void save_scan_archive(const std::filesystem::path& path, const PipelineConfig& config,
                       std::span<const FilteredScan> scans) {
  save_to(path, [&](std::ostream& out) { write_scan_archive(out, config, scans); });
}

ScanArchive load_scan_archive(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_scan_archive(in, path.string());
}

// --- signatures -------------------------------------------------------------

namespace {

void write_values(std::ostream& out, const char* tag, std::size_t variant, const std::vector<double>& values) {
  out << tag << ' ' << variant << ' ' << values.size();
  for (const double v : values) out << ' ' << format_double(v);
  out << '\n';
}

std::vector<double> read_values(text::LineReader& reader, const std::string& tag, std::size_t variant,
                                std::size_t expected) {
  std::string line;
  if (!reader.next(line)) reader.fail("signature payload is truncated");
  const auto tokens = text::tokenize(line);
  if (tokens.size() < 3 || tokens[0] != tag || text::parse_int(tokens[1]) != static_cast<std::int64_t>(variant)) {
    reader.fail("expected '" + tag + " " + std::to_string(variant) + " ...'");
  }
  const auto n = text::parse_int(tokens[2]);
  if (!n || static_cast<std::size_t>(*n) != expected || tokens.size() != expected + 3) {
    reader.fail("expected " + std::to_string(expected) + " values");
  }
  std::vector<double> values(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    const auto v = text::parse_double(tokens[3 + i]);
    if (!v) reader.fail("invalid value '" + std::string(tokens[3 + i]) + "'");
    values[i] = *v;
  }
  return values;
}

void write_histogram(std::ostream& out, std::size_t variant, const DelightHistogram& h) {
  std::size_t nonzero = 0;
  for (const auto c : h.counts) nonzero += c != 0 ? 1 : 0;
  out << "H " << variant << ' ' << nonzero;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    if (h.counts[i] != 0) out << ' ' << i << ':' << h.counts[i];
  }
  out << '\n';
}

DelightHistogram read_histogram(text::LineReader& reader, std::size_t variant) {
  std::string line;
  if (!reader.next(line)) reader.fail("signature payload is truncated");
  const auto tokens = text::tokenize(line);
  if (tokens.size() < 3 || tokens[0] != "H" || text::parse_int(tokens[1]) != static_cast<std::int64_t>(variant)) {
    reader.fail("expected 'H " + std::to_string(variant) + " ...'");
  }
  const auto n = text::parse_int(tokens[2]);
  if (!n || *n < 0 || tokens.size() != static_cast<std::size_t>(*n) + 3) reader.fail("bad histogram entry count");
  DelightHistogram h;
  std::int64_t previous = -1;
  for (std::size_t i = 3; i < tokens.size(); ++i) {
    const auto colon = tokens[i].find(':');
    if (colon == std::string_view::npos) reader.fail("expected '<index>:<count>'");
    const auto index = text::parse_int(tokens[i].substr(0, colon));
    const auto count = text::parse_int(tokens[i].substr(colon + 1));
    if (!index || !count || *index <= previous || *index >= static_cast<std::int64_t>(kDelightLength) || *count <= 0 ||
        *count > 0xffffffffLL) {
      reader.fail("invalid histogram entry '" + std::string(tokens[i]) + "'");
    }
    previous = *index;
    h.counts[static_cast<std::size_t>(*index)] = static_cast<std::uint32_t>(*count);
    h.occupancy |= std::uint64_t{1} << (static_cast<std::size_t>(*index) / kDelightChunk);
  }
  return h;
}

}  // namespace

void write_signature_archive(std::ostream& out, const SignatureArchive& archive) {
  out << "PLACEREC-SIGNATURES 1\n"
      << "DESCRIPTOR " << to_string(archive.kind) << '\n'
      << "FILTER " << to_string(archive.filter) << '\n'
      << "BINARIZATION " << kBinarizationRule << '\n';
  write_config_block(out, archive.config);
  for (std::size_t i = 0; i < archive.size(); ++i) {
    out << "SIG " << archive.ids[i] << ' ' << (archive.degenerate[i] != 0 ? "degenerate" : "ok");
    write_gt(out, archive.gt_positions[i]);
    out << '\n';
    switch (archive.kind) {
      case DescriptorKind::kDelight:
        for (std::size_t k = 0; k < kPcaVariants; ++k) write_histogram(out, k, archive.delight[i].variants[k]);
        break;
      case DescriptorKind::kM2dp:
        for (std::size_t k = 0; k < kPcaVariants; ++k) {
          write_values(out, "S", k, archive.m2dp[i].variants[k].structure);
          write_values(out, "I", k, archive.m2dp[i].variants[k].intensity);
        }
        break;
      case DescriptorKind::kScanContext:
        write_values(out, "S", 0, archive.scan_context[i].structure);
        write_values(out, "I", 0, archive.scan_context[i].intensity);
        break;
    }
  }
}

SignatureArchive read_signature_archive(std::istream& in, const std::string& source) {
  text::LineReader reader(in, source);
  std::string line;
  Header header = read_header(reader, "PLACEREC-SIGNATURES", line);
  SignatureArchive archive;
  archive.config = header.config;
  const auto field = [&](const char* name) {
    const auto it = header.fields.find(name);
    if (it == header.fields.end()) reader.fail(std::string("missing ") + name + " line");
    return it->second;
  };
  const auto kind = parse_descriptor_kind(field("DESCRIPTOR"));
  if (!kind) reader.fail("unknown descriptor '" + field("DESCRIPTOR") + "'");
  archive.kind = *kind;
  const auto filter = parse_filter_kind(field("FILTER"));
  if (!filter) reader.fail("unknown filter '" + field("FILTER") + "'");
  archive.filter = *filter;
  if (field("BINARIZATION") != kBinarizationRule) {
    reader.fail("unsupported binarization rule '" + field("BINARIZATION") + "'");
  }

  const auto& m2dp = archive.config.m2dp;
  const auto& sc = archive.config.scan_context;
  bool have_line = !line.empty();
  while (have_line) {
    const auto tokens = text::tokenize(line);
    if (tokens.front() != "SIG" || (tokens.size() != 3 && tokens.size() != 6)) {
      reader.fail("expected 'SIG <id> <ok|degenerate> [gx gy gz]'");
    }
    const auto id = text::parse_int(tokens[1]);
    if (!id) reader.fail("invalid signature id '" + std::string(tokens[1]) + "'");
    if (!archive.ids.empty() && *id <= archive.ids.back()) reader.fail("signature ids must be strictly increasing");
    if (tokens[2] != "ok" && tokens[2] != "degenerate") reader.fail("status must be 'ok' or 'degenerate'");
    archive.ids.push_back(*id);
    archive.degenerate.push_back(tokens[2] == "degenerate" ? 1 : 0);
    archive.gt_positions.push_back(parse_gt(tokens, 3, reader));
    switch (archive.kind) {
      case DescriptorKind::kDelight: {
        DelightSignature s;
        for (std::size_t k = 0; k < kPcaVariants; ++k) s.variants[k] = read_histogram(reader, k);
        archive.delight.push_back(std::move(s));
        break;
      }
      case DescriptorKind::kM2dp: {
        M2dpSignature s;
        for (std::size_t k = 0; k < kPcaVariants; ++k) {
          s.variants[k].structure =
              read_values(reader, "S", k, static_cast<std::size_t>(m2dp.structure_length()));
          s.variants[k].intensity = read_values(reader, "I", k, static_cast<std::size_t>(m2dp.bin_count()));
        }
        archive.m2dp.push_back(std::move(s));
        break;
      }
      case DescriptorKind::kScanContext: {
        ScanContextSignature s;
        s.rings = sc.rings;
        s.sectors = sc.sectors;
        const auto cells = static_cast<std::size_t>(sc.rings) * static_cast<std::size_t>(sc.sectors);
        s.structure = read_values(reader, "S", 0, cells);
        s.intensity = read_values(reader, "I", 0, cells);
        archive.scan_context.push_back(std::move(s));
        break;
      }
    }
    have_line = reader.next(line);
  }
  return archive;
}

void save_signature_archive(const std::filesystem::path& path, const SignatureArchive& archive) {
  save_to(path, [&](std::ostream& out) { write_signature_archive(out, archive); });
}

SignatureArchive load_signature_archive(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_signature_archive(in, path.string());
}

// --- CSV --------------------------------------------------------------------

void write_matrix_csv(std::ostream& out, const DifferenceMatrix& d, const std::string& fingerprint) {
  out << "query_id";
  for (const auto id : d.reference_ids) out << ',' << id;
  out << '\n' << "# fingerprint " << fingerprint << '\n';
  for (std::size_t q = 0; q < d.rows(); ++q) {
    out << d.query_ids[q];
    for (std::size_t r = 0; r < d.cols(); ++r) {
      out << ',';
      if (d.mask.allows(q, r)) out << format_double(d.at(q, r));
    }
    out << '\n';
  }
}

void write_match_table(std::ostream& out, const MatchTable& table) {
  out << "query_id,reference_id,difference\n"
      << "# fingerprint " << table.fingerprint << '\n'
      << "# descriptor " << to_string(table.descriptor) << '\n'
      << "# ranked_by " << to_string(table.ranked_by) << '\n'
      << "# exclusion_window "
      << (table.exclusion_window ? std::to_string(*table.exclusion_window) : std::string("none")) << '\n';
  for (const QueryMatch& m : table.matches.queries) {
    out << m.query_id << ',';
    if (m.reference_id) out << *m.reference_id << ',' << format_double(m.difference);
    else out << ',';
    out << '\n';
  }
}

MatchTable read_match_table(std::istream& in, const std::string& source) {
  MatchTable table;
  std::string line;
  std::size_t line_number = 0;
  const auto fail = [&](const std::string& message) {
    throw DataError(source + ":" + std::to_string(line_number) + ": " + message);
  };
  bool have_header = false;
  bool have_descriptor = false;
  bool have_ranking = false;
  bool have_window = false;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_header) {
      if (line != "query_id,reference_id,difference") fail("not a match table");
      have_header = true;
      continue;
    }
    if (line.front() == '#') {
      const std::string body = line.substr(1);
      const auto tokens = text::tokenize(body);
      if (tokens.size() != 2) fail("malformed metadata line");
      if (tokens[0] == "fingerprint") {
        table.fingerprint = std::string(tokens[1]);
      } else if (tokens[0] == "descriptor") {
        const auto kind = parse_descriptor_kind(tokens[1]);
        if (!kind) fail("unknown descriptor");
        table.descriptor = *kind;
        have_descriptor = true;
      } else if (tokens[0] == "ranked_by") {
        if (tokens[1] == "fused") table.ranked_by = MatrixKind::kFused;
        else if (tokens[1] == "structure") table.ranked_by = MatrixKind::kStructure;
        else if (tokens[1] == "intensity") table.ranked_by = MatrixKind::kIntensity;
        else fail("unknown matrix kind");
        have_ranking = true;
      } else if (tokens[0] == "exclusion_window") {
        if (tokens[1] != "none") {
          const auto w = text::parse_int(tokens[1]);
          if (!w || *w < 0) fail("invalid exclusion window");
          table.exclusion_window = *w;
        }
        have_window = true;
      } else {
        fail("unknown metadata '" + std::string(tokens[0]) + "'");
      }
      continue;
    }
    const auto first = line.find(',');
    const auto second = first == std::string::npos ? first : line.find(',', first + 1);
    if (second == std::string::npos || line.find(',', second + 1) != std::string::npos) {
      fail("expected 'query_id,reference_id,difference'");
    }
    QueryMatch m;
    const auto qid = text::parse_int(std::string_view(line).substr(0, first));
    if (!qid) fail("invalid query id");
    m.query_id = *qid;
    const std::string_view ref = std::string_view(line).substr(first + 1, second - first - 1);
    const std::string_view diff = std::string_view(line).substr(second + 1);
    if (!ref.empty() || !diff.empty()) {
      const auto rid = text::parse_int(ref);
      const auto value = text::parse_double(diff);
      if (!rid || !value) fail("invalid reference id or difference");
      m.reference_id = *rid;
      m.difference = *value;
    }
    table.matches.queries.push_back(m);
  }
  if (!have_header) throw DataError(source + ": empty match table");
  if (table.fingerprint.empty() || !have_descriptor || !have_ranking || !have_window) {
    throw DataError(source + ": match table lacks fingerprint, descriptor, ranked_by or exclusion_window metadata");
  }
  return table;
}

}  // namespace placerec
