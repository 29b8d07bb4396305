#include "placerec/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "placerec/error.hpp"
#include "placerec/text_format.hpp"

namespace placerec {

namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

KeyValues KeyValues::parse(std::istream& in, const std::string& source) {
  KeyValues kv;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string_view content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    const std::string where = source + ":" + std::to_string(line_number);
    const auto eq = content.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key(trim(content.substr(0, eq)));
    const std::string value(trim(content.substr(eq + 1)));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (kv.values_.count(key) != 0) throw ConfigError(where + ": duplicate key '" + key + "'");
    kv.values_[key] = {value, where};
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse(in, path.string());
}

bool KeyValues::has(std::string_view key) const { return values_.find(key) != values_.end(); }

void KeyValues::set(const std::string& key, const std::string& value) { values_[key] = {value, "<override>"}; }

const KeyValues::Value* KeyValues::find(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  used_.insert(it->first);
  return &it->second;
}

void KeyValues::fail(const Value& value, std::string_view key, const std::string& message) const {
  throw ConfigError(value.where + ": " + std::string(key) + ": " + message);
}

std::optional<std::string> KeyValues::get_string(std::string_view key) const {
  const Value* v = find(key);
  if (v == nullptr) return std::nullopt;
  return v->text;
}

std::optional<double> KeyValues::get_double(std::string_view key) const {
  const Value* v = find(key);
  if (v == nullptr) return std::nullopt;
  const auto parsed = text::parse_double(v->text);
  if (!parsed) fail(*v, key, "expected a number, got '" + v->text + "'");
  return parsed;
}

std::optional<std::int64_t> KeyValues::get_int(std::string_view key) const {
  const Value* v = find(key);
  if (v == nullptr) return std::nullopt;
  const auto parsed = text::parse_int(v->text);
  if (!parsed) fail(*v, key, "expected an integer, got '" + v->text + "'");
  return parsed;
}

std::optional<bool> KeyValues::get_bool(std::string_view key) const {
  const Value* v = find(key);
  if (v == nullptr) return std::nullopt;
  if (v->text == "true" || v->text == "1") return true;
  if (v->text == "false" || v->text == "0") return false;
  fail(*v, key, "expected true or false, got '" + v->text + "'");
}

std::optional<std::vector<double>> KeyValues::get_doubles(std::string_view key) const {
  const Value* v = find(key);
  if (v == nullptr) return std::nullopt;
  std::string spaced = v->text;
  for (char& c : spaced) {
    if (c == ',' || c == ';') c = ' ';
  }
  std::vector<double> out;
  for (const auto token : text::tokenize(spaced)) {
    const auto parsed = text::parse_double(token);
    if (!parsed) fail(*v, key, "expected numbers, got '" + v->text + "'");
    out.push_back(*parsed);
  }
  return out;
}

void KeyValues::reject_unused() const {
  for (const auto& [key, value] : values_) {
    if (used_.count(key) == 0) throw ConfigError(value.where + ": unknown key '" + key + "'");
  }
}

std::string_view to_string(DescriptorKind kind) {
  switch (kind) {
    case DescriptorKind::kDelight:
      return "delight";
    case DescriptorKind::kM2dp:
      return "m2dp";
    case DescriptorKind::kScanContext:
      return "scan_context";
  }
  return "unknown";
}

std::optional<DescriptorKind> parse_descriptor_kind(std::string_view name) {
  if (name == "delight") return DescriptorKind::kDelight;
  if (name == "m2dp") return DescriptorKind::kM2dp;
  if (name == "scan_context") return DescriptorKind::kScanContext;
  return std::nullopt;
}

FilterKind default_filter(DescriptorKind kind) {
  return kind == DescriptorKind::kScanContext ? FilterKind::kVoxel : FilterKind::kPolar;
}

void PipelineConfig::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(scan.range, "range");
  positive(scan.polar_resolution_deg, "polar_resolution");
  positive(scan.voxel_cell.x(), "voxel_cell");
  positive(scan.voxel_cell.y(), "voxel_cell");
  positive(scan.voxel_cell.z(), "voxel_cell");
  positive(delight.inner_radius, "delight_inner_radius");
  positive(delight.outer_radius, "delight_outer_radius");
  if (delight.inner_radius >= delight.outer_radius) {
    throw ConfigError("delight_inner_radius must be smaller than delight_outer_radius");
  }
  positive(m2dp.rings, "m2dp_rings");
  positive(m2dp.sectors, "m2dp_sectors");
  positive(m2dp.azimuth_planes, "m2dp_azimuth_planes");
  positive(m2dp.elevation_planes, "m2dp_elevation_planes");
  positive(scan_context.rings, "sc_rings");
  positive(scan_context.sectors, "sc_sectors");
  positive(scan_context.max_radius, "sc_max_radius");
  positive(structure_weight, "structure_weight");
  positive(gt_threshold, "gt_threshold");
  if (exclusion_window < 0) throw ConfigError("exclusion_window must not be negative");
  const double cells = 360.0 / scan.polar_resolution_deg;
  if (std::abs(cells - std::round(cells)) > 1e-9) throw ConfigError("polar_resolution must divide 360");
}

std::string PipelineConfig::canonical() const {
  using text::format_double;
  std::ostringstream out;
  out << "delight_inner_radius = " << format_double(delight.inner_radius) << '\n'
      << "delight_outer_radius = " << format_double(delight.outer_radius) << '\n'
      << "exclusion_window = " << exclusion_window << '\n'
      << "gt_threshold = " << format_double(gt_threshold) << '\n'
      << "m2dp_azimuth_planes = " << m2dp.azimuth_planes << '\n'
      << "m2dp_elevation_planes = " << m2dp.elevation_planes << '\n'
      << "m2dp_rings = " << m2dp.rings << '\n'
      << "m2dp_sectors = " << m2dp.sectors << '\n'
      << "polar_resolution = " << format_double(scan.polar_resolution_deg) << '\n'
      << "range = " << format_double(scan.range) << '\n'
      << "sc_center = " << (scan_context.center == ScanContextCenter::kSensor ? "sensor" : "centroid") << '\n'
      << "sc_joint_shift = " << (scan_context_joint_shift ? "true" : "false") << '\n'
      << "sc_max_radius = " << format_double(scan_context.max_radius) << '\n'
      << "sc_rings = " << scan_context.rings << '\n'
      << "sc_sectors = " << scan_context.sectors << '\n'
      << "structure_weight = " << format_double(structure_weight) << '\n'
      << "variant_search = " << (variant_search == VariantSearch::kSymmetric ? "symmetric" : "query_canonical")
      << '\n'
      << "voxel_cell = " << format_double(scan.voxel_cell.x()) << ',' << format_double(scan.voxel_cell.y()) << ','
      << format_double(scan.voxel_cell.z()) << '\n';
  return out.str();
}

std::string PipelineConfig::fingerprint() const { return text::hex64(text::fnv1a64(canonical())); }

namespace {

int to_int(std::int64_t v, const char* name) {
  if (v < 1 || v > 1'000'000) throw ConfigError(std::string(name) + " out of range");
  return static_cast<int>(v);
}

}  // namespace

void apply_config(PipelineConfig& config, const KeyValues& kv) {
  if (auto v = kv.get_double("range")) config.scan.range = *v;
  if (auto v = kv.get_double("polar_resolution")) config.scan.polar_resolution_deg = *v;
  if (auto v = kv.get_doubles("voxel_cell")) {
    if (v->size() != 3) throw ConfigError("voxel_cell needs three values");
    config.scan.voxel_cell = Eigen::Vector3d((*v)[0], (*v)[1], (*v)[2]);
  }
  if (auto v = kv.get_double("delight_inner_radius")) config.delight.inner_radius = *v;
  if (auto v = kv.get_double("delight_outer_radius")) config.delight.outer_radius = *v;
  if (auto v = kv.get_int("m2dp_rings")) config.m2dp.rings = to_int(*v, "m2dp_rings");
  if (auto v = kv.get_int("m2dp_sectors")) config.m2dp.sectors = to_int(*v, "m2dp_sectors");
  if (auto v = kv.get_int("m2dp_azimuth_planes")) config.m2dp.azimuth_planes = to_int(*v, "m2dp_azimuth_planes");
  if (auto v = kv.get_int("m2dp_elevation_planes")) {
    config.m2dp.elevation_planes = to_int(*v, "m2dp_elevation_planes");
  }
  if (auto v = kv.get_int("sc_rings")) config.scan_context.rings = to_int(*v, "sc_rings");
  if (auto v = kv.get_int("sc_sectors")) config.scan_context.sectors = to_int(*v, "sc_sectors");
  if (auto v = kv.get_double("sc_max_radius")) config.scan_context.max_radius = *v;
  if (auto v = kv.get_double("structure_weight")) config.structure_weight = *v;
  if (auto v = kv.get_double("gt_threshold")) config.gt_threshold = *v;
  if (auto v = kv.get_int("exclusion_window")) config.exclusion_window = *v;
  if (auto v = kv.get_string("variant_search")) {
    if (*v == "symmetric") {
      config.variant_search = VariantSearch::kSymmetric;
    } else if (*v == "query_canonical") {
      config.variant_search = VariantSearch::kQueryCanonical;
    } else {
      throw ConfigError("variant_search must be 'symmetric' or 'query_canonical'");
    }
  }
  if (auto v = kv.get_string("sc_center")) {
    if (*v == "sensor") {
      config.scan_context.center = ScanContextCenter::kSensor;
    } else if (*v == "centroid") {
      config.scan_context.center = ScanContextCenter::kCentroid;
    } else {
      throw ConfigError("sc_center must be 'sensor' or 'centroid'");
    }
  }
  if (auto v = kv.get_bool("sc_joint_shift")) config.scan_context_joint_shift = *v;
  config.validate();
}

}  // namespace placerec
