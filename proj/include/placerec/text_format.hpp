#pragma once

// Shared helpers for the line-oriented text formats (keyframes, scans,
// signature archives, CSV exports).

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace placerec::text {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

/// Whitespace-separated tokens; runs of spaces/tabs count as one separator.
std::vector<std::string_view> tokenize(std::string_view line);

/// Strict conversions: the whole token must be consumed. Return nullopt on failure.
std::optional<double> parse_double(std::string_view token);
std::optional<std::int64_t> parse_int(std::string_view token);

/// Reads lines while tracking the 1-based line number for error messages.
class LineReader {
 public:
  LineReader(std::istream& in, std::string source);

  /// Next line that is not blank and not a '#' comment.
  bool next(std::string& line);
  std::size_t line_number() const { return line_number_; }
  const std::string& source() const { return source_; }

  /// "<source>:<line>: <message>"
  [[noreturn]] void fail(const std::string& message) const;

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_number_ = 0;
};

/// 64-bit FNV-1a, used for configuration fingerprints.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

}  // namespace placerec::text
