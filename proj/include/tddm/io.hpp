#pragma once

#include <string>
#include <vector>

#include "tddm/common.hpp"
#include "tddm/mask.hpp"

namespace tddm::io {

/// Writes `content` to a sibling temporary file, then renames it over
/// `path`, so readers never observe a partial file. Creates missing parent
/// directories. Throws IoError.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by header name; throws Error(data) when absent.
  std::size_t column(const std::string& name) const;
};

/// RFC 4180 style: fields containing a comma, quote or newline are quoted.
std::string to_csv(const CsvTable& table);
/// Throws Error(data) naming the line for ragged rows or bad quoting.
CsvTable parse_csv(const std::string& text);

/// Binary 8-bit PGM (P5). Values are clamped to [0,1] and scaled to 0..255.
std::string encode_pgm(const Plane& plane);
std::string encode_pgm(const mask::BinaryMask& mask);
/// Decodes P5 with maxval <= 255 into [0,1]. Throws Error(data).
Plane decode_pgm(const std::string& bytes);

/// Frames placed side by side with a one-pixel white separator.
Plane hconcat(const std::vector<Plane>& planes);

}  // namespace tddm::io
