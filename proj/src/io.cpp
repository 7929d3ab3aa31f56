#include "tddm/io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace tddm::io {

namespace {

[[noreturn]] void data_error(const std::string& what) { throw Error(ErrorCategory::data, what); }

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  std::error_code ec;
  if (target.has_parent_path()) {
    fs::create_directories(target.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + target.parent_path().string() + "': " + ec.message());
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path + "': " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) data_error("CSV has no column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

std::string to_csv(const CsvTable& table) {
  std::string out;
  auto field = [&](const std::string& f) {
    if (f.find_first_of(",\"\n\r") == std::string::npos) {
      out += f;
      return;
    }
    out += '"';
    for (char c : f) {
      if (c == '"') out += '"';
      out += c;
    }
    out += '"';
  };
  auto row = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out += ',';
      field(r[i]);
    }
    out += '\n';
  };
  row(table.header);
  for (const auto& r : table.rows) row(r);
  return out;
}

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  int line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty()) data_error("CSV line " + std::to_string(line) + ": quote inside an unquoted field");
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (c == '\n') {
      record.push_back(std::move(field));
      field.clear();
      records.push_back(std::move(record));
      record.clear();
      field_started = false;
      ++line;
    } else if (c != '\r') {
      field += c;
      field_started = true;
    }
  }
  if (quoted) data_error("CSV ends inside a quoted field");
  if (field_started || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  if (records.empty()) data_error("CSV is empty");
  CsvTable table;
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      data_error("CSV line " + std::to_string(r + 1) + ": expected " + std::to_string(table.header.size()) +
                 " fields, got " + std::to_string(records[r].size()));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

std::string encode_pgm(const Plane& plane) {
  std::string out = "P5\n" + std::to_string(plane.width()) + " " + std::to_string(plane.height()) + "\n255\n";
  for (double v : plane.values()) {
    const double c = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    out += static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0)));
  }
  return out;
}

std::string encode_pgm(const mask::BinaryMask& mask) {
  Plane p(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) p.at(x, y) = mask.kept(x, y) ? 1.0 : 0.0;
  }
  return encode_pgm(p);
}

Plane decode_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  if (token() != "P5") data_error("not a binary PGM (missing P5)");
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(token());
    height = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    data_error("malformed PGM header");
  }
  if (width < 1 || height < 1 || maxval < 1 || maxval > 255) data_error("unsupported PGM geometry or maxval");
  ++pos;  // single whitespace after maxval
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() < pos + n) data_error("PGM pixel data truncated");
  Plane p(width, height);
  for (std::size_t i = 0; i < n; ++i) {
    p.values()[i] = static_cast<double>(static_cast<unsigned char>(bytes[pos + i])) / maxval;
  }
  return p;
}

Plane hconcat(const std::vector<Plane>& planes) {
  if (planes.empty()) return {};
  int width = -1;
  int height = 0;
  for (const auto& p : planes) {
    width += p.width() + 1;
    height = std::max(height, p.height());
  }
  Plane out(width, height);
  int x0 = 0;
  for (std::size_t i = 0; i < planes.size(); ++i) {
    const Plane& p = planes[i];
    for (int y = 0; y < p.height(); ++y) {
      for (int x = 0; x < p.width(); ++x) out.at(x0 + x, y) = p.at(x, y);
    }
    x0 += p.width();
    if (i + 1 < planes.size()) {
      for (int y = 0; y < height; ++y) out.at(x0, y) = 1.0;
      ++x0;
    }
  }
  return out;
}

}  // namespace tddm::io
