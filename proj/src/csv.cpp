#include "deltarl/csv.hpp"

#include <cstdio>
#include <stdexcept>

namespace deltarl {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

CsvWriter::CsvWriter(const std::string& path, std::uint64_t config_hash,
                     std::span<const std::string> header)
    : path_(path), out_(path, std::ios::binary), width_(header.size()) {
  if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
  out_ << "# deltarl-csv v1 config=" << hex64(config_hash) << "\n";
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out_ << ',';
    out_ << csv_escape(header[i]);
  }
  out_ << "\n";
}

void CsvWriter::row(std::span<const std::string> fields) {
  if (fields.size() != width_)
    throw std::runtime_error("csv row width mismatch in " + path_);
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << csv_escape(fields[i]);
  }
  out_ << "\n";
}

void CsvWriter::row(std::span<const double> values) {
  std::vector<std::string> fields;
  fields.reserve(values.size());
  for (double v : values) fields.push_back(format_double(v));
  row(std::span<const std::string>(fields));
}

}  // namespace deltarl
