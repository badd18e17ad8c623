#pragma once

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace deltarl {

// FNV-1a over bytes; used to stamp output files with the config they came from.
std::uint64_t fnv1a64(std::string_view bytes);

std::string hex64(std::uint64_t v);

// Lossless, locale-independent double formatting ("%.17g").
std::string format_double(double v);

// RFC 4180 field quoting (commas, quotes, newlines).
std::string csv_escape(const std::string& field);

// CSV file with a leading comment line carrying the schema version and the
// config hash. Rows are flushed in order; bytes are a pure function of the
// rows written.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::uint64_t config_hash,
            std::span<const std::string> header);

  void row(std::span<const std::string> fields);
  void row(std::span<const double> values);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  std::size_t width_ = 0;
};

}  // namespace deltarl
