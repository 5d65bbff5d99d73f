#pragma once

// File plumbing shared by the loaders and the CLI: whole-file byte I/O,
// deterministic JSON, little-endian sample codecs and CSV output.

#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace rlsfi::io {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const unsigned char> bytes);

// Parse errors become FormatError carrying the byte offset.
nlohmann::json read_json(const std::filesystem::path& path);
// Two-space indented dump with a trailing newline; key order is sorted, so
// output is byte-stable for equal documents.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

void append_f32le(std::vector<unsigned char>& out, float v);
void append_f64le(std::vector<unsigned char>& out, double v);
float read_f32le(const unsigned char* p);
double read_f64le(const unsigned char* p);

std::uint64_t fnv1a64(std::string_view s);
std::string hex64(std::uint64_t v);

// CSV writer whose first line is "# config_hash=<hex>" followed by the header row.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::string_view config_hash,
            std::span<const std::string> header);

  template <typename... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((write_cell(cells, first), first = false), ...);
    out_ << '\n';
  }

 private:
  void write_cell(double v, bool first);
  void write_cell(const std::string& v, bool first);
  void write_cell(const char* v, bool first) { write_cell(std::string(v), first); }
  void write_cell(std::size_t v, bool first) { write_cell(std::to_string(v), first); }
  void write_cell(int v, bool first) { write_cell(std::to_string(v), first); }

  std::ofstream out_;
};

}  // namespace rlsfi::io
