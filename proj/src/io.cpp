#include "rlsfi/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <iterator>

#include "rlsfi/error.hpp"

namespace rlsfi::io {

static_assert(std::endian::native == std::endian::little,
              "sample codecs assume a little-endian host");

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InvalidArgument("write failed for " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what(), e.byte);
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  const std::string text = doc.dump(2) + "\n";
  write_bytes(path, {reinterpret_cast<const unsigned char*>(text.data()), text.size()});
}

void append_f32le(std::vector<unsigned char>& out, float v) {
  unsigned char b[4];
  std::memcpy(b, &v, 4);
  out.insert(out.end(), b, b + 4);
}

void append_f64le(std::vector<unsigned char>& out, double v) {
  unsigned char b[8];
  std::memcpy(b, &v, 8);
  out.insert(out.end(), b, b + 8);
}

float read_f32le(const unsigned char* p) {
  float v;
  std::memcpy(&v, p, 4);
  return v;
}

double read_f64le(const unsigned char* p) {
  double v;
  std::memcpy(&v, p, 8);
  return v;
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::string_view config_hash,
                     std::span<const std::string> header)
    : out_(path, std::ios::trunc) {
  if (!out_) throw InvalidArgument("cannot write " + path.string());
  out_ << "# config_hash=" << config_hash << '\n';
  bool first = true;
  for (const auto& h : header) {
    write_cell(h, first);
    first = false;
  }
  out_ << '\n';
}

void CsvWriter::write_cell(double v, bool first) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  write_cell(std::string(buf), first);
}

void CsvWriter::write_cell(const std::string& v, bool first) {
  if (!first) out_ << ',';
  out_ << v;
}

}  // namespace rlsfi::io
