#include "rlsfi/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>

#include "rlsfi/error.hpp"
#include "rlsfi/io.hpp"

namespace rlsfi {

namespace {

std::uint32_t u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
std::uint16_t u16(const unsigned char* p) { return std::uint16_t(p[0] | p[1] << 8); }

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
}
void put_tag(std::vector<unsigned char>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
  const auto bytes = io::read_bytes(path);
  const std::string name = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(name + " is not a RIFF/WAVE file", 0);
  }
  std::uint16_t tag = 0, n_ch = 0, bits = 0;
  std::uint32_t fs = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = u32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      throw FormatError(name + ": chunk extends past end of file (" + std::to_string(size) +
                            " bytes declared, " + std::to_string(bytes.size() - body) + " available)",
                        pos);
    }
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError(name + ": fmt chunk too short", pos);
      tag = u16(bytes.data() + body);
      n_ch = u16(bytes.data() + body + 2);
      fs = u32(bytes.data() + body + 4);
      bits = u16(bytes.data() + body + 14);
      if (tag == 0xFFFE) {
        if (size < 40) throw FormatError(name + ": extensible fmt chunk too short", pos);
        tag = u16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      if (!have_fmt) throw FormatError(name + ": data chunk before fmt chunk", pos);
      if (n_ch == 0 || fs == 0) throw FormatError(name + ": zero channels or sample rate", pos);
      const bool pcm = tag == 1 && (bits == 16 || bits == 24);
      const bool flt = tag == 3 && bits == 32;
      if (!pcm && !flt) {
        throw FormatError(name + ": unsupported sample format (tag " + std::to_string(tag) +
                              ", " + std::to_string(bits) + " bits)",
                          pos);
      }
      const std::size_t width = bits / 8;
      const std::size_t frames = size / (width * n_ch);
      std::vector<std::vector<double>> ch(n_ch, std::vector<double>(frames));
      for (std::size_t k = 0; k < frames; ++k) {
        for (std::size_t c = 0; c < n_ch; ++c) {
          const std::size_t off = body + (k * n_ch + c) * width;
          const unsigned char* p = bytes.data() + off;
          double v;
          if (flt) {
            v = io::read_f32le(p);
            if (!std::isfinite(v)) throw FormatError(name + ": non-finite sample", off);
          } else if (bits == 16) {
            v = static_cast<std::int16_t>(u16(p)) / 32768.0;
          } else {
            std::int32_t s = std::int32_t(p[0]) | std::int32_t(p[1]) << 8 | std::int32_t(p[2]) << 16;
            if (s & 0x800000) s -= 0x1000000;
            v = s / 8388608.0;
          }
          ch[c][k] = v;
        }
      }
      return AudioBuffer(fs, std::move(ch));
    }
    pos = body + size + (size & 1);
  }
  throw FormatError(name + ": no data chunk", bytes.size());
}

void write_wav(const AudioBuffer& audio, const std::filesystem::path& path, WavFormat format) {
  const std::uint16_t bits = format == WavFormat::Pcm16 ? 16 : format == WavFormat::Pcm24 ? 24 : 32;
  const std::uint16_t tag = format == WavFormat::Float32 ? 3 : 1;
  const auto n_ch = static_cast<std::uint16_t>(audio.channels());
  const std::size_t width = bits / 8;
  const auto data_size = static_cast<std::uint32_t>(audio.frames() * n_ch * width);
  const auto fs = static_cast<std::uint32_t>(std::lround(audio.sample_rate()));

  std::vector<unsigned char> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_size);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, tag);
  put_u16(out, n_ch);
  put_u32(out, fs);
  put_u32(out, static_cast<std::uint32_t>(fs * n_ch * width));
  put_u16(out, static_cast<std::uint16_t>(n_ch * width));
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_size);
  for (std::size_t k = 0; k < audio.frames(); ++k) {
    for (std::size_t c = 0; c < n_ch; ++c) {
      const double v = audio.channel(c)[k];
      if (format == WavFormat::Float32) {
        io::append_f32le(out, static_cast<float>(v));
      } else if (format == WavFormat::Pcm16) {
        const auto s = static_cast<std::int16_t>(std::lround(std::clamp(v, -1.0, 32767.0 / 32768.0) * 32768.0));
        put_u16(out, static_cast<std::uint16_t>(s));
      } else {
        const auto s = static_cast<std::int32_t>(
            std::lround(std::clamp(v, -1.0, 8388607.0 / 8388608.0) * 8388608.0));
        out.push_back(static_cast<unsigned char>(s));
        out.push_back(static_cast<unsigned char>(s >> 8));
        out.push_back(static_cast<unsigned char>(s >> 16));
      }
    }
  }
  io::write_bytes(path, out);
}

}  // namespace rlsfi
