#pragma once

#include <filesystem>

#include "rlsfi/audio.hpp"

namespace rlsfi {

enum class WavFormat { Pcm16, Pcm24, Float32 };

// Little-endian RIFF/WAVE, PCM 16/24-bit or IEEE float32, any channel count
// (WAVE_FORMAT_EXTENSIBLE is accepted on read).
AudioBuffer read_wav(const std::filesystem::path& path);
void write_wav(const AudioBuffer& audio, const std::filesystem::path& path,
               WavFormat format = WavFormat::Float32);

}  // namespace rlsfi
