#pragma once

#include <filesystem>

#include "cadence/types.hpp"

namespace cadence {

enum class SampleFormat { Int16, Int24, Float32 };

struct WavFile {
  AudioBuffer audio;
  SampleFormat format = SampleFormat::Int16;
};

/// Reads PCM WAV (16/24-bit integer, 32-bit float, 1-2 channels).
WavFile read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
               SampleFormat format = SampleFormat::Int16);

}  // namespace cadence
