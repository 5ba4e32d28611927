#pragma once

#include <filesystem>

#include "infext/signal.hpp"

namespace infext {

enum class WavFormat { kPcm16, kFloat32 };

// Mono RIFF/WAVE, PCM16 or IEEE float32, little-endian. Multi-channel files
// are rejected; expected_rate > 0 rejects files at any other rate.
Waveform read_wav(const std::filesystem::path& path, int expected_rate = 0);
void write_wav(const std::filesystem::path& path, const Waveform& w,
               WavFormat format = WavFormat::kFloat32);

}  // namespace infext
