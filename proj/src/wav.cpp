#include "infext/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace infext {
namespace {

static_assert(std::endian::native == std::endian::little,
              "WAV I/O assumes a little-endian host");

template <typename T>
T read_le(const std::vector<char>& buf, std::size_t pos) {
  if (pos + sizeof(T) > buf.size()) throw std::runtime_error("truncated WAV file");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  return v;
}

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path, int expected_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw std::runtime_error(path.string() + ": not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const std::string id(buf.data() + pos, 4);
    const auto size = read_le<std::uint32_t>(buf, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      format = read_le<std::uint16_t>(buf, body);
      channels = read_le<std::uint16_t>(buf, body + 2);
      rate = read_le<std::uint32_t>(buf, body + 4);
      bits = read_le<std::uint16_t>(buf, body + 14);
      if (format == 0xFFFE && size >= 40) {
        format = read_le<std::uint16_t>(buf, body + 24);  // extensible subformat
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw std::runtime_error(path.string() + ": data before fmt chunk");
      if (channels != 1) {
        throw std::runtime_error(path.string() + ": only mono WAV is supported, got " +
                                 std::to_string(channels) + " channels");
      }
      if (expected_rate > 0 && static_cast<int>(rate) != expected_rate) {
        throw std::runtime_error(path.string() + ": sample rate " + std::to_string(rate) +
                                 " does not match expected " +
                                 std::to_string(expected_rate) + " (no resampling)");
      }
      const std::size_t avail = std::min<std::size_t>(size, buf.size() - body);
      Eigen::VectorXd samples;
      if (format == 1 && bits == 16) {
        samples.resize(avail / 2);
        for (Index i = 0; i < samples.size(); ++i) {
          samples[i] = read_le<std::int16_t>(buf, body + 2 * i) / 32768.0;
        }
      } else if (format == 3 && bits == 32) {
        samples.resize(avail / 4);
        for (Index i = 0; i < samples.size(); ++i) {
          samples[i] = read_le<float>(buf, body + 4 * i);
        }
      } else {
        throw std::runtime_error(path.string() + ": unsupported sample format " +
                                 std::to_string(format) + "/" + std::to_string(bits) + " bit");
      }
      return make_waveform(std::move(samples), static_cast<int>(rate));
    }
    pos = body + size + (size & 1u);
  }
  throw std::runtime_error(path.string() + ": no data chunk");
}

void write_wav(const std::filesystem::path& path, const Waveform& w, WavFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const bool flt = format == WavFormat::kFloat32;
  const std::uint16_t bits = flt ? 32 : 16;
  const std::uint32_t bytes = static_cast<std::uint32_t>(w.size()) * (bits / 8);
  out.write("RIFF", 4);
  put<std::uint32_t>(out, 36 + bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put<std::uint32_t>(out, 16);
  put<std::uint16_t>(out, flt ? 3 : 1);
  put<std::uint16_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate) * (bits / 8));
  put<std::uint16_t>(out, bits / 8);
  put<std::uint16_t>(out, bits);
  out.write("data", 4);
  put<std::uint32_t>(out, bytes);
  for (Index i = 0; i < w.size(); ++i) {
    if (flt) {
      put<float>(out, static_cast<float>(w.samples[i]));
    } else {
      const double v = std::clamp(w.samples[i], -1.0, 32767.0 / 32768.0);
      put<std::int16_t>(out, static_cast<std::int16_t>(std::lround(v * 32768.0)));
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace infext
