#include "cadence/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "cadence/error.hpp"

namespace cadence {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

[[noreturn]] void bad(const std::filesystem::path& path, const std::string& why) {
  throw Error(ErrorCode::InvalidAudio, path.string() + ": " + why, path.filename().string());
}

}  // namespace

WavFile read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string(), path.filename().string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    bad(path, "not a RIFF/WAVE file");
  }

  std::uint16_t format_tag = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) bad(path, "short fmt chunk");
      format_tag = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      if (format_tag == kFormatExtensible && avail >= 26) format_tag = read_u16(bytes.data() + body + 24);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = avail;
    }
    pos = body + size + (size & 1u);
  }

  if (data == nullptr || channels == 0) bad(path, "missing fmt or data chunk");
  if (channels > 2) bad(path, "only mono and stereo are supported");

  WavFile out;
  if (format_tag == kFormatPcm && bits == 16) {
    out.format = SampleFormat::Int16;
  } else if (format_tag == kFormatPcm && bits == 24) {
    out.format = SampleFormat::Int24;
  } else if (format_tag == kFormatFloat && bits == 32) {
    out.format = SampleFormat::Float32;
  } else {
    bad(path, "unsupported sample format");
  }

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t frames = data_size / frame_bytes;
  out.audio = AudioBuffer(channels, frames, static_cast<int>(rate));

  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* s = data + f * frame_bytes + c * bytes_per_sample;
      float v = 0.0f;
      switch (out.format) {
        case SampleFormat::Int16:
          v = static_cast<float>(static_cast<std::int16_t>(read_u16(s))) / 32768.0f;
          break;
        case SampleFormat::Int24: {
          std::int32_t x = static_cast<std::int32_t>(s[0] | (s[1] << 8) | (s[2] << 16));
          if (x & 0x800000) x -= 0x1000000;
          v = static_cast<float>(x) / 8388608.0f;
          break;
        }
        case SampleFormat::Float32: {
          const std::uint32_t raw = read_u32(s);
          std::memcpy(&v, &raw, sizeof v);
          break;
        }
      }
      out.audio.channels[c][f] = v;
    }
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio, SampleFormat format) {
  audio.validate();
  const std::uint16_t channels = static_cast<std::uint16_t>(audio.num_channels());
  const std::uint16_t bits = format == SampleFormat::Int16 ? 16 : format == SampleFormat::Int24 ? 24 : 32;
  const std::uint32_t block_align = channels * bits / 8;
  const std::uint32_t data_size = static_cast<std::uint32_t>(audio.frames() * block_align);

  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  put_u32(out, 36 + data_size);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, format == SampleFormat::Float32 ? kFormatFloat : kFormatPcm);
  put_u16(out, channels);
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate) * block_align);
  put_u16(out, static_cast<std::uint16_t>(block_align));
  put_u16(out, bits);
  out += "data";
  put_u32(out, data_size);

  for (std::size_t f = 0; f < audio.frames(); ++f) {
    for (std::size_t c = 0; c < channels; ++c) {
      const float v = audio.channels[c][f];
      switch (format) {
        case SampleFormat::Int16: {
          const long q = std::clamp(std::lround(static_cast<double>(v) * 32768.0), -32768L, 32767L);
          put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
          break;
        }
        case SampleFormat::Int24: {
          const long q = std::clamp(std::lround(static_cast<double>(v) * 8388608.0), -8388608L, 8388607L);
          const auto u = static_cast<std::uint32_t>(q) & 0xFFFFFFu;
          out.push_back(static_cast<char>(u & 0xFF));
          out.push_back(static_cast<char>((u >> 8) & 0xFF));
          out.push_back(static_cast<char>((u >> 16) & 0xFF));
          break;
        }
        case SampleFormat::Float32: {
          std::uint32_t raw = 0;
          std::memcpy(&raw, &v, sizeof raw);
          put_u32(out, raw);
          break;
        }
      }
    }
  }

  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorCode::IoError, "cannot write " + path.string(), path.filename().string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace cadence
