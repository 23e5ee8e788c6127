#include "cadence/loudness.hpp"

#include <cmath>
#include <numbers>

#include "cadence/bundle.hpp"
#include "cadence/error.hpp"

namespace cadence {

// Analog prototype of the K-weighting cascade; the bilinear transform with
// these parameters reproduces the tabulated 48 kHz coefficients.
KWeighting::KWeighting(int sample_rate) {
  const double fs = static_cast<double>(sample_rate);
  {
    const double f0 = 1681.974450955533;
    const double gain_db = 3.999843853973347;
    const double q = 0.7071752369554196;
    const double k = std::tan(std::numbers::pi * f0 / fs);
    const double vh = std::pow(10.0, gain_db / 20.0);
    const double vb = std::pow(vh, 0.4996667741545416);
    const double a0 = 1.0 + k / q + k * k;
    shelf.b0 = (vh + vb * k / q + k * k) / a0;
    shelf.b1 = 2.0 * (k * k - vh) / a0;
    shelf.b2 = (vh - vb * k / q + k * k) / a0;
    shelf.a1 = 2.0 * (k * k - 1.0) / a0;
    shelf.a2 = (1.0 - k / q + k * k) / a0;
  }
  {
    const double f0 = 38.13547087602444;
    const double q = 0.5003270373238773;
    const double k = std::tan(std::numbers::pi * f0 / fs);
    const double a0 = 1.0 + k / q + k * k;
    highpass.b0 = 1.0;
    highpass.b1 = -2.0;
    highpass.b2 = 1.0;
    highpass.a1 = 2.0 * (k * k - 1.0) / a0;
    highpass.a2 = (1.0 - k / q + k * k) / a0;
  }
}

double lufs(const AudioBuffer& buffer, std::int64_t start, std::int64_t end, double floor) {
  if (end <= start) throw Error(ErrorCode::EmptySpan, "loudness span must contain at least one sample");
  if (start < 0 || end > static_cast<std::int64_t>(buffer.frames()))
    throw Error(ErrorCode::SpanOutOfRange, "loudness span exceeds the buffer");

  double energy = 0.0;
  const double n = static_cast<double>(end - start);
  for (const auto& channel : buffer.channels) {
    KWeighting filter(buffer.sample_rate);
    double sum = 0.0;
    for (auto i = start; i < end; ++i) {
      const double y = filter.process(channel[static_cast<std::size_t>(i)]);
      sum += y * y;
    }
    energy += sum / n;
  }
  if (!(energy > 0.0)) return floor;
  return std::max(floor, -0.691 + 10.0 * std::log10(energy));
}

double lufs_seconds(const AudioBuffer& buffer, double start, double end, double floor) {
  return lufs(buffer, buffer.to_sample(start), buffer.to_sample(end), floor);
}

std::vector<double> beat_loudness(const AudioBuffer& stem, const BeatGrid& grid, double floor) {
  std::vector<double> out;
  if (grid.size() < 2) return out;
  out.reserve(grid.size() - 1);
  const auto frames = static_cast<std::int64_t>(stem.frames());
  for (std::size_t m = 0; m + 1 < grid.size(); ++m) {
    const auto a = std::min(stem.to_sample(grid[m]), frames);
    const auto b = std::min(stem.to_sample(grid[m + 1]), frames);
    out.push_back(b > a ? lufs(stem, a, b, floor) : floor);
  }
  return out;
}

std::vector<double> section_loudness(const std::vector<double>& beat_values, const BeatGrid& grid,
                                     const SectionList& sections, double track_end, double floor) {
  std::vector<double> out;
  out.reserve(sections.size());
  for (std::size_t n = 0; n < sections.size(); ++n) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto m : beats_in_section(grid, sections[n].start, sections.end_of(n, track_end))) {
      if (m < beat_values.size()) {
        sum += beat_values[m];
        ++count;
      }
    }
    out.push_back(count > 0 ? sum / static_cast<double>(count) : floor);
  }
  return out;
}

}  // namespace cadence
