#pragma once

#include <cstdint>
#include <vector>

#include "cadence/types.hpp"

namespace cadence {

inline constexpr double kDefaultLoudnessFloor = -70.0;

/// Second-order IIR section, direct form I.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0, a1 = 0.0, a2 = 0.0;
  double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;

  double process(double x) {
    const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    return y;
  }
  void reset() { x1 = x2 = y1 = y2 = 0.0; }
};

/// BS.1770 K-weighting pre-filter (high shelf then RLB high-pass),
/// derived for an arbitrary sample rate.
struct KWeighting {
  Biquad shelf;
  Biquad highpass;

  explicit KWeighting(int sample_rate);
  double process(double x) { return highpass.process(shelf.process(x)); }
};

/// Ungated K-weighted loudness of frames [start, end), channel-summed with
/// unit weights. Silence clamps to `floor`. Throws EmptySpan for end <= start
/// and SpanOutOfRange when the span leaves the buffer.
double lufs(const AudioBuffer& buffer, std::int64_t start, std::int64_t end,
            double floor = kDefaultLoudnessFloor);
/// Same, with the span given in seconds (rounded to the nearest sample).
double lufs_seconds(const AudioBuffer& buffer, double start, double end, double floor = kDefaultLoudnessFloor);

/// L_d(m) for every pair of consecutive beats; length M-1.
std::vector<double> beat_loudness(const AudioBuffer& stem, const BeatGrid& grid,
                                  double floor = kDefaultLoudnessFloor);

/// Mean of the beat loudness values (dB domain) whose beat index falls in each
/// section. Sections with no usable beats get `floor`.
std::vector<double> section_loudness(const std::vector<double>& beat_values, const BeatGrid& grid,
                                     const SectionList& sections, double track_end,
                                     double floor = kDefaultLoudnessFloor);

}  // namespace cadence
