#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cadence {

/// Planar PCM audio. Every channel holds the same number of frames.
struct AudioBuffer {
  std::vector<std::vector<float>> channels;
  int sample_rate = 44100;

  AudioBuffer() = default;
  AudioBuffer(int num_channels, std::size_t frames, int rate)
      : channels(static_cast<std::size_t>(num_channels), std::vector<float>(frames, 0.0f)),
        sample_rate(rate) {}

  int num_channels() const { return static_cast<int>(channels.size()); }
  std::size_t frames() const { return channels.empty() ? 0 : channels.front().size(); }
  double duration() const { return sample_rate > 0 ? static_cast<double>(frames()) / sample_rate : 0.0; }

  /// Nearest-sample index for a timestamp in seconds.
  std::int64_t to_sample(double seconds) const {
    return static_cast<std::int64_t>(std::llround(seconds * sample_rate));
  }

  /// Throws InvalidAudio when channel lengths differ or the layout is unusable.
  void validate() const;
};

/// Strictly increasing beat timestamps in seconds.
struct BeatGrid {
  std::vector<double> beats;

  std::size_t size() const { return beats.size(); }
  double operator[](std::size_t i) const { return beats[i]; }

  /// Largest consecutive gap. Zero for fewer than two beats.
  double max_gap() const;
  /// Index of the first beat at or after `t`, or size() if none.
  std::size_t first_at_or_after(double t) const;
  /// Index of the first beat strictly after `t`, or size() if none.
  std::size_t first_after(double t) const;
  /// Index of the beat equal to `t` (exact match), if any.
  std::optional<std::size_t> index_of(double t) const;
};

enum class SectionLabel { Intro, Verse, Chorus, Instrumental, Bridge, Outro, Other };

SectionLabel parse_section_label(const std::string& name);
const char* to_string(SectionLabel label);

struct Section {
  double start = 0.0;
  SectionLabel label = SectionLabel::Other;
  /// Label as it appeared in the analysis document; kept for round-tripping.
  std::string name;
};

/// Section n spans [start_n, start_{n+1}); the last section ends at track end.
struct SectionList {
  std::vector<Section> sections;

  std::size_t size() const { return sections.size(); }
  const Section& operator[](std::size_t i) const { return sections[i]; }
  double end_of(std::size_t i, double track_end) const {
    return i + 1 < sections.size() ? sections[i + 1].start : track_end;
  }
};

enum class Intensity { Low, High };
const char* to_string(Intensity i);

struct IntensitySegment {
  double start = 0.0;
  double end = 0.0;
  Intensity label = Intensity::Low;
  std::vector<std::size_t> source_sections;

  double duration() const { return end - start; }
  bool contains(double t) const { return start <= t && t < end; }
};

struct Cutpoint {
  double origin = 0.0;
  double destination = 0.0;
  double score = 0.0;

  bool is_forward() const { return destination > origin; }
  bool operator==(const Cutpoint&) const = default;
};

struct IntensityConfig {
  double delta_db = 5.0;
  std::size_t max_high_run = 4;
  double loudness_floor = -70.0;

  void validate() const;
};

/// Ordered, tiling intensity segments plus the per-track threshold.
struct LabeledPartition {
  std::vector<IntensitySegment> segments;
  double tau = 0.0;

  /// Index of the segment containing t, clamped to the last segment at track end.
  std::optional<std::size_t> segment_at(double t) const;
  bool has_high() const;
};

struct CutpointSet {
  std::vector<Cutpoint> candidates;
  std::vector<Cutpoint> intra_segment;
};

}  // namespace cadence
