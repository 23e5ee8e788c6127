#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cadence/types.hpp"

namespace cadence {

/// Everything the analysis document can carry. Beats and sections come from
/// upstream tools; segments, tau and cutpoints are appended by `analyze`.
struct AnalysisDocument {
  std::string track_id;
  int sample_rate = 0;
  BeatGrid beats;
  SectionList sections;
  std::optional<LabeledPartition> partition;
  std::optional<std::vector<Cutpoint>> cutpoints;
};

/// One song: mixture, drum stem and analysis. Immutable after load.
struct TrackBundle {
  std::string track_id;
  AudioBuffer mixture;
  AudioBuffer drum_stem;
  BeatGrid beats;
  SectionList sections;
  std::optional<LabeledPartition> partition;
  std::optional<std::vector<Cutpoint>> cutpoints;

  double duration() const { return mixture.duration(); }
  AnalysisDocument document() const;
};

// File names inside a bundle directory.
inline constexpr const char* kMixtureFile = "mixture.wav";
inline constexpr const char* kDrumStemFile = "drums.wav";
inline constexpr const char* kAnalysisFile = "analysis.json";

/// Parse an analysis document. Structural problems raise InvalidBundle;
/// ordering problems raise BeatOrderViolation.
AnalysisDocument parse_analysis(const std::string& text);
/// Canonical serialization: sorted keys, two-space indent, trailing newline.
std::string serialize_analysis(const AnalysisDocument& doc);

/// Checks every TrackBundle invariant against the given duration.
void validate_bundle(const TrackBundle& bundle);

TrackBundle load_bundle(const std::filesystem::path& dir);
/// Writes analysis.json (and the two WAVs when `write_audio`) into `dir`.
void save_bundle(const TrackBundle& bundle, const std::filesystem::path& dir, bool write_audio = true);

/// Human-readable notes for beat gaps outside (0.2 s, 2.0 s). Not errors.
std::vector<std::string> beat_gap_warnings(const BeatGrid& grid);

/// 0-based indices m with start <= b_m < end.
std::vector<std::size_t> beats_in_section(const BeatGrid& grid, double start, double end);

}  // namespace cadence
