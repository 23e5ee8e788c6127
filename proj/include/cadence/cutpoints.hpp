#pragma once

#include <cstddef>
#include <vector>

#include "cadence/types.hpp"

namespace cadence {

inline constexpr std::size_t kChromaBins = 12;
inline constexpr std::size_t kMelBands = 20;
inline constexpr std::size_t kFeatureDims = kChromaBins + kMelBands;

struct FeatureConfig {
  std::size_t fft_size = 2048;
  std::size_t hop = 512;
  double chroma_min_hz = 55.0;
  double chroma_max_hz = 5000.0;
  double mel_min_hz = 40.0;
  double mel_max_hz = 8000.0;
  /// Energy per sample below which an interval counts as silent.
  double silence_energy = 1e-10;
};

/// One row per beat interval: chroma and log-mel halves, jointly L2-normalized.
struct BeatFeatureMatrix {
  std::size_t rows = 0;
  std::vector<float> values;  // rows * kFeatureDims, row-major
  std::vector<bool> silent;

  const float* row(std::size_t i) const { return values.data() + i * kFeatureDims; }
};

struct RecurrenceConfig {
  std::size_t k_neighbors = 8;
  /// Cells below this similarity never enter the mask.
  double min_similarity = 0.0;
};

/// Symmetric similarity with unit diagonal plus the mutual k-NN mask.
struct RecurrenceMatrix {
  std::size_t size = 0;
  std::vector<float> values;  // size * size
  std::vector<bool> mask;     // size * size

  float at(std::size_t i, std::size_t j) const { return values[i * size + j]; }
  bool masked(std::size_t i, std::size_t j) const { return mask[i * size + j]; }
};

struct CutpointConfig {
  FeatureConfig features;
  RecurrenceConfig recurrence;
  std::size_t min_run = 4;
  /// Jumps shorter than this many beats are dropped.
  std::size_t min_jump_beats = 2;
};

BeatFeatureMatrix beat_features(const AudioBuffer& mixture, const BeatGrid& grid, const FeatureConfig& cfg = {});

RecurrenceMatrix recurrence(const BeatFeatureMatrix& features, const RecurrenceConfig& cfg = {});

/// Every masked cell of an off-diagonal run of at least `min_run` cells
/// yields the jump b_{i+1} -> b_{j+1}, scored by the run's mean similarity.
std::vector<Cutpoint> detect_cutpoints(const RecurrenceMatrix& rec, const BeatGrid& grid, std::size_t min_run = 4,
                                       std::size_t min_jump_beats = 2);

/// Keeps cuts whose origin and destination share one segment [start, end).
CutpointSet filter_intra_segment(const std::vector<Cutpoint>& cuts, const LabeledPartition& partition);

/// Cuts of `cuts` that start and land inside segment `seg`.
std::vector<Cutpoint> cuts_in_segment(const std::vector<Cutpoint>& cuts, const IntensitySegment& seg);

}  // namespace cadence
