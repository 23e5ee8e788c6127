#pragma once

#include <string>
#include <vector>

#include "cadence/types.hpp"

namespace cadence {

/// True for the section labels allowed to become High (chorus, instrumental).
std::vector<bool> eligible_sections(const SectionList& sections);

/// tau = max(loudness) - delta. An empty input yields the loudness floor.
double intensity_threshold(const std::vector<double>& section_loudness, const IntensityConfig& cfg);

/// High iff eligible and strictly louder than tau.
std::vector<Intensity> label_sections(const std::vector<double>& section_loudness, const std::vector<bool>& eligible,
                                      const IntensityConfig& cfg);

/// While some maximal run of consecutive High sections is at least
/// cfg.max_high_run long, flip the quietest section of the first such run to
/// Low (ties go to the earliest section).
std::vector<Intensity> break_long_runs(std::vector<Intensity> labels, const std::vector<double>& section_loudness,
                                       const IntensityConfig& cfg);

/// Coalesces equal neighbours into segments tiling [0, track_end). Audio before
/// the first section start is treated as a Low intro.
LabeledPartition merge_partition(const SectionList& sections, const std::vector<Intensity>& labels, double track_end,
                                 double tau = 0.0);

struct IntensityResult {
  std::vector<double> section_loudness;
  std::vector<bool> eligible;
  std::vector<Intensity> labels;  // after run-breaking
  LabeledPartition partition;
  std::vector<std::string> warnings;
};

/// The full chain from per-section loudness to the labeled partition.
IntensityResult label_intensity(const SectionList& sections, const std::vector<double>& section_loudness,
                                double track_end, const IntensityConfig& cfg = {});

}  // namespace cadence
