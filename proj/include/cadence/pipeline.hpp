#pragma once

#include <string>
#include <vector>

#include "cadence/bundle.hpp"
#include "cadence/cutpoints.hpp"
#include "cadence/intensity.hpp"

namespace cadence {

struct AnalysisConfig {
  IntensityConfig intensity;
  CutpointConfig cutpoints;
};

struct TrackAnalysis {
  std::vector<double> beat_loudness;
  IntensityResult intensity;
  CutpointSet cuts;
  std::vector<std::string> warnings;
};

/// Loudness, intensity labels and cutpoints for one bundle.
TrackAnalysis analyze_track(const TrackBundle& bundle, const AnalysisConfig& cfg = {});

/// Copy of `bundle` with partition and intra-segment cutpoints filled in.
TrackBundle with_analysis(TrackBundle bundle, const TrackAnalysis& analysis);

/// Partition and intra-segment cuts, running the analysis only when the
/// bundle does not already carry them.
struct TrackMap {
  BeatGrid beats;
  LabeledPartition partition;
  CutpointSet cuts;
  double duration = 0.0;
};

TrackMap track_map(const TrackBundle& bundle, const AnalysisConfig& cfg = {});

}  // namespace cadence
