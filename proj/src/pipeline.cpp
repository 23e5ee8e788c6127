#include "cadence/pipeline.hpp"

#include "cadence/loudness.hpp"

namespace cadence {

TrackAnalysis analyze_track(const TrackBundle& bundle, const AnalysisConfig& cfg) {
  TrackAnalysis a;
  const double floor = cfg.intensity.loudness_floor;
  a.beat_loudness = beat_loudness(bundle.drum_stem, bundle.beats, floor);
  const auto sections = section_loudness(a.beat_loudness, bundle.beats, bundle.sections, bundle.duration(), floor);
  a.intensity = label_intensity(bundle.sections, sections, bundle.duration(), cfg.intensity);

  const auto features = beat_features(bundle.mixture, bundle.beats, cfg.cutpoints.features);
  if (features.rows >= 2) {
    const auto rec = recurrence(features, cfg.cutpoints.recurrence);
    const auto cuts = detect_cutpoints(rec, bundle.beats, cfg.cutpoints.min_run, cfg.cutpoints.min_jump_beats);
    a.cuts = filter_intra_segment(cuts, a.intensity.partition);
  }
  a.warnings = a.intensity.warnings;
  for (auto& w : beat_gap_warnings(bundle.beats)) a.warnings.push_back(std::move(w));
  return a;
}

TrackBundle with_analysis(TrackBundle bundle, const TrackAnalysis& analysis) {
  bundle.partition = analysis.intensity.partition;
  bundle.cutpoints = analysis.cuts.intra_segment;
  return bundle;
}

TrackMap track_map(const TrackBundle& bundle, const AnalysisConfig& cfg) {
  TrackMap map;
  map.beats = bundle.beats;
  map.duration = bundle.duration();
  if (bundle.partition && bundle.cutpoints) {
    map.partition = *bundle.partition;
    map.cuts = filter_intra_segment(*bundle.cutpoints, map.partition);
  } else {
    const auto a = analyze_track(bundle, cfg);
    map.partition = a.intensity.partition;
    map.cuts = a.cuts;
  }
  return map;
}

}  // namespace cadence
