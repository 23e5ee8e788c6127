#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cadence/pipeline.hpp"
#include "cadence/types.hpp"

namespace cadence {

enum class PlaybackMode { Unmodified, Loop, Skip, FilterTransition };
enum class Phase { Rest, Work };

const char* to_string(PlaybackMode mode);
const char* to_string(Phase phase);
Phase parse_phase(const std::string& text);

/// State of the playback machine. `t_current` is the source-time decision
/// point: cuts armed from this state start strictly after it.
struct PlaybackState {
  PlaybackMode mode = PlaybackMode::Unmodified;
  std::optional<Cutpoint> pending_cut;
  double t_current = 0.0;
  /// Loops executed since the playhead entered the current segment.
  std::size_t loops_in_segment = 0;

  bool operator==(const PlaybackState&) const = default;
};

struct WorkoutPhase {
  Phase phase = Phase::Rest;
  double since = 0.0;
};

struct SchedulerConfig {
  /// Remaining Low time (s) above which a Work phase triggers a filter jump.
  double filter_trigger_s = 8.0;
  /// Beats of low-pass sweep before a filter jump; sets how far ahead it lands.
  std::size_t filter_sweep_beats = 4;
  /// 0 means unlimited.
  std::size_t max_consecutive_loops = 0;
};

/// Longest loop (origin > t, destination < t) inside `segment`; ties go to
/// the higher score, then the earlier origin.
std::optional<Cutpoint> select_loop_cut(const CutpointSet& cuts, double t, const IntensitySegment& segment);

/// Earliest forward cut (origin > t, destination > origin) inside `segment`;
/// ties go to the longer jump, then the higher score.
std::optional<Cutpoint> select_skip_cut(const CutpointSet& cuts, double t, const IntensitySegment& segment);

struct FilterTrigger {
  enum class Kind { Jump, NotNeeded, NoHighSegment } kind = Kind::NotNeeded;
  /// Start of the High segment to land in, when kind == Jump.
  double jump_to = 0.0;
};

/// Decides whether Work in a Low segment warrants an audible filter jump.
FilterTrigger filter_trigger(const PlaybackState& state, const TrackMap& map, const SchedulerConfig& cfg = {});

/// One decision of the unguided state machine at state.t_current.
PlaybackState unguided_step(const PlaybackState& state, Phase phase, const TrackMap& map,
                            const SchedulerConfig& cfg = {});

// ---------------------------------------------------------------------------
// Schedules

enum class Transition { Natural, Cutpoint, Filter, FadeIn, FadeOut };

const char* to_string(Transition t);
Transition parse_transition(const std::string& text);

/// A source-time span and how it joins the span before it.
struct ScheduleSpan {
  double src_start = 0.0;
  double src_end = 0.0;
  Transition transition = Transition::Natural;

  double length() const { return src_end - src_start; }
  bool operator==(const ScheduleSpan&) const = default;
};

struct AdaptationSchedule {
  std::vector<ScheduleSpan> spans;

  double source_duration() const;
  bool operator==(const AdaptationSchedule&) const = default;
};

/// {"spans": [{"src_start", "src_end", "transition"}]}
std::string schedule_to_json(const AdaptationSchedule& schedule);
AdaptationSchedule schedule_from_json(const std::string& text);

struct GuidedPlan {
  double work_s = 40.0;
  double rest_s = 30.0;
  /// Shortest span a cut may leave on either side of the jump.
  double min_span_s = 0.25;
  /// Length of the fade_in / fade_out spans.
  double fade_s = 3.0;

  void validate() const;
};

enum class CutKind { None, Loop, Skip };

/// Planner decision for one intensity segment.
struct SegmentPlan {
  std::size_t segment = 0;
  Intensity label = Intensity::Low;
  double target = 0.0;
  double natural = 0.0;
  double achieved = 0.0;
  CutKind kind = CutKind::None;
  std::optional<Cutpoint> cut;
};

struct GuidedSchedule {
  AdaptationSchedule schedule;
  std::vector<SegmentPlan> segments;
};

/// Adapted duration of `segment` if `cut` is taken, or nullopt when the cut
/// leaves a span shorter than plan.min_span_s.
std::optional<double> adapted_duration(const IntensitySegment& segment, const Cutpoint& cut, const GuidedPlan& plan);

/// High segments aim at work_s, Low at rest_s; each segment takes the single
/// cut (or none) that lands closest to its target.
GuidedSchedule guided_plan(const LabeledPartition& partition, const CutpointSet& cuts, const GuidedPlan& plan);

struct PlaylistEntry {
  std::string track_id;
  AdaptationSchedule schedule;
};

/// Plans tracks in order until `work_intervals` High segments are covered; the
/// next song's intro serves as the rest before its first High segment.
std::vector<PlaylistEntry> guided_playlist(const std::vector<std::pair<std::string, TrackMap>>& tracks,
                                           const GuidedPlan& plan, std::size_t work_intervals);

}  // namespace cadence
