#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <utility>
#include <vector>

#include "cadence/loudness.hpp"
#include "cadence/scheduler.hpp"
#include "cadence/types.hpp"

namespace cadence {

struct RenderConfig {
  double crossfade_ms = 30.0;
  std::size_t filter_sweep_beats = 4;
  double filter_min_cutoff = 400.0;
  double fade_s = 3.0;

  void validate() const;
};

/// Gains (outgoing, incoming) at fraction x of an equal-power crossfade.
/// g_out^2 + g_in^2 == 1 and both equal sqrt(1/2) at x = 0.5.
std::pair<double, double> equal_power_gains(double x);

/// A schedule span in source samples, [start, end).
struct SampleSpan {
  std::int64_t start = 0;
  std::int64_t end = 0;
  Transition transition = Transition::Natural;
};

/// A junction the renderer crossed. `out_frame` is the output frame at the
/// centre of the crossfade (or the first frame of the new span for hard joins).
struct JunctionEvent {
  std::int64_t out_frame = 0;
  std::int64_t origin = 0;
  std::int64_t destination = 0;
  Transition transition = Transition::Natural;
};

/// Streaming span renderer shared by offline and live playback. Each span is
/// read through a cursor that applies low-pass sweeps and fades; junctions
/// marked cutpoint or filter overlap the last crossfade_frames() of one span
/// with the first crossfade_frames() of the next.
class SpliceRenderer {
 public:
  SpliceRenderer(const AudioBuffer& source, const BeatGrid& grid, const RenderConfig& cfg);

  std::int64_t crossfade_frames() const { return xfade_; }
  int sample_rate() const { return source_->sample_rate; }
  int num_channels() const { return source_->num_channels(); }
  std::int64_t source_frames() const { return static_cast<std::int64_t>(source_->frames()); }

  /// Begins with `first`; further spans come from queue() or splice().
  void start(const SampleSpan& first);
  /// Appends a span after the last known one.
  void queue(const SampleSpan& next);

  /// Live editing: ends the current span at `origin` and continues with a span
  /// [destination, source end) joined by `kind`. Returns false (and changes
  /// nothing) if the junction can no longer be rendered faithfully.
  bool splice(std::int64_t origin, std::int64_t destination, Transition kind);
  /// Earliest current position at which splice(origin, ..., kind) still works.
  std::int64_t splice_deadline(std::int64_t origin, Transition kind) const;

  /// Renders up to `frames` frames into `out` starting at `offset`. Returns the
  /// number produced; fewer than requested only once the schedule is exhausted.
  std::size_t render(std::vector<std::vector<float>>& out, std::size_t offset, std::size_t frames);

  /// Source sample at which the current span hands over to the next one.
  std::int64_t stop_sample() const;
  /// Crosses the pending junction if the current span has reached it, without
  /// producing output. Returns false when there is nothing to cross yet.
  bool step_junction();

  bool finished() const { return finished_; }
  bool in_crossfade() const { return incoming_.has_value(); }
  std::int64_t crossfade_remaining() const { return in_crossfade() ? xfade_ - xfade_pos_ : 0; }
  /// Source sample the current span reads next.
  std::int64_t position() const { return current_ ? current_->pos : 0; }
  /// Source sample being heard: the incoming span's position inside a crossfade.
  std::int64_t playhead() const { return incoming_ ? incoming_->pos : position(); }
  const SampleSpan& current_span() const { return current_->span; }
  bool has_queued() const { return !spans_.empty(); }
  const SampleSpan* next_span() const { return spans_.empty() ? nullptr : &spans_.front(); }
  /// True while the current span still runs to the end of the source.
  bool current_open() const { return spans_.empty() && current_ && current_->span.end == source_frames(); }
  std::int64_t frames_rendered() const { return out_frames_; }

  std::vector<JunctionEvent> take_events();

 private:
  struct SweepFilter {
    std::int64_t begin = 0;
    std::int64_t end = 0;
    bool downward = true;
    std::vector<Biquad> stages;  // two per channel
  };

  struct Cursor {
    SampleSpan span;
    std::int64_t pos = 0;
    std::optional<SweepFilter> pre;   // before an outgoing filter junction
    std::optional<SweepFilter> post;  // after an incoming filter junction
    bool fade_in = false;
    bool fade_out = false;
  };

  Cursor make_cursor(const SampleSpan& span) const;
  void arm_outgoing(Cursor& c, const SampleSpan& next) const;
  SweepFilter make_sweep(std::int64_t begin, std::int64_t end, bool downward) const;
  void update_sweep(SweepFilter& f, std::int64_t pos) const;
  void read_frame(Cursor& c, double* frame);
  bool joins_with_crossfade(const SampleSpan& next) const;
  std::int64_t beat_index_at_or_before(std::int64_t sample) const;

  const AudioBuffer* source_;
  std::vector<std::int64_t> beat_samples_;
  RenderConfig cfg_;
  std::int64_t xfade_ = 0;
  std::int64_t fade_frames_ = 0;
  double nyquist_ = 0.0;

  std::optional<Cursor> current_;
  std::optional<Cursor> incoming_;
  std::int64_t xfade_pos_ = 0;
  std::deque<SampleSpan> spans_;
  bool finished_ = true;
  std::int64_t out_frames_ = 0;
  std::vector<JunctionEvent> events_;
  std::vector<double> frame_a_, frame_b_;
};

/// Converts a seconds-based schedule to samples and checks it: spans inside
/// the source (SpanOutOfRange), natural joins contiguous and crossfaded spans
/// long enough (InvalidSchedule).
std::vector<SampleSpan> to_sample_spans(const AdaptationSchedule& schedule, const AudioBuffer& source,
                                        const RenderConfig& cfg);
void validate_sample_spans(const std::vector<SampleSpan>& spans, std::int64_t source_frames, std::int64_t xfade);

AudioBuffer render_spans(const AudioBuffer& source, const BeatGrid& grid, const std::vector<SampleSpan>& spans,
                         const RenderConfig& cfg = {});
AudioBuffer render_schedule(const AudioBuffer& source, const BeatGrid& grid, const AdaptationSchedule& schedule,
                            const RenderConfig& cfg = {});

/// Exact output length for a validated span list.
std::int64_t rendered_frames(const std::vector<SampleSpan>& spans, std::int64_t xfade);

}  // namespace cadence
