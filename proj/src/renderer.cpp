#include "cadence/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cadence/error.hpp"

namespace cadence {

namespace {

constexpr std::int64_t kSweepUpdateFrames = 32;
constexpr std::int64_t kSweepPrerollFrames = 256;
constexpr double kButterworthQ = 0.7071067811865476;

void set_lowpass(Biquad& f, double cutoff, double sample_rate) {
  const double w0 = 2.0 * std::numbers::pi * cutoff / sample_rate;
  const double cosw = std::cos(w0);
  const double alpha = std::sin(w0) / (2.0 * kButterworthQ);
  const double a0 = 1.0 + alpha;
  f.b0 = (1.0 - cosw) / 2.0 / a0;
  f.b1 = (1.0 - cosw) / a0;
  f.b2 = (1.0 - cosw) / 2.0 / a0;
  f.a1 = -2.0 * cosw / a0;
  f.a2 = (1.0 - alpha) / a0;
}

bool crossfaded(Transition t) { return t == Transition::Cutpoint || t == Transition::Filter; }

}  // namespace

void RenderConfig::validate() const {
  if (crossfade_ms < 0.0) throw Error(ErrorCode::InvalidArgument, "crossfade_ms must be >= 0", "crossfade_ms");
  if (filter_sweep_beats < 1)
    throw Error(ErrorCode::InvalidArgument, "filter sweep needs at least one beat", "filter_sweep_beats");
  if (!(filter_min_cutoff > 0.0))
    throw Error(ErrorCode::InvalidArgument, "filter_min_cutoff must be positive", "filter_min_cutoff");
  if (fade_s < 0.0) throw Error(ErrorCode::InvalidArgument, "fade_s must be >= 0", "fade_s");
}

std::pair<double, double> equal_power_gains(double x) {
  const double theta = std::numbers::pi / 2.0 * std::clamp(x, 0.0, 1.0);
  return {std::cos(theta), std::sin(theta)};
}

SpliceRenderer::SpliceRenderer(const AudioBuffer& source, const BeatGrid& grid, const RenderConfig& cfg)
    : source_(&source), cfg_(cfg) {
  cfg_.validate();
  source.validate();
  xfade_ = static_cast<std::int64_t>(std::llround(cfg.crossfade_ms * 1e-3 * source.sample_rate));
  fade_frames_ = static_cast<std::int64_t>(std::llround(cfg.fade_s * source.sample_rate));
  nyquist_ = source.sample_rate / 2.0;
  beat_samples_.reserve(grid.size());
  for (const double b : grid.beats) beat_samples_.push_back(source.to_sample(b));
  frame_a_.resize(static_cast<std::size_t>(source.num_channels()));
  frame_b_.resize(static_cast<std::size_t>(source.num_channels()));
}

std::int64_t SpliceRenderer::beat_index_at_or_before(std::int64_t sample) const {
  const auto it = std::upper_bound(beat_samples_.begin(), beat_samples_.end(), sample);
  return static_cast<std::int64_t>(it - beat_samples_.begin()) - 1;
}

bool SpliceRenderer::joins_with_crossfade(const SampleSpan& next) const {
  return xfade_ > 0 && crossfaded(next.transition);
}

SpliceRenderer::SweepFilter SpliceRenderer::make_sweep(std::int64_t begin, std::int64_t end, bool downward) const {
  SweepFilter f;
  f.begin = begin;
  f.end = end;
  f.downward = downward;
  f.stages.resize(static_cast<std::size_t>(2 * source_->num_channels()));
  return f;
}

void SpliceRenderer::update_sweep(SweepFilter& f, std::int64_t pos) const {
  const double length = static_cast<double>(std::max<std::int64_t>(1, f.end - f.begin));
  const double frac = std::clamp(static_cast<double>(pos - f.begin) / length, 0.0, 1.0);
  const double lo = cfg_.filter_min_cutoff;
  double cutoff = f.downward ? nyquist_ * std::pow(lo / nyquist_, frac) : lo * std::pow(nyquist_ / lo, frac);
  cutoff = std::min(cutoff, 0.999 * nyquist_);
  for (auto& stage : f.stages) set_lowpass(stage, cutoff, source_->sample_rate);
}

SpliceRenderer::Cursor SpliceRenderer::make_cursor(const SampleSpan& span) const {
  Cursor c;
  c.span = span;
  c.pos = span.start;
  c.fade_in = span.transition == Transition::FadeIn;
  c.fade_out = span.transition == Transition::FadeOut;
  if (span.transition == Transition::Filter && cfg_.filter_min_cutoff < nyquist_) {
    const auto idx = beat_index_at_or_before(span.start);
    const auto last = static_cast<std::int64_t>(beat_samples_.size()) - 1;
    const auto stop_idx = std::min(idx + static_cast<std::int64_t>(cfg_.filter_sweep_beats), last);
    std::int64_t end = stop_idx > idx && stop_idx >= 0 ? beat_samples_[static_cast<std::size_t>(stop_idx)]
                                                       : source_frames();
    if (end <= span.start) end = source_frames();
    c.post = make_sweep(span.start, end, false);
  }
  return c;
}

void SpliceRenderer::arm_outgoing(Cursor& c, const SampleSpan& next) const {
  if (next.transition != Transition::Filter || !(cfg_.filter_min_cutoff < nyquist_)) return;
  const auto idx = beat_index_at_or_before(c.span.end);
  const auto first = idx - static_cast<std::int64_t>(cfg_.filter_sweep_beats);
  std::int64_t begin = first >= 0 ? beat_samples_[static_cast<std::size_t>(first)] : 0;
  if (begin >= c.span.end) begin = c.span.start;
  c.pre = make_sweep(begin, c.span.end, true);
}

void SpliceRenderer::start(const SampleSpan& first) {
  spans_.clear();
  incoming_.reset();
  events_.clear();
  out_frames_ = 0;
  xfade_pos_ = 0;
  current_ = make_cursor(first);
  finished_ = false;
}

void SpliceRenderer::queue(const SampleSpan& next) {
  if (spans_.empty()) {
    if (incoming_) {
      arm_outgoing(*incoming_, next);
    } else if (current_) {
      arm_outgoing(*current_, next);
    }
  }
  spans_.push_back(next);
}

std::int64_t SpliceRenderer::splice_deadline(std::int64_t origin, Transition kind) const {
  std::int64_t deadline = origin - (crossfaded(kind) ? xfade_ : 0);
  if (kind == Transition::Filter && cfg_.filter_min_cutoff < nyquist_ && current_) {
    const auto first = beat_index_at_or_before(origin) - static_cast<std::int64_t>(cfg_.filter_sweep_beats);
    std::int64_t begin = first >= 0 ? beat_samples_[static_cast<std::size_t>(first)] : 0;
    if (begin >= origin) begin = current_->span.start;
    deadline = std::min(deadline, std::max(begin, current_->span.start));
  }
  return deadline;
}

bool SpliceRenderer::splice(std::int64_t origin, std::int64_t destination, Transition kind) {
  if (!current_ || finished_ || incoming_ || !spans_.empty()) return false;
  auto& cur = *current_;
  if (origin <= cur.span.start || origin > cur.span.end) return false;
  if (cur.pos > splice_deadline(origin, kind)) return false;
  const std::int64_t tail_needed = crossfaded(kind) ? 2 * xfade_ : 1;
  if (destination < 0 || source_frames() - destination < std::max<std::int64_t>(tail_needed, 1)) return false;
  if (crossfaded(kind) && origin - cur.span.start < xfade_) return false;
  cur.span.end = origin;
  queue({destination, source_frames(), kind});
  return true;
}

void SpliceRenderer::read_frame(Cursor& c, double* frame) {
  const auto pos = c.pos;
  const auto idx = static_cast<std::size_t>(pos);
  const int channels = source_->num_channels();

  auto run_sweep = [&](SweepFilter& f) {
    if (pos < f.begin || pos >= f.end) return false;
    const bool first = pos == c.span.start || pos == f.begin;
    if (first || (pos - f.begin) % kSweepUpdateFrames == 0) update_sweep(f, pos);
    if (first) {
      for (int ch = 0; ch < channels; ++ch) {
        auto& s1 = f.stages[static_cast<std::size_t>(2 * ch)];
        auto& s2 = f.stages[static_cast<std::size_t>(2 * ch + 1)];
        s1.reset();
        s2.reset();
        const auto& src = source_->channels[static_cast<std::size_t>(ch)];
        for (auto p = std::max<std::int64_t>(0, pos - kSweepPrerollFrames); p < pos; ++p)
          s2.process(s1.process(src[static_cast<std::size_t>(p)]));
      }
    }
    return true;
  };

  const bool post = c.post && run_sweep(*c.post);
  const bool pre = c.pre && run_sweep(*c.pre);

  double gain = 1.0;
  bool scaled = false;
  const std::int64_t span_len = c.span.end - c.span.start;
  const std::int64_t fade = std::min(fade_frames_, span_len);
  if (c.fade_in && fade > 0 && pos - c.span.start < fade) {
    gain *= static_cast<double>(pos - c.span.start) / static_cast<double>(fade);
    scaled = true;
  }
  if (c.fade_out && fade > 0 && c.span.end - pos <= fade) {
    gain *= static_cast<double>(c.span.end - 1 - pos) / static_cast<double>(fade);
    scaled = true;
  }

  for (int ch = 0; ch < channels; ++ch) {
    double x = source_->channels[static_cast<std::size_t>(ch)][idx];
    if (post) {
      x = c.post->stages[static_cast<std::size_t>(2 * ch + 1)].process(
          c.post->stages[static_cast<std::size_t>(2 * ch)].process(x));
    }
    if (pre) {
      x = c.pre->stages[static_cast<std::size_t>(2 * ch + 1)].process(
          c.pre->stages[static_cast<std::size_t>(2 * ch)].process(x));
    }
    if (scaled) x *= gain;
    frame[ch] = x;
  }
  ++c.pos;
}

std::size_t SpliceRenderer::render(std::vector<std::vector<float>>& out, std::size_t offset, std::size_t frames) {
  const int channels = source_->num_channels();
  std::size_t produced = 0;
  while (produced < frames && !finished_) {
    if (incoming_) {
      const auto n = std::min<std::int64_t>(static_cast<std::int64_t>(frames - produced), xfade_ - xfade_pos_);
      for (std::int64_t k = 0; k < n; ++k) {
        read_frame(*current_, frame_a_.data());
        read_frame(*incoming_, frame_b_.data());
        const auto [g_out, g_in] =
            equal_power_gains((static_cast<double>(xfade_pos_ + k) + 0.5) / static_cast<double>(xfade_));
        for (int ch = 0; ch < channels; ++ch) {
          out[static_cast<std::size_t>(ch)][offset + produced] =
              static_cast<float>(g_out * frame_a_[static_cast<std::size_t>(ch)] +
                                 g_in * frame_b_[static_cast<std::size_t>(ch)]);
        }
        ++produced;
        ++out_frames_;
      }
      xfade_pos_ += n;
      if (xfade_pos_ == xfade_) {
        current_ = std::move(incoming_);
        incoming_.reset();
        xfade_pos_ = 0;
      }
      continue;
    }

    auto& cur = *current_;
    const std::int64_t stop = stop_sample();
    if (cur.pos >= stop) {
      if (!step_junction()) {
        finished_ = true;
        break;
      }
      continue;
    }

    const auto n = std::min<std::int64_t>(static_cast<std::int64_t>(frames - produced), stop - cur.pos);
    for (std::int64_t k = 0; k < n; ++k) {
      read_frame(cur, frame_a_.data());
      for (int ch = 0; ch < channels; ++ch)
        out[static_cast<std::size_t>(ch)][offset + produced] = static_cast<float>(frame_a_[static_cast<std::size_t>(ch)]);
      ++produced;
      ++out_frames_;
    }
  }
  return produced;
}

std::int64_t SpliceRenderer::stop_sample() const {
  const auto& cur = *current_;
  const bool xf = !spans_.empty() && joins_with_crossfade(spans_.front());
  return xf ? cur.span.end - xfade_ : cur.span.end;
}

bool SpliceRenderer::step_junction() {
  if (!current_ || finished_ || incoming_ || spans_.empty()) return false;
  auto& cur = *current_;
  if (cur.pos < stop_sample()) return false;
  const bool xf = joins_with_crossfade(spans_.front());
  const SampleSpan next = spans_.front();
  spans_.pop_front();
  Cursor c = make_cursor(next);
  if (!spans_.empty()) arm_outgoing(c, spans_.front());
  if (xf) {
    events_.push_back({out_frames_ + xfade_ / 2, cur.span.end, next.start, next.transition});
    incoming_ = std::move(c);
    xfade_pos_ = 0;
  } else {
    events_.push_back({out_frames_, cur.span.end, next.start, next.transition});
    current_ = std::move(c);
  }
  return true;
}

std::vector<JunctionEvent> SpliceRenderer::take_events() {
  std::vector<JunctionEvent> out;
  out.swap(events_);
  return out;
}

void validate_sample_spans(const std::vector<SampleSpan>& spans, std::int64_t source_frames, std::int64_t xfade) {
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& s = spans[i];
    if (s.start < 0 || s.end > source_frames)
      throw Error(ErrorCode::SpanOutOfRange, "span " + std::to_string(i) + " lies outside the source",
                  "spans[" + std::to_string(i) + "]");
    if (s.end <= s.start)
      throw Error(ErrorCode::InvalidSchedule, "span " + std::to_string(i) + " is empty",
                  "spans[" + std::to_string(i) + "]");
    const bool xf_in = i > 0 && xfade > 0 && crossfaded(s.transition);
    const bool xf_out = i + 1 < spans.size() && xfade > 0 && crossfaded(spans[i + 1].transition);
    const std::int64_t needed = (xf_in ? xfade : 0) + (xf_out ? xfade : 0);
    if (s.end - s.start < needed)
      throw Error(ErrorCode::InvalidSchedule, "span " + std::to_string(i) + " is shorter than its crossfades",
                  "spans[" + std::to_string(i) + "]");
    if (i > 0 && !crossfaded(s.transition) && s.start != spans[i - 1].end)
      throw Error(ErrorCode::InvalidSchedule,
                  "span " + std::to_string(i) + " is not contiguous with its predecessor but has no transition",
                  "spans[" + std::to_string(i) + "]");
  }
}

std::vector<SampleSpan> to_sample_spans(const AdaptationSchedule& schedule, const AudioBuffer& source,
                                        const RenderConfig& cfg) {
  std::vector<SampleSpan> out;
  out.reserve(schedule.spans.size());
  for (const auto& s : schedule.spans) out.push_back({source.to_sample(s.src_start), source.to_sample(s.src_end), s.transition});
  const auto xfade = static_cast<std::int64_t>(std::llround(cfg.crossfade_ms * 1e-3 * source.sample_rate));
  validate_sample_spans(out, static_cast<std::int64_t>(source.frames()), xfade);
  return out;
}

std::int64_t rendered_frames(const std::vector<SampleSpan>& spans, std::int64_t xfade) {
  std::int64_t total = 0;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    total += spans[i].end - spans[i].start;
    if (i > 0 && xfade > 0 && crossfaded(spans[i].transition)) total -= xfade;
  }
  return total;
}

AudioBuffer render_spans(const AudioBuffer& source, const BeatGrid& grid, const std::vector<SampleSpan>& spans,
                         const RenderConfig& cfg) {
  SpliceRenderer r(source, grid, cfg);
  validate_sample_spans(spans, r.source_frames(), r.crossfade_frames());
  const auto total = rendered_frames(spans, r.crossfade_frames());
  AudioBuffer out(source.num_channels(), static_cast<std::size_t>(std::max<std::int64_t>(total, 0)), source.sample_rate);
  if (spans.empty()) return out;
  r.start(spans.front());
  for (std::size_t i = 1; i < spans.size(); ++i) r.queue(spans[i]);
  const auto produced = r.render(out.channels, 0, out.frames());
  if (static_cast<std::int64_t>(produced) != total)
    throw Error(ErrorCode::InvalidSchedule, "renderer produced an unexpected number of frames");
  return out;
}

AudioBuffer render_schedule(const AudioBuffer& source, const BeatGrid& grid, const AdaptationSchedule& schedule,
                            const RenderConfig& cfg) {
  return render_spans(source, grid, to_sample_spans(schedule, source, cfg), cfg);
}

}  // namespace cadence
