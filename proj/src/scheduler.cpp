#include "cadence/scheduler.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "cadence/cutpoints.hpp"
#include "cadence/error.hpp"

namespace cadence {

const char* to_string(PlaybackMode mode) {
  switch (mode) {
    case PlaybackMode::Unmodified: return "Unmodified";
    case PlaybackMode::Loop: return "Loop";
    case PlaybackMode::Skip: return "Skip";
    case PlaybackMode::FilterTransition: return "FilterTransition";
  }
  return "Unmodified";
}

const char* to_string(Phase phase) { return phase == Phase::Work ? "Work" : "Rest"; }

Phase parse_phase(const std::string& text) {
  if (text == "Work" || text == "work") return Phase::Work;
  if (text == "Rest" || text == "rest") return Phase::Rest;
  throw Error(ErrorCode::InvalidArgument, "phase must be Work or Rest, got '" + text + "'", "value");
}

std::optional<Cutpoint> select_loop_cut(const CutpointSet& cuts, double t, const IntensitySegment& segment) {
  std::optional<Cutpoint> best;
  for (const auto& c : cuts.intra_segment) {
    if (!(c.origin > t && c.destination < t)) continue;
    if (!segment.contains(c.origin) || !segment.contains(c.destination)) continue;
    if (!best) {
      best = c;
      continue;
    }
    const double len = c.origin - c.destination;
    const double best_len = best->origin - best->destination;
    if (len > best_len || (len == best_len && (c.score > best->score ||
                                               (c.score == best->score && c.origin < best->origin)))) {
      best = c;
    }
  }
  return best;
}

std::optional<Cutpoint> select_skip_cut(const CutpointSet& cuts, double t, const IntensitySegment& segment) {
  std::optional<Cutpoint> best;
  for (const auto& c : cuts.intra_segment) {
    if (!(c.origin > t && c.destination > c.origin)) continue;
    if (!segment.contains(c.origin) || !segment.contains(c.destination)) continue;
    if (!best) {
      best = c;
      continue;
    }
    const double jump = c.destination - c.origin;
    const double best_jump = best->destination - best->origin;
    if (c.origin < best->origin ||
        (c.origin == best->origin && (jump > best_jump || (jump == best_jump && c.score > best->score)))) {
      best = c;
    }
  }
  return best;
}

namespace {

std::optional<std::size_t> next_high_segment(const LabeledPartition& p, std::size_t from) {
  for (std::size_t i = from + 1; i < p.segments.size(); ++i)
    if (p.segments[i].label == Intensity::High) return i;
  for (std::size_t i = 0; i <= from && i < p.segments.size(); ++i)
    if (p.segments[i].label == Intensity::High) return i;
  return std::nullopt;
}

PlaybackState unmodified(PlaybackState s) {
  s.mode = PlaybackMode::Unmodified;
  s.pending_cut.reset();
  return s;
}

}  // namespace

FilterTrigger filter_trigger(const PlaybackState& state, const TrackMap& map, const SchedulerConfig& cfg) {
  const auto& p = map.partition;
  if (!p.has_high()) return {FilterTrigger::Kind::NoHighSegment, 0.0};
  const auto idx = p.segment_at(state.t_current);
  if (!idx || p.segments[*idx].label != Intensity::Low) return {};
  const auto& seg = p.segments[*idx];
  if (select_skip_cut(map.cuts, state.t_current, seg)) return {};
  if (seg.end - state.t_current <= cfg.filter_trigger_s) return {};
  const auto target = next_high_segment(p, *idx);
  return {FilterTrigger::Kind::Jump, p.segments[*target].start};
}

PlaybackState unguided_step(const PlaybackState& state, Phase phase, const TrackMap& map,
                            const SchedulerConfig& cfg) {
  const double t = state.t_current;
  const auto idx = map.partition.segment_at(t);
  if (!idx) return unmodified(state);
  const auto& seg = map.partition.segments[*idx];
  PlaybackState out = state;

  if (seg.label == Intensity::Low) {
    if (phase == Phase::Rest) return unmodified(state);

    // An armed filter jump keeps its origin; re-arming would push the sweep
    // back every time the machine is consulted.
    if (state.mode == PlaybackMode::FilterTransition && state.pending_cut && state.pending_cut->origin > t &&
        seg.contains(state.pending_cut->origin)) {
      return state;
    }
    if (auto skip = select_skip_cut(map.cuts, t, seg)) {
      out.mode = PlaybackMode::Skip;
      out.pending_cut = skip;
      return out;
    }
    const auto trigger = filter_trigger(state, map, cfg);
    if (trigger.kind != FilterTrigger::Kind::Jump) return unmodified(state);

    const auto& beats = map.beats;
    const auto land = beats.first_at_or_after(trigger.jump_to);
    const auto target_seg = map.partition.segment_at(trigger.jump_to);
    if (land >= beats.size() || !target_seg || !map.partition.segments[*target_seg].contains(beats[land]))
      return unmodified(state);

    // The sweep covers filter_sweep_beats whole beats after the decision
    // point; if they do not fit in this segment the jump is not taken.
    const auto origin = beats.first_after(t) + cfg.filter_sweep_beats;
    if (origin >= beats.size() || !seg.contains(beats[origin])) return unmodified(state);

    out.mode = PlaybackMode::FilterTransition;
    out.pending_cut = Cutpoint{beats[origin], beats[land], 0.0};
    return out;
  }

  if (phase == Phase::Work) {
    if (cfg.max_consecutive_loops > 0 && state.loops_in_segment >= cfg.max_consecutive_loops)
      return unmodified(state);
    if (auto loop = select_loop_cut(map.cuts, t, seg)) {
      out.mode = PlaybackMode::Loop;
      out.pending_cut = loop;
      return out;
    }
    return unmodified(state);
  }

  if (auto skip = select_skip_cut(map.cuts, t, seg)) {
    out.mode = PlaybackMode::Skip;
    out.pending_cut = skip;
    return out;
  }
  return unmodified(state);
}

// ---------------------------------------------------------------------------

const char* to_string(Transition t) {
  switch (t) {
    case Transition::Natural: return "natural";
    case Transition::Cutpoint: return "cutpoint";
    case Transition::Filter: return "filter";
    case Transition::FadeIn: return "fade_in";
    case Transition::FadeOut: return "fade_out";
  }
  return "natural";
}

Transition parse_transition(const std::string& text) {
  if (text == "natural") return Transition::Natural;
  if (text == "cutpoint") return Transition::Cutpoint;
  if (text == "filter") return Transition::Filter;
  if (text == "fade_in") return Transition::FadeIn;
  if (text == "fade_out") return Transition::FadeOut;
  throw Error(ErrorCode::InvalidSchedule, "unknown transition '" + text + "'", "transition");
}

double AdaptationSchedule::source_duration() const {
  double total = 0.0;
  for (const auto& s : spans) total += s.length();
  return total;
}

std::string schedule_to_json(const AdaptationSchedule& schedule) {
  nlohmann::json j;
  j["spans"] = nlohmann::json::array();
  for (const auto& s : schedule.spans) {
    j["spans"].push_back({{"src_start", s.src_start}, {"src_end", s.src_end}, {"transition", to_string(s.transition)}});
  }
  return j.dump(2) + "\n";
}

AdaptationSchedule schedule_from_json(const std::string& text) {
  AdaptationSchedule out;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& s : j.at("spans")) {
      out.spans.push_back({s.at("src_start").get<double>(), s.at("src_end").get<double>(),
                           parse_transition(s.at("transition").get<std::string>())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSchedule, std::string("malformed schedule: ") + e.what(), "spans");
  }
  for (const auto& s : out.spans) {
    if (!(s.src_start < s.src_end)) throw Error(ErrorCode::InvalidSchedule, "span start must precede its end", "spans");
  }
  return out;
}

void GuidedPlan::validate() const {
  if (!(work_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "work duration must be positive", "work_s");
  if (!(rest_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "rest duration must be positive", "rest_s");
}

std::optional<double> adapted_duration(const IntensitySegment& segment, const Cutpoint& cut, const GuidedPlan& plan) {
  const double head = cut.origin - segment.start;
  const double tail = segment.end - cut.destination;
  if (head < plan.min_span_s || tail < plan.min_span_s) return std::nullopt;
  return head + tail;
}

namespace {

struct PlannedSegment {
  SegmentPlan plan;
  std::vector<ScheduleSpan> spans;
};

PlannedSegment plan_segment(const LabeledPartition& partition, std::size_t idx, const CutpointSet& cuts,
                            const GuidedPlan& plan) {
  const auto& seg = partition.segments[idx];
  PlannedSegment out;
  auto& sp = out.plan;
  sp.segment = idx;
  sp.label = seg.label;
  sp.target = seg.label == Intensity::High ? plan.work_s : plan.rest_s;
  sp.natural = seg.duration();
  sp.achieved = sp.natural;
  double best_err = std::abs(sp.natural - sp.target);

  for (const auto& c : cuts_in_segment(cuts.intra_segment, seg)) {
    if (c.origin == c.destination) continue;
    const auto d = adapted_duration(seg, c, plan);
    if (!d) continue;
    const double err = std::abs(*d - sp.target);
    bool better = err < best_err;
    if (!better && err == best_err && sp.cut) {
      better = c.score > sp.cut->score ||
               (c.score == sp.cut->score && (c.origin < sp.cut->origin ||
                                             (c.origin == sp.cut->origin && c.destination < sp.cut->destination)));
    }
    if (better) {
      best_err = err;
      sp.achieved = *d;
      sp.cut = c;
      sp.kind = c.destination < c.origin ? CutKind::Loop : CutKind::Skip;
    }
  }

  if (sp.cut) {
    out.spans.push_back({seg.start, sp.cut->origin, Transition::Natural});
    out.spans.push_back({sp.cut->destination, seg.end, Transition::Cutpoint});
  } else {
    out.spans.push_back({seg.start, seg.end, Transition::Natural});
  }
  return out;
}

/// Marks the first span fade_in and splits a fade_out span off the last one.
void apply_fades(std::vector<ScheduleSpan>& spans, double fade_s) {
  if (spans.empty()) return;
  spans.front().transition = Transition::FadeIn;
  auto& last = spans.back();
  if (last.transition == Transition::Natural && spans.size() > 1) {
    last.transition = Transition::FadeOut;
    return;
  }
  const double split = std::max(last.src_start + last.length() / 2.0, last.src_end - fade_s);
  const ScheduleSpan tail{split, last.src_end, Transition::FadeOut};
  last.src_end = split;
  spans.push_back(tail);
}

}  // namespace

GuidedSchedule guided_plan(const LabeledPartition& partition, const CutpointSet& cuts, const GuidedPlan& plan) {
  plan.validate();
  if (partition.segments.empty()) throw Error(ErrorCode::EmptyPartition, "partition has no segments");
  GuidedSchedule out;
  for (std::size_t i = 0; i < partition.segments.size(); ++i) {
    auto ps = plan_segment(partition, i, cuts, plan);
    out.segments.push_back(ps.plan);
    for (auto& s : ps.spans) out.schedule.spans.push_back(s);
  }
  apply_fades(out.schedule.spans, plan.fade_s);
  return out;
}

std::vector<PlaylistEntry> guided_playlist(const std::vector<std::pair<std::string, TrackMap>>& tracks,
                                           const GuidedPlan& plan, std::size_t work_intervals) {
  plan.validate();
  std::vector<PlaylistEntry> out;
  std::size_t covered = 0;
  for (const auto& [id, map] : tracks) {
    if (covered >= work_intervals) break;
    const auto& segs = map.partition.segments;
    if (segs.empty()) continue;
    PlaylistEntry entry{id, {}};
    for (std::size_t i = 0; i < segs.size(); ++i) {
      auto ps = plan_segment(map.partition, i, map.cuts, plan);
      for (auto& s : ps.spans) entry.schedule.spans.push_back(s);
      if (segs[i].label == Intensity::High && ++covered == work_intervals) {
        // Close with the rest segment that follows, if the song has one.
        if (i + 1 < segs.size()) {
          for (auto& s : plan_segment(map.partition, i + 1, map.cuts, plan).spans) entry.schedule.spans.push_back(s);
        }
        break;
      }
    }
    apply_fades(entry.schedule.spans, plan.fade_s);
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace cadence
