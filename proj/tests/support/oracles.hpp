#pragma once

// Independent reference implementations shared by the unit suites and the
// acceptance binary. They favour enumeration over cleverness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <tuple>
#include <vector>

#include "cadence/renderer.hpp"
#include "cadence/scheduler.hpp"
#include "support/synth.hpp"

namespace oracle {

using namespace cadence;

inline bool inside(const IntensitySegment& s, double t) { return s.start <= t && t < s.end; }

inline std::optional<std::size_t> segment_of(const LabeledPartition& p, double t) {
  for (std::size_t i = 0; i < p.segments.size(); ++i)
    if (inside(p.segments[i], t)) return i;
  if (!p.segments.empty() && t == p.segments.back().end) return p.segments.size() - 1;
  return std::nullopt;
}

/// Loop choice by sorting every admissible cut on (-length, -score, origin).
inline std::optional<Cutpoint> loop_cut(const std::vector<Cutpoint>& cuts, double t, const IntensitySegment& s) {
  std::vector<Cutpoint> ok;
  for (const auto& c : cuts)
    if (c.origin > t && c.destination < t && inside(s, c.origin) && inside(s, c.destination)) ok.push_back(c);
  if (ok.empty()) return std::nullopt;
  std::stable_sort(ok.begin(), ok.end(), [](const Cutpoint& a, const Cutpoint& b) {
    return std::tuple(-(a.origin - a.destination), -a.score, a.origin) <
           std::tuple(-(b.origin - b.destination), -b.score, b.origin);
  });
  return ok.front();
}

/// Skip choice by sorting on (origin, -jump, -score).
inline std::optional<Cutpoint> skip_cut(const std::vector<Cutpoint>& cuts, double t, const IntensitySegment& s) {
  std::vector<Cutpoint> ok;
  for (const auto& c : cuts)
    if (c.origin > t && c.destination > c.origin && inside(s, c.origin) && inside(s, c.destination)) ok.push_back(c);
  if (ok.empty()) return std::nullopt;
  std::stable_sort(ok.begin(), ok.end(), [](const Cutpoint& a, const Cutpoint& b) {
    return std::tuple(a.origin, -(a.destination - a.origin), -a.score) <
           std::tuple(b.origin, -(b.destination - b.origin), -b.score);
  });
  return ok.front();
}

/// The four-scenario decision table, from an idle state (no armed jump, no
/// loops yet in this segment).
inline PlaybackState scenario_step(double t, Phase phase, const TrackMap& map, const SchedulerConfig& cfg) {
  PlaybackState out;
  out.t_current = t;
  const auto idx = segment_of(map.partition, t);
  if (!idx) return out;
  const auto& seg = map.partition.segments[*idx];
  const auto& cuts = map.cuts.intra_segment;
  auto arm = [&](PlaybackMode m, const Cutpoint& c) {
    out.mode = m;
    out.pending_cut = c;
    return out;
  };

  if (seg.label == Intensity::High) {
    if (phase == Phase::Work) {
      if (auto c = loop_cut(cuts, t, seg)) return arm(PlaybackMode::Loop, *c);
      return out;
    }
    if (auto c = skip_cut(cuts, t, seg)) return arm(PlaybackMode::Skip, *c);
    return out;
  }
  if (phase == Phase::Rest) return out;
  if (auto c = skip_cut(cuts, t, seg)) return arm(PlaybackMode::Skip, *c);
  if (seg.end - t <= cfg.filter_trigger_s) return out;

  // Next High segment after this one, wrapping to the first.
  std::optional<std::size_t> high;
  const auto n = map.partition.segments.size();
  for (std::size_t k = 1; k <= n && !high; ++k) {
    const auto j = (*idx + k) % n;
    if (map.partition.segments[j].label == Intensity::High) high = j;
  }
  if (!high) return out;
  const auto& beats = map.beats.beats;
  const double target = map.partition.segments[*high].start;
  std::optional<double> land;
  for (double b : beats)
    if (b >= target) {
      land = b;
      break;
    }
  if (!land || !inside(map.partition.segments[*high], *land)) return out;
  std::size_t after = 0;
  while (after < beats.size() && beats[after] <= t) ++after;
  const auto o = after + cfg.filter_sweep_beats;
  if (o >= beats.size() || !inside(seg, beats[o])) return out;
  return arm(PlaybackMode::FilterTransition, Cutpoint{beats[o], *land, 0.0});
}

/// Best single-cut duration for one segment. Ties keep no-cut, then the
/// higher score, then the earlier origin and destination.
inline double best_duration(const IntensitySegment& s, const std::vector<Cutpoint>& cuts, double target,
                            double min_span) {
  using Key = std::tuple<double, int, double, double, double>;
  Key best{std::abs(s.duration() - target), 0, 0.0, 0.0, 0.0};
  double dur = s.duration();
  for (const auto& c : cuts) {
    if (!inside(s, c.origin) || !inside(s, c.destination) || c.origin == c.destination) continue;
    const double head = c.origin - s.start, tail = s.end - c.destination;
    if (head < min_span || tail < min_span) continue;
    const Key k{std::abs(head + tail - target), 1, -c.score, c.origin, c.destination};
    if (k < best) {
      best = k;
      dur = head + tail;
    }
  }
  return dur;
}

struct RandomTrack {
  TrackMap map;
  std::vector<Cutpoint> all_cuts;
};

/// Alternating partition on a 0.5 s beat grid with random cuts, some of them
/// crossing segment boundaries.
inline RandomTrack random_track(std::mt19937_64& rng, int max_segments = 6, int max_cuts = 12) {
  std::uniform_int_distribution<int> nseg(1, max_segments), len(4, 120), ncut(0, max_cuts);
  std::bernoulli_distribution first_high(0.5);
  std::vector<IntensitySegment> segs;
  double t = 0.0;
  bool high = first_high(rng);
  const int n = nseg(rng);
  for (int i = 0; i < n; ++i, high = !high) {
    const double end = t + len(rng) * 0.5;
    segs.push_back({t, end, high ? Intensity::High : Intensity::Low, {}});
    t = end;
  }
  std::uniform_int_distribution<int> grid(0, static_cast<int>(t * 2) - 1);
  std::uniform_int_distribution<int> score(1, 4);
  RandomTrack out;
  const int m = ncut(rng);
  for (int i = 0; i < m; ++i) {
    const int a = grid(rng), b = grid(rng);
    if (a != b) out.all_cuts.push_back({a * 0.5, b * 0.5, score(rng) * 0.25});
  }
  out.map = synth::map_from(segs, out.all_cuts);
  return out;
}

/// Largest absolute step between neighbouring samples of [from, to).
inline double max_step(const AudioBuffer& a, std::int64_t from, std::int64_t to) {
  double worst = 0.0;
  from = std::max<std::int64_t>(from, 1);
  to = std::min<std::int64_t>(to, static_cast<std::int64_t>(a.frames()));
  for (const auto& ch : a.channels)
    for (auto i = from; i < to; ++i)
      worst = std::max(worst, std::abs(double(ch[std::size_t(i)]) - ch[std::size_t(i - 1)]));
  return worst;
}

/// Renders a single cutpoint junction [a0, o) -> [d, d1) and checks that the
/// steps around the splice stay within the source spans' own steps + 0.05.
struct ClickResult {
  double junction_step = 0.0;
  double source_step = 0.0;
  bool ok() const { return junction_step <= source_step + 0.05; }
};

inline ClickResult click_check(const AudioBuffer& src, const BeatGrid& grid, std::int64_t a0, std::int64_t o,
                               std::int64_t d, std::int64_t d1, const RenderConfig& cfg = {}) {
  const auto out = render_spans(src, grid, {{a0, o, Transition::Natural}, {d, d1, Transition::Cutpoint}}, cfg);
  const auto x = static_cast<std::int64_t>(std::llround(cfg.crossfade_ms * 1e-3 * src.sample_rate));
  const auto j = o - a0 - x;  // output frame where the crossfade starts
  ClickResult r;
  r.junction_step = max_step(out, j - x, j + 2 * x);
  r.source_step = std::max(max_step(src, a0, o), max_step(src, d, d1));
  return r;
}

}  // namespace oracle
