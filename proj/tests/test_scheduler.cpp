#include <doctest.h>

#include <random>

#include "cadence/error.hpp"
#include "cadence/scheduler.hpp"
#include "support/oracles.hpp"
#include "support/synth.hpp"

using namespace cadence;

namespace {

constexpr auto H = Intensity::High;
constexpr auto L = Intensity::Low;

PlaybackState at(double t) {
  PlaybackState s;
  s.t_current = t;
  return s;
}

CutpointSet intra(std::vector<Cutpoint> cuts) {
  CutpointSet s;
  s.candidates = cuts;
  s.intra_segment = std::move(cuts);
  return s;
}

bool same_cut(const std::optional<Cutpoint>& a, const std::optional<Cutpoint>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || (a->origin == b->origin && a->destination == b->destination);
}

}  // namespace

TEST_CASE("loop and skip selection examples") {
  const IntensitySegment seg{0.0, 30.0, H, {}};
  const auto cuts = intra({{12, 4, 0.9}, {15, 20, 0.9}});
  const auto loop = select_loop_cut(cuts, 10.0, seg);
  REQUIRE(loop);
  CHECK(loop->origin == 12.0);
  CHECK_FALSE(select_loop_cut(intra({{15, 20, 0.9}}), 10.0, seg));
  const auto skip = select_skip_cut(cuts, 10.0, seg);
  REQUIRE(skip);
  CHECK(skip->destination == 20.0);
  CHECK_FALSE(select_skip_cut(cuts, 16.0, seg));
}

TEST_CASE("selection tie-breaks") {
  const IntensitySegment seg{0.0, 40.0, H, {}};
  // Equal loop lengths: higher score wins, then earlier origin.
  auto c = select_loop_cut(intra({{14, 4, 0.5}, {16, 6, 0.8}, {12, 2, 0.8}}), 10.0, seg);
  CHECK(c->origin == 12.0);
  // Equal skip origins: longer jump wins.
  c = select_skip_cut(intra({{12, 20, 0.9}, {12, 30, 0.1}, {14, 39, 1.0}}), 10.0, seg);
  CHECK(c->destination == 30.0);
}

TEST_CASE("selection agrees with enumeration on random instances") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const auto tr = oracle::random_track(rng);
    std::uniform_real_distribution<double> pick(0.0, tr.map.duration);
    const double t = std::round(pick(rng) * 4) / 4;
    const auto idx = tr.map.partition.segment_at(t);
    if (!idx) continue;
    const auto& seg = tr.map.partition.segments[*idx];
    CHECK(same_cut(select_loop_cut(tr.map.cuts, t, seg), oracle::loop_cut(tr.map.cuts.intra_segment, t, seg)));
    CHECK(same_cut(select_skip_cut(tr.map.cuts, t, seg), oracle::skip_cut(tr.map.cuts.intra_segment, t, seg)));
  }
}

TEST_CASE("scenario table") {
  // Low [0,20) High [20,40) Low [40,60)
  const auto map = synth::map_from({{0, 20, L, {}}, {20, 40, H, {}}, {40, 60, L, {}}},
                                   {{5, 12, 1}, {35, 25, 1}, {30, 38, 1}});
  SUBCASE("Work in Low with a forward cut skips") {
    const auto s = unguided_step(at(2.0), Phase::Work, map);
    CHECK(s.mode == PlaybackMode::Skip);
    CHECK(s.pending_cut->origin == 5.0);
  }
  SUBCASE("Rest in Low plays naturally") {
    const auto s = unguided_step(at(2.0), Phase::Rest, map);
    CHECK(s.mode == PlaybackMode::Unmodified);
    CHECK_FALSE(s.pending_cut);
  }
  SUBCASE("Work in High loops") {
    const auto s = unguided_step(at(28.0), Phase::Work, map);
    CHECK(s.mode == PlaybackMode::Loop);
    CHECK(s.pending_cut->destination == 25.0);
  }
  SUBCASE("Rest in High skips out") {
    const auto s = unguided_step(at(28.0), Phase::Rest, map);
    CHECK(s.mode == PlaybackMode::Skip);
    CHECK(s.pending_cut->origin == 30.0);
  }
  SUBCASE("Work in Low without cuts and a long way to go arms a filter jump") {
    const auto s = unguided_step(at(41.0), Phase::Work, map);
    CHECK(s.mode == PlaybackMode::FilterTransition);
    // Four whole beats after the next beat (41.5), landing on the wrapped High start.
    CHECK(s.pending_cut->origin == 43.5);
    CHECK(s.pending_cut->destination == 20.0);
  }
  SUBCASE("Work in Low close to the boundary waits") {
    CHECK(unguided_step(at(53.0), Phase::Work, map).mode == PlaybackMode::Unmodified);
  }
}

TEST_CASE("filter trigger") {
  const auto map = synth::map_from({{0, 30, L, {}}, {30, 40, H, {}}}, {});
  CHECK(filter_trigger(at(10), map).kind == FilterTrigger::Kind::Jump);
  CHECK(filter_trigger(at(10), map).jump_to == 30.0);
  CHECK(filter_trigger(at(27), map).kind == FilterTrigger::Kind::NotNeeded);
  const auto flat = synth::map_from({{0, 30, L, {}}}, {});
  CHECK(filter_trigger(at(10), flat).kind == FilterTrigger::Kind::NoHighSegment);
  CHECK(unguided_step(at(10), Phase::Work, flat).mode == PlaybackMode::Unmodified);
}

TEST_CASE("armed filter jumps are kept and loop limits are honoured") {
  const auto map = synth::map_from({{0, 30, L, {}}, {30, 60, H, {}}}, {{50, 35, 1}});
  const auto armed = unguided_step(at(10), Phase::Work, map);
  REQUIRE(armed.mode == PlaybackMode::FilterTransition);
  auto later = armed;
  later.t_current = 11.0;
  CHECK(unguided_step(later, Phase::Work, map) == later);

  SchedulerConfig cfg;
  cfg.max_consecutive_loops = 2;
  auto s = at(40);
  s.loops_in_segment = 2;
  CHECK(unguided_step(s, Phase::Work, map, cfg).mode == PlaybackMode::Unmodified);
  s.loops_in_segment = 1;
  CHECK(unguided_step(s, Phase::Work, map, cfg).mode == PlaybackMode::Loop);
}

TEST_CASE("exhaustive check over cut sets of size up to 4 on a 3-segment track") {
  const std::vector<IntensitySegment> segs{{0, 6, L, {}}, {6, 12, H, {}}, {12, 18, L, {}}};
  const std::vector<double> points{1, 4, 7, 10, 13, 16};
  std::vector<Cutpoint> pool;
  for (double o : points)
    for (double d : points)
      if (o != d) pool.push_back({o, d, 1.0});
  SchedulerConfig cfg;
  cfg.filter_trigger_s = 3.0;
  cfg.filter_sweep_beats = 2;

  std::size_t subsets = 0, steps = 0, mismatches = 0, violations = 0;
  std::vector<std::size_t> pick;
  auto visit = [&](const std::vector<Cutpoint>& cuts) {
    ++subsets;
    const auto map = synth::map_from(segs, cuts);
    for (int k = 0; k < 36; ++k) {
      const double t = k * 0.5;
      for (auto phase : {Phase::Work, Phase::Rest}) {
        ++steps;
        const auto got = unguided_step(at(t), phase, map, cfg);
        const auto want = oracle::scenario_step(t, phase, map, cfg);
        if (got.mode != want.mode || !same_cut(got.pending_cut, want.pending_cut)) ++mismatches;
        if (got.mode == PlaybackMode::Loop && !(got.pending_cut->origin > t && got.pending_cut->destination < t))
          ++violations;
        if (got.mode == PlaybackMode::Skip &&
            !(got.pending_cut->origin > t && got.pending_cut->destination > got.pending_cut->origin))
          ++violations;
        if (got.mode == PlaybackMode::Loop || got.mode == PlaybackMode::Skip) {
          const auto& c = *got.pending_cut;
          bool member = false;
          for (const auto& m : map.cuts.intra_segment)
            member = member || (m.origin == c.origin && m.destination == c.destination);
          if (!member) ++violations;
        }
      }
    }
  };
  std::function<void(std::size_t)> rec = [&](std::size_t from) {
    std::vector<Cutpoint> cuts;
    for (auto i : pick) cuts.push_back(pool[i]);
    visit(cuts);
    if (pick.size() == 4) return;
    for (std::size_t i = from; i < pool.size(); ++i) {
      pick.push_back(i);
      rec(i + 1);
      pick.pop_back();
    }
  };
  rec(0);
  CHECK(subsets == 1 + 30 + 435 + 4060 + 27405);
  CHECK(steps == subsets * 72);
  CHECK(mismatches == 0);
  CHECK(violations == 0);
}

TEST_CASE("unguided_step is a pure function") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto tr = oracle::random_track(rng);
    const auto s = at(std::uniform_real_distribution<double>(0.0, tr.map.duration)(rng));
    CHECK(unguided_step(s, Phase::Work, tr.map) == unguided_step(s, Phase::Work, tr.map));
  }
}

TEST_CASE("guided planner reproduces the 50 s to 32 s example") {
  LabeledPartition p{{{0, 50, H, {}}}, 0};
  const auto g = guided_plan(p, intra({{10, 28, 0.9}}), GuidedPlan{30.0, 30.0});
  REQUIRE(g.segments.size() == 1);
  CHECK(g.segments[0].achieved == 32.0);
  CHECK(g.segments[0].kind == CutKind::Skip);
  CHECK(g.schedule.source_duration() == 32.0);
}

TEST_CASE("guided planner keeps the natural duration when it is closest") {
  LabeledPartition p{{{0, 45, H, {}}}, 0};
  // A 10 s loop gives 55, a 15 s skip gives 30, neither beats 45 for a 40 s target.
  const auto g = guided_plan(p, intra({{30, 20, 0.9}, {10, 25, 0.9}}), GuidedPlan{40.0, 30.0});
  CHECK(g.segments[0].kind == CutKind::None);
  CHECK(g.segments[0].achieved == 45.0);
  CHECK(guided_plan(p, intra({}), GuidedPlan{40.0, 30.0}).segments[0].achieved == 45.0);
}

TEST_CASE("guided planner matches brute force on 200 random instances") {
  std::mt19937_64 rng(200);
  std::uniform_int_distribution<int> secs(5, 90);
  for (int trial = 0; trial < 200; ++trial) {
    const auto tr = oracle::random_track(rng, 6, 30);
    const GuidedPlan plan{double(secs(rng)), double(secs(rng))};
    CAPTURE(trial);
    const auto g = guided_plan(tr.map.partition, tr.map.cuts, plan);
    REQUIRE(g.segments.size() == tr.map.partition.segments.size());
    int cuts_used = 0;
    for (const auto& sp : g.segments) {
      const auto& seg = tr.map.partition.segments[sp.segment];
      const double target = seg.label == H ? plan.work_s : plan.rest_s;
      CHECK(sp.achieved == oracle::best_duration(seg, tr.map.cuts.intra_segment, target, plan.min_span_s));
      cuts_used += sp.cut ? 1 : 0;
    }
    // One junction per cut plus the added fade-out split when the last span carries a cut.
    std::size_t junctions = 0;
    for (const auto& s : g.schedule.spans) junctions += s.transition == Transition::Cutpoint;
    CHECK(junctions <= std::size_t(cuts_used));
    CHECK(g.schedule.spans.front().transition == Transition::FadeIn);
    CHECK(g.schedule.spans.back().transition == Transition::FadeOut);
    std::size_t fades_in = 0, fades_out = 0;
    for (const auto& s : g.schedule.spans) {
      fades_in += s.transition == Transition::FadeIn;
      fades_out += s.transition == Transition::FadeOut;
      CHECK(s.src_start < s.src_end);
    }
    CHECK(fades_in == 1);
    CHECK(fades_out == 1);
  }
}

TEST_CASE("a 40/30 plan with cuts every 2 s lands within 2 s of targets") {
  std::mt19937_64 rng(4030);
  // One loop at most doubles a segment, so segments are at least 24 s long.
  std::uniform_int_distribution<int> len(12, 45);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<IntensitySegment> segs;
    double t = 0.0;
    for (int i = 0; i < 7; ++i) {
      const double end = t + 2.0 * len(rng);
      segs.push_back({t, end, i % 2 ? H : L, {}});
      t = end;
    }
    std::vector<Cutpoint> cuts;
    for (const auto& s : segs)
      for (double o = s.start + 2; o < s.end; o += 2)
        for (double d = s.start + 2; d < s.end; d += 2)
          if (o != d) cuts.push_back({o, d, 0.9});
    const auto map = synth::map_from(segs, cuts);
    const auto g = guided_plan(map.partition, map.cuts, GuidedPlan{40.0, 30.0});
    for (const auto& sp : g.segments) CHECK(std::abs(sp.achieved - sp.target) <= 2.0);
  }
}

TEST_CASE("guided planner errors") {
  CHECK_THROWS_AS(guided_plan(LabeledPartition{}, intra({}), GuidedPlan{}), Error);
  CHECK_THROWS_AS(guided_plan(LabeledPartition{{{0, 10, H, {}}}, 0}, intra({}), GuidedPlan{0.0, 30.0}), Error);
}

TEST_CASE("schedule JSON round trip and validation") {
  AdaptationSchedule s{{{0, 10, Transition::FadeIn}, {20, 30, Transition::Cutpoint}, {30, 35, Transition::FadeOut}}};
  CHECK(schedule_from_json(schedule_to_json(s)) == s);
  try {
    schedule_from_json(R"({"spans":[{"src_start":3,"src_end":1,"transition":"natural"}]})");
    FAIL("expected InvalidSchedule");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidSchedule);
  }
  CHECK_THROWS_AS(schedule_from_json(R"({"spans":[{"src_start":0,"src_end":1,"transition":"warp"}]})"), Error);
}

TEST_CASE("playlist chains songs until the work intervals are covered") {
  const auto a = synth::map_from({{0, 20, L, {}}, {20, 60, H, {}}, {60, 80, L, {}}}, {});
  const auto b = synth::map_from({{0, 30, L, {}}, {30, 70, H, {}}, {70, 90, L, {}}, {90, 120, H, {}}}, {});
  const auto list = guided_playlist({{"a", a}, {"b", b}, {"c", a}}, GuidedPlan{}, 2);
  REQUIRE(list.size() == 2);
  CHECK(list[0].track_id == "a");
  CHECK(list[1].schedule.spans.back().src_end == 90.0);
  for (const auto& e : list) {
    CHECK(e.schedule.spans.front().transition == Transition::FadeIn);
    CHECK(e.schedule.spans.back().transition == Transition::FadeOut);
  }
}
