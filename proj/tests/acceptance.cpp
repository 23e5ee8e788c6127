// Acceptance run: one PASS/FAIL line per primary criterion. Tolerances are
// fixed here, not taken from the command line.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cadence/cutpoints.hpp"
#include "cadence/error.hpp"
#include "cadence/eval.hpp"
#include "cadence/intensity.hpp"
#include "cadence/live.hpp"
#include "cadence/loudness.hpp"
#include "cadence/renderer.hpp"
#include "cadence/scheduler.hpp"
#include "support/intensity_oracle.hpp"
#include "support/live_script.hpp"
#include "support/oracles.hpp"
#include "support/synth.hpp"

using namespace cadence;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double whole(const AudioBuffer& a) { return lufs(a, 0, static_cast<std::int64_t>(a.frames())); }

AudioBuffer noise(double seconds, int sr, int channels, std::uint64_t seed) {
  AudioBuffer a(channels, static_cast<std::size_t>(seconds * sr), sr);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-0.5f, 0.5f);
  for (auto& ch : a.channels)
    for (auto& s : ch) s = u(rng);
  return a;
}

AudioBuffer scaled(AudioBuffer a, double db) {
  const float g = static_cast<float>(std::pow(10.0, db / 20.0));
  for (auto& ch : a.channels)
    for (auto& s : ch) s *= g;
  return a;
}

BeatGrid grid_every(double step, double end) {
  BeatGrid g;
  for (double t = 0.0; t <= end + 1e-9; t += step) g.beats.push_back(t);
  return g;
}

std::string data(const std::string& name) { return synth::read_file(std::string(CADENCE_TEST_DATA) + "/" + name); }

// ---------------------------------------------------------------------------

void loudness_calibration(Outcome& o) {
  double worst_sine = 0.0;
  for (int sr : {44100, 48000, 96000})
    worst_sine = std::max(worst_sine, std::abs(whole(synth::tones({{997.0, 1.0}}, 5.0, sr)) + 3.01));
  o.require(worst_sine <= 0.1, "997 Hz sine within 0.1 LU of -3.01");

  const auto ref = noise(10.0, 48000, 2, 11);
  const double base = whole(ref);
  double worst_gain = 0.0;
  for (int db = -20; db <= 20; db += 2) worst_gain = std::max(worst_gain, std::abs(whole(scaled(ref, db)) - base - db));
  o.require(worst_gain <= 0.05, "gain linearity within 0.05 dB over +-20 dB");

  // One minute of stereo 44.1 kHz audio through the per-beat meter.
  const auto minute = noise(60.0, 44100, 2, 12);
  const auto grid = grid_every(0.5, 60.0);
  const auto t0 = Clock::now();
  const auto beats = beat_loudness(minute, grid);
  const double whole_minute = whole(minute);
  const double elapsed = seconds_since(t0);
  o.require(beats.size() == grid.size() - 1 && std::isfinite(whole_minute), "meter produced values");
  o.require(elapsed < 1.0, "under 1 s per minute of audio");
  o.detail << "sine_err=" << worst_sine << " (tol 0.1) gain_err=" << worst_gain << " dB (tol 0.05) runtime="
           << elapsed << " s/min (limit 1)";
}

void intensity_oracle(Outcome& o) {
  std::mt19937_64 rng(5150);
  int agree = 0;
  const IntensityConfig cfg;
  for (int trial = 0; trial < 50; ++trial) {
    const auto in = oracle::random_instance(rng);
    const auto s = oracle::sections_of(in.names);
    const auto r = label_intensity(s, in.loud, 10.0 * in.names.size(), cfg);
    const auto expect = oracle::oracle_labels(in.names, in.loud, 5.0, 4);
    bool ok = r.labels == expect;
    for (std::size_t n = 0; n < s.size() && ok; ++n) {
      const auto seg = r.partition.segment_at(s[n].start + 5.0);
      ok = seg && r.partition.segments[*seg].label == expect[n];
    }
    agree += ok;
  }
  o.require(agree == 50, "100% agreement");
  o.detail << "agreement=" << agree << "/50";
}

void partition_invariants(Outcome& o) {
  std::mt19937_64 rng(1000);
  std::uniform_int_distribution<int> shift(-30, 30);
  int ok_count = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto in = oracle::random_instance(rng);
    IntensityConfig cfg;
    const auto s = oracle::sections_of(in.names, 7.5);
    const double end = 7.5 * in.names.size();
    const auto r = label_intensity(s, in.loud, end, cfg);
    const auto& p = r.partition;
    bool ok = !p.segments.empty() && p.segments.front().start == 0.0 && p.segments.back().end == end;
    for (std::size_t i = 0; ok && i + 1 < p.segments.size(); ++i)
      ok = p.segments[i].end == p.segments[i + 1].start && p.segments[i].label != p.segments[i + 1].label;
    std::size_t run = 0;
    for (auto l : r.labels) {
      run = l == Intensity::High ? run + 1 : 0;
      ok = ok && run < cfg.max_high_run;
    }
    auto shifted = in.loud;
    const int g = shift(rng);
    for (auto& v : shifted) v += g;
    ok = ok && label_intensity(s, shifted, end, cfg).labels == r.labels;
    ok_count += ok;
  }
  o.require(ok_count == 1000, "all instances satisfy tiling, alternation, run limit and gain-shift invariance");
  o.detail << "instances_ok=" << ok_count << "/1000";
}

void cutpoint_correctness(Outcome& o) {
  std::size_t expected = 0, recovered = 0;
  double min_score = 1.0;
  for (std::size_t k : {2u, 3u, 4u, 6u, 8u}) {
    synth::SongSpec spec;
    spec.id = "loop";
    spec.loop_beats = k;
    spec.sections = {{"chorus", 6 * k, -12.0, 20 + int(k)}};
    const auto b = synth::make_song(spec);
    const CutpointConfig cfg;
    const auto cuts = detect_cutpoints(recurrence(beat_features(b.mixture, b.beats, cfg.features), cfg.recurrence),
                                       b.beats, cfg.min_run, cfg.min_jump_beats);
    std::map<std::pair<std::size_t, std::size_t>, double> found;
    for (const auto& c : cuts) found[{*b.beats.index_of(c.origin), *b.beats.index_of(c.destination)}] = c.score;
    for (std::size_t i = 0; i + k < 6 * k; ++i)
      for (auto key : {std::pair{i + 1, i + 1 + k}, std::pair{i + 1 + k, i + 1}}) {
        ++expected;
        const auto it = found.find(key);
        if (it != found.end() && it->second > 0.95) ++recovered;
        if (it != found.end()) min_score = std::min(min_score, it->second);
      }
  }
  o.require(recovered == expected, "every lag-k pair recovered with score > 0.95");

  std::mt19937_64 rng(31337);
  std::uniform_int_distribution<int> nseg(1, 8), ncut(0, 40);
  std::uniform_real_distribution<double> len(0.5, 20.0);
  int agree = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    LabeledPartition p;
    double t = 0.0;
    const int n = nseg(rng);
    for (int i = 0; i < n; ++i) {
      const double end = t + std::max(0.5, std::round(len(rng) * 2.0) / 2.0);
      p.segments.push_back({t, end, i % 2 ? Intensity::High : Intensity::Low, {}});
      t = end;
    }
    std::uniform_int_distribution<int> grid(0, int(t * 2));
    std::vector<Cutpoint> cuts;
    const int m = ncut(rng);
    for (int i = 0; i < m; ++i) cuts.push_back({grid(rng) * 0.5, grid(rng) * 0.5, 0.9});
    std::vector<Cutpoint> expect;
    for (const auto& c : cuts)
      for (const auto& s : p.segments)
        if (oracle::inside(s, c.origin) && oracle::inside(s, c.destination)) {
          expect.push_back(c);
          break;
        }
    const auto got = filter_intra_segment(cuts, p).intra_segment;
    bool ok = got.size() == expect.size();
    for (std::size_t i = 0; ok && i < got.size(); ++i)
      ok = got[i].origin == expect[i].origin && got[i].destination == expect[i].destination;
    agree += ok;
  }
  o.require(agree == 1000, "filter_intra_segment equals brute force");
  o.detail << "lag_pairs=" << recovered << "/" << expected << " min_score=" << min_score
           << " (threshold 0.95) filter_agreement=" << agree << "/1000";
}

void state_machine(Outcome& o) {
  using I = Intensity;
  const std::vector<IntensitySegment> segs{{0, 6, I::Low, {}}, {6, 12, I::High, {}}, {12, 18, I::Low, {}}};
  const std::vector<double> points{1, 4, 7, 10, 13, 16};
  std::vector<Cutpoint> pool;
  for (double a : points)
    for (double b : points)
      if (a != b) pool.push_back({a, b, 1.0});
  SchedulerConfig cfg;
  cfg.filter_trigger_s = 3.0;
  cfg.filter_sweep_beats = 2;

  std::size_t subsets = 0, steps = 0, mismatches = 0, violations = 0;
  std::vector<std::size_t> pick;
  std::function<void(std::size_t)> rec = [&](std::size_t from) {
    std::vector<Cutpoint> cuts;
    for (auto i : pick) cuts.push_back(pool[i]);
    ++subsets;
    const auto map = synth::map_from(segs, cuts);
    for (int k = 0; k < 36; ++k) {
      const double t = k * 0.5;
      for (auto phase : {Phase::Work, Phase::Rest}) {
        ++steps;
        PlaybackState s;
        s.t_current = t;
        const auto got = unguided_step(s, phase, map, cfg);
        const auto want = oracle::scenario_step(t, phase, map, cfg);
        const bool same = got.mode == want.mode && got.pending_cut.has_value() == want.pending_cut.has_value() &&
                          (!got.pending_cut || (got.pending_cut->origin == want.pending_cut->origin &&
                                                got.pending_cut->destination == want.pending_cut->destination));
        mismatches += !same;
        if (got.mode == PlaybackMode::Loop)
          violations += !(got.pending_cut->origin > t && got.pending_cut->destination < t);
        if (got.mode == PlaybackMode::Skip)
          violations += !(got.pending_cut->origin > t && got.pending_cut->destination > got.pending_cut->origin);
      }
    }
    if (pick.size() == 4) return;
    for (std::size_t i = from; i < pool.size(); ++i) {
      pick.push_back(i);
      rec(i + 1);
      pick.pop_back();
    }
  };
  rec(0);
  o.require(subsets == 31931, "all cut sets of size <= 4 visited");
  o.require(violations == 0, "loop and skip predicates hold");
  o.require(mismatches == 0, "decisions match the scenario table");
  o.detail << "cut_sets=" << subsets << " steps=" << steps << " predicate_violations=" << violations
           << " table_mismatches=" << mismatches;
}

void guided_planner(Outcome& o) {
  CutpointSet one;
  one.candidates = one.intra_segment = {{10, 28, 0.9}};
  const auto example = guided_plan(LabeledPartition{{{0, 50, Intensity::High, {}}}, 0}, one, GuidedPlan{30.0, 30.0});
  const double achieved = example.segments.at(0).achieved;
  o.require(achieved == 32.0, "50 s segment with an 18 s skip and a 30 s target gives 32 s");

  std::mt19937_64 rng(2000);
  std::uniform_int_distribution<int> secs(5, 90);
  int agree = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto tr = oracle::random_track(rng, 6, 30);
    const GuidedPlan plan{double(secs(rng)), double(secs(rng))};
    const auto g = guided_plan(tr.map.partition, tr.map.cuts, plan);
    bool ok = g.segments.size() == tr.map.partition.segments.size();
    for (const auto& sp : g.segments) {
      const auto& seg = tr.map.partition.segments[sp.segment];
      const double target = seg.label == Intensity::High ? plan.work_s : plan.rest_s;
      ok = ok && sp.achieved == oracle::best_duration(seg, tr.map.cuts.intra_segment, target, plan.min_span_s);
    }
    agree += ok;
  }
  o.require(agree == 200, "chosen durations equal brute force");

  // Cuts every 2 s; segments of at least 24 s so one loop can reach 40 s.
  std::mt19937_64 rng2(4030);
  std::uniform_int_distribution<int> len(12, 45);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<IntensitySegment> segs;
    double t = 0.0;
    for (int i = 0; i < 7; ++i) {
      const double end = t + 2.0 * len(rng2);
      segs.push_back({t, end, i % 2 ? Intensity::High : Intensity::Low, {}});
      t = end;
    }
    std::vector<Cutpoint> cuts;
    for (const auto& s : segs)
      for (double a = s.start + 2; a < s.end; a += 2)
        for (double b = s.start + 2; b < s.end; b += 2)
          if (a != b) cuts.push_back({a, b, 0.9});
    const auto map = synth::map_from(segs, cuts);
    for (const auto& sp : guided_plan(map.partition, map.cuts, GuidedPlan{40.0, 30.0}).segments)
      worst = std::max(worst, std::abs(sp.achieved - sp.target));
  }
  o.require(worst <= 2.0, "40/30 plan within 2 s of targets");
  o.detail << "example=" << achieved << " s (expect 32) brute_force=" << agree << "/200 worst_40_30_error=" << worst
           << " s (tol 2)";
}

struct LiveFixture {
  std::shared_ptr<const AudioBuffer> audio;
  TrackMap map;
};

const LiveFixture& live_song(std::uint64_t seed) {
  static std::map<std::uint64_t, LiveFixture> cache;
  auto it = cache.find(seed);
  if (it == cache.end()) {
    const auto b = synth::make_song(synth::pop_song("accept" + std::to_string(seed), seed));
    it = cache.emplace(seed, LiveFixture{std::make_shared<const AudioBuffer>(b.mixture), track_map(b)}).first;
  }
  return it->second;
}

void renderer(Outcome& o) {
  const auto src = noise(12.0, 44100, 2, 21);
  const auto identity =
      render_schedule(src, grid_every(0.5, 12.0), AdaptationSchedule{{{0.0, 12.0, Transition::Natural}}});
  o.require(identity.channels == src.channels, "identity render is bit-identical");

  const auto song = synth::make_song(synth::pop_song("clicks", 777, 44100));
  const auto& g = song.beats;
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<std::size_t> beat(2, g.size() - 6);
  int clean = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto a = beat(rng), b = beat(rng);
    while (b == a) b = beat(rng);
    const auto org = song.mixture.to_sample(g[a]), dst = song.mixture.to_sample(g[b]);
    const auto sr = song.mixture.sample_rate;
    clean += oracle::click_check(song.mixture, g, org - sr, org, dst, dst + sr).ok();
  }
  o.require(clean == 100, "click metric passes on 100 random cuts");

  std::mt19937_64 srng(808);
  int exact = 0;
  const int sessions = 20;
  for (int s = 0; s < sessions; ++s) {
    const auto& f = live_song(61 + s % 3);
    LiveEngine e(f.audio, f.map, "x");
    const auto r = script::run(e, script::random_script(srng, 120.0), 120.0);
    exact += script::replay(*f.audio, f.map.beats, r.log, r.output.frames()).channels == r.output.channels;
  }
  o.require(exact == sessions, "offline re-render of live logs is sample-exact");

  double worst_loop = 0.0;
  for (int sr : {44100, 48000, 22050}) {
    const auto base = noise(20.0, sr, 1, sr);
    const auto out = render_schedule(
        base, grid_every(0.5, 20.0),
        AdaptationSchedule{{{4.0, 12.0, Transition::Natural}, {4.0, 12.0, Transition::Cutpoint}}});
    worst_loop = std::max(worst_loop, std::abs(double(out.frames()) - (16.0 - 0.030) * sr));
  }
  o.require(worst_loop <= 1.0, "loop doubling within 1 sample");
  o.detail << "identity=" << (identity.channels == src.channels ? "exact" : "differs") << " clicks_ok=" << clean
           << "/100 live_replay_exact=" << exact << "/" << sessions << " loop_error=" << worst_loop
           << " samples (tol 1)";
}

/// 270 songs: 257 verse/chorus songs, 7 without an intensity contrast and 6
/// whose material never repeats.
bool flat_song(std::size_t i) { return i % 40 == 7; }
bool noise_song(std::size_t i) { return i % 45 == 23; }

TrackBundle ingest_song(std::size_t i) {
  const std::string id = "song" + std::to_string(1000 + i);
  if (flat_song(i)) {
    synth::SongSpec s;
    s.id = id;
    s.sample_rate = 8000;
    s.beat_frames = 4000;
    s.seed = i;
    s.sections = {{"verse", 32, -20.0, 1}, {"verse", 32, -20.0, 2}, {"bridge", 16, -20.0, 3}};
    return synth::make_song(s);
  }
  if (noise_song(i)) {
    synth::SongSpec s;
    s.id = id;
    s.sample_rate = 8000;
    s.beat_frames = 4000;
    s.seed = i;
    s.sections = {{"verse", 40, -24.0, 1, true}, {"chorus", 40, -12.0, 2, true}, {"verse", 40, -24.0, 3, true}};
    return synth::make_song(s);
  }
  return synth::make_song(synth::pop_song(id, 5000 + i, 8000));
}

void eval_harness(Outcome& o) {
  ExperimentConfig cfg;
  cfg.seed = 270;
  const auto t0 = Clock::now();
  const auto ex = prepare_experiment(270, ingest_song, cfg);
  const double ingest_s = seconds_since(t0);
  const std::size_t eligible = ex.plans.size();
  o.require(eligible >= 30, "at least 30 eligible bundles");
  o.require(eligible + ex.excluded.size() == 270, "every song is planned or reported as excluded");
  std::size_t uniform = 0, no_cuts = 0;
  for (const auto& e : ex.excluded) (e.reason == Eligibility::UniformIntensity ? uniform : no_cuts) += 1;

  std::map<std::string, int> per_song;
  bool offsets_ok = true;
  for (const auto& r : ex.manifest) {
    ++per_song[r.song_id];
    if (r.transition_offset) offsets_ok = offsets_ok && *r.transition_offset >= 2.0 && *r.transition_offset <= 8.0;
  }
  bool two_each = per_song.size() == eligible;
  for (const auto& [song, n] : per_song) two_each = two_each && n == 2;
  o.require(two_each, "2 clips per eligible song");
  o.require(offsets_ok, "all transition offsets in [2, 8] s");

  // Render the clips of a sample of songs to confirm they are real 10 s clips.
  std::size_t rendered = 0;
  for (std::size_t k = 0; k < ex.plans.size(); k += 8) {
    const auto& plan = ex.plans[k];
    const auto b = ingest_song(std::stoul(plan.song_id.substr(4)) - 1000);
    const auto pair = render_clip_pair(b, plan, cfg.clip);
    const auto want = std::size_t(std::llround(10.0 * b.mixture.sample_rate));
    rendered += pair.modified_clip.frames() == want && pair.control_clip.frames() == want;
  }
  const std::size_t sampled = (ex.plans.size() + 7) / 8;
  o.require(rendered == sampled, "rendered clips are 10 s long");

  std::vector<double> offsets;
  std::vector<std::pair<TrackBundle, TrackAnalysis>> pool;
  for (std::uint64_t s = 0; s < 4; ++s) {
    auto b = ingest_song(s);
    auto a = analyze_track(b);
    pool.emplace_back(std::move(b), std::move(a));
  }
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto& [b, a] = pool[seed % pool.size()];
    offsets.push_back(plan_clip_pair(b, a.intensity.partition, a.cuts, seed, cfg.clip).transition_offset);
  }
  const auto ks = ks_uniform(offsets, 2.0, 8.0);
  o.require(ks.p > 0.01, "offset uniformity KS p > 0.01");

  const auto oracle = nlohmann::json::parse(data("ttest_oracle.json"));
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> pairs;
  {
    std::istringstream in(data("ttest_pairs.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
      auto& p = pairs[line.substr(0, c1)];
      p.first.push_back(std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
      p.second.push_back(std::stod(line.substr(c2 + 1)));
    }
  }
  double t_err = 0.0, p_err = 0.0;
  for (const auto& [name, ab] : pairs) {
    const auto r = paired_t_test(ab.first, ab.second);
    t_err = std::max(t_err, std::abs(r.t - oracle[name]["t"].get<double>()));
    p_err = std::max(p_err, std::abs(r.p - oracle[name]["p"].get<double>()));
  }
  o.require(pairs.size() == 2 && t_err <= 1e-9 && p_err <= 1e-6, "t-test matches the reference oracle");
  const auto same = paired_t_test({3, 4, 2, 5, 1}, {3, 4, 2, 5, 1});
  o.require(same.t == 0.0 && same.p == 1.0, "identical ratings give t = 0, p = 1");
  std::set<std::string> designed, reported;
  for (std::size_t i = 0; i < 270; ++i)
    if (flat_song(i) || noise_song(i)) designed.insert("song" + std::to_string(1000 + i));
  for (const auto& e : ex.excluded) reported.insert(e.song_id);
  o.require(designed.size() == 13 && reported == designed, "exactly the 13 designed exclusions are reported");
  o.require(uniform == 7 && no_cuts == 6, "exclusion reasons match the designed songs");

  o.detail << "songs=270 eligible=" << eligible << " excluded=" << ex.excluded.size() << " (uniform_intensity="
           << uniform << " no_cutpoints=" << no_cuts << ") clips=" << ex.manifest.size() << " rendered_sample="
           << rendered << "/" << sampled << " ks_p=" << ks.p << " (min 0.01) t_err=" << t_err
           << " (tol 1e-9) p_err=" << p_err << " (tol 1e-6) ingest=" << ingest_s << " s";
}

void latency_contract(Outcome& o) {
  std::mt19937_64 rng(100);
  std::size_t commands = 0, on_time = 0, on_beat = 0;
  double worst = 0.0, worst_gap = 0.0;
  for (int s = 0; s < 100; ++s) {
    const auto& f = live_song(61 + s % 3);
    const double max_gap = f.map.beats.max_gap();
    worst_gap = std::max(worst_gap, max_gap);
    LiveEngine e(f.audio, f.map, "x");
    const auto r = script::run(e, script::random_script(rng, 60.0, 1.0, 8.0), 60.0);
    for (const auto& c : r.commands) {
      ++commands;
      if (c.logged_wall < 0.0) continue;
      const double lat = c.logged_wall - c.posted_wall;
      worst = std::max(worst, lat);
      on_time += lat >= -1e-9 && lat <= max_gap + 1e-9;
      on_beat += f.map.beats.index_of(c.logged_source).has_value() || c.logged_source > f.map.beats.beats.back();
    }
  }
  o.require(commands > 0 && on_time == commands, "every phase logged within the max beat gap");
  o.require(on_beat == commands, "every phase takes effect on a beat");
  o.detail << "sessions=100 commands=" << commands << " within_gap=" << on_time << " on_beat=" << on_beat
           << " worst_latency=" << worst << " s (max beat gap " << worst_gap << " s)";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"loudness-calibration", loudness_calibration},
      {"intensity-labeling-oracle", intensity_oracle},
      {"partition-invariants", partition_invariants},
      {"cutpoint-correctness", cutpoint_correctness},
      {"state-machine-predicates", state_machine},
      {"guided-planner", guided_planner},
      {"renderer", renderer},
      {"eval-harness", eval_harness},
      {"latency-contract", latency_contract},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      check(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    failed += !o.pass;
    std::printf("%s %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.str().c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
