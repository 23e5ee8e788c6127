#include "cadence/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "cadence/error.hpp"
#include "cadence/wav.hpp"

namespace cadence {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the first failure.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + p.string(), "path");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + p.string(), "path");
  out << text;
}

struct Outcome {
  std::optional<ClipPlan> plan;
  std::optional<Exclusion> exclusion;
};

Outcome plan_song(const TrackBundle& bundle, const ExperimentConfig& cfg) {
  Outcome out;
  const auto map = track_map(bundle, cfg.analysis);
  const auto e = eligibility(map.partition, map.cuts);
  if (e != Eligibility::Eligible) {
    out.exclusion = Exclusion{bundle.track_id, e, e == Eligibility::UniformIntensity
                                                      ? "similar intensity throughout"
                                                      : "no intra-segment cutpoints"};
    return out;
  }
  try {
    out.plan = plan_clip_pair(bundle, map.partition, map.cuts, song_seed(cfg.seed, bundle.track_id), cfg.clip);
  } catch (const Error& err) {
    if (err.code() != ErrorCode::NoCutpointsAvailable) throw;
    out.exclusion = Exclusion{bundle.track_id, Eligibility::NoCutpoints, err.message()};
  }
  return out;
}

}  // namespace

Experiment assign_experiment(std::vector<ClipPlan> plans, std::vector<Exclusion> excluded,
                             const ExperimentConfig& cfg) {
  if (cfg.raters == 0 || cfg.assignments_per_clip == 0 || cfg.assignments_per_clip > cfg.raters)
    throw Error(ErrorCode::InvalidArgument, "assignments_per_clip must be between 1 and the number of raters",
                "assignments_per_clip");
  Experiment ex;
  ex.plans = std::move(plans);
  ex.excluded = std::move(excluded);
  if (ex.plans.empty()) {
    ex.warnings.push_back("no eligible songs; manifest is empty");
    return ex;
  }

  std::vector<ManifestRow> rows;
  for (const auto& p : ex.plans) {
    rows.push_back({"", p.song_id, "modified", p.transition_offset, {}});
    rows.push_back({"", p.song_id, "control", std::nullopt, {}});
  }
  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0x5EEDC11Bull));
  std::shuffle(rows.begin(), rows.end(), rng);
  const std::size_t width = std::max<std::size_t>(4, std::to_string(rows.size()).size());
  std::size_t slot = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto num = std::to_string(i + 1);
    num.insert(0, width - num.size(), '0');
    rows[i].clip_id = "clip_" + num;
    for (std::size_t j = 0; j < cfg.assignments_per_clip; ++j, ++slot)
      rows[i].raters.push_back("r" + std::to_string(slot % cfg.raters + 1));
  }
  ex.manifest = std::move(rows);
  return ex;
}

namespace {

Experiment assemble(std::vector<Outcome> outcomes, const ExperimentConfig& cfg) {
  std::vector<ClipPlan> plans;
  std::vector<Exclusion> excluded;
  for (auto& o : outcomes) {
    if (o.plan) plans.push_back(std::move(*o.plan));
    if (o.exclusion) excluded.push_back(std::move(*o.exclusion));
  }
  // Canonical order so the manifest does not depend on how bundles were listed.
  std::sort(plans.begin(), plans.end(), [](const ClipPlan& a, const ClipPlan& b) { return a.song_id < b.song_id; });
  std::sort(excluded.begin(), excluded.end(),
            [](const Exclusion& a, const Exclusion& b) { return a.song_id < b.song_id; });
  return assign_experiment(std::move(plans), std::move(excluded), cfg);
}

std::string exclusions_to_csv(const std::vector<Exclusion>& rows) {
  std::string out = "song_id,reason,detail\n";
  for (const auto& r : rows) {
    std::string detail = r.detail;
    std::replace(detail.begin(), detail.end(), ',', ';');
    out += r.song_id + "," + to_string(r.reason) + "," + detail + "\n";
  }
  return out;
}

}  // namespace

const char* to_string(Eligibility e) {
  switch (e) {
    case Eligibility::Eligible: return "eligible";
    case Eligibility::UniformIntensity: return "uniform_intensity";
    case Eligibility::NoCutpoints: return "no_cutpoints";
  }
  return "eligible";
}

Eligibility eligibility(const LabeledPartition& partition, const CutpointSet& cuts) {
  bool high = false;
  bool low = false;
  for (const auto& s : partition.segments) (s.label == Intensity::High ? high : low) = true;
  if (!high || !low) return Eligibility::UniformIntensity;
  if (cuts.intra_segment.empty()) return Eligibility::NoCutpoints;
  return Eligibility::Eligible;
}

ClipPlan plan_clip_pair(const TrackBundle& bundle, const LabeledPartition& partition, const CutpointSet& cuts,
                        std::uint64_t seed, const ClipConfig& cfg) {
  if (cuts.intra_segment.empty())
    throw Error(ErrorCode::NoCutpointsAvailable, "track has no intra-segment cutpoints", "cutpoints");
  if (!(cfg.min_offset_s >= 0.0 && cfg.max_offset_s >= cfg.min_offset_s && cfg.clip_s > cfg.max_offset_s))
    throw Error(ErrorCode::InvalidArgument, "offsets must satisfy 0 <= min <= max < clip length", "clip");
  cfg.render.validate();

  const auto& audio = bundle.mixture;
  const int sr = audio.sample_rate;
  const auto total = static_cast<std::int64_t>(audio.frames());
  const auto n = static_cast<std::int64_t>(std::llround(cfg.clip_s * sr));
  const auto xfade = static_cast<std::int64_t>(std::llround(cfg.render.crossfade_ms * 1e-3 * sr));
  const auto half = xfade / 2;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> offset_dist(cfg.min_offset_s, cfg.max_offset_s);

  ClipPlan plan;
  plan.song_id = bundle.track_id;
  bool found = false;
  for (int attempt = 0; attempt < cfg.max_attempts && !found; ++attempt) {
    const double u = offset_dist(rng);
    const auto off = static_cast<std::int64_t>(std::llround(u * sr));
    // The crossfade starts at len_a - xfade, so its centre lands on `off`.
    const auto len_a = off + xfade - half;
    const auto len_b = n - len_a + xfade;
    std::vector<std::pair<std::size_t, std::size_t>> fits;  // (cut index, segment)
    for (std::size_t i = 0; i < cuts.intra_segment.size(); ++i) {
      const auto& c = cuts.intra_segment[i];
      const auto seg = partition.segment_at(c.origin);
      if (!seg) continue;
      const auto& s = partition.segments[*seg];
      const auto s0 = audio.to_sample(s.start);
      const auto s1 = std::min(audio.to_sample(s.end), total);
      const auto o = audio.to_sample(c.origin);
      const auto d = audio.to_sample(c.destination);
      if (o - len_a >= s0 && d + len_b <= s1 && d >= s0) fits.emplace_back(i, *seg);
    }
    if (fits.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, fits.size() - 1);
    const auto [ci, seg] = fits[pick(rng)];
    const auto& c = cuts.intra_segment[ci];
    const auto o = audio.to_sample(c.origin);
    const auto d = audio.to_sample(c.destination);
    plan.cut = c;
    plan.cut_segment = seg;
    plan.offset_frames = off;
    plan.transition_offset = static_cast<double>(off) / sr;
    plan.modified_spans = {{o - len_a, o, Transition::Natural}, {d, d + len_b, Transition::Cutpoint}};
    found = true;
  }
  if (!found)
    throw Error(ErrorCode::NoCutpointsAvailable, "no cutpoint leaves room for a clip inside its segment",
                "cutpoints");

  const auto margin = cfg.avoid_boundaries ? static_cast<std::int64_t>(std::llround(cfg.boundary_margin_s * sr)) : 0;
  std::vector<std::size_t> roomy;
  for (std::size_t i = 0; i < partition.segments.size(); ++i) {
    const auto& s = partition.segments[i];
    const auto s0 = audio.to_sample(s.start);
    const auto s1 = std::min(audio.to_sample(s.end), total);
    if (s1 - s0 - 2 * margin >= n) roomy.push_back(i);
  }
  if (roomy.empty())
    throw Error(ErrorCode::NoCutpointsAvailable, "no segment is long enough for a control clip", "segments");
  std::uniform_int_distribution<std::size_t> seg_pick(0, roomy.size() - 1);
  plan.control_segment = roomy[seg_pick(rng)];
  const auto& cs = partition.segments[plan.control_segment];
  const auto lo = audio.to_sample(cs.start) + margin;
  const auto hi = std::min(audio.to_sample(cs.end), total) - margin - n;
  std::uniform_int_distribution<std::int64_t> start_pick(lo, hi);
  const auto start = start_pick(rng);
  plan.control_span = {start, start + n, Transition::Natural};
  return plan;
}

ClipPair render_clip_pair(const TrackBundle& bundle, const ClipPlan& plan, const ClipConfig& cfg) {
  ClipPair pair;
  pair.song_id = plan.song_id;
  pair.transition_offset = plan.transition_offset;
  pair.plan = plan;
  pair.modified_clip = render_spans(bundle.mixture, bundle.beats, plan.modified_spans, cfg.render);
  pair.control_clip = render_spans(bundle.mixture, bundle.beats, {plan.control_span}, cfg.render);
  return pair;
}

ClipPair make_clip_pair(const TrackBundle& bundle, const LabeledPartition& partition, const CutpointSet& cuts,
                        std::uint64_t seed, const ClipConfig& cfg) {
  return render_clip_pair(bundle, plan_clip_pair(bundle, partition, cuts, seed, cfg), cfg);
}

// ---------------------------------------------------------------------------

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::LengthMismatch,
                "rating lists differ in length (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")",
                "ratings_b");
  const std::size_t n = a.size();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "a paired t-test needs at least two pairs", "ratings_a");
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  TTestResult r;
  r.df = n - 1;
  if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; })) return r;
  if (std::all_of(d.begin(), d.end(), [&](double v) { return v == d[0]; }))
    throw Error(ErrorCode::ZeroVariance, "every pair differs by the same amount; t is undefined", "ratings_a");

  double mean = 0.0;
  for (const double v : d) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (const double v : d) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(n - 1);
  r.t = mean / std::sqrt(var / static_cast<double>(n));
  const boost::math::students_t dist(static_cast<double>(r.df));
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t))));
  return r;
}

KsResult ks_uniform(std::vector<double> samples, double lo, double hi) {
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "KS test needs samples", "samples");
  if (!(hi > lo)) throw Error(ErrorCode::InvalidArgument, "empty support", "hi");
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = std::clamp((samples[i] - lo) / (hi - lo), 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  // Asymptotic Kolmogorov distribution with the small-sample correction.
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p;
  if (lambda < 1.18) {
    const double pi = std::numbers::pi;
    double cdf = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double m = 2.0 * k - 1.0;
      cdf += std::exp(-m * m * pi * pi / (8.0 * lambda * lambda));
    }
    cdf *= std::sqrt(2.0 * pi) / std::max(lambda, 1e-300);
    p = 1.0 - cdf;
  } else {
    p = 0.0;
    for (int k = 1; k <= 100; ++k) {
      const double term = 2.0 * std::exp(-2.0 * k * k * lambda * lambda);
      p += (k % 2 == 1) ? term : -term;
      if (term < 1e-16) break;
    }
  }
  return {d, std::clamp(p, 0.0, 1.0)};
}

// ---------------------------------------------------------------------------

std::uint64_t song_seed(std::uint64_t master, const std::string& song_id) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (const unsigned char c : song_id) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return splitmix64(master ^ splitmix64(h));
}

Experiment prepare_experiment(const std::vector<TrackBundle>& bundles, const ExperimentConfig& cfg) {
  std::vector<Outcome> outcomes(bundles.size());
  parallel_for(bundles.size(), cfg.threads, [&](std::size_t i) { outcomes[i] = plan_song(bundles[i], cfg); });
  return assemble(std::move(outcomes), cfg);
}

Experiment prepare_experiment(std::size_t count, const BundleSource& source, const ExperimentConfig& cfg) {
  std::vector<Outcome> outcomes(count);
  parallel_for(count, cfg.threads, [&](std::size_t i) { outcomes[i] = plan_song(source(i), cfg); });
  return assemble(std::move(outcomes), cfg);
}

Experiment build_experiment(const std::vector<std::filesystem::path>& bundle_dirs, const std::filesystem::path& out_dir,
                            const ExperimentConfig& cfg) {
  std::vector<Outcome> outcomes(bundle_dirs.size());
  parallel_for(bundle_dirs.size(), cfg.threads,
               [&](std::size_t i) { outcomes[i] = plan_song(load_bundle(bundle_dirs[i]), cfg); });
  std::map<std::string, std::filesystem::path> dir_of;
  for (const auto& dir : bundle_dirs) {
    // Track ids come from analysis.json; keep the directory for re-loading.
    const auto doc = parse_analysis(read_text(dir / kAnalysisFile));
    dir_of[doc.track_id] = dir;
  }
  Experiment ex = assemble(std::move(outcomes), cfg);

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "clips", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + (out_dir / "clips").string() + ": " + ec.message(), "out_dir");

  std::map<std::pair<std::string, std::string>, std::string> id_of;
  for (const auto& row : ex.manifest) id_of[{row.song_id, row.condition}] = row.clip_id;
  parallel_for(ex.plans.size(), cfg.threads, [&](std::size_t i) {
    const auto& plan = ex.plans[i];
    const auto bundle = load_bundle(dir_of.at(plan.song_id));
    const auto pair = render_clip_pair(bundle, plan, cfg.clip);
    write_wav(out_dir / "clips" / (id_of.at({plan.song_id, "modified"}) + ".wav"), pair.modified_clip);
    write_wav(out_dir / "clips" / (id_of.at({plan.song_id, "control"}) + ".wav"), pair.control_clip);
  });
  write_text(out_dir / "manifest.csv", manifest_to_csv(ex.manifest));
  write_text(out_dir / "exclusions.csv", exclusions_to_csv(ex.excluded));
  return ex;
}

std::string manifest_to_csv(const std::vector<ManifestRow>& rows) {
  std::string out = "clip_id,song_id,condition,transition_offset,raters\n";
  for (const auto& r : rows) {
    std::string raters;
    for (std::size_t i = 0; i < r.raters.size(); ++i) raters += (i ? ";" : "") + r.raters[i];
    out += r.clip_id + "," + r.song_id + "," + r.condition + "," +
           (r.transition_offset ? format_number(*r.transition_offset) : "") + "," + raters + "\n";
  }
  return out;
}

std::vector<ManifestRow> manifest_from_csv(const std::string& text) {
  const auto lines = csv_lines(text);
  if (lines.empty() || lines[0] != "clip_id,song_id,condition,transition_offset,raters")
    throw Error(ErrorCode::InvalidArgument, "manifest header must be clip_id,song_id,condition,transition_offset,raters",
                "manifest");
  std::vector<ManifestRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    if (f.size() != 5)
      throw Error(ErrorCode::InvalidArgument, "manifest row has " + std::to_string(f.size()) + " fields",
                  "manifest[" + std::to_string(i - 1) + "]");
    ManifestRow r{f[0], f[1], f[2], std::nullopt, {}};
    if (!f[3].empty()) r.transition_offset = std::stod(f[3]);
    if (!f[4].empty()) r.raters = split(f[4], ';');
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<Rating> ratings_from_csv(const std::string& text) {
  const auto lines = csv_lines(text);
  if (lines.empty() || lines[0] != "clip_id,rater_id,score")
    throw Error(ErrorCode::InvalidArgument, "ratings header must be clip_id,rater_id,score", "ratings");
  std::vector<Rating> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto field = "ratings[" + std::to_string(i - 1) + "]";
    const auto f = split(lines[i], ',');
    if (f.size() != 3) throw Error(ErrorCode::InvalidArgument, "ratings row needs three fields", field);
    int score = 0;
    try {
      std::size_t used = 0;
      score = std::stoi(f[2], &used);
      if (used != f[2].size()) score = 0;
    } catch (const std::exception&) {
      score = 0;
    }
    if (score < 1 || score > 5)
      throw Error(ErrorCode::InvalidArgument, "score must be an integer from 1 to 5, got '" + f[2] + "'",
                  field + ".score");
    out.push_back({f[0], f[1], score});
  }
  return out;
}

RatingsSummary analyze_ratings(const std::vector<ManifestRow>& manifest, const std::vector<Rating>& ratings) {
  std::map<std::string, const ManifestRow*> by_id;
  for (const auto& r : manifest) by_id[r.clip_id] = &r;
  std::map<std::string, std::pair<double, int>> per_clip;
  for (std::size_t i = 0; i < ratings.size(); ++i) {
    if (!by_id.count(ratings[i].clip_id))
      throw Error(ErrorCode::InvalidArgument, "unknown clip '" + ratings[i].clip_id + "'",
                  "ratings[" + std::to_string(i) + "].clip_id");
    auto& acc = per_clip[ratings[i].clip_id];
    acc.first += ratings[i].score;
    acc.second += 1;
  }
  std::map<std::string, std::pair<std::optional<double>, std::optional<double>>> per_song;
  for (const auto& [id, acc] : per_clip) {
    const auto* row = by_id.at(id);
    const double mean = acc.first / acc.second;
    auto& slot = per_song[row->song_id];
    (row->condition == "modified" ? slot.first : slot.second) = mean;
  }
  std::vector<double> modified, control;
  for (const auto& [song, p] : per_song) {
    if (p.first && p.second) {
      modified.push_back(*p.first);
      control.push_back(*p.second);
    }
  }
  RatingsSummary s;
  s.songs = modified.size();
  for (std::size_t i = 0; i < s.songs; ++i) {
    s.mean_modified += modified[i] / static_cast<double>(s.songs);
    s.mean_control += control[i] / static_cast<double>(s.songs);
  }
  s.test = paired_t_test(modified, control);
  return s;
}

}  // namespace cadence
