// Command-line front end: analysis, planning, rendering, live playback, the
// session service and listening-test clip generation.

#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cadence/bundle.hpp"
#include "cadence/error.hpp"
#include "cadence/eval.hpp"
#include "cadence/live.hpp"
#include "cadence/pipeline.hpp"
#include "cadence/renderer.hpp"
#include "cadence/scheduler.hpp"
#include "cadence/service.hpp"
#include "cadence/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cadence;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + p.string(), p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + p.string(), p.string());
  out << text;
}

/// Writes to `path`, or stdout when it is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file(path, text);
  }
}

void warn(const std::string& message) { std::cerr << json{{"warning", message}}.dump() << "\n"; }

std::pair<double, double> parse_work_rest(const std::string& text) {
  const auto comma = text.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument("no comma");
    return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "expected WORK,REST in seconds, got '" + text + "'", "guided");
  }
}

struct ScriptedPhase {
  double at = 0.0;
  Phase phase = Phase::Rest;
};

/// "12.5:Work,40:Rest" -> commands keyed by output time in seconds.
std::vector<ScriptedPhase> parse_script(const std::string& text) {
  std::vector<ScriptedPhase> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw Error(ErrorCode::InvalidArgument, "script items look like SECONDS:Work", "script");
    double at = 0.0;
    try {
      at = std::stod(item.substr(0, colon));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad time in script item '" + item + "'", "script");
    }
    out.push_back({at, parse_phase(item.substr(colon + 1))});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.at < b.at; });
  return out;
}

SampleFormat parse_format(const std::string& f) {
  if (f == "s16") return SampleFormat::Int16;
  if (f == "s24") return SampleFormat::Int24;
  if (f == "f32") return SampleFormat::Float32;
  throw Error(ErrorCode::InvalidArgument, "format must be s16, s24 or f32", "format");
}

int cmd_analyze(const std::string& bundle_dir, const std::string& out, bool write_back) {
  auto bundle = load_bundle(bundle_dir);
  const auto analysis = analyze_track(bundle);
  for (const auto& w : analysis.warnings) warn(w);
  bundle = with_analysis(std::move(bundle), analysis);
  const auto text = serialize_analysis(bundle.document());
  if (write_back) {
    write_file(fs::path(bundle_dir) / kAnalysisFile, text);
    if (!out.empty()) emit(out, text);
  } else {
    emit(out, text);
  }
  return 0;
}

int cmd_plan(const std::string& bundle_dir, double work, double rest, const std::string& out) {
  const auto bundle = load_bundle(bundle_dir);
  const auto map = track_map(bundle);
  GuidedPlan plan;
  plan.work_s = work;
  plan.rest_s = rest;
  plan.validate();
  if (!map.partition.has_high()) warn("track has no High segment; the plan only shapes rest time");
  emit(out, schedule_to_json(guided_plan(map.partition, map.cuts, plan).schedule));
  return 0;
}

int cmd_render(const std::string& bundle_dir, const std::string& schedule_path, const std::string& out,
               const std::string& format) {
  const auto bundle = load_bundle(bundle_dir);
  const auto schedule = schedule_from_json(read_file(schedule_path));
  const auto audio = render_schedule(bundle.mixture, bundle.beats, schedule);
  write_wav(out, audio, parse_format(format));
  std::cout << json{{"output", out}, {"frames", audio.frames()}, {"duration_s", audio.duration()}}.dump() << "\n";
  return 0;
}

struct PlayOptions {
  std::string guided;
  std::string out;
  bool to_stdout = false;
  double speed = 1.0;
  std::string script;
  std::string initial = "Rest";
  bool read_stdin = true;
  bool ticks = false;
  std::string log;
};

int cmd_play(const std::string& bundle_dir, const PlayOptions& o) {
  auto bundle = load_bundle(bundle_dir);
  const auto map = track_map(bundle);
  auto audio = std::make_shared<const AudioBuffer>(std::move(bundle.mixture));
  std::shared_ptr<LiveEngine> engine;
  if (!o.guided.empty()) {
    if (!o.script.empty()) throw Error(ErrorCode::PhaseInGuidedMode, "guided playback takes no phase script", "script");
    const auto [work, rest] = parse_work_rest(o.guided);
    GuidedPlan plan;
    plan.work_s = work;
    plan.rest_s = rest;
    plan.validate();
    engine = std::make_shared<LiveEngine>(audio, map, bundle.track_id, guided_plan(map.partition, map.cuts, plan).schedule);
  } else {
    engine = std::make_shared<LiveEngine>(audio, map, bundle.track_id, RenderConfig{}, SchedulerConfig{},
                                          parse_phase(o.initial));
  }

  std::unique_ptr<AudioSink> sink;
  if (o.to_stdout) {
    sink = std::make_unique<RawStdoutSink>();
  } else if (!o.out.empty()) {
    sink = std::make_unique<WavFileSink>(o.out, audio->num_channels(), audio->sample_rate);
  } else {
    sink = std::make_unique<NullSink>();
  }
  PacedSink* pacer = nullptr;
  if (o.speed > 0.0) {
    auto p = std::make_unique<PacedSink>(std::move(sink), audio->sample_rate, o.speed);
    pacer = p.get();
    sink = std::move(p);
  }

  // Interactive control: one phase per line ("work", "rest", "w", "r").
  if (o.read_stdin && o.guided.empty() && o.script.empty()) {
    std::thread([engine] {
      std::string line;
      while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        std::string v = line;
        std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
        if (v == "w") v = "work";
        if (v == "r") v = "rest";
        try {
          engine->post_phase(parse_phase(v));
        } catch (const Error& e) {
          std::cerr << e.to_json() << "\n";
        }
      }
    }).detach();
  }

  const auto script = o.script.empty() ? std::vector<ScriptedPhase>{} : parse_script(o.script);
  std::size_t next_cmd = 0;
  std::vector<std::vector<float>> block;
  std::uint64_t frames = 0;
  double last_tick = -1.0;
  for (;;) {
    const double now = static_cast<double>(frames) / audio->sample_rate;
    while (next_cmd < script.size() && script[next_cmd].at <= now) engine->post_phase(script[next_cmd++].phase);
    const auto n = engine->process_block(block);
    if (n == 0) break;
    sink->write(block, n);
    frames += n;
    if (o.ticks && !o.to_stdout && now - last_tick >= 0.05) {
      std::cout << tick_to_json(engine->tick()) << "\n";
      last_tick = now;
    }
  }
  sink->close();
  if (!o.log.empty()) write_file(o.log, decision_log_to_json(engine->log()));
  std::size_t jumps = 0;
  for (const auto& e : engine->log().entries)
    if (e.action != "phase") ++jumps;
  const json summary{{"frames", frames},
                     {"duration_s", static_cast<double>(frames) / audio->sample_rate},
                     {"jumps", jumps},
                     {"underruns", pacer ? pacer->underruns() : 0}};
  (o.to_stdout ? std::cerr : std::cout) << summary.dump() << "\n";
  return 0;
}

std::atomic<HttpService*> g_service{nullptr};

int cmd_serve(const std::string& host, int port, const std::string& bundles, double speed) {
  ServiceConfig cfg;
  cfg.bundles_dir = bundles;
  cfg.speed = speed;
  SessionManager sessions(cfg);
  HttpService http(sessions);
  const int bound = http.bind(host, port);
  std::cout << json{{"listening", host + ":" + std::to_string(bound)}, {"bundles", bundles}}.dump() << std::endl;
  g_service = &http;
  std::signal(SIGINT, [](int) {
    if (auto* s = g_service.load()) s->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (auto* s = g_service.load()) s->stop();
  });
  http.listen();
  g_service = nullptr;
  return 0;
}

int cmd_eval_clips(const std::string& dir, const std::string& out, std::uint64_t seed, std::size_t raters,
                   std::size_t per_clip, bool avoid_boundaries) {
  std::vector<fs::path> bundles;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "not a directory: " + dir, "bundle-dir");
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory() && fs::exists(entry.path() / kAnalysisFile)) bundles.push_back(entry.path());
  std::sort(bundles.begin(), bundles.end());
  ExperimentConfig cfg;
  cfg.seed = seed;
  cfg.raters = raters;
  cfg.assignments_per_clip = per_clip;
  cfg.clip.avoid_boundaries = avoid_boundaries;
  const auto ex = build_experiment(bundles, out, cfg);
  for (const auto& w : ex.warnings) warn(w);
  json excluded = json::array();
  for (const auto& e : ex.excluded) excluded.push_back({{"song_id", e.song_id}, {"reason", to_string(e.reason)}});
  std::cout << json{{"songs", bundles.size()},
                    {"eligible", ex.plans.size()},
                    {"clips", ex.manifest.size()},
                    {"excluded", excluded},
                    {"manifest", (fs::path(out) / "manifest.csv").string()}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_eval_ratings(const std::string& manifest, const std::string& ratings) {
  const auto s = analyze_ratings(manifest_from_csv(read_file(manifest)), ratings_from_csv(read_file(ratings)));
  std::cout << json{{"songs", s.songs},
                    {"mean_modified", s.mean_modified},
                    {"mean_control", s.mean_control},
                    {"t", s.test.t},
                    {"df", s.test.df},
                    {"p", s.test.p}}
                   .dump()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structure-aware adaptive music playback for exercise"};
  app.require_subcommand(1);

  std::string bundle, out, schedule, format = "s16", bundle_dir;
  bool write_back = false;
  auto* analyze = app.add_subcommand("analyze", "Label intensity and find cutpoints; prints analysis JSON");
  analyze->add_option("bundle", bundle, "Bundle directory")->required();
  analyze->add_option("-o,--output", out, "Write JSON here instead of stdout");
  analyze->add_flag("--write", write_back, "Update the bundle's analysis.json");

  double work = 40.0, rest = 30.0;
  auto* plan = app.add_subcommand("plan", "Plan a guided work/rest schedule");
  plan->add_option("bundle", bundle, "Bundle directory")->required();
  plan->add_option("--work", work, "Work interval (s)");
  plan->add_option("--rest", rest, "Rest interval (s)");
  plan->add_option("-o,--output", out, "Write JSON here instead of stdout");

  auto* render = app.add_subcommand("render", "Render a schedule to WAV");
  render->add_option("bundle", bundle, "Bundle directory")->required();
  render->add_option("schedule", schedule, "Schedule JSON")->required();
  render->add_option("-o,--output", out, "Output WAV")->required();
  render->add_option("--format", format, "s16, s24 or f32");

  PlayOptions play_opts;
  auto* play = app.add_subcommand("play", "Live playback; type work/rest lines on stdin to steer");
  play->add_option("bundle", bundle, "Bundle directory")->required();
  play->add_option("--guided", play_opts.guided, "WORK,REST seconds for guided mode");
  play->add_option("--out", play_opts.out, "Also stream the output to this WAV file");
  play->add_flag("--stdout", play_opts.to_stdout, "Raw interleaved float32 on stdout");
  play->add_option("--speed", play_opts.speed, "Pacing relative to real time; 0 runs unpaced");
  play->add_option("--script", play_opts.script, "Scripted phases, e.g. 10:Work,50:Rest (output seconds)");
  play->add_option("--phase", play_opts.initial, "Initial phase");
  play->add_flag("!--no-stdin", play_opts.read_stdin, "Ignore stdin");
  play->add_flag("--ticks", play_opts.ticks, "Print tick JSON lines");
  play->add_option("--log", play_opts.log, "Write the decision log here");

  int port = 8080;
  std::string host = "127.0.0.1", bundles = ".";
  double speed = 1.0;
  if (const char* env = std::getenv("RISE_PORT")) {
    try {
      port = std::stoi(env);
    } catch (const std::exception&) {
      std::cerr << Error(ErrorCode::InvalidArgument, "RISE_PORT must be an integer", "RISE_PORT").to_json() << "\n";
      return 2;
    }
  }
  auto* serve = app.add_subcommand("serve", "Run the session service");
  serve->add_option("--port", port, "TCP port (default: $RISE_PORT or 8080)");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--bundles", bundles, "Directory of bundle directories");
  serve->add_option("--speed", speed, "Session pacing relative to real time");

  std::uint64_t seed = 0;
  std::size_t raters = 6, per_clip = 2;
  bool avoid = false;
  auto* clips = app.add_subcommand("eval-clips", "Generate listening-test clips and a manifest");
  clips->add_option("bundle-dir", bundle_dir, "Directory of bundle directories")->required();
  clips->add_option("-o,--output", out, "Output directory")->required();
  clips->add_option("--seed", seed, "Master seed");
  clips->add_option("--raters", raters, "Number of raters");
  clips->add_option("--per-clip", per_clip, "Raters assigned to each clip");
  clips->add_flag("--avoid-boundaries", avoid, "Keep control clips 5 s away from segment boundaries");

  std::string manifest, ratings;
  auto* rate = app.add_subcommand("eval-ratings", "Paired t-test on collected ratings");
  rate->add_option("manifest", manifest, "manifest.csv")->required();
  rate->add_option("ratings", ratings, "ratings CSV (clip_id,rater_id,score)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << Error(ErrorCode::InvalidArgument, e.what(), "args").to_json() << "\n";
    return 2;
  }

  try {
    if (*analyze) return cmd_analyze(bundle, out, write_back);
    if (*plan) return cmd_plan(bundle, work, rest, out);
    if (*render) return cmd_render(bundle, schedule, out, format);
    if (*play) return cmd_play(bundle, play_opts);
    if (*serve) return cmd_serve(host, port, bundles, speed);
    if (*clips) return cmd_eval_clips(bundle_dir, out, seed, raters, per_clip, avoid);
    if (*rate) return cmd_eval_ratings(manifest, ratings);
  } catch (const Error& e) {
    std::cerr << e.to_json() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "Internal"}, {"message", e.what()}, {"field", ""}}.dump() << "\n";
    return 1;
  }
  return 0;
}
