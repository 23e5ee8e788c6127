#include "cadence/service.hpp"

#include <random>
#include <thread>

#include <httplib.h>

#include "cadence/bundle.hpp"
#include "cadence/scheduler.hpp"

namespace cadence {

using nlohmann::json;

namespace {

std::string new_session_id() {
  static std::mutex m;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(m);
  static const char* hex = "0123456789abcdef";
  std::string id;
  auto v = rng();
  for (int i = 0; i < 16; ++i, v >>= 4) id.push_back(hex[v & 0xF]);
  return id;
}

/// Bundle names are single path components under the bundles root.
void check_track_name(const std::string& name) {
  if (name.empty() || name == "." || name == ".." || name.find('/') != std::string::npos ||
      name.find('\\') != std::string::npos)
    throw Error(ErrorCode::InvalidArgument, "track must name a bundle directory", "track");
}

json plan_json(const GuidedPlan& p) {
  return {{"work_s", p.work_s}, {"rest_s", p.rest_s}, {"min_span_s", p.min_span_s}, {"fade_s", p.fade_s}};
}

/// Sink that forwards to an inner sink, pacing only when speed > 0.
std::unique_ptr<AudioSink> paced(std::unique_ptr<AudioSink> inner, int sr, double speed) {
  if (speed <= 0.0) return inner;
  return std::make_unique<PacedSink>(std::move(inner), sr, speed);
}

}  // namespace

json SessionDescriptor::to_json() const {
  json j{{"session_id", session_id}, {"track_id", track_id}, {"mode", guided ? "guided" : "unguided"}};
  j["plan"] = plan ? plan_json(*plan) : json(nullptr);
  return j;
}

struct SessionManager::Session {
  SessionDescriptor descriptor;
  std::shared_ptr<const AudioBuffer> audio;
  TrackBundle analysis;  // audio-free copy for the map endpoint
  std::shared_ptr<LiveEngine> engine;
  std::unique_ptr<LiveSession> runner;
  std::mutex ack_mutex;
  std::map<std::uint64_t, PhaseAck> acks;
};

SessionManager::SessionManager(ServiceConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.render.validate();
  if (cfg_.speed < 0.0) throw Error(ErrorCode::InvalidArgument, "speed must be >= 0", "speed");
}

SessionManager::~SessionManager() {
  std::map<std::string, std::shared_ptr<Session>> sessions;
  {
    std::lock_guard lock(mutex_);
    sessions.swap(sessions_);
  }
  for (auto& [id, s] : sessions) s->runner->stop();
}

SessionDescriptor SessionManager::create(const json& body) {
  if (!body.is_object()) throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object", "body");
  if (!body.contains("track") || !body["track"].is_string())
    throw Error(ErrorCode::InvalidArgument, "track is required", "track");
  const std::string track = body["track"].get<std::string>();
  check_track_name(track);
  const std::string mode = body.value("mode", "unguided");
  if (mode != "guided" && mode != "unguided")
    throw Error(ErrorCode::InvalidArgument, "mode must be guided or unguided", "mode");
  const bool guided = mode == "guided";
  if (!guided && body.contains("plan") && !body["plan"].is_null())
    throw Error(ErrorCode::InvalidArgument, "plan is only valid for guided sessions", "plan");

  Phase initial = Phase::Rest;
  if (body.contains("phase")) {
    if (guided) throw Error(ErrorCode::PhaseInGuidedMode, "guided sessions do not take a phase", "phase");
    initial = parse_phase(body["phase"].get<std::string>());
  }

  auto session = std::make_shared<Session>();
  TrackBundle bundle = load_bundle(cfg_.bundles_dir / track);
  const TrackMap map = cadence::track_map(bundle, cfg_.analysis);
  session->descriptor.session_id = new_session_id();
  session->descriptor.track_id = bundle.track_id;
  session->descriptor.guided = guided;
  session->audio = std::make_shared<const AudioBuffer>(std::move(bundle.mixture));
  bundle.mixture = AudioBuffer(session->audio->num_channels(), 0, session->audio->sample_rate);
  bundle.drum_stem = AudioBuffer(bundle.drum_stem.num_channels(), 0, bundle.drum_stem.sample_rate);
  bundle.partition = map.partition;
  bundle.cutpoints = map.cuts.intra_segment;
  session->analysis = std::move(bundle);

  if (guided) {
    GuidedPlan plan;
    if (body.contains("plan") && body["plan"].is_object()) {
      const auto& p = body["plan"];
      plan.work_s = p.value("work_s", plan.work_s);
      plan.rest_s = p.value("rest_s", plan.rest_s);
      plan.min_span_s = p.value("min_span_s", plan.min_span_s);
      plan.fade_s = p.value("fade_s", plan.fade_s);
    }
    plan.validate();
    session->descriptor.plan = plan;
    const auto schedule = guided_plan(map.partition, map.cuts, plan).schedule;
    session->engine = std::make_shared<LiveEngine>(session->audio, map, session->descriptor.track_id, schedule,
                                                   cfg_.render);
  } else {
    session->engine = std::make_shared<LiveEngine>(session->audio, map, session->descriptor.track_id, cfg_.render,
                                                   cfg_.scheduler, initial);
  }

  const int ch = session->audio->num_channels();
  const int sr = session->audio->sample_rate;
  auto sink = cfg_.sink_factory ? cfg_.sink_factory(ch, sr) : std::make_unique<NullSink>();
  session->runner = std::make_unique<LiveSession>(session->engine, paced(std::move(sink), sr, cfg_.speed));
  session->runner->start();

  std::lock_guard lock(mutex_);
  sessions_[session->descriptor.session_id] = session;
  return session->descriptor;
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'", "session_id");
  return it->second;
}

bool SessionManager::exists(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return sessions_.count(id) > 0;
}

json SessionManager::post_phase(const std::string& id, const json& body) {
  const auto s = find(id);
  if (!body.is_object() || body.value("type", "") != "phase")
    throw Error(ErrorCode::InvalidArgument, "command type must be \"phase\"", "type");
  if (!body.contains("value") || !body["value"].is_string())
    throw Error(ErrorCode::InvalidArgument, "value must be Work or Rest", "value");
  const Phase phase = parse_phase(body["value"].get<std::string>());
  const auto seq = s->engine->post_phase(phase);

  const auto deadline = std::chrono::steady_clock::now() + cfg_.ack_timeout;
  for (;;) {
    {
      std::lock_guard lock(s->ack_mutex);
      for (const auto& a : s->engine->take_acks()) s->acks[a.seq] = a;
      const auto it = s->acks.find(seq);
      if (it != s->acks.end()) {
        const auto ack = it->second;
        s->acks.erase(it);
        return {{"seq", ack.seq}, {"phase", to_string(ack.phase)}, {"effective_at", ack.effective_at}};
      }
    }
    if (s->engine->finished())
      throw Error(ErrorCode::InvalidArgument, "playback has finished; the command was not applied", "session_id");
    if (std::chrono::steady_clock::now() > deadline)
      throw Error(ErrorCode::InvalidArgument, "the engine did not acknowledge the command in time", "session_id");
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
}

json SessionManager::track_map(const std::string& id) const {
  const auto s = find(id);
  return json::parse(serialize_analysis(s->analysis.document()));
}

Tick SessionManager::tick(const std::string& id) const { return find(id)->engine->tick(); }

json SessionManager::log(const std::string& id) const {
  const auto s = find(id);
  // The log belongs to the audio thread until playback ends.
  if (s->runner->running())
    throw Error(ErrorCode::InvalidArgument, "the decision log is available once playback has stopped", "session_id");
  return json::parse(decision_log_to_json(s->engine->log()));
}

SessionDescriptor SessionManager::describe(const std::string& id) const { return find(id)->descriptor; }

std::vector<SessionDescriptor> SessionManager::list() const {
  std::lock_guard lock(mutex_);
  std::vector<SessionDescriptor> out;
  for (const auto& [id, s] : sessions_) out.push_back(s->descriptor);
  return out;
}

void SessionManager::remove(const std::string& id) {
  std::shared_ptr<Session> s;
  {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'", "session_id");
    s = it->second;
    sessions_.erase(it);
  }
  s->runner->stop();
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownSession: return 404;
    case ErrorCode::MissingStem:
    case ErrorCode::IoError: return 404;
    case ErrorCode::PhaseInGuidedMode: return 409;
    case ErrorCode::SinkUnavailable: return 503;
    default: return 400;
  }
}

// ---------------------------------------------------------------------------

struct HttpService::Impl {
  SessionManager& sessions;
  httplib::Server server;

  explicit Impl(SessionManager& s) : sessions(s) {}

  static void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <typename Fn>
  static void guarded(httplib::Response& res, Fn fn) {
    try {
      fn();
    } catch (const Error& e) {
      res.status = http_status(e.code());
      res.set_content(e.to_json(), "application/json");
    } catch (const json::exception& e) {
      res.status = 400;
      res.set_content(Error(ErrorCode::InvalidArgument, std::string("malformed JSON: ") + e.what(), "body").to_json(),
                      "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(json{{"error", "Internal"}, {"message", e.what()}, {"field", ""}}.dump(), "application/json");
    }
  }

  static json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    return json::parse(req.body);
  }

  void routes() {
    server.Get("/health", [](const httplib::Request&, httplib::Response& res) { reply(res, 200, {{"ok", true}}); });

    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 201, sessions.create(parse_body(req)).to_json()); });
    });
    server.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        json out = json::array();
        for (const auto& d : sessions.list()) out.push_back(d.to_json());
        reply(res, 200, out);
      });
    });
    server.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, sessions.describe(req.matches[1]).to_json()); });
    });
    server.Delete(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        sessions.remove(req.matches[1]);
        reply(res, 200, {{"deleted", std::string(req.matches[1])}});
      });
    });
    server.Post(R"(/sessions/([^/]+)/phase)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, sessions.post_phase(req.matches[1], parse_body(req))); });
    });
    server.Get(R"(/sessions/([^/]+)/map)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, sessions.track_map(req.matches[1])); });
    });
    server.Get(R"(/sessions/([^/]+)/tick)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        res.status = 200;
        res.set_content(tick_to_json(sessions.tick(req.matches[1])), "application/json");
      });
    });
    server.Get(R"(/sessions/([^/]+)/log)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, sessions.log(req.matches[1])); });
    });
    server.Get(R"(/sessions/([^/]+)/ticks)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = req.matches[1];
        sessions.describe(id);  // 404 before the stream starts
        long max_events = -1;
        if (req.has_param("max")) max_events = std::stol(req.get_param_value("max"));
        const auto period = std::chrono::duration<double>(1.0 / sessions.config().tick_hz);
        auto sent = std::make_shared<long>(0);
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream", [this, id, max_events, period, sent](std::size_t, httplib::DataSink& sink) {
              if (!sessions.exists(id)) {
                sink.done();
                return true;
              }
              const Tick t = sessions.tick(id);
              const std::string event = "data: " + tick_to_json(t) + "\n\n";
              if (!sink.write(event.data(), event.size())) return false;
              ++*sent;
              if (t.finished || (max_events >= 0 && *sent >= max_events)) {
                sink.done();
                return true;
              }
              std::this_thread::sleep_for(period);
              return true;
            });
      });
    });
  }
};

HttpService::HttpService(SessionManager& sessions) : impl_(std::make_unique<Impl>(sessions)) { impl_->routes(); }

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) throw Error(ErrorCode::IoError, "cannot bind " + host, "port");
    return p;
  }
  if (!impl_->server.bind_to_port(host, port))
    throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port), "port");
  return port;
}

void HttpService::listen() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace cadence
