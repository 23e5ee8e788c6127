#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cadence/error.hpp"
#include "cadence/live.hpp"
#include "cadence/pipeline.hpp"

namespace cadence {

struct ServiceConfig {
  /// Sessions name tracks by bundle directory under this root.
  std::filesystem::path bundles_dir = ".";
  /// Playback speed relative to real time. 0 renders as fast as possible.
  double speed = 1.0;
  double tick_hz = 20.0;
  std::chrono::milliseconds ack_timeout{2000};
  RenderConfig render;
  SchedulerConfig scheduler;
  AnalysisConfig analysis;
  /// Where session audio goes; NullSink when unset.
  std::function<std::unique_ptr<AudioSink>(int channels, int sample_rate)> sink_factory;
};

struct SessionDescriptor {
  std::string session_id;
  std::string track_id;
  bool guided = false;
  /// Present iff guided.
  std::optional<GuidedPlan> plan;

  nlohmann::json to_json() const;
};

/// Owns live sessions. Transport-agnostic: every method takes and returns
/// JSON-ready values and reports problems as cadence::Error.
class SessionManager {
 public:
  explicit SessionManager(ServiceConfig cfg);
  ~SessionManager();

  /// Body: {"track": name, "mode": "guided"|"unguided", "plan": {"work_s", "rest_s"}, "phase": "Work"|"Rest"}.
  SessionDescriptor create(const nlohmann::json& body);
  /// Body: {"type": "phase", "value": "Work"|"Rest"}. Blocks until the engine
  /// acknowledges; returns {"seq", "phase", "effective_at"}.
  nlohmann::json post_phase(const std::string& id, const nlohmann::json& body);
  /// {track_id, sample_rate, beats, sections, tau, segments, cutpoints}, the
  /// same layout as analysis.json.
  nlohmann::json track_map(const std::string& id) const;
  Tick tick(const std::string& id) const;
  nlohmann::json log(const std::string& id) const;
  SessionDescriptor describe(const std::string& id) const;
  std::vector<SessionDescriptor> list() const;
  void remove(const std::string& id);
  bool exists(const std::string& id) const;

  const ServiceConfig& config() const { return cfg_; }

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;

  ServiceConfig cfg_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

/// HTTP status for an error code.
int http_status(ErrorCode code);

/// REST + server-sent events front end for a SessionManager.
///   POST   /sessions                 create
///   GET    /sessions                 list
///   GET    /sessions/{id}            describe
///   DELETE /sessions/{id}            stop and forget
///   POST   /sessions/{id}/phase      phase command, replies with the ack
///   GET    /sessions/{id}/map        track map
///   GET    /sessions/{id}/tick       latest tick
///   GET    /sessions/{id}/ticks      tick stream (text/event-stream), ?max=N
///   GET    /sessions/{id}/log        decision log
class HttpService {
 public:
  explicit HttpService(SessionManager& sessions);
  ~HttpService();

  /// Binds to host:port (port 0 picks a free one) and returns the port.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Call after bind().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cadence
