#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cadence/renderer.hpp"
#include "cadence/scheduler.hpp"
#include "cadence/spsc.hpp"

namespace cadence {

/// One entry of the live decision log. Times are seconds: `wall_time` on the
/// output clock, `source_time` in the track.
struct DecisionEntry {
  double wall_time = 0.0;
  double source_time = 0.0;
  /// "phase", "loop", "skip" or "filter".
  std::string action;
  std::optional<Phase> phase;
  double origin = 0.0;
  double destination = 0.0;

  bool operator==(const DecisionEntry&) const = default;
};

struct DecisionLog {
  std::string track_id;
  int sample_rate = 0;
  std::vector<DecisionEntry> entries;
};

std::string decision_log_to_json(const DecisionLog& log);
DecisionLog decision_log_from_json(const std::string& text);

/// Rebuilds the schedule a live session played: [0, o1), [d1, o2), ...,
/// [dn, track_end). Replaying it offline reproduces the live output.
AdaptationSchedule schedule_from_log(const DecisionLog& log, double track_end);

/// Snapshot published by the audio side after every processed block.
struct Tick {
  double wall_time = 0.0;
  double t = 0.0;
  int segment = -1;
  PlaybackMode mode = PlaybackMode::Unmodified;
  Phase phase = Phase::Rest;
  bool has_next_jump = false;
  double next_origin = 0.0;
  double next_destination = 0.0;
  bool finished = false;
};

/// {"t", "seg", "mode", "phase", "next_jump", "wall_time", "finished"}
std::string tick_to_json(const Tick& tick);

struct PhaseAck {
  std::uint64_t seq = 0;
  Phase phase = Phase::Rest;
  /// Source time of the beat at which the phase takes effect.
  double effective_at = 0.0;
};

/// Deterministic playback engine. Phase commands can be posted from any
/// thread; process_block() must be called from a single audio thread.
class LiveEngine {
 public:
  static constexpr std::size_t kBlockFrames = 1024;

  /// Unguided: decisions come from the state machine as phases change.
  LiveEngine(std::shared_ptr<const AudioBuffer> audio, TrackMap map, std::string track_id, RenderConfig render = {},
             SchedulerConfig sched = {}, Phase initial = Phase::Rest);
  /// Guided: plays a precomputed schedule; phase commands are rejected.
  LiveEngine(std::shared_ptr<const AudioBuffer> audio, TrackMap map, std::string track_id,
             const AdaptationSchedule& schedule, RenderConfig render = {});

  bool guided() const { return guided_; }
  int sample_rate() const { return audio_->sample_rate; }
  int num_channels() const { return audio_->num_channels(); }

  /// Queues a phase change. Throws PhaseInGuidedMode in guided mode and
  /// InvalidArgument if the command queue is full. Returns a sequence number.
  std::uint64_t post_phase(Phase phase);

  /// Renders up to `frames` frames into `out` (resized as needed). Returns the
  /// number produced; 0 once playback has finished.
  std::size_t process_block(std::vector<std::vector<float>>& out, std::size_t frames = kBlockFrames);

  bool finished() const { return finished_.load(std::memory_order_acquire); }
  Tick tick() const { return snapshot_.load(); }
  /// Acknowledgements for processed phase commands, oldest first.
  std::vector<PhaseAck> take_acks();

  /// Only safe from the audio thread or after playback stopped.
  const DecisionLog& log() const { return log_; }
  const TrackMap& map() const { return map_; }

 private:
  struct PendingPhase {
    std::uint64_t seq = 0;
    Phase phase = Phase::Rest;
    std::int64_t effect_sample = 0;
    double effect_time = 0.0;
    /// Span generation the effect sample refers to.
    std::uint64_t gen = 0;
  };
  struct Committed {
    Cutpoint cut;
    PlaybackMode mode = PlaybackMode::Unmodified;
    Transition kind = Transition::Cutpoint;
    bool started = false;
    std::int64_t centre_frame = 0;
  };
  struct Command {
    std::uint64_t seq = 0;
    Phase phase = Phase::Rest;
  };

  void drain_commands();
  void apply_phase(const PendingPhase& p, double wall_time, double source_time);
  void decide();
  void try_commit();
  void on_jump_done();
  void handle_events();
  void publish();
  int segment_index(double t) const;
  std::int64_t sample_of(double t) const { return audio_->to_sample(t); }
  double time_of(std::int64_t s) const { return static_cast<double>(s) / audio_->sample_rate; }
  double wall_now() const { return time_of(renderer_.frames_rendered()); }

  std::shared_ptr<const AudioBuffer> audio_;
  TrackMap map_;
  RenderConfig render_cfg_;
  SchedulerConfig sched_cfg_;
  SpliceRenderer renderer_;
  bool guided_ = false;

  Phase phase_ = Phase::Rest;
  PlaybackState state_;
  std::optional<Committed> committed_;
  std::optional<std::int64_t> rejected_origin_;
  int loop_segment_ = -1;
  std::deque<PendingPhase> pending_;
  std::uint64_t span_gen_ = 0;
  DecisionLog log_;

  std::mutex producer_mutex_;
  std::uint64_t next_seq_ = 1;
  SpscQueue<Command, 256> commands_;
  SpscQueue<PhaseAck, 256> acks_;
  SnapshotSlot<Tick> snapshot_;
  std::atomic<bool> finished_{false};
};

/// Destination for rendered blocks.
class AudioSink {
 public:
  virtual ~AudioSink() = default;
  virtual void write(const std::vector<std::vector<float>>& block, std::size_t frames) = 0;
  virtual void close() {}
};

class NullSink : public AudioSink {
 public:
  void write(const std::vector<std::vector<float>>&, std::size_t frames) override { frames_ += frames; }
  std::size_t frames() const { return frames_; }

 private:
  std::size_t frames_ = 0;
};

/// Keeps everything in memory.
class CaptureSink : public AudioSink {
 public:
  CaptureSink(int channels, int sample_rate) : buffer_(channels, 0, sample_rate) {}
  void write(const std::vector<std::vector<float>>& block, std::size_t frames) override;
  const AudioBuffer& buffer() const { return buffer_; }

 private:
  AudioBuffer buffer_;
};

/// Streams 32-bit float WAV to disk, fixing up the header on close().
class WavFileSink : public AudioSink {
 public:
  WavFileSink(const std::string& path, int channels, int sample_rate);
  ~WavFileSink() override;
  void write(const std::vector<std::vector<float>>& block, std::size_t frames) override;
  void close() override;

 private:
  std::FILE* file_ = nullptr;
  int channels_;
  int sample_rate_;
  std::uint64_t frames_ = 0;
};

/// Interleaved float32 little-endian on stdout, for piping into a player.
class RawStdoutSink : public AudioSink {
 public:
  void write(const std::vector<std::vector<float>>& block, std::size_t frames) override;
};

/// Paces another sink to real time (scaled by `speed`). Blocks that are late
/// count as underruns; the device would have played silence meanwhile.
class PacedSink : public AudioSink {
 public:
  PacedSink(std::unique_ptr<AudioSink> inner, int sample_rate, double speed = 1.0);
  void write(const std::vector<std::vector<float>>& block, std::size_t frames) override;
  void close() override { inner_->close(); }
  std::size_t underruns() const { return underruns_; }

 private:
  std::unique_ptr<AudioSink> inner_;
  int sample_rate_;
  double speed_;
  std::optional<std::chrono::steady_clock::time_point> start_;
  std::uint64_t frames_ = 0;
  std::size_t underruns_ = 0;
};

/// Runs a LiveEngine on its own thread, feeding a sink block by block.
class LiveSession {
 public:
  LiveSession(std::shared_ptr<LiveEngine> engine, std::unique_ptr<AudioSink> sink);
  ~LiveSession();
  LiveSession(const LiveSession&) = delete;
  LiveSession& operator=(const LiveSession&) = delete;

  void start();
  /// Stops the thread and closes the sink. Idempotent.
  void stop();
  /// Blocks until playback ends on its own or stop() is called.
  void join();
  bool running() const { return running_.load(); }
  LiveEngine& engine() { return *engine_; }
  const AudioSink& sink() const { return *sink_; }

 private:
  void run();

  std::shared_ptr<LiveEngine> engine_;
  std::unique_ptr<AudioSink> sink_;
  std::thread thread_;
  std::atomic<bool> stop_{false};
  std::atomic<bool> running_{false};
  std::mutex join_mutex_;
};

}  // namespace cadence
