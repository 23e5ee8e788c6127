#include "cadence/live.hpp"

#include <algorithm>
#include <cstring>

#include <nlohmann/json.hpp>

#include "cadence/error.hpp"

namespace cadence {

namespace {

const char* jump_action(PlaybackMode mode) {
  switch (mode) {
    case PlaybackMode::Loop: return "loop";
    case PlaybackMode::Skip: return "skip";
    case PlaybackMode::FilterTransition: return "filter";
    case PlaybackMode::Unmodified: break;
  }
  return "jump";
}

bool is_jump_action(const std::string& a) { return a == "loop" || a == "skip" || a == "filter"; }

void put_u16(std::FILE* f, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF), static_cast<unsigned char>(v >> 8)};
  std::fwrite(b, 1, 2, f);
}

void put_u32(std::FILE* f, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF), static_cast<unsigned char>((v >> 8) & 0xFF),
                              static_cast<unsigned char>((v >> 16) & 0xFF), static_cast<unsigned char>(v >> 24)};
  std::fwrite(b, 1, 4, f);
}

std::vector<char> interleave(const std::vector<std::vector<float>>& block, std::size_t frames) {
  const std::size_t channels = block.size();
  std::vector<char> bytes(frames * channels * 4);
  std::size_t k = 0;
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      std::uint32_t raw = 0;
      std::memcpy(&raw, &block[c][i], 4);
      for (int b = 0; b < 4; ++b) bytes[k++] = static_cast<char>((raw >> (8 * b)) & 0xFF);
    }
  }
  return bytes;
}

}  // namespace

// ---------------------------------------------------------------------------
// Log and tick serialization

std::string decision_log_to_json(const DecisionLog& log) {
  nlohmann::json j;
  j["track_id"] = log.track_id;
  j["sample_rate"] = log.sample_rate;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : log.entries) {
    nlohmann::json o{{"wall_time", e.wall_time}, {"source_time", e.source_time}, {"action", e.action}};
    if (e.phase) o["phase"] = to_string(*e.phase);
    if (is_jump_action(e.action)) {
      o["origin"] = e.origin;
      o["dest"] = e.destination;
    }
    j["entries"].push_back(std::move(o));
  }
  return j.dump(2) + "\n";
}

DecisionLog decision_log_from_json(const std::string& text) {
  DecisionLog log;
  try {
    const auto j = nlohmann::json::parse(text);
    log.track_id = j.value("track_id", "");
    log.sample_rate = j.value("sample_rate", 0);
    for (const auto& o : j.at("entries")) {
      DecisionEntry e;
      e.wall_time = o.at("wall_time").get<double>();
      e.source_time = o.at("source_time").get<double>();
      e.action = o.at("action").get<std::string>();
      if (o.contains("phase")) e.phase = parse_phase(o.at("phase").get<std::string>());
      if (is_jump_action(e.action)) {
        e.origin = o.at("origin").get<double>();
        e.destination = o.at("dest").get<double>();
      }
      log.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed decision log: ") + ex.what(), "log");
  }
  return log;
}

AdaptationSchedule schedule_from_log(const DecisionLog& log, double track_end) {
  AdaptationSchedule out;
  double start = 0.0;
  Transition into = Transition::Natural;
  for (const auto& e : log.entries) {
    if (!is_jump_action(e.action)) continue;
    out.spans.push_back({start, e.origin, into});
    start = e.destination;
    into = e.action == "filter" ? Transition::Filter : Transition::Cutpoint;
  }
  out.spans.push_back({start, track_end, into});
  return out;
}

std::string tick_to_json(const Tick& tick) {
  nlohmann::json j{{"t", tick.t},
                   {"seg", tick.segment},
                   {"mode", to_string(tick.mode)},
                   {"phase", to_string(tick.phase)},
                   {"wall_time", tick.wall_time},
                   {"finished", tick.finished}};
  if (tick.has_next_jump) {
    j["next_jump"] = {{"origin", tick.next_origin}, {"dest", tick.next_destination}};
  } else {
    j["next_jump"] = nullptr;
  }
  return j.dump();
}

// ---------------------------------------------------------------------------
// LiveEngine

LiveEngine::LiveEngine(std::shared_ptr<const AudioBuffer> audio, TrackMap map, std::string track_id,
                       RenderConfig render, SchedulerConfig sched, Phase initial)
    : audio_(std::move(audio)),
      map_(std::move(map)),
      render_cfg_(render),
      sched_cfg_(sched),
      renderer_(*audio_, map_.beats, render_cfg_),
      phase_(initial) {
  sched_cfg_.filter_sweep_beats = render_cfg_.filter_sweep_beats;
  log_.track_id = std::move(track_id);
  log_.sample_rate = audio_->sample_rate;
  renderer_.start({0, renderer_.source_frames(), Transition::Natural});
  publish();
}

LiveEngine::LiveEngine(std::shared_ptr<const AudioBuffer> audio, TrackMap map, std::string track_id,
                       const AdaptationSchedule& schedule, RenderConfig render)
    : audio_(std::move(audio)),
      map_(std::move(map)),
      render_cfg_(render),
      renderer_(*audio_, map_.beats, render_cfg_),
      guided_(true) {
  log_.track_id = std::move(track_id);
  log_.sample_rate = audio_->sample_rate;
  const auto spans = to_sample_spans(schedule, *audio_, render_cfg_);
  if (spans.empty()) throw Error(ErrorCode::InvalidSchedule, "schedule has no spans", "spans");
  renderer_.start(spans.front());
  for (std::size_t i = 1; i < spans.size(); ++i) renderer_.queue(spans[i]);
  publish();
}

std::uint64_t LiveEngine::post_phase(Phase phase) {
  if (guided_)
    throw Error(ErrorCode::PhaseInGuidedMode, "phase commands are not accepted in guided mode", "value");
  std::lock_guard lock(producer_mutex_);
  const auto seq = next_seq_;
  if (!commands_.push({seq, phase}))
    throw Error(ErrorCode::InvalidArgument, "command queue is full", "value");
  ++next_seq_;
  return seq;
}

std::vector<PhaseAck> LiveEngine::take_acks() {
  std::vector<PhaseAck> out;
  while (auto a = acks_.pop()) out.push_back(*a);
  return out;
}

int LiveEngine::segment_index(double t) const {
  const auto idx = map_.partition.segment_at(t);
  return idx ? static_cast<int>(*idx) : -1;
}

void LiveEngine::drain_commands() {
  while (auto cmd = commands_.pop()) {
    const std::int64_t head = renderer_.playhead();
    PendingPhase p;
    p.seq = cmd->seq;
    p.phase = cmd->phase;
    p.gen = span_gen_ + (renderer_.in_crossfade() ? 1 : 0);
    const auto b = map_.beats.first_at_or_after(time_of(head));
    if (b < map_.beats.size() && sample_of(map_.beats[b]) >= head) {
      p.effect_sample = sample_of(map_.beats[b]);
      p.effect_time = map_.beats[b];
    } else {
      // No beat left (or it rounds behind the playhead): effective now.
      p.effect_sample = head;
      p.effect_time = time_of(head);
    }
    acks_.push({p.seq, p.phase, p.effect_time});
    pending_.push_back(p);
  }
}

void LiveEngine::apply_phase(const PendingPhase& p, double wall_time, double source_time) {
  phase_ = p.phase;
  DecisionEntry e;
  e.wall_time = wall_time;
  e.source_time = source_time;
  e.action = "phase";
  e.phase = p.phase;
  log_.entries.push_back(std::move(e));
}

void LiveEngine::decide() {
  if (guided_ || committed_ || renderer_.finished()) return;
  const std::int64_t pos = renderer_.position();
  const int seg = segment_index(time_of(pos));
  if (seg != loop_segment_) {
    loop_segment_ = seg;
    state_.loops_in_segment = 0;
  }
  // Cuts must leave room for the crossfade to start after the playhead.
  state_.t_current = time_of(pos + renderer_.crossfade_frames());
  PlaybackState next = unguided_step(state_, phase_, map_, sched_cfg_);
  if (next.pending_cut && rejected_origin_ && sample_of(next.pending_cut->origin) == *rejected_origin_) {
    next.mode = PlaybackMode::Unmodified;
    next.pending_cut.reset();
  }
  state_ = next;
}

void LiveEngine::try_commit() {
  const auto cut = *state_.pending_cut;
  const auto kind = state_.mode == PlaybackMode::FilterTransition ? Transition::Filter : Transition::Cutpoint;
  const auto origin = sample_of(cut.origin);
  if (renderer_.splice(origin, sample_of(cut.destination), kind)) {
    committed_ = Committed{cut, state_.mode, kind, false, 0};
    return;
  }
  rejected_origin_ = origin;
  state_.mode = PlaybackMode::Unmodified;
  state_.pending_cut.reset();
  decide();
}

void LiveEngine::handle_events() {
  for (const auto& ev : renderer_.take_events()) {
    if (committed_ && !committed_->started) {
      committed_->started = true;
      committed_->centre_frame = ev.out_frame;
      DecisionEntry e;
      e.wall_time = time_of(ev.out_frame);
      e.source_time = committed_->cut.origin;
      e.action = jump_action(committed_->mode);
      e.origin = committed_->cut.origin;
      e.destination = committed_->cut.destination;
      log_.entries.push_back(std::move(e));
    } else if (guided_ && (ev.transition == Transition::Cutpoint || ev.transition == Transition::Filter)) {
      DecisionEntry e;
      e.wall_time = time_of(ev.out_frame);
      e.source_time = time_of(ev.origin);
      e.action = ev.transition == Transition::Filter ? "filter" : (ev.destination < ev.origin ? "loop" : "skip");
      e.origin = time_of(ev.origin);
      e.destination = time_of(ev.destination);
      log_.entries.push_back(std::move(e));
    }
  }
}

void LiveEngine::on_jump_done() {
  const Committed done = *committed_;
  committed_.reset();
  rejected_origin_.reset();
  ++span_gen_;
  if (done.mode == PlaybackMode::Loop) ++state_.loops_in_segment;
  state_.mode = PlaybackMode::Unmodified;
  state_.pending_cut.reset();
  // Phase changes whose beat was in the abandoned span take effect at the splice.
  while (!pending_.empty() && pending_.front().gen < span_gen_) {
    apply_phase(pending_.front(), time_of(done.centre_frame), pending_.front().effect_time);
    pending_.pop_front();
  }
  decide();
}

void LiveEngine::publish() {
  Tick t;
  t.wall_time = wall_now();
  t.t = time_of(renderer_.playhead());
  t.segment = segment_index(t.t);
  t.finished = renderer_.finished();
  if (guided_) {
    if (t.segment >= 0)
      t.phase = map_.partition.segments[static_cast<std::size_t>(t.segment)].label == Intensity::High ? Phase::Work
                                                                                                        : Phase::Rest;
    const auto* next = renderer_.next_span();
    if (next && (next->transition == Transition::Cutpoint || next->transition == Transition::Filter)) {
      t.has_next_jump = true;
      t.next_origin = time_of(renderer_.current_span().end);
      t.next_destination = time_of(next->start);
      t.mode = next->transition == Transition::Filter ? PlaybackMode::FilterTransition
               : next->start < renderer_.current_span().end ? PlaybackMode::Loop
                                                            : PlaybackMode::Skip;
    }
  } else {
    t.phase = phase_;
    if (committed_) {
      t.mode = committed_->mode;
      t.has_next_jump = true;
      t.next_origin = committed_->cut.origin;
      t.next_destination = committed_->cut.destination;
    } else {
      t.mode = state_.mode;
      if (state_.pending_cut) {
        t.has_next_jump = true;
        t.next_origin = state_.pending_cut->origin;
        t.next_destination = state_.pending_cut->destination;
      }
    }
  }
  snapshot_.store(t);
}

std::size_t LiveEngine::process_block(std::vector<std::vector<float>>& out, std::size_t frames) {
  if (finished()) return 0;
  const auto channels = static_cast<std::size_t>(num_channels());
  if (out.size() != channels) out.resize(channels);
  for (auto& ch : out)
    if (ch.size() < frames) ch.resize(frames);

  if (!guided_) {
    drain_commands();
    decide();
  }

  std::size_t produced = 0;
  while (produced < frames && !renderer_.finished()) {
    std::int64_t limit = static_cast<std::int64_t>(frames - produced);
    if (renderer_.in_crossfade()) {
      limit = std::min(limit, renderer_.crossfade_remaining());
    } else {
      const std::int64_t pos = renderer_.position();
      if (!guided_) {
        if (!pending_.empty() && pending_.front().gen == span_gen_ && pending_.front().effect_sample <= pos) {
          const auto p = pending_.front();
          pending_.pop_front();
          apply_phase(p, wall_now(), p.effect_time);
          decide();
          continue;
        }
        if (!committed_ && state_.pending_cut) {
          const auto kind = state_.mode == PlaybackMode::FilterTransition ? Transition::Filter : Transition::Cutpoint;
          const auto deadline = renderer_.splice_deadline(sample_of(state_.pending_cut->origin), kind);
          if (pos >= deadline) {
            try_commit();
            continue;
          }
          limit = std::min(limit, deadline - pos);
        }
        if (!pending_.empty() && pending_.front().gen == span_gen_)
          limit = std::min(limit, pending_.front().effect_sample - pos);
      }
      const std::int64_t stop = renderer_.stop_sample();
      if (pos >= stop) {
        if (renderer_.step_junction()) {
          handle_events();
          if (committed_ && committed_->started && !renderer_.in_crossfade()) on_jump_done();
          continue;
        }
        limit = 1;  // lets the renderer notice the end of the schedule
      } else {
        limit = std::min(limit, stop - pos);
      }
    }
    produced += renderer_.render(out, produced, static_cast<std::size_t>(std::max<std::int64_t>(limit, 1)));
    handle_events();
    if (committed_ && committed_->started && !renderer_.in_crossfade()) on_jump_done();
  }
  if (renderer_.finished()) finished_.store(true, std::memory_order_release);
  publish();
  return produced;
}

// ---------------------------------------------------------------------------
// Sinks

void CaptureSink::write(const std::vector<std::vector<float>>& block, std::size_t frames) {
  for (std::size_t c = 0; c < buffer_.channels.size(); ++c)
    buffer_.channels[c].insert(buffer_.channels[c].end(), block[c].begin(),
                               block[c].begin() + static_cast<std::ptrdiff_t>(frames));
}

WavFileSink::WavFileSink(const std::string& path, int channels, int sample_rate)
    : channels_(channels), sample_rate_(sample_rate) {
  file_ = std::fopen(path.c_str(), "wb");
  if (!file_) throw Error(ErrorCode::SinkUnavailable, "cannot open " + path + " for writing", "output");
  std::fwrite("RIFF", 1, 4, file_);
  put_u32(file_, 0);
  std::fwrite("WAVEfmt ", 1, 8, file_);
  put_u32(file_, 16);
  put_u16(file_, 3);
  put_u16(file_, static_cast<std::uint16_t>(channels));
  put_u32(file_, static_cast<std::uint32_t>(sample_rate));
  put_u32(file_, static_cast<std::uint32_t>(sample_rate * channels * 4));
  put_u16(file_, static_cast<std::uint16_t>(channels * 4));
  put_u16(file_, 32);
  std::fwrite("data", 1, 4, file_);
  put_u32(file_, 0);
}

WavFileSink::~WavFileSink() { close(); }

void WavFileSink::write(const std::vector<std::vector<float>>& block, std::size_t frames) {
  if (!file_) throw Error(ErrorCode::SinkUnavailable, "sink is closed", "output");
  const auto bytes = interleave(block, frames);
  if (std::fwrite(bytes.data(), 1, bytes.size(), file_) != bytes.size())
    throw Error(ErrorCode::SinkUnavailable, "short write to WAV sink", "output");
  frames_ += frames;
}

void WavFileSink::close() {
  if (!file_) return;
  const auto data = static_cast<std::uint32_t>(frames_ * static_cast<std::uint64_t>(channels_) * 4);
  std::fseek(file_, 4, SEEK_SET);
  put_u32(file_, 36 + data);
  std::fseek(file_, 40, SEEK_SET);
  put_u32(file_, data);
  std::fclose(file_);
  file_ = nullptr;
}

void RawStdoutSink::write(const std::vector<std::vector<float>>& block, std::size_t frames) {
  const auto bytes = interleave(block, frames);
  if (std::fwrite(bytes.data(), 1, bytes.size(), stdout) != bytes.size())
    throw Error(ErrorCode::SinkUnavailable, "stdout closed", "output");
  std::fflush(stdout);
}

PacedSink::PacedSink(std::unique_ptr<AudioSink> inner, int sample_rate, double speed)
    : inner_(std::move(inner)), sample_rate_(sample_rate), speed_(speed) {
  if (!(speed > 0.0)) throw Error(ErrorCode::InvalidArgument, "speed must be positive", "speed");
}

void PacedSink::write(const std::vector<std::vector<float>>& block, std::size_t frames) {
  using clock = std::chrono::steady_clock;
  const auto now = clock::now();
  if (!start_) start_ = now;
  auto due = [&](std::uint64_t f) {
    return *start_ + std::chrono::duration_cast<clock::duration>(
                         std::chrono::duration<double>(static_cast<double>(f) / sample_rate_ / speed_));
  };
  // Block k must arrive before block k-1 finishes playing.
  if (frames_ > 0 && now > due(frames_)) {
    ++underruns_;
    *start_ += now - due(frames_);
  }
  inner_->write(block, frames);
  const auto begins = due(frames_);
  frames_ += frames;
  std::this_thread::sleep_until(begins);
}

// ---------------------------------------------------------------------------
// LiveSession

LiveSession::LiveSession(std::shared_ptr<LiveEngine> engine, std::unique_ptr<AudioSink> sink)
    : engine_(std::move(engine)), sink_(std::move(sink)) {}

LiveSession::~LiveSession() { stop(); }

void LiveSession::start() {
  if (thread_.joinable()) return;
  running_ = true;
  thread_ = std::thread([this] { run(); });
}

void LiveSession::run() {
  std::vector<std::vector<float>> block;
  try {
    while (!stop_.load()) {
      const auto n = engine_->process_block(block);
      if (n == 0) break;
      sink_->write(block, n);
    }
  } catch (...) {
    // Sink failures end the session; the engine state stays readable.
  }
  sink_->close();
  running_ = false;
}

void LiveSession::stop() {
  stop_ = true;
  join();
}

void LiveSession::join() {
  std::lock_guard lock(join_mutex_);
  if (thread_.joinable()) thread_.join();
}

}  // namespace cadence
