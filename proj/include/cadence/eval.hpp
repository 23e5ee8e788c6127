#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cadence/bundle.hpp"
#include "cadence/pipeline.hpp"
#include "cadence/renderer.hpp"

namespace cadence {

struct ClipConfig {
  double clip_s = 10.0;
  double min_offset_s = 2.0;
  double max_offset_s = 8.0;
  /// Keep control clips at least boundary_margin_s away from segment
  /// boundaries. Off by default.
  bool avoid_boundaries = false;
  double boundary_margin_s = 5.0;
  /// Offset draws tried before giving up on a track.
  int max_attempts = 64;
  RenderConfig render;
};

/// Where the two clips of a song come from, before any audio is rendered.
struct ClipPlan {
  std::string song_id;
  Cutpoint cut;
  std::size_t cut_segment = 0;
  /// Sample offset of the crossfade centre inside the modified clip.
  std::int64_t offset_frames = 0;
  double transition_offset = 0.0;
  std::vector<SampleSpan> modified_spans;
  std::size_t control_segment = 0;
  SampleSpan control_span;
};

struct ClipPair {
  std::string song_id;
  AudioBuffer modified_clip;
  AudioBuffer control_clip;
  double transition_offset = 0.0;
  ClipPlan plan;
};

enum class Eligibility { Eligible, UniformIntensity, NoCutpoints };
const char* to_string(Eligibility e);

/// UniformIntensity when the partition lacks a High or a Low segment;
/// NoCutpoints when no intra-segment cut exists.
Eligibility eligibility(const LabeledPartition& partition, const CutpointSet& cuts);

/// Draws the transition offset u ~ U[min, max], then a cut uniformly among
/// those whose clip fits inside its segment. Throws NoCutpointsAvailable.
ClipPlan plan_clip_pair(const TrackBundle& bundle, const LabeledPartition& partition, const CutpointSet& cuts,
                        std::uint64_t seed, const ClipConfig& cfg = {});
ClipPair render_clip_pair(const TrackBundle& bundle, const ClipPlan& plan, const ClipConfig& cfg = {});
ClipPair make_clip_pair(const TrackBundle& bundle, const LabeledPartition& partition, const CutpointSet& cuts,
                        std::uint64_t seed, const ClipConfig& cfg = {});

// ---------------------------------------------------------------------------
// Statistics

struct TTestResult {
  double t = 0.0;
  std::size_t df = 0;
  double p = 1.0;
};

/// Paired t-test on a - b. All-zero differences give t = 0, p = 1; a nonzero
/// constant difference throws ZeroVariance.
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

struct KsResult {
  double statistic = 0.0;
  double p = 1.0;
};

/// One-sample Kolmogorov-Smirnov test against Uniform[lo, hi].
KsResult ks_uniform(std::vector<double> samples, double lo, double hi);

// ---------------------------------------------------------------------------
// Experiment

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t assignments_per_clip = 2;
  std::size_t raters = 6;
  ClipConfig clip;
  AnalysisConfig analysis;
  /// 0 picks the hardware concurrency.
  unsigned threads = 0;
};

struct ManifestRow {
  std::string clip_id;
  std::string song_id;
  /// "modified" or "control"
  std::string condition;
  /// Empty for control clips.
  std::optional<double> transition_offset;
  std::vector<std::string> raters;
};

struct Exclusion {
  std::string song_id;
  Eligibility reason = Eligibility::NoCutpoints;
  std::string detail;
};

struct Experiment {
  std::vector<ClipPlan> plans;
  std::vector<ManifestRow> manifest;
  std::vector<Exclusion> excluded;
  std::vector<std::string> warnings;
};

/// Per-song seed derived from the master seed and the song id, so results do
/// not depend on bundle order or thread count.
std::uint64_t song_seed(std::uint64_t master, const std::string& song_id);

/// Plans clips for in-memory bundles and assigns opaque ids and raters.
Experiment prepare_experiment(const std::vector<TrackBundle>& bundles, const ExperimentConfig& cfg = {});

/// Same, pulling bundle i from `source` on a worker thread so only a few
/// bundles are resident at once.
using BundleSource = std::function<TrackBundle(std::size_t)>;
Experiment prepare_experiment(std::size_t count, const BundleSource& source, const ExperimentConfig& cfg = {});

/// Shuffles the two clips of every plan into opaque ids and deals raters out
/// cyclically, so per-rater loads differ by at most one.
Experiment assign_experiment(std::vector<ClipPlan> plans, std::vector<Exclusion> excluded,
                             const ExperimentConfig& cfg = {});

/// Loads each bundle directory, writes clips/<clip_id>.wav (16-bit PCM),
/// manifest.csv and exclusions.csv under out_dir.
Experiment build_experiment(const std::vector<std::filesystem::path>& bundle_dirs, const std::filesystem::path& out_dir,
                            const ExperimentConfig& cfg = {});

std::string manifest_to_csv(const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> manifest_from_csv(const std::string& text);

struct Rating {
  std::string clip_id;
  std::string rater_id;
  int score = 0;
};

/// clip_id,rater_id,score with a header row; scores must be 1-5.
std::vector<Rating> ratings_from_csv(const std::string& text);

struct RatingsSummary {
  std::size_t songs = 0;
  double mean_modified = 0.0;
  double mean_control = 0.0;
  TTestResult test;
};

/// Averages each clip's ratings, pairs the two clips of every song that has
/// both rated, and runs the paired t-test (modified minus control).
RatingsSummary analyze_ratings(const std::vector<ManifestRow>& manifest, const std::vector<Rating>& ratings);

}  // namespace cadence
