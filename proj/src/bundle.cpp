#include "cadence/bundle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cadence/error.hpp"
#include "cadence/wav.hpp"

namespace cadence {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw Error(ErrorCode::InvalidBundle, std::string("missing key '") + key + "'", key);
  return j.at(key);
}

double as_number(const json& j, const char* field) {
  if (!j.is_number()) throw Error(ErrorCode::InvalidBundle, std::string(field) + " must be a number", field);
  return j.get<double>();
}

std::vector<std::size_t> sections_within(const SectionList& sections, double start, double end) {
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < sections.size(); ++n) {
    if (sections[n].start >= start && sections[n].start < end) out.push_back(n);
  }
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string(), path.filename().string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

AnalysisDocument parse_analysis(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidBundle, std::string("analysis document is not valid JSON: ") + e.what());
  }

  AnalysisDocument doc;
  const auto& id = require(j, "track_id");
  if (!id.is_string()) throw Error(ErrorCode::InvalidBundle, "track_id must be a string", "track_id");
  doc.track_id = id.get<std::string>();
  const auto& rate = require(j, "sample_rate");
  if (!rate.is_number_integer()) throw Error(ErrorCode::InvalidBundle, "sample_rate must be an integer", "sample_rate");
  doc.sample_rate = rate.get<int>();

  const auto& beats = require(j, "beats");
  if (!beats.is_array()) throw Error(ErrorCode::InvalidBundle, "beats must be an array", "beats");
  for (std::size_t i = 0; i < beats.size(); ++i) {
    const double b = as_number(beats[i], "beats");
    if (!doc.beats.beats.empty() && !(b > doc.beats.beats.back())) {
      throw Error(ErrorCode::BeatOrderViolation,
                  "beats[" + std::to_string(i) + "] is not after beats[" + std::to_string(i - 1) + "]",
                  "beats[" + std::to_string(i) + "]");
    }
    doc.beats.beats.push_back(b);
  }

  const auto& sections = require(j, "sections");
  if (!sections.is_array()) throw Error(ErrorCode::InvalidBundle, "sections must be an array", "sections");
  for (std::size_t i = 0; i < sections.size(); ++i) {
    const auto& s = sections[i];
    Section sec;
    sec.start = as_number(require(s, "start"), "sections.start");
    const auto& label = require(s, "label");
    if (!label.is_string()) throw Error(ErrorCode::InvalidBundle, "section label must be a string", "sections.label");
    sec.name = label.get<std::string>();
    sec.label = parse_section_label(sec.name);
    doc.sections.sections.push_back(std::move(sec));
  }

  if (j.contains("segments")) {
    LabeledPartition p;
    p.tau = as_number(require(j, "tau"), "tau");
    for (const auto& s : j.at("segments")) {
      IntensitySegment seg;
      seg.start = as_number(require(s, "start"), "segments.start");
      seg.end = as_number(require(s, "end"), "segments.end");
      const auto label = require(s, "label").get<std::string>();
      if (label != "High" && label != "Low")
        throw Error(ErrorCode::InvalidBundle, "segment label must be High or Low", "segments.label");
      seg.label = label == "High" ? Intensity::High : Intensity::Low;
      seg.source_sections = sections_within(doc.sections, seg.start, seg.end);
      p.segments.push_back(std::move(seg));
    }
    doc.partition = std::move(p);
  }

  if (j.contains("cutpoints")) {
    std::vector<Cutpoint> cuts;
    for (const auto& c : j.at("cutpoints")) {
      cuts.push_back({as_number(require(c, "origin"), "cutpoints.origin"),
                      as_number(require(c, "dest"), "cutpoints.dest"),
                      as_number(require(c, "score"), "cutpoints.score")});
    }
    doc.cutpoints = std::move(cuts);
  }
  return doc;
}

std::string serialize_analysis(const AnalysisDocument& doc) {
  json j;
  j["track_id"] = doc.track_id;
  j["sample_rate"] = doc.sample_rate;
  j["beats"] = doc.beats.beats;
  j["sections"] = json::array();
  for (const auto& s : doc.sections.sections) {
    j["sections"].push_back({{"start", s.start}, {"label", s.name.empty() ? to_string(s.label) : s.name}});
  }
  if (doc.partition) {
    j["tau"] = doc.partition->tau;
    j["segments"] = json::array();
    for (const auto& s : doc.partition->segments) {
      j["segments"].push_back({{"start", s.start}, {"end", s.end}, {"label", to_string(s.label)}});
    }
  }
  if (doc.cutpoints) {
    j["cutpoints"] = json::array();
    for (const auto& c : *doc.cutpoints) {
      j["cutpoints"].push_back({{"origin", c.origin}, {"dest", c.destination}, {"score", c.score}});
    }
  }
  return j.dump(2) + "\n";
}

AnalysisDocument TrackBundle::document() const {
  AnalysisDocument doc;
  doc.track_id = track_id;
  doc.sample_rate = mixture.sample_rate;
  doc.beats = beats;
  doc.sections = sections;
  doc.partition = partition;
  doc.cutpoints = cutpoints;
  return doc;
}

void validate_bundle(const TrackBundle& b) {
  b.mixture.validate();
  b.drum_stem.validate();
  if (b.mixture.sample_rate != b.drum_stem.sample_rate)
    throw Error(ErrorCode::InvalidBundle, "mixture and drum stem sample rates differ", "drum_stem.sample_rate");

  const auto& beats = b.beats.beats;
  if (beats.size() < 2) throw Error(ErrorCode::InvalidBundle, "at least two beats are required", "beats");
  for (std::size_t i = 1; i < beats.size(); ++i) {
    if (!(beats[i] > beats[i - 1]))
      throw Error(ErrorCode::BeatOrderViolation, "beats must be strictly increasing",
                  "beats[" + std::to_string(i) + "]");
  }
  const double duration = b.mixture.duration();
  if (std::abs(duration - b.drum_stem.duration()) > b.beats.max_gap())
    throw Error(ErrorCode::InvalidBundle, "mixture and drum stem durations differ by more than one beat",
                "drum_stem");
  if (beats.front() < 0.0 || beats.back() > duration)
    throw Error(ErrorCode::InvalidBundle, "beat timestamps must lie within the track", "beats");

  if (b.sections.size() == 0) throw Error(ErrorCode::InvalidBundle, "at least one section is required", "sections");
  for (std::size_t n = 0; n < b.sections.size(); ++n) {
    const double s = b.sections[n].start;
    const std::string field = "sections[" + std::to_string(n) + "].start";
    if (s < 0.0 || s > duration)
      throw Error(ErrorCode::SectionOutOfRange,
                  "section start " + std::to_string(s) + " s outside track of " + std::to_string(duration) + " s",
                  field);
    if (n > 0 && !(s > b.sections[n - 1].start))
      throw Error(ErrorCode::InvalidBundle, "section starts must be strictly increasing", field);
  }
}

TrackBundle load_bundle(const fs::path& dir) {
  const auto analysis_path = dir / kAnalysisFile;
  const auto mixture_path = dir / kMixtureFile;
  const auto drums_path = dir / kDrumStemFile;
  if (!fs::exists(analysis_path))
    throw Error(ErrorCode::InvalidBundle, "missing " + analysis_path.string(), kAnalysisFile);
  if (!fs::exists(mixture_path)) throw Error(ErrorCode::MissingStem, "missing " + mixture_path.string(), kMixtureFile);
  if (!fs::exists(drums_path)) throw Error(ErrorCode::MissingStem, "missing " + drums_path.string(), kDrumStemFile);

  auto doc = parse_analysis(read_text(analysis_path));
  TrackBundle b;
  b.track_id = doc.track_id;
  b.mixture = read_wav(mixture_path).audio;
  b.drum_stem = read_wav(drums_path).audio;
  b.beats = std::move(doc.beats);
  b.sections = std::move(doc.sections);
  b.partition = std::move(doc.partition);
  b.cutpoints = std::move(doc.cutpoints);
  if (doc.sample_rate != b.mixture.sample_rate)
    throw Error(ErrorCode::InvalidBundle, "analysis sample_rate does not match mixture.wav", "sample_rate");
  validate_bundle(b);
  return b;
}

void save_bundle(const TrackBundle& bundle, const fs::path& dir, bool write_audio) {
  fs::create_directories(dir);
  if (write_audio) {
    write_wav(dir / kMixtureFile, bundle.mixture, SampleFormat::Float32);
    write_wav(dir / kDrumStemFile, bundle.drum_stem, SampleFormat::Float32);
  }
  std::ofstream out(dir / kAnalysisFile, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write analysis document", kAnalysisFile);
  out << serialize_analysis(bundle.document());
}

std::vector<std::string> beat_gap_warnings(const BeatGrid& grid) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double gap = grid[i] - grid[i - 1];
    if (gap <= 0.2 || gap >= 2.0) {
      std::ostringstream ss;
      ss << "beat gap " << gap << " s between beats " << i - 1 << " and " << i << " is implausible";
      out.push_back(ss.str());
    }
  }
  return out;
}

std::vector<std::size_t> beats_in_section(const BeatGrid& grid, double start, double end) {
  std::vector<std::size_t> out;
  for (std::size_t m = grid.first_at_or_after(start); m < grid.size() && grid[m] < end; ++m) out.push_back(m);
  return out;
}

}  // namespace cadence
