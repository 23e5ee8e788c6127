#include "cadence/types.hpp"

#include <algorithm>
#include <cctype>

#include "cadence/error.hpp"

namespace cadence {

void AudioBuffer::validate() const {
  if (sample_rate <= 0) throw Error(ErrorCode::InvalidAudio, "sample rate must be positive", "sample_rate");
  if (channels.empty() || channels.size() > 2)
    throw Error(ErrorCode::InvalidAudio, "expected 1 or 2 channels", "channels");
  const auto n = channels.front().size();
  for (const auto& ch : channels) {
    if (ch.size() != n) throw Error(ErrorCode::InvalidAudio, "channel lengths differ", "channels");
  }
}

double BeatGrid::max_gap() const {
  double gap = 0.0;
  for (std::size_t i = 1; i < beats.size(); ++i) gap = std::max(gap, beats[i] - beats[i - 1]);
  return gap;
}

std::size_t BeatGrid::first_at_or_after(double t) const {
  return static_cast<std::size_t>(std::lower_bound(beats.begin(), beats.end(), t) - beats.begin());
}

std::size_t BeatGrid::first_after(double t) const {
  return static_cast<std::size_t>(std::upper_bound(beats.begin(), beats.end(), t) - beats.begin());
}

std::optional<std::size_t> BeatGrid::index_of(double t) const {
  const auto i = first_at_or_after(t);
  if (i < beats.size() && beats[i] == t) return i;
  return std::nullopt;
}

SectionLabel parse_section_label(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "intro") return SectionLabel::Intro;
  if (lower == "verse") return SectionLabel::Verse;
  if (lower == "chorus") return SectionLabel::Chorus;
  if (lower == "instrumental" || lower == "inst") return SectionLabel::Instrumental;
  if (lower == "bridge") return SectionLabel::Bridge;
  if (lower == "outro") return SectionLabel::Outro;
  return SectionLabel::Other;
}

const char* to_string(SectionLabel label) {
  switch (label) {
    case SectionLabel::Intro: return "intro";
    case SectionLabel::Verse: return "verse";
    case SectionLabel::Chorus: return "chorus";
    case SectionLabel::Instrumental: return "instrumental";
    case SectionLabel::Bridge: return "bridge";
    case SectionLabel::Outro: return "outro";
    case SectionLabel::Other: return "other";
  }
  return "other";
}

const char* to_string(Intensity i) { return i == Intensity::High ? "High" : "Low"; }

void IntensityConfig::validate() const {
  if (!(delta_db > 0.0)) throw Error(ErrorCode::InvalidArgument, "delta_db must be positive", "delta_db");
  if (max_high_run < 2) throw Error(ErrorCode::InvalidArgument, "max_high_run must be >= 2", "max_high_run");
}

std::optional<std::size_t> LabeledPartition::segment_at(double t) const {
  if (segments.empty() || t < segments.front().start) return std::nullopt;
  const auto it = std::upper_bound(segments.begin(), segments.end(), t,
                                   [](double v, const IntensitySegment& s) { return v < s.start; });
  const auto idx = static_cast<std::size_t>(it - segments.begin()) - 1;
  if (t < segments[idx].end) return idx;
  if (idx + 1 == segments.size() && t <= segments[idx].end) return idx;
  return std::nullopt;
}

bool LabeledPartition::has_high() const {
  return std::any_of(segments.begin(), segments.end(),
                     [](const IntensitySegment& s) { return s.label == Intensity::High; });
}

}  // namespace cadence
