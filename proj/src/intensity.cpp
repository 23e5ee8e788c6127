#include "cadence/intensity.hpp"

#include <algorithm>

#include "cadence/error.hpp"

namespace cadence {

std::vector<bool> eligible_sections(const SectionList& sections) {
  std::vector<bool> mask;
  mask.reserve(sections.size());
  for (const auto& s : sections.sections) {
    mask.push_back(s.label == SectionLabel::Chorus || s.label == SectionLabel::Instrumental);
  }
  return mask;
}

double intensity_threshold(const std::vector<double>& section_loudness, const IntensityConfig& cfg) {
  if (section_loudness.empty()) return cfg.loudness_floor;
  return *std::max_element(section_loudness.begin(), section_loudness.end()) - cfg.delta_db;
}

std::vector<Intensity> label_sections(const std::vector<double>& section_loudness, const std::vector<bool>& eligible,
                                      const IntensityConfig& cfg) {
  cfg.validate();
  if (section_loudness.size() != eligible.size())
    throw Error(ErrorCode::LengthMismatch, "loudness and eligibility lengths differ");
  const double tau = intensity_threshold(section_loudness, cfg);
  std::vector<Intensity> labels(section_loudness.size(), Intensity::Low);
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (eligible[n] && section_loudness[n] > tau) labels[n] = Intensity::High;
  }
  return labels;
}

std::vector<Intensity> break_long_runs(std::vector<Intensity> labels, const std::vector<double>& section_loudness,
                                       const IntensityConfig& cfg) {
  cfg.validate();
  if (section_loudness.size() != labels.size())
    throw Error(ErrorCode::LengthMismatch, "loudness and label lengths differ");

  // Each pass flips one High to Low, so this runs at most N times.
  for (;;) {
    bool flipped = false;
    std::size_t i = 0;
    while (i < labels.size() && !flipped) {
      if (labels[i] != Intensity::High) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < labels.size() && labels[j] == Intensity::High) ++j;
      if (j - i >= cfg.max_high_run) {
        std::size_t quietest = i;
        for (std::size_t k = i + 1; k < j; ++k) {
          if (section_loudness[k] < section_loudness[quietest]) quietest = k;
        }
        labels[quietest] = Intensity::Low;
        flipped = true;
      }
      i = j;
    }
    if (!flipped) return labels;
  }
}

LabeledPartition merge_partition(const SectionList& sections, const std::vector<Intensity>& labels, double track_end,
                                 double tau) {
  if (sections.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "section and label lengths differ");
  LabeledPartition p;
  p.tau = tau;
  if (sections.size() == 0) return p;

  if (sections[0].start > 0.0) p.segments.push_back({0.0, sections[0].start, Intensity::Low, {}});
  for (std::size_t n = 0; n < sections.size(); ++n) {
    const double end = sections.end_of(n, track_end);
    if (!p.segments.empty() && p.segments.back().label == labels[n]) {
      p.segments.back().end = end;
      p.segments.back().source_sections.push_back(n);
    } else {
      p.segments.push_back({sections[n].start, end, labels[n], {n}});
    }
  }
  return p;
}

IntensityResult label_intensity(const SectionList& sections, const std::vector<double>& section_loudness,
                                double track_end, const IntensityConfig& cfg) {
  IntensityResult r;
  r.section_loudness = section_loudness;
  r.eligible = eligible_sections(sections);
  r.labels = break_long_runs(label_sections(section_loudness, r.eligible, cfg), section_loudness, cfg);
  r.partition = merge_partition(sections, r.labels, track_end, intensity_threshold(section_loudness, cfg));
  if (std::none_of(r.eligible.begin(), r.eligible.end(), [](bool e) { return e; })) {
    r.warnings.push_back("no chorus or instrumental sections; track is labeled Low throughout");
  } else if (!r.partition.has_high()) {
    r.warnings.push_back("no chorus or instrumental section reaches the loudness threshold");
  }
  return r;
}

}  // namespace cadence
