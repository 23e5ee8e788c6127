#include <doctest.h>

#include <functional>
#include <random>

#include "cadence/error.hpp"
#include "cadence/intensity.hpp"
#include "support/intensity_oracle.hpp"

using namespace cadence;
using namespace oracle;

namespace {

constexpr auto H = Intensity::High;
constexpr auto L = Intensity::Low;

void check_partition_invariants(const LabeledPartition& p, double end, std::size_t max_run,
                                const std::vector<Intensity>& labels) {
  REQUIRE_FALSE(p.segments.empty());
  CHECK(p.segments.front().start == 0.0);
  CHECK(p.segments.back().end == end);
  for (std::size_t i = 0; i + 1 < p.segments.size(); ++i) {
    CHECK(p.segments[i].end == p.segments[i + 1].start);
    CHECK(p.segments[i].label != p.segments[i + 1].label);
  }
  std::size_t run = 0;
  for (auto l : labels) {
    run = l == H ? run + 1 : 0;
    CHECK(run < max_run);
  }
}

}  // namespace

TEST_CASE("eligibility follows the functional label") {
  CHECK(eligible_sections(sections_of({"intro", "verse", "chorus"})) == std::vector<bool>{false, false, true});
  CHECK(eligible_sections(sections_of({"verse", "verse"})) == std::vector<bool>{false, false});
  CHECK(eligible_sections(sections_of({"chorus", "instrumental", "bridge"})) == std::vector<bool>{true, true, false});
}

TEST_CASE("threshold labeling") {
  const IntensityConfig cfg;
  CHECK(intensity_threshold({-20, -12, -18}, cfg) == -17.0);
  CHECK(label_sections({-20, -12, -18}, {true, true, true}, cfg) == std::vector{L, H, L});
  CHECK(label_sections({-12, -13}, {true, false}, cfg) == std::vector{H, L});
  CHECK(label_sections({-9, -9, -9}, {true, true, true}, cfg) == std::vector{H, H, H});
  // Exactly at tau is not above it.
  CHECK(label_sections({-10, -15}, {true, true}, cfg) == std::vector{H, L});
  CHECK_THROWS_AS(label_sections({-10}, {true, false}, cfg), Error);
}

TEST_CASE("run breaking") {
  const IntensityConfig cfg;
  CHECK(break_long_runs({H, H, H, H}, {-10, -11, -14, -12}, cfg) == std::vector{H, H, L, H});
  CHECK(break_long_runs({H, H, H}, {-10, -11, -14}, cfg) == std::vector{H, H, H});
  // Ties go to the earliest section.
  CHECK(break_long_runs({H, H, H, H}, {-10, -12, -12, -11}, cfg) == std::vector{H, L, H, H});
  // A single flip near the edge leaves a run that needs another flip.
  const auto seven = break_long_runs({H, H, H, H, H, H, H}, {-10, -19, -11, -12, -13, -14, -15}, cfg);
  CHECK(seven == std::vector{H, L, H, H, H, L, L});
}

TEST_CASE("run of seven distinct highs matches the recursive oracle for every ordering") {
  std::vector<double> loud{-16, -15, -14, -13, -12, -11, -10};
  const IntensityConfig cfg;
  int checked = 0;
  do {
    std::vector<Intensity> expect(7, H);
    oracle_break(expect, loud, 0, 7, 4);
    const auto got = break_long_runs(std::vector<Intensity>(7, H), loud, cfg);
    CHECK(got == expect);
    ++checked;
  } while (std::next_permutation(loud.begin(), loud.end()));
  CHECK(checked == 5040);
}

TEST_CASE("merging coalesces equal neighbours") {
  const auto s = sections_of({"a", "b", "c", "d", "e"});
  const auto p = merge_partition(s, {L, L, H, H, L}, 50.0);
  REQUIRE(p.segments.size() == 3);
  CHECK(p.segments[1].start == 20.0);
  CHECK(p.segments[1].end == 40.0);
  CHECK(p.segments[1].source_sections == std::vector<std::size_t>{2, 3});
  CHECK(merge_partition(sections_of({"a", "b", "c", "d"}), {L, H, L, H}, 40.0).segments.size() == 4);
  const auto low = merge_partition(s, {L, L, L, L, L}, 50.0);
  REQUIRE(low.segments.size() == 1);
  CHECK(low.segments[0].end == 50.0);
}

TEST_CASE("audio before the first section is a Low lead-in") {
  SectionList s{{{2.0, SectionLabel::Chorus, "chorus"}, {12.0, SectionLabel::Verse, "verse"}}};
  const auto p = merge_partition(s, {H, L}, 20.0);
  REQUIRE(p.segments.size() == 3);
  CHECK(p.segments[0].start == 0.0);
  CHECK(p.segments[0].label == L);
  CHECK(p.segments[0].source_sections.empty());
}

TEST_CASE("tracks without eligible sections are Low with a warning") {
  const auto r = label_intensity(sections_of({"verse", "verse", "bridge"}), {-10, -5, -20}, 30.0);
  REQUIRE(r.partition.segments.size() == 1);
  CHECK(r.partition.segments[0].label == L);
  CHECK(r.warnings.size() == 1);
}

TEST_CASE("labeling chain agrees with the brute-force oracle on 50 random instances") {
  std::mt19937_64 rng(2024);
  const IntensityConfig cfg;
  for (int trial = 0; trial < 50; ++trial) {
    const auto in = random_instance(rng);
    CAPTURE(trial);
    const auto s = sections_of(in.names);
    const double end = 10.0 * in.names.size();
    const auto r = label_intensity(s, in.loud, end, cfg);
    const auto expect = oracle_labels(in.names, in.loud, 5.0, 4);
    CHECK(r.labels == expect);
    for (std::size_t n = 0; n < s.size(); ++n) {
      const auto seg = r.partition.segment_at(s[n].start + 5.0);
      REQUIRE(seg.has_value());
      CHECK(r.partition.segments[*seg].label == expect[n]);
    }
  }
}

TEST_CASE("partition invariants on 1000 random instances") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> shift(-30, 30);
  for (int trial = 0; trial < 1000; ++trial) {
    auto in = random_instance(rng);
    std::uniform_int_distribution<std::size_t> run(2, 5);
    IntensityConfig cfg;
    cfg.max_high_run = run(rng);
    CAPTURE(trial);
    const auto s = sections_of(in.names, 7.5);
    const double end = 7.5 * in.names.size();
    const auto r = label_intensity(s, in.loud, end, cfg);
    check_partition_invariants(r.partition, end, cfg.max_high_run, r.labels);

    // Before run breaking the loudest eligible section is High when it is the global maximum.
    const auto pre = label_sections(in.loud, r.eligible, cfg);
    const auto mx = std::max_element(in.loud.begin(), in.loud.end()) - in.loud.begin();
    if (r.eligible[mx]) CHECK(pre[mx] == H);

    auto shifted = in.loud;
    const int g = shift(rng);
    for (auto& v : shifted) v += g;
    CHECK(label_intensity(s, shifted, end, cfg).labels == r.labels);
  }
}
