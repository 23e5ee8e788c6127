#include "cadence/cutpoints.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>

#include "cadence/error.hpp"

namespace cadence {

namespace {

// FFTW planning is not thread-safe; execution on distinct plans is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    std::lock_guard lock(fftw_planner_mutex());
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }

  /// |X_k|^2 for k = 0..n/2.
  void power(std::vector<double>& out) {
    fftw_execute(plan_);
    out.resize(n_ / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
  }

 private:
  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// kMelBands triangular filters, one weight vector per band over FFT bins.
std::vector<std::vector<double>> mel_filterbank(std::size_t fft_size, int sample_rate, double lo, double hi) {
  const double nyquist = sample_rate / 2.0;
  hi = std::min(hi, nyquist);
  const std::size_t bins = fft_size / 2 + 1;
  std::vector<double> edges(kMelBands + 2);
  const double mlo = hz_to_mel(lo), mhi = hz_to_mel(hi);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mlo + (mhi - mlo) * static_cast<double>(i) / static_cast<double>(kMelBands + 1));

  std::vector<std::vector<double>> bank(kMelBands, std::vector<double>(bins, 0.0));
  for (std::size_t b = 0; b < kMelBands; ++b) {
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
      if (f > edges[b] && f < edges[b + 1]) {
        bank[b][k] = (f - edges[b]) / (edges[b + 1] - edges[b]);
      } else if (f >= edges[b + 1] && f < edges[b + 2]) {
        bank[b][k] = (edges[b + 2] - f) / (edges[b + 2] - edges[b + 1]);
      }
    }
  }
  return bank;
}

void normalize(float* v, std::size_t n) {
  double norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) norm += static_cast<double>(v[i]) * v[i];
  norm = std::sqrt(norm);
  if (norm <= 0.0) return;
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<float>(v[i] / norm);
}

}  // namespace

BeatFeatureMatrix beat_features(const AudioBuffer& mixture, const BeatGrid& grid, const FeatureConfig& cfg) {
  mixture.validate();
  BeatFeatureMatrix out;
  if (grid.size() < 2) return out;
  out.rows = grid.size() - 1;
  out.values.assign(out.rows * kFeatureDims, 0.0f);
  out.silent.assign(out.rows, false);

  const std::size_t n = cfg.fft_size;
  const std::size_t bins = n / 2 + 1;
  const int sr = mixture.sample_rate;
  const auto frames = static_cast<std::int64_t>(mixture.frames());

  std::vector<double> mono(mixture.frames(), 0.0);
  for (const auto& ch : mixture.channels)
    for (std::size_t i = 0; i < ch.size(); ++i) mono[i] += ch[i] / static_cast<double>(mixture.num_channels());

  std::vector<double> window(n);
  for (std::size_t i = 0; i < n; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));

  std::vector<int> pitch_class(bins, -1);
  for (std::size_t k = 1; k < bins; ++k) {
    const double f = static_cast<double>(k) * sr / static_cast<double>(n);
    if (f < cfg.chroma_min_hz || f > cfg.chroma_max_hz) continue;
    const long midi = std::lround(12.0 * std::log2(f / 440.0)) + 69;
    pitch_class[k] = static_cast<int>(((midi % 12) + 12) % 12);
  }
  const auto bank = mel_filterbank(n, sr, cfg.mel_min_hz, cfg.mel_max_hz);

  RealFft fft(n);
  std::vector<double> power;
  for (std::size_t m = 0; m < out.rows; ++m) {
    const auto a = std::clamp<std::int64_t>(std::llround(grid[m] * sr), 0, frames);
    const auto b = std::clamp<std::int64_t>(std::llround(grid[m + 1] * sr), 0, frames);
    float* row = out.values.data() + m * kFeatureDims;

    double energy = 0.0;
    for (auto i = a; i < b; ++i) energy += mono[static_cast<std::size_t>(i)] * mono[static_cast<std::size_t>(i)];
    if (b <= a || energy / static_cast<double>(b - a) < cfg.silence_energy) {
      out.silent[m] = true;
      continue;
    }

    std::vector<double> chroma(kChromaBins, 0.0), mel(kMelBands, 0.0);
    std::size_t count = 0;
    // Frames are anchored at the beat and never read past the interval, so
    // sample-identical intervals give identical rows.
    for (auto start = a; count == 0 || start + static_cast<std::int64_t>(n) <= b;
         start += static_cast<std::int64_t>(cfg.hop)) {
      double* in = fft.input();
      for (std::size_t i = 0; i < n; ++i) {
        const auto idx = start + static_cast<std::int64_t>(i);
        in[i] = idx < b ? mono[static_cast<std::size_t>(idx)] * window[i] : 0.0;
      }
      fft.power(power);
      for (std::size_t k = 0; k < bins; ++k) {
        if (pitch_class[k] >= 0) chroma[static_cast<std::size_t>(pitch_class[k])] += power[k];
      }
      for (std::size_t band = 0; band < kMelBands; ++band) {
        mel[band] += std::inner_product(bank[band].begin(), bank[band].end(), power.begin(), 0.0);
      }
      ++count;
    }

    for (std::size_t c = 0; c < kChromaBins; ++c) row[c] = static_cast<float>(chroma[c] / count);
    std::vector<double> mel_db(kMelBands);
    for (std::size_t band = 0; band < kMelBands; ++band) mel_db[band] = 10.0 * std::log10(mel[band] / count + 1e-12);
    const double mean = std::accumulate(mel_db.begin(), mel_db.end(), 0.0) / kMelBands;
    for (std::size_t band = 0; band < kMelBands; ++band)
      row[kChromaBins + band] = static_cast<float>(mel_db[band] - mean);

    normalize(row, kChromaBins);
    normalize(row + kChromaBins, kMelBands);
    normalize(row, kFeatureDims);
  }
  return out;
}

RecurrenceMatrix recurrence(const BeatFeatureMatrix& features, const RecurrenceConfig& cfg) {
  const std::size_t n = features.rows;
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "recurrence needs at least two beat intervals");
  RecurrenceMatrix rec;
  rec.size = n;
  rec.values.assign(n * n, 0.0f);
  rec.mask.assign(n * n, false);

  for (std::size_t i = 0; i < n; ++i) {
    rec.values[i * n + i] = 1.0f;
    for (std::size_t j = i + 1; j < n; ++j) {
      double dot = 0.0;
      const float* a = features.row(i);
      const float* b = features.row(j);
      for (std::size_t d = 0; d < kFeatureDims; ++d) dot += static_cast<double>(a[d]) * b[d];
      const auto v = static_cast<float>(std::clamp(dot, 0.0, 1.0));
      rec.values[i * n + j] = v;
      rec.values[j * n + i] = v;
    }
  }

  // Neighbour lists: best k by similarity, ties to the lower column index.
  std::vector<std::vector<bool>> knn(n, std::vector<bool>(n, false));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return rec.at(i, x) > rec.at(i, y); });
    std::size_t taken = 0;
    for (const auto j : order) {
      if (taken == cfg.k_neighbors) break;
      if (j == i) continue;
      const float v = rec.at(i, j);
      if (!(v > 0.0f) || v < cfg.min_similarity) break;
      knn[i][j] = true;
      ++taken;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    rec.mask[i * n + i] = true;
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && knn[i][j] && knn[j][i]) rec.mask[i * n + j] = true;
    }
  }
  return rec;
}

std::vector<Cutpoint> detect_cutpoints(const RecurrenceMatrix& rec, const BeatGrid& grid, std::size_t min_run,
                                       std::size_t min_jump_beats) {
  if (min_run < 2) throw Error(ErrorCode::InvalidArgument, "min_run must be at least 2", "min_run");
  const std::size_t n = rec.size;
  if (grid.size() < n + 1) throw Error(ErrorCode::InvalidArgument, "beat grid is shorter than the matrix");

  std::map<std::pair<double, double>, double> best;
  auto emit = [&](std::size_t i, std::size_t j, double score) {
    const auto key = std::make_pair(grid[i + 1], grid[j + 1]);
    auto [it, inserted] = best.emplace(key, score);
    if (!inserted) it->second = std::max(it->second, score);
  };

  // The matrix is symmetric: a run on the upper diagonal at lag d mirrors one
  // on the lower diagonal, giving the backward jump.
  for (std::size_t lag = std::max<std::size_t>(1, min_jump_beats); lag < n; ++lag) {
    std::size_t i = 0;
    while (i + lag < n) {
      if (!rec.masked(i, i + lag)) {
        ++i;
        continue;
      }
      std::size_t end = i;
      double sum = 0.0;
      while (end + lag < n && rec.masked(end, end + lag)) {
        sum += rec.at(end, end + lag);
        ++end;
      }
      const std::size_t len = end - i;
      if (len >= min_run) {
        const double score = sum / static_cast<double>(len);
        for (std::size_t c = i; c < end; ++c) {
          emit(c, c + lag, score);
          emit(c + lag, c, score);
        }
      }
      i = end;
    }
  }

  std::vector<Cutpoint> out;
  out.reserve(best.size());
  for (const auto& [key, score] : best) out.push_back({key.first, key.second, score});
  return out;
}

std::vector<Cutpoint> cuts_in_segment(const std::vector<Cutpoint>& cuts, const IntensitySegment& seg) {
  std::vector<Cutpoint> out;
  for (const auto& c : cuts) {
    if (seg.contains(c.origin) && seg.contains(c.destination)) out.push_back(c);
  }
  return out;
}

CutpointSet filter_intra_segment(const std::vector<Cutpoint>& cuts, const LabeledPartition& partition) {
  CutpointSet set;
  set.candidates = cuts;
  for (const auto& c : cuts) {
    const auto seg = partition.segment_at(c.origin);
    if (seg && partition.segments[*seg].contains(c.origin) && partition.segments[*seg].contains(c.destination))
      set.intra_segment.push_back(c);
  }
  return set;
}

}  // namespace cadence
