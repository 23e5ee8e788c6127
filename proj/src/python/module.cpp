#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "cadence/bundle.hpp"
#include "cadence/error.hpp"
#include "cadence/eval.hpp"
#include "cadence/intensity.hpp"
#include "cadence/loudness.hpp"
#include "cadence/pipeline.hpp"
#include "cadence/renderer.hpp"
#include "cadence/scheduler.hpp"

namespace py = pybind11;
using namespace cadence;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

/// Accepts (frames,) or (channels, frames).
AudioBuffer to_buffer(const FloatArray& samples, int sample_rate) {
  if (samples.ndim() != 1 && samples.ndim() != 2)
    throw Error(ErrorCode::InvalidAudio, "samples must be 1-D or (channels, frames)", "samples");
  const auto channels = samples.ndim() == 1 ? 1 : samples.shape(0);
  const auto frames = samples.ndim() == 1 ? samples.shape(0) : samples.shape(1);
  AudioBuffer a(static_cast<int>(channels), static_cast<std::size_t>(frames), sample_rate);
  const float* p = samples.data();
  for (py::ssize_t c = 0; c < channels; ++c) std::copy(p + c * frames, p + (c + 1) * frames, a.channels[c].begin());
  a.validate();
  return a;
}

py::array_t<float> to_array(const AudioBuffer& a) {
  py::array_t<float> out({static_cast<py::ssize_t>(a.num_channels()), static_cast<py::ssize_t>(a.frames())});
  float* p = out.mutable_data();
  for (int c = 0; c < a.num_channels(); ++c) std::copy(a.channels[c].begin(), a.channels[c].end(), p + c * a.frames());
  return out;
}

py::object from_json(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

std::string to_json_text(const py::object& obj) { return py::module_::import("json").attr("dumps")(obj).cast<std::string>(); }

}  // namespace

PYBIND11_MODULE(_cadence, m) {
  m.doc() = "Structure-aware adaptive music playback";

  static py::exception<Error> error(m, "CadenceError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error)(e.message());
      exc.attr("code") = std::string(to_string(e.code()));
      exc.attr("field") = e.field();
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  m.def("lufs", [](const FloatArray& samples, int sample_rate) {
    const auto a = to_buffer(samples, sample_rate);
    return lufs(a, 0, static_cast<std::int64_t>(a.frames()));
  }, py::arg("samples"), py::arg("sample_rate"), "Ungated K-weighted loudness of the whole buffer.");

  m.def("beat_loudness", [](const FloatArray& samples, int sample_rate, std::vector<double> beats) {
    for (std::size_t i = 1; i < beats.size(); ++i)
      if (!(beats[i] > beats[i - 1]))
        throw Error(ErrorCode::BeatOrderViolation, "beats must be strictly increasing",
                    "beats[" + std::to_string(i) + "]");
    BeatGrid g;
    g.beats = std::move(beats);
    return beat_loudness(to_buffer(samples, sample_rate), g);
  }, py::arg("samples"), py::arg("sample_rate"), py::arg("beats"));

  m.def("label_intensity", [](const std::vector<std::pair<double, std::string>>& sections,
                              const std::vector<double>& loudness, double track_end) {
    SectionList s;
    for (const auto& [start, name] : sections) s.sections.push_back({start, parse_section_label(name), name});
    const auto r = label_intensity(s, loudness, track_end);
    py::list labels, segments;
    for (auto l : r.labels) labels.append(to_string(l));
    for (const auto& seg : r.partition.segments) segments.append(py::make_tuple(seg.start, seg.end, to_string(seg.label)));
    py::dict out;
    out["labels"] = labels;
    out["segments"] = segments;
    out["warnings"] = r.warnings;
    return out;
  }, py::arg("sections"), py::arg("loudness"), py::arg("track_end"),
     "sections are (start_s, label) pairs; returns labels and merged segments.");

  m.def("analyze", [](const std::string& bundle_dir) {
    const auto b = load_bundle(bundle_dir);
    return from_json(serialize_analysis(with_analysis(b, analyze_track(b)).document()));
  }, py::arg("bundle_dir"), "Analysis document for a bundle directory.");

  m.def("plan", [](const std::string& bundle_dir, double work_s, double rest_s) {
    const auto b = load_bundle(bundle_dir);
    const auto map = track_map(b);
    GuidedPlan plan;
    plan.work_s = work_s;
    plan.rest_s = rest_s;
    plan.validate();
    return from_json(schedule_to_json(guided_plan(map.partition, map.cuts, plan).schedule));
  }, py::arg("bundle_dir"), py::arg("work_s"), py::arg("rest_s"));

  m.def("render", [](const std::string& bundle_dir, const py::object& schedule) {
    const auto b = load_bundle(bundle_dir);
    return to_array(render_schedule(b.mixture, b.beats, schedule_from_json(to_json_text(schedule))));
  }, py::arg("bundle_dir"), py::arg("schedule"), "Renders a schedule; returns (channels, frames) float32.");

  m.def("paired_t_test", [](const std::vector<double>& a, const std::vector<double>& b) {
    const auto r = paired_t_test(a, b);
    return py::make_tuple(r.t, r.df, r.p);
  }, py::arg("a"), py::arg("b"), "Returns (t, df, p).");

  m.def("ks_uniform", [](const std::vector<double>& samples, double lo, double hi) {
    const auto r = ks_uniform(samples, lo, hi);
    return py::make_tuple(r.statistic, r.p);
  }, py::arg("samples"), py::arg("lo"), py::arg("hi"), "Returns (statistic, p).");
}
