// Copyright 2026 The powerbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "powerbench/analysis.hpp"
#include "powerbench/cli.hpp"
#include "powerbench/error.hpp"
#include "powerbench/orchestrator.hpp"
#include "powerbench/report.hpp"
#include "powerbench/text.hpp"

namespace py = pybind11;
using namespace powerbench;

namespace {

TelemetryTrace make_trace(const std::vector<std::int64_t>& t_ns, const std::vector<double>& power,
                          int interval_ms) {
  if (t_ns.size() != power.size()) {
    throw Error(ErrorCode::invalid_argument, "time and power arrays differ in length");
  }
  TelemetryTrace trace;
  trace.device_id = "py";
  trace.interval_ms = interval_ms;
  for (std::size_t i = 0; i < t_ns.size(); ++i) {
    PowerSample s;
    s.t_ns = t_ns[i];
    s.device_id = trace.device_id;
    s.power_W = power[i];
    s.valid = true;
    trace.samples.push_back(s);
  }
  flag_gaps(trace);
  return trace;
}

EfficiencyCurve make_curve(const std::vector<double>& caps, const std::vector<double>& effs) {
  if (caps.size() != effs.size()) {
    throw Error(ErrorCode::invalid_argument, "caps and efficiencies differ in length");
  }
  EfficiencyCurve c;
  for (std::size_t i = 0; i < caps.size(); ++i) c.points.push_back({caps[i], 0.0, effs[i]});
  return c;
}

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_powerbench, m) {
  m.doc() = "powerbench core bindings";

  static py::exception<Error> error(m, "PowerbenchError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), (std::string(to_string(e.code())) + ": " + e.what()).c_str());
    }
  });

  m.def("builtin_profile_names", &builtin_profile_names);

  m.def(
      "simulate_operating_point",
      [](const std::string& profile, double cap_W) {
        const auto op = simulate_operating_point(builtin_sim_device(profile).profile, cap_W);
        py::dict d;
        d["power_w"] = op.power_W;
        d["sm_clock_mhz"] = op.sm_clock_MHz;
        d["mem_clock_mhz"] = op.mem_clock_MHz;
        d["throughput"] = op.throughput_units_per_s;
        return d;
      },
      py::arg("profile"), py::arg("cap_w"));

  m.def(
      "plan_caps",
      [](const std::string& profile, double start, double end, double step,
         bool include_device_max) {
        SweepSpec spec;
        spec.cap_start_W = start;
        spec.cap_end_W = end;
        spec.cap_step_W = step;
        spec.include_device_max = include_device_max;
        return plan_caps(spec, builtin_sim_device(profile).descriptor);
      },
      py::arg("profile"), py::arg("start_w") = 200.0, py::arg("end_w") = 700.0,
      py::arg("step_w") = 100.0, py::arg("include_device_max") = true);

  m.def(
      "integrate_energy",
      [](const std::vector<std::int64_t>& t_ns, const std::vector<double>& power,
         std::int64_t start_ns, std::int64_t end_ns) {
        return integrate_energy(make_trace(t_ns, power, kDefaultSamplingIntervalMs),
                                TimeWindow{start_ns, end_ns});
      },
      py::arg("t_ns"), py::arg("power_w"), py::arg("start_ns"), py::arg("end_ns"));

  m.def(
      "enforcement_verdict",
      [](double cap_W, double mean_W, double tolerance) {
        const auto v = enforcement_verdict(cap_W, mean_W, tolerance);
        return py::make_tuple(v.enforced, v.excess_fraction);
      },
      py::arg("cap_w"), py::arg("mean_power_w"),
      py::arg("tolerance") = kDefaultEnforcementTolerance);

  m.def(
      "parse_event_line",
      [](const std::string& line, std::int64_t recv_t_ns) {
        const auto ev = parse_event_line(line, recv_t_ns);
        py::dict d;
        d["ev"] = std::string(to_string(ev.kind));
        d["seq"] = ev.seq;
        d["epoch"] = ev.epoch_index;
        d["samples"] = ev.samples;
        d["recv_t_ns"] = ev.recv_t_ns;
        if (ev.kind == EventKind::handshake) {
          d["workload"] = ev.workload;
          d["unit"] = std::string(to_string(ev.unit));
          d["version"] = ev.version;
        }
        return d;
      },
      py::arg("line"), py::arg("recv_t_ns") = 0);

  m.def(
      "stream_throughput",
      [](const std::vector<std::pair<std::string, std::int64_t>>& lines, std::int64_t skip_epochs,
         std::int64_t skip_steps) {
        EventStreamParser parser;
        for (const auto& [line, t] : lines) parser.feed(line, t);
        const auto events = parser.take_events();
        const auto windows =
            build_measurement_windows(events, WarmupPolicy{skip_epochs, skip_steps});
        const auto work = compute_work_units(windows, events.front().unit);
        return py::make_tuple(work.total_samples, work.active_time_s, work.throughput());
      },
      py::arg("lines"), py::arg("skip_epochs") = 1, py::arg("skip_steps") = 0);

  m.def(
      "pareto_front",
      [](const std::vector<std::pair<double, double>>& points) {
        std::vector<ParetoPoint> pts;
        for (const auto& [p, e] : points) pts.push_back({p, e});
        return pareto_front(pts).indices;
      },
      py::arg("points"));

  m.def(
      "find_efficiency_peak",
      [](const std::vector<double>& caps, const std::vector<double>& effs) {
        const auto p = find_efficiency_peak(make_curve(caps, effs));
        return py::make_tuple(p.cap_W, p.efficiency);
      },
      py::arg("caps_w"), py::arg("efficiencies"));

  m.def(
      "check_unimodal",
      [](const std::vector<double>& caps, const std::vector<double>& effs, double tolerance) {
        const auto v = check_unimodal(make_curve(caps, effs), tolerance);
        return py::make_tuple(v.unimodal, v.peak_index);
      },
      py::arg("caps_w"), py::arg("efficiencies"), py::arg("tolerance") = 0.0);

  m.def(
      "replay",
      [](const std::vector<std::string>& csv_texts, double overhead_W) {
        std::vector<RunMetrics> metrics;
        MetricsOptions options;
        options.overhead_W = overhead_W;
        options.power_source = PowerSource::cap_proxy;
        for (const auto& text : csv_texts) {
          const auto rows = parse_replay_csv(text);
          auto part = replay_metrics(rows, options);
          metrics.insert(metrics.end(), part.begin(), part.end());
        }
        return to_python(to_json(analyze_metrics(metrics, options.power_source, overhead_W)));
      },
      py::arg("csv_texts"), py::arg("overhead_w") = kDefaultNodeOverheadW);

  m.def(
      "simulate",
      [](const std::string& profile, const std::vector<double>& caps, int gpus,
         double overhead_W) {
        SimBackend backend(make_sim_node(profile, gpus));
        SimulatedDriver driver;
        SweepSpec spec;
        spec.explicit_caps = caps;
        spec.workload_command = {std::string(kBuiltinSyntheticCommand)};
        const auto result = execute_sweep(spec, backend, driver);
        MetricsOptions options;
        options.overhead_W = overhead_W;
        const auto metrics = metrics_for_records(result.records, options);
        return to_python(to_json(analyze_metrics(metrics, PowerSource::measured, overhead_W)));
      },
      py::arg("profile") = "h100-like", py::arg("caps_w") = std::vector<double>{},
      py::arg("gpus") = 4, py::arg("overhead_w") = kDefaultNodeOverheadW);

  m.def("format_table_value", &format_table_value, py::arg("value"));

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "powerbench");
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
