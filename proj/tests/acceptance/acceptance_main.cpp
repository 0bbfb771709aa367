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

// Prints one PASS/FAIL line per acceptance criterion. Exits non-zero only
// when a criterion outside kKnownDeviations fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "powerbench/analysis.hpp"
#include "powerbench/cli.hpp"
#include "powerbench/orchestrator.hpp"
#include "powerbench/protocol.hpp"
#include "powerbench/report.hpp"
#include "powerbench/telemetry.hpp"
#include "powerbench/text.hpp"
#include "test_helpers.hpp"

using namespace powerbench;
namespace pt = powerbench::testing;

namespace {

// Tolerances.
constexpr double kReplayValueTol = 1e-3;
constexpr double kRiemannRelTol = 0.005;
constexpr double kAdditivityRelTol = 1e-9;
constexpr double kSteadyStateRelTol = 0.001;
constexpr double kReplayMaxSeconds = 1.0;
constexpr double kEnergyMaxSeconds = 10.0;
constexpr double kOverheadW = 100.0;

// Published tables disagree with this ordering for one workload; see README.
const std::set<std::string> kKnownDeviations = {"ordering-700w"};

struct Outcome {
  bool pass = false;
  std::string detail;
};

const std::filesystem::path kSource = POWERBENCH_SOURCE_DIR;

std::string replay_path(const char* name) { return (kSource / "data/replay" / name).string(); }

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "powerbench");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<RunMetrics> replay_all() {
  MetricsOptions o;
  o.power_source = PowerSource::cap_proxy;
  o.overhead_W = kOverheadW;
  std::vector<RunMetrics> all;
  for (const char* f : {"table3_cv.csv", "table4_llm.csv"}) {
    const auto rows = parse_replay_csv(read_file(replay_path(f)));
    auto m = replay_metrics(rows, o);
    all.insert(all.end(), m.begin(), m.end());
  }
  return all;
}

bool has_line(const std::string& text, const std::string& prefix) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(prefix, 0) == 0) return true;
  }
  return false;
}

std::string line_for(const std::string& text, const std::string& prefix) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(prefix, 0) == 0) return line;
  }
  return {};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome replay_peaks() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = cli({"replay", replay_path("table3_cv.csv"), replay_path("table4_llm.csv"),
                      "--power-source", "cap-proxy", "--overhead-w", "100"});
  const double elapsed = seconds_since(t0);
  if (r.code != 0) return {false, "replay exited " + std::to_string(r.code) + ": " + r.err};
  std::string missing;
  for (const char* want : {"H100/ResNet-50: 300 W", "H100/Stable-Diffusion-v2: 300 W",
                           "H100/inference: 300 W", "H100/pre-training: 400 W"}) {
    if (!has_line(r.out, want)) missing += std::string(" ") + want;
  }
  const auto vit = line_for(r.out, "H100/ViT-L/16:");
  const bool vit_flagged = vit.find("[cap-proxy]") != std::string::npos;
  const bool fast = elapsed < kReplayMaxSeconds;
  std::string detail = "runtime " + format_fixed(elapsed, 3) + " s; ViT: '" + vit + "'";
  if (!missing.empty()) detail += "; missing:" + missing;
  return {missing.empty() && vit_flagged && fast, detail};
}

Outcome replay_value() {
  for (const auto& m : replay_all()) {
    if (m.workload == "ResNet-50" && m.device == "H100" && m.cap_W == 300) {
      const double expected = 4.0 * 1312.8 / 1300.0;
      const bool ok = std::abs(m.efficiency - 4.0394) <= kReplayValueTol &&
                      std::abs(m.efficiency - expected) <= 1e-12;
      return {ok, "efficiency " + format_fixed(m.efficiency, 6) + " units/J"};
    }
  }
  return {false, "H100/ResNet-50 at 300 W not found"};
}

Outcome h200_optimum() {
  const auto all = replay_all();
  const auto report = analyze_metrics(all, PowerSource::cap_proxy, kOverheadW);
  const std::map<std::string, double> want = {{"ResNet-50", 400}, {"ViT-L/16", 400},
                                              {"Stable-Diffusion-v2", 400}, {"inference", 400},
                                              {"pre-training", 500}};
  std::string detail;
  bool ok = true;
  int seen = 0;
  for (const auto& c : report.curves) {
    if (c.curve.device != "H200") continue;
    ++seen;
    const double got = c.peak ? c.peak->cap_W : -1;
    if (!detail.empty()) detail += " ";
    detail += c.curve.workload + "=" + format_double(got);
    ok = ok && want.count(c.curve.workload) && want.at(c.curve.workload) == got;
  }
  return {ok && seen == 5, detail};
}

Outcome ordering_700w() {
  const auto all = replay_all();
  std::map<std::string, std::map<std::string, double>> at700;
  for (const auto& m : all) {
    if (m.cap_W == 700) at700[m.workload][m.device] = m.throughput_per_gpu;
  }
  bool ok = at700.size() == 5;
  std::string detail;
  for (const auto& [wl, d] : at700) {
    const bool good = d.count("H200") && d.count("H100") && d.count("MI300X") &&
                      d.at("H200") > d.at("H100") && d.at("H100") > d.at("MI300X");
    if (!good) {
      if (!detail.empty()) detail += "; ";
      detail += wl + ": H200=" + format_double(d.at("H200")) + " H100=" +
                format_double(d.at("H100")) + " MI300X=" + format_double(d.at("MI300X"));
    }
    ok = ok && good;
  }
  if (ok) detail = "H200 > H100 > MI300X for all 5 workloads";
  return {ok, detail};
}

Outcome sweep_planning() {
  SweepSpec spec;
  spec.workload_command = {std::string(kBuiltinSyntheticCommand)};
  const auto h = plan_caps(spec, builtin_sim_device("h100-like").descriptor);
  const auto m = plan_caps(spec, builtin_sim_device("mi300x-like").descriptor);
  const bool ok = h == std::vector<double>{200, 300, 400, 500, 600, 700} &&
                  plan_sweep(spec, builtin_sim_device("h100-like").descriptor).size() == 6 &&
                  m.size() == 7 && m.back() == 750.0 && m.front() == 200.0;
  return {ok, "h100-like " + std::to_string(h.size()) + " caps, mi300x-like " +
                  std::to_string(m.size()) + " caps ending at " + format_double(m.back()) + " W"};
}

std::vector<RunMetrics> simulated_metrics(const char* profile) {
  SimBackend backend(make_sim_node(profile, 4));
  SimulatedDriver driver;
  SweepSpec spec;
  spec.workload_command = {std::string(kBuiltinSyntheticCommand)};
  const auto result = execute_sweep(spec, backend, driver);
  MetricsOptions o;
  o.overhead_W = kOverheadW;
  return metrics_for_records(result.records, o);
}

Outcome simulated_hill() {
  const auto metrics = simulated_metrics("h100-like");
  const auto curve = build_efficiency_curve(metrics);
  const auto peak = find_efficiency_peak(curve);
  const auto uni = check_unimodal(curve, 0.0);
  const auto r = cli({"simulate"});
  const bool cli_ok = r.code == 0 && has_line(r.out, "peak h100-like/synthetic: 300 W") &&
                      has_line(r.out, "unimodal h100-like/synthetic: yes");
  return {curve.points.size() == 6 && peak.cap_W == 300 && uni.unimodal && cli_ok,
          "peak " + format_double(peak.cap_W) + " W, unimodal=" + (uni.unimodal ? "yes" : "no") +
              ", cli " + (cli_ok ? "agrees" : "disagrees")};
}

Outcome enforcement() {
  std::vector<double> flagged;
  const auto metrics = simulated_metrics("mi300x-like");
  for (const auto& m : metrics) {
    if (!m.enforced) flagged.push_back(m.cap_W);
  }
  std::string detail = "unenforced:";
  for (double c : flagged) detail += " " + format_double(c);
  return {metrics.size() == 7 && flagged == std::vector<double>{200, 300}, detail};
}

// 1 ms midpoint Riemann sum of the piecewise-linear signal.
double riemann_1ms(const TelemetryTrace& trace, TimeWindow w) {
  constexpr std::int64_t kStep = 1'000'000;
  const auto& s = trace.samples;
  double joules = 0.0;
  std::size_t seg = 0;
  for (std::int64_t t = w.t_start_ns; t < w.t_end_ns; t += kStep) {
    const std::int64_t hi = std::min(t + kStep, w.t_end_ns);
    const double mid = 0.5 * static_cast<double>(t + hi);
    while (seg + 2 < s.size() && static_cast<double>(s[seg + 1].t_ns) < mid) ++seg;
    const double frac = (mid - static_cast<double>(s[seg].t_ns)) /
                        static_cast<double>(s[seg + 1].t_ns - s[seg].t_ns);
    const double p = s[seg].power_W + (s[seg + 1].power_W - s[seg].power_W) * frac;
    joules += p * static_cast<double>(hi - t) * 1e-9;
  }
  return joules;
}

Outcome energy_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20260101);
  double worst_riemann = 0.0, worst_add = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int n = 20 + static_cast<int>(rng() % 200);
    const auto trace = pt::random_trace(rng, n);
    std::uniform_int_distribution<std::int64_t> pick(trace.span_start_ns(), trace.span_end_ns());
    std::int64_t a = pick(rng), b = pick(rng);
    if (a > b) std::swap(a, b);
    if (b - a < 50'000'000) b = std::min(a + 50'000'000, trace.span_end_ns());
    if (b - a < 50'000'000) a = b - 50'000'000;
    const TimeWindow w{a, b};
    const double e = integrate_energy(trace, w);
    worst_riemann = std::max(worst_riemann, std::abs(e - riemann_1ms(trace, w)) / e);
    std::uniform_int_distribution<std::int64_t> cut(a, b);
    const std::int64_t c = cut(rng);
    const double split =
        integrate_energy(trace, TimeWindow{a, c}) + integrate_energy(trace, TimeWindow{c, b});
    worst_add = std::max(worst_add, std::abs(split - e) / e);
  }
  const double elapsed = seconds_since(t0);
  std::ostringstream d;
  d << "max Riemann rel err " << worst_riemann << ", max additivity rel err " << worst_add
    << ", " << format_fixed(elapsed, 2) << " s";
  return {worst_riemann <= kRiemannRelTol && worst_add <= kAdditivityRelTol &&
              elapsed < kEnergyMaxSeconds,
          d.str()};
}

std::vector<std::size_t> brute_front(const std::vector<ParetoPoint>& pts) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
      dominated = pts[j].performance >= pts[i].performance &&
                  pts[j].efficiency >= pts[i].efficiency &&
                  (pts[j].performance > pts[i].performance ||
                   pts[j].efficiency > pts[i].efficiency);
    }
    if (!dominated) out.push_back(i);
  }
  return out;
}

Outcome pareto_oracle() {
  std::mt19937_64 rng(77);
  int mismatches = 0, not_idempotent = 0;
  for (int set = 0; set < 500; ++set) {
    const int n = 1 + static_cast<int>(rng() % 64);
    // Half the sets draw from a coarse grid so ties are common.
    const bool coarse = set % 2 == 0;
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::uniform_int_distribution<int> g(0, 8);
    std::vector<ParetoPoint> pts;
    for (int i = 0; i < n; ++i) {
      pts.push_back(coarse ? ParetoPoint{double(g(rng)), double(g(rng))}
                           : ParetoPoint{u(rng), u(rng)});
    }
    const auto front = pareto_front(pts);
    auto idx = front.indices;
    std::sort(idx.begin(), idx.end());
    if (idx != brute_front(pts)) ++mismatches;
    if (pareto_front(front.points).points != front.points) ++not_idempotent;
  }
  return {mismatches == 0 && not_idempotent == 0,
          std::to_string(mismatches) + " mismatches, " + std::to_string(not_idempotent) +
              " non-idempotent of 500 sets"};
}

// Serialized lines through the stream parser, as a recorded workload would
// deliver them.
std::vector<WorkloadEvent> through_parser(const std::vector<WorkloadEvent>& events) {
  EventStreamParser parser;
  for (const auto& ev : events) parser.feed(serialize_event(ev), ev.recv_t_ns);
  return parser.take_events();
}

Outcome warmup_semantics() {
  constexpr std::int64_t kSamples = 256;
  constexpr std::int64_t kBatchNs = 480'000'000;
  const double steady = kSamples / (kBatchNs * 1e-9);
  double worst = 0.0;
  bool epochs_ok = true;
  std::vector<double> rates;
  for (std::int64_t gap : {0LL, 5'000'000LL, 250'000'000LL, 2'000'000'000LL}) {
    const auto events = through_parser(pt::StreamBuilder()
                                           .handshake()
                                           .epochs(11, 10, kSamples, kBatchNs, gap, 3 * kBatchNs)
                                           .run_end()
                                           .events());
    const auto windows = build_measurement_windows(events, WarmupPolicy{1, 0});
    std::set<std::int64_t> epochs;
    for (const auto& w : windows) epochs.insert(w.epoch_index);
    epochs_ok = epochs_ok && windows.size() == 100 && *epochs.begin() == 1 &&
                *epochs.rbegin() == 10 && epochs.size() == 10;
    const double rate = compute_work_units(windows, WorkUnit::images).throughput();
    rates.push_back(rate);
    worst = std::max(worst, std::abs(rate - steady) / steady);
  }
  const double spread = *std::max_element(rates.begin(), rates.end()) -
                        *std::min_element(rates.begin(), rates.end());

  // Recorded stream: three epochs, the first excluded.
  const auto text = read_file(kSource / "tests/fixtures/golden_stream.ndjson");
  EventStreamParser parser;
  std::int64_t t = 0;
  for (const auto& line : split(text, '\n')) {
    if (!trim(line).empty()) parser.feed(line, t += 1'000'000);
  }
  const auto golden = build_measurement_windows(parser.events(), WarmupPolicy{1, 0});
  const bool golden_ok = golden.size() == 6 && golden.front().epoch_index == 1;

  std::ostringstream d;
  d << "max steady-state rel err " << worst << ", gap spread " << spread
    << " units/s, epochs 2-11 only=" << (epochs_ok ? "yes" : "no");
  return {epochs_ok && golden_ok && worst <= kSteadyStateRelTol && spread <= 1e-9 * steady,
          d.str()};
}

Outcome persistence() {
  pt::TempDir dir;
  SimBackend backend(make_sim_node("h100-like", 4));
  SimulatedDriver driver;
  SweepSpec spec;
  spec.workload_command = {std::string(kBuiltinSyntheticCommand)};
  const auto result = execute_sweep(spec, backend, driver, dir.path());
  MetricsOptions o;
  o.overhead_W = kOverheadW;
  const auto in_process = render_sweep_outputs(result.records, o).analysis_document;
  const auto r = cli({"analyze", dir.path().string()});
  const bool same = r.code == 0 && r.out == in_process;
  return {same, same ? "analyze output matches byte for byte (" +
                           std::to_string(in_process.size()) + " bytes)"
                     : "analyze output differs"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"replay-peaks", replay_peaks},
      {"replay-value", replay_value},
      {"h200-optimum", h200_optimum},
      {"ordering-700w", ordering_700w},
      {"sweep-planning", sweep_planning},
      {"simulated-hill", simulated_hill},
      {"enforcement", enforcement},
      {"energy-oracle", energy_oracle},
      {"pareto-oracle", pareto_oracle},
      {"warmup-semantics", warmup_semantics},
      {"persistence-round-trip", persistence},
  };
  int unexpected = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const bool known = kKnownDeviations.count(name) > 0;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << "  " << o.detail;
    if (!o.pass && known) std::cout << "  [documented deviation]";
    std::cout << "\n";
    if (!o.pass && !known) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
