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

#include "powerbench/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "powerbench/error.hpp"
#include "powerbench/text.hpp"

namespace powerbench {

std::string_view to_string(PowerSource source) {
  return source == PowerSource::measured ? "measured" : "cap-proxy";
}

PowerSource power_source_from_string(std::string_view text) {
  if (text == "measured") return PowerSource::measured;
  if (text == "cap-proxy" || text == "cap_proxy") return PowerSource::cap_proxy;
  throw Error(ErrorCode::invalid_argument, "unknown power source '" + std::string(text) + "'");
}

// Per-run metrics -------------------------------------------------------------

RunMetrics compute_run_metrics(const RunRecord& record, const MetricsOptions& options) {
  if (record.status != RunStatus::completed) {
    throw Error(ErrorCode::undefined_metrics,
                "run " + record.config.run_id + " did not complete");
  }
  const auto hello = find_handshake(record.events);
  if (!hello) throw Error(ErrorCode::insufficient_data, "run has no handshake");

  const auto windows = build_measurement_windows(record.events, record.config.warmup);
  const auto work = compute_work_units(windows, hello->unit);
  if (!(work.active_time_s > 0.0)) {
    throw Error(ErrorCode::undefined_metrics, "measurement windows add up to zero time");
  }

  RunMetrics m;
  m.run_id = record.config.run_id;
  m.workload = hello->workload;
  m.device = record.config.devices.empty() ? std::string() : record.config.devices.front().name;
  m.unit = hello->unit;
  m.gpu_count = static_cast<int>(std::max<std::size_t>(1, record.config.devices.size()));
  m.cap_W = record.config.cap_W;
  m.node_throughput = static_cast<double>(work.total_samples) / work.active_time_s;
  m.throughput_per_gpu = m.node_throughput / m.gpu_count;
  m.active_time_s = work.active_time_s;
  m.overhead_W = options.overhead_W;
  m.power_source = options.power_source;

  const auto tw = time_windows(windows);
  if (!record.traces.empty()) {
    double energy = 0.0;
    std::optional<EnforcementVerdict> worst;
    for (const auto& trace : record.traces) {
      const double e = integrate_energy(trace, std::span<const TimeWindow>(tw));
      energy += e;
      auto v = enforcement_verdict(m.cap_W, e / work.active_time_s,
                                   options.enforcement_tolerance);
      if (!worst || v.mean_power_W > worst->mean_power_W) worst = v;
    }
    m.enforcement = worst;
    m.enforced = worst->enforced;
    if (options.power_source == PowerSource::measured) m.energy_J = energy;
    try {
      m.clocks = clock_summary(std::span<const TelemetryTrace>(record.traces),
                               std::span<const TimeWindow>(tw));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::insufficient_data) throw;
    }
  } else if (options.power_source == PowerSource::measured) {
    throw Error(ErrorCode::insufficient_data, "run has no telemetry traces");
  }

  if (options.power_source == PowerSource::measured) {
    m.mean_power_per_gpu_W = *m.energy_J / work.active_time_s / m.gpu_count;
    m.node_power_W = *m.energy_J / work.active_time_s + options.overhead_W;
  } else {
    m.mean_power_per_gpu_W = m.cap_W;
    m.node_power_W = m.gpu_count * m.cap_W + options.overhead_W;
    m.energy_J = m.gpu_count * m.cap_W * work.active_time_s;
  }
  m.efficiency = m.node_throughput / m.node_power_W;
  m.per_gpu_efficiency = m.throughput_per_gpu / m.mean_power_per_gpu_W;
  return m;
}

std::vector<RunMetrics> aggregate_repeats(std::span<const RunMetrics> metrics) {
  std::vector<std::vector<const RunMetrics*>> groups;
  for (const auto& m : metrics) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) {
      return g.front()->workload == m.workload && g.front()->device == m.device &&
             g.front()->cap_W == m.cap_W;
    });
    if (it == groups.end()) {
      groups.push_back({&m});
    } else {
      it->push_back(&m);
    }
  }

  std::vector<RunMetrics> out;
  for (const auto& g : groups) {
    if (g.size() == 1) {
      out.push_back(*g.front());
      continue;
    }
    RunMetrics a = *g.front();
    const double n = static_cast<double>(g.size());
    auto mean = [&](auto field) {
      double s = 0.0;
      for (const auto* m : g) s += field(*m);
      return s / n;
    };
    a.throughput_per_gpu = mean([](const RunMetrics& m) { return m.throughput_per_gpu; });
    a.node_throughput = mean([](const RunMetrics& m) { return m.node_throughput; });
    a.mean_power_per_gpu_W = mean([](const RunMetrics& m) { return m.mean_power_per_gpu_W; });
    a.node_power_W = mean([](const RunMetrics& m) { return m.node_power_W; });
    const bool all_energy = std::all_of(g.begin(), g.end(), [](auto* m) { return m->energy_J; });
    a.energy_J = all_energy ? std::optional(mean([](const RunMetrics& m) { return *m.energy_J; }))
                            : std::nullopt;
    const bool all_time =
        std::all_of(g.begin(), g.end(), [](auto* m) { return m->active_time_s; });
    a.active_time_s = all_time
                          ? std::optional(mean([](const RunMetrics& m) { return *m.active_time_s; }))
                          : std::nullopt;
    a.efficiency = a.node_throughput / a.node_power_W;
    a.per_gpu_efficiency = a.throughput_per_gpu / a.mean_power_per_gpu_W;
    a.enforced = std::all_of(g.begin(), g.end(), [](auto* m) { return m->enforced; });
    for (const auto* m : g) {
      if (m->enforcement && (!a.enforcement || m->enforcement->mean_power_W >
                                                   a.enforcement->mean_power_W)) {
        a.enforcement = m->enforcement;
      }
    }
    out.push_back(std::move(a));
  }
  return out;
}

// Curves ------------------------------------------------------------------------

EfficiencyCurve build_efficiency_curve(std::span<const RunMetrics> metrics) {
  if (metrics.empty()) throw Error(ErrorCode::invalid_argument, "no metrics for curve");
  EfficiencyCurve c;
  c.workload = metrics.front().workload;
  c.device = metrics.front().device;
  c.unit = metrics.front().unit;
  for (const auto& m : metrics) {
    if (m.workload != c.workload || m.device != c.device) {
      throw Error(ErrorCode::invalid_argument, "curve mixes workloads or devices");
    }
    c.points.push_back({m.cap_W, m.throughput_per_gpu, m.efficiency});
  }
  std::stable_sort(c.points.begin(), c.points.end(),
                   [](const auto& a, const auto& b) { return a.cap_W < b.cap_W; });
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    if (c.points[i].cap_W == c.points[i - 1].cap_W) {
      throw Error(ErrorCode::invalid_argument,
                  "duplicate cap " + format_double(c.points[i].cap_W) +
                      " W; aggregate repeats first");
    }
  }
  return c;
}

EfficiencyPeak find_efficiency_peak(const EfficiencyCurve& curve) {
  if (curve.points.size() < 2) {
    throw Error(ErrorCode::too_few_points, "peak analysis needs at least 2 points");
  }
  EfficiencyPeak p;
  p.cap_W = curve.points[0].cap_W;
  p.efficiency = curve.points[0].efficiency;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    if (curve.points[i].efficiency > p.efficiency) {
      p = {curve.points[i].cap_W, curve.points[i].efficiency, i};
    }
  }
  return p;
}

UnimodalityVerdict check_unimodal(const EfficiencyCurve& curve, double tolerance) {
  if (curve.points.size() < 3) {
    throw Error(ErrorCode::too_few_points, "unimodality check needs at least 3 points");
  }
  const auto peak = find_efficiency_peak(curve);
  double top = 0.0;
  for (const auto& p : curve.points) top = std::max(top, std::abs(p.efficiency));
  const double forgiven = tolerance * top;

  // A step against the expected direction is a violation unless it is
  // smaller than the forgiven amount.
  auto violates = [&](double against) { return against > 0.0 && against >= forgiven; };
  UnimodalityVerdict v;
  v.peak_index = peak.index;
  v.unimodal = true;
  const auto& pts = curve.points;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double step = pts[i + 1].efficiency - pts[i].efficiency;
    if (i < peak.index ? violates(-step) : violates(step)) {
      v.unimodal = false;
      break;
    }
  }
  return v;
}

// Pareto ------------------------------------------------------------------------

ParetoFront pareto_front(std::span<const ParetoPoint> points) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return points[a].performance > points[b].performance;
  });

  std::vector<std::size_t> keep;
  double best_faster = -INFINITY;  // best efficiency among strictly faster points
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double group_best = -INFINITY;
    while (j < order.size() && points[order[j]].performance == points[order[i]].performance) {
      group_best = std::max(group_best, points[order[j]].efficiency);
      ++j;
    }
    for (std::size_t k = i; k < j; ++k) {
      const double e = points[order[k]].efficiency;
      if (e > best_faster && e >= group_best) keep.push_back(order[k]);
    }
    best_faster = std::max(best_faster, group_best);
    i = j;
  }

  std::stable_sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].performance != points[b].performance) {
      return points[a].performance < points[b].performance;
    }
    return a < b;
  });
  ParetoFront f;
  f.indices = keep;
  for (auto i : keep) f.points.push_back(points[i]);
  return f;
}

std::vector<ParetoPoint> curve_points(const EfficiencyCurve& curve) {
  std::vector<ParetoPoint> out;
  for (const auto& p : curve.points) out.push_back({p.performance, p.efficiency});
  return out;
}

// Platform comparison -----------------------------------------------------------

ComparisonTable compare_platforms(
    const std::map<std::string, EfficiencyCurve>& curves_by_device) {
  if (curves_by_device.size() < 2) {
    throw Error(ErrorCode::invalid_argument, "comparison needs at least two devices");
  }
  std::set<double> common;
  bool first = true;
  for (const auto& [device, curve] : curves_by_device) {
    std::set<double> caps;
    for (const auto& p : curve.points) caps.insert(p.cap_W);
    if (first) {
      common = caps;
      first = false;
    } else {
      std::set<double> both;
      std::set_intersection(common.begin(), common.end(), caps.begin(), caps.end(),
                            std::inserter(both, both.end()));
      common = std::move(both);
    }
  }
  if (common.empty()) throw Error(ErrorCode::invalid_argument, "devices share no cap");

  ComparisonTable table;
  table.workload = curves_by_device.begin()->second.workload;
  std::string leader;
  for (double cap : common) {
    PlatformRanking r;
    r.cap_W = cap;
    for (const auto& [device, curve] : curves_by_device) {
      for (const auto& p : curve.points) {
        if (p.cap_W == cap) r.order.emplace_back(device, p.performance);
      }
    }
    std::stable_sort(r.order.begin(), r.order.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    r.tie_at_top = r.order[0].second == r.order[1].second;
    if (!r.tie_at_top) {
      const auto& top = r.order.front().first;
      if (!leader.empty() && top != leader) table.crossovers.push_back({cap, leader, top});
      leader = top;
    }
    table.rankings.push_back(std::move(r));
  }
  return table;
}

// Full analysis -----------------------------------------------------------------

AnalysisReport analyze_metrics(std::span<const RunMetrics> metrics, PowerSource power_source,
                               double overhead_W, double unimodal_tolerance) {
  AnalysisReport report;
  report.power_source = power_source;
  report.overhead_W = overhead_W;
  report.unimodal_tolerance = unimodal_tolerance;

  const auto aggregated = aggregate_repeats(metrics);
  std::map<std::pair<std::string, std::string>, std::vector<RunMetrics>> groups;
  for (const auto& m : aggregated) groups[{m.workload, m.device}].push_back(m);

  std::map<std::string, std::map<std::string, EfficiencyCurve>> by_workload;
  for (auto& [key, group] : groups) {
    CurveAnalysis ca;
    std::stable_sort(group.begin(), group.end(),
                     [](const auto& a, const auto& b) { return a.cap_W < b.cap_W; });
    ca.curve = build_efficiency_curve(group);
    ca.metrics = group;
    if (ca.curve.points.size() >= 2) {
      ca.peak = find_efficiency_peak(ca.curve);
    } else {
      ca.note = "peak analysis declined: needs at least 2 caps, curve has 1";
    }
    if (ca.curve.points.size() >= 3) {
      ca.unimodality = check_unimodal(ca.curve, unimodal_tolerance);
    } else if (ca.note.empty()) {
      ca.note = "unimodality check declined: needs at least 3 caps";
    }
    const auto pts = curve_points(ca.curve);
    ca.on_pareto_front.assign(pts.size(), false);
    for (auto i : pareto_front(pts).indices) ca.on_pareto_front[i] = true;
    by_workload[key.first][key.second] = ca.curve;
    report.curves.push_back(std::move(ca));
  }

  for (const auto& [workload, curves] : by_workload) {
    if (curves.size() < 2) continue;
    try {
      report.comparisons.push_back(compare_platforms(curves));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::invalid_argument) throw;
    }
  }
  return report;
}

std::vector<RunMetrics> metrics_for_records(std::span<const RunRecord> records,
                                            const MetricsOptions& options) {
  std::vector<RunMetrics> out;
  for (const auto& r : records) {
    if (r.status != RunStatus::completed) continue;
    out.push_back(compute_run_metrics(r, options));
  }
  return out;
}

namespace {

template <typename T>
nlohmann::json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const RunMetrics& m) {
  nlohmann::json j = {
      {"run_id", m.run_id},
      {"workload", m.workload},
      {"device", m.device},
      {"unit", to_string(m.unit)},
      {"gpu_count", m.gpu_count},
      {"cap_w", m.cap_W},
      {"throughput_per_gpu", m.throughput_per_gpu},
      {"node_throughput", m.node_throughput},
      {"energy_j", optional_json(m.energy_J)},
      {"active_time_s", optional_json(m.active_time_s)},
      {"mean_power_per_gpu_w", m.mean_power_per_gpu_W},
      {"node_power_w", m.node_power_W},
      {"overhead_w", m.overhead_W},
      {"efficiency_units_per_j", m.efficiency},
      {"per_gpu_efficiency_units_per_j", m.per_gpu_efficiency},
      {"power_source", to_string(m.power_source)},
      {"enforced", m.enforced},
      {"enforcement", nullptr},
      {"clocks", nullptr},
  };
  if (m.enforcement) {
    j["enforcement"] = {{"cap_w", m.enforcement->cap_W},
                        {"mean_power_w", m.enforcement->mean_power_W},
                        {"enforced", m.enforcement->enforced},
                        {"excess_fraction", m.enforcement->excess_fraction}};
  }
  if (m.clocks) {
    j["clocks"] = {{"sm_clock_mean_mhz", m.clocks->sm_clock_mean},
                   {"sm_clock_p5_mhz", m.clocks->sm_clock_p5},
                   {"sm_clock_p95_mhz", m.clocks->sm_clock_p95},
                   {"mem_clock_mode_mhz", m.clocks->mem_clock_mode},
                   {"sample_count", m.clocks->sample_count}};
  }
  return j;
}

nlohmann::json to_json(const AnalysisReport& report) {
  nlohmann::json curves = nlohmann::json::array();
  for (const auto& ca : report.curves) {
    nlohmann::json points = nlohmann::json::array();
    for (std::size_t i = 0; i < ca.curve.points.size(); ++i) {
      const auto& p = ca.curve.points[i];
      points.push_back({{"cap_w", p.cap_W},
                        {"performance_per_gpu", p.performance},
                        {"efficiency_units_per_j", p.efficiency},
                        {"on_pareto_front", static_cast<bool>(ca.on_pareto_front[i])},
                        {"metrics", to_json(ca.metrics[i])}});
    }
    nlohmann::json c = {{"workload", ca.curve.workload},
                        {"device", ca.curve.device},
                        {"unit", to_string(ca.curve.unit)},
                        {"points", points},
                        {"peak", nullptr},
                        {"unimodality", nullptr},
                        {"note", ca.note}};
    if (ca.peak) {
      c["peak"] = {{"cap_w", ca.peak->cap_W},
                   {"efficiency_units_per_j", ca.peak->efficiency},
                   {"index", ca.peak->index}};
    }
    if (ca.unimodality) {
      c["unimodality"] = {{"unimodal", ca.unimodality->unimodal},
                          {"peak_index", ca.unimodality->peak_index}};
    }
    curves.push_back(std::move(c));
  }

  nlohmann::json comparisons = nlohmann::json::array();
  for (const auto& t : report.comparisons) {
    nlohmann::json rankings = nlohmann::json::array();
    for (const auto& r : t.rankings) {
      nlohmann::json order = nlohmann::json::array();
      for (const auto& [device, value] : r.order) {
        order.push_back({{"device", device}, {"throughput_per_gpu", value}});
      }
      rankings.push_back({{"cap_w", r.cap_W}, {"order", order}, {"tie_at_top", r.tie_at_top}});
    }
    nlohmann::json crossovers = nlohmann::json::array();
    for (const auto& x : t.crossovers) {
      crossovers.push_back({{"cap_w", x.cap_W}, {"from", x.from}, {"to", x.to}});
    }
    comparisons.push_back(
        {{"workload", t.workload}, {"rankings", rankings}, {"crossovers", crossovers}});
  }

  return {{"power_source", to_string(report.power_source)},
          {"overhead_w", report.overhead_W},
          {"unimodal_tolerance", report.unimodal_tolerance},
          {"curves", curves},
          {"comparisons", comparisons},
          {"peaks", peak_summary_lines(report)}};
}

std::string render_analysis_document(const AnalysisReport& report) {
  return to_json(report).dump(2) + "\n";
}

std::vector<std::string> peak_summary_lines(const AnalysisReport& report) {
  std::vector<std::string> lines;
  for (const auto& ca : report.curves) {
    std::string line = ca.curve.device + "/" + ca.curve.workload + ": ";
    if (!ca.peak) {
      line += ca.note;
    } else {
      line += format_double(ca.peak->cap_W) + " W";
      if (report.power_source == PowerSource::cap_proxy) line += " [cap-proxy]";
      if (!ca.metrics[ca.peak->index].enforced) line += " [unenforced cap]";
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

// Replay ------------------------------------------------------------------------

std::vector<ReplayRow> parse_replay_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw ParseError("empty replay table", 0);
  const auto header = rows.front();
  std::string joined;
  for (std::size_t i = 0; i < header.size(); ++i) joined += (i ? "," : "") + header[i];
  if (joined != kReplayCsvHeader) {
    throw ParseError("replay header must be '" + std::string(kReplayCsvHeader) + "'", 0);
  }
  std::vector<ReplayRow> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    if (f.size() == 1 && trim(f[0]).empty()) continue;
    if (f.size() != 6) {
      throw ParseError("replay row " + std::to_string(r) + " has " + std::to_string(f.size()) +
                           " fields, expected 6",
                       0);
    }
    ReplayRow row;
    row.workload = f[0];
    row.device = f[1];
    row.cap_W = parse_double(f[2]);
    row.throughput_per_gpu = parse_double(f[3]);
    if (f[4] != "images" && f[4] != "tokens") {
      throw ParseError("replay row " + std::to_string(r) + ": unknown unit '" + f[4] + "'", 0);
    }
    row.unit = work_unit_from_string(f[4]);
    row.gpus = static_cast<int>(parse_int(f[5]));
    if (row.gpus < 1 || !(row.cap_W > 0.0) || row.throughput_per_gpu < 0.0) {
      throw ParseError("replay row " + std::to_string(r) + " has out-of-range values", 0);
    }
    out.push_back(std::move(row));
  }
  if (out.empty()) throw Error(ErrorCode::insufficient_data, "replay table has no rows");
  return out;
}

std::map<std::string, double> default_enforcement_floors() { return {{"MI300X", 400.0}}; }

std::vector<RunMetrics> replay_metrics(std::span<const ReplayRow> rows,
                                       const MetricsOptions& options,
                                       const std::map<std::string, double>& enforcement_floors) {
  if (options.power_source != PowerSource::cap_proxy) {
    throw Error(ErrorCode::invalid_argument,
                "replayed tables carry no traces; use the cap-proxy power source");
  }
  std::vector<RunMetrics> out;
  for (const auto& row : rows) {
    RunMetrics m;
    m.workload = row.workload;
    m.device = row.device;
    m.unit = row.unit;
    m.gpu_count = row.gpus;
    m.cap_W = row.cap_W;
    m.throughput_per_gpu = row.throughput_per_gpu;
    m.node_throughput = row.throughput_per_gpu * row.gpus;
    m.mean_power_per_gpu_W = row.cap_W;
    m.node_power_W = row.gpus * row.cap_W + options.overhead_W;
    m.overhead_W = options.overhead_W;
    m.efficiency = m.node_throughput / m.node_power_W;
    m.per_gpu_efficiency = m.throughput_per_gpu / row.cap_W;
    m.power_source = PowerSource::cap_proxy;
    const auto floor = enforcement_floors.find(row.device);
    m.enforced = floor == enforcement_floors.end() || row.cap_W >= floor->second;
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace powerbench
