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

#include "powerbench/telemetry.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <map>
#include <mutex>

#include "powerbench/error.hpp"
#include "powerbench/text.hpp"

namespace powerbench {

std::int64_t SteadyClock::now_ns() const {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::int64_t TelemetryTrace::span_start_ns() const {
  return samples.empty() ? 0 : samples.front().t_ns;
}

std::int64_t TelemetryTrace::span_end_ns() const {
  return samples.empty() ? 0 : samples.back().t_ns;
}

std::size_t TelemetryTrace::valid_count() const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.valid; }));
}

PowerSample read_telemetry_sample(DeviceBackend& backend, const std::string& device_id,
                                  const Clock& clock) {
  PowerSample s;
  s.device_id = device_id;
  try {
    const auto r = backend.read(device_id);
    s.t_ns = clock.now_ns();
    s.power_W = r.power_W;
    s.sm_clock_MHz = r.sm_clock_MHz;
    s.mem_clock_MHz = r.mem_clock_MHz;
    s.memory_used_bytes = r.memory_used_bytes;
    s.valid = r.power_W >= 0.0 && std::isfinite(r.power_W);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::device_lost) throw;
    s.t_ns = clock.now_ns();
    s.valid = false;
  }
  return s;
}

TelemetryTrace run_sampler(DeviceBackend& backend, const std::string& device_id,
                           int interval_ms, std::stop_token stop, const Clock& clock) {
  if (interval_ms < 1) {
    throw Error(ErrorCode::invalid_argument, "sampling interval must be >= 1 ms");
  }
  TelemetryTrace trace;
  trace.device_id = device_id;
  trace.interval_ms = interval_ms;

  std::mutex m;
  std::condition_variable_any cv;
  const auto period = std::chrono::milliseconds(interval_ms);
  auto next = std::chrono::steady_clock::now();

  while (!stop.stop_requested()) {
    try {
      auto s = read_telemetry_sample(backend, device_id, clock);
      if (!trace.samples.empty() && s.t_ns <= trace.samples.back().t_ns) {
        s.t_ns = trace.samples.back().t_ns + 1;
      }
      trace.samples.push_back(std::move(s));
    } catch (const Error&) {
      trace.incomplete = true;
      break;
    }
    next += period;
    std::unique_lock lock(m);
    cv.wait_until(lock, stop, next, [] { return false; });
  }
  // Closing sample so the last batch is bracketed.
  if (!trace.incomplete && !trace.samples.empty()) {
    try {
      auto s = read_telemetry_sample(backend, device_id, clock);
      if (!trace.samples.empty() && s.t_ns <= trace.samples.back().t_ns) {
        s.t_ns = trace.samples.back().t_ns + 1;
      }
      trace.samples.push_back(std::move(s));
    } catch (const Error&) {
      trace.incomplete = true;
    }
  }
  flag_gaps(trace);
  return trace;
}

void flag_gaps(TelemetryTrace& trace, double jitter_tolerance) {
  trace.gap_flags.clear();
  const double limit_ns = trace.interval_ms * 1e6 * (1.0 + jitter_tolerance);
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    const bool late =
        i > 0 && static_cast<double>(trace.samples[i].t_ns - trace.samples[i - 1].t_ns) >
                     limit_ns;
    if (!trace.samples[i].valid || late) trace.gap_flags.push_back(i);
  }
}

namespace {

/// Valid samples only; the piecewise linear interpolant through these is the
/// power signal.
struct PowerSeries {
  std::vector<std::int64_t> t;
  std::vector<double> p;

  explicit PowerSeries(const TelemetryTrace& trace) {
    for (const auto& s : trace.samples) {
      if (!s.valid) continue;
      t.push_back(s.t_ns);
      p.push_back(s.power_W);
    }
    if (t.size() < 2) {
      throw Error(ErrorCode::insufficient_data,
                  "trace " + trace.device_id + " has fewer than 2 valid samples");
    }
  }

  double at(std::size_t seg, std::int64_t time) const {
    const double frac = static_cast<double>(time - t[seg]) /
                        static_cast<double>(t[seg + 1] - t[seg]);
    return p[seg] + (p[seg + 1] - p[seg]) * frac;
  }

  double integrate(TimeWindow w) const {
    if (w.t_end_ns < w.t_start_ns) {
      throw Error(ErrorCode::invalid_argument, "window ends before it starts");
    }
    if (w.t_start_ns < t.front() || w.t_end_ns > t.back()) {
      throw Error(ErrorCode::insufficient_data,
                  "window is not covered by valid samples");
    }
    // First segment whose right end lies beyond the window start.
    auto it = std::upper_bound(t.begin(), t.end(), w.t_start_ns);
    std::size_t seg = it == t.begin() ? 0 : static_cast<std::size_t>(it - t.begin()) - 1;
    double joules = 0.0;
    for (; seg + 1 < t.size() && t[seg] < w.t_end_ns; ++seg) {
      const std::int64_t lo = std::max(t[seg], w.t_start_ns);
      const std::int64_t hi = std::min(t[seg + 1], w.t_end_ns);
      if (hi <= lo) continue;
      joules += 0.5 * (at(seg, lo) + at(seg, hi)) * static_cast<double>(hi - lo) * 1e-9;
    }
    return joules;
  }
};

double percentile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - static_cast<double>(lo));
}

ClockSummary summarize(std::vector<double> sm, const std::vector<double>& mem) {
  if (sm.empty()) {
    throw Error(ErrorCode::insufficient_data, "no valid samples in window");
  }
  ClockSummary out;
  out.sample_count = sm.size();
  double sum = 0.0;
  for (double v : sm) sum += v;
  out.sm_clock_mean = sum / static_cast<double>(sm.size());
  std::sort(sm.begin(), sm.end());
  out.sm_clock_p5 = percentile(sm, 0.05);
  out.sm_clock_p95 = percentile(sm, 0.95);

  std::map<double, std::size_t> counts;
  for (double v : mem) ++counts[v];
  std::size_t best = 0;
  for (const auto& [clock, n] : counts) {
    if (n > best) {
      best = n;
      out.mem_clock_mode = clock;
    }
  }
  return out;
}

void collect_clocks(const TelemetryTrace& trace, TimeWindow w, std::vector<double>& sm,
                    std::vector<double>& mem) {
  for (const auto& s : trace.samples) {
    if (!s.valid || s.t_ns < w.t_start_ns || s.t_ns > w.t_end_ns) continue;
    sm.push_back(s.sm_clock_MHz);
    mem.push_back(s.mem_clock_MHz);
  }
}

}  // namespace

double integrate_energy(const TelemetryTrace& trace, TimeWindow window) {
  return PowerSeries(trace).integrate(window);
}

double integrate_energy(const TelemetryTrace& trace, std::span<const TimeWindow> windows) {
  const PowerSeries series(trace);
  double joules = 0.0;
  for (const auto& w : windows) joules += series.integrate(w);
  return joules;
}

double mean_power(const TelemetryTrace& trace, TimeWindow window) {
  if (window.t_end_ns <= window.t_start_ns) {
    throw Error(ErrorCode::insufficient_data, "empty window");
  }
  return integrate_energy(trace, window) / window.duration_s();
}

double mean_power(const TelemetryTrace& trace, std::span<const TimeWindow> windows) {
  std::int64_t total_ns = 0;
  for (const auto& w : windows) total_ns += w.t_end_ns - w.t_start_ns;
  if (total_ns <= 0) throw Error(ErrorCode::insufficient_data, "empty window set");
  return integrate_energy(trace, windows) / (static_cast<double>(total_ns) * 1e-9);
}

ClockSummary clock_summary(const TelemetryTrace& trace, TimeWindow window) {
  std::vector<double> sm, mem;
  collect_clocks(trace, window, sm, mem);
  return summarize(std::move(sm), mem);
}

ClockSummary clock_summary(std::span<const TelemetryTrace> traces,
                           std::span<const TimeWindow> windows) {
  std::vector<double> sm, mem;
  for (const auto& trace : traces) {
    for (const auto& w : windows) collect_clocks(trace, w, sm, mem);
  }
  return summarize(std::move(sm), mem);
}

EnforcementVerdict enforcement_verdict(double cap_W, double mean_power_W, double tolerance) {
  if (!(cap_W > 0.0)) throw Error(ErrorCode::invalid_argument, "cap must be positive");
  EnforcementVerdict v;
  v.cap_W = cap_W;
  v.mean_power_W = mean_power_W;
  v.enforced = mean_power_W <= cap_W * (1.0 + tolerance);
  v.excess_fraction = std::max(0.0, mean_power_W / cap_W - 1.0);
  return v;
}

EnforcementVerdict check_cap_enforcement(const TelemetryTrace& trace,
                                         std::span<const TimeWindow> windows, double cap_W,
                                         double tolerance) {
  return enforcement_verdict(cap_W, mean_power(trace, windows), tolerance);
}

std::string trace_to_csv(const TelemetryTrace& trace) {
  std::string out(kTraceCsvHeader);
  out += '\n';
  for (const auto& s : trace.samples) {
    out += std::to_string(s.t_ns);
    out += ',';
    out += csv_quote(s.device_id);
    out += ',';
    out += format_double(s.power_W);
    out += ',';
    out += format_double(s.sm_clock_MHz);
    out += ',';
    out += format_double(s.mem_clock_MHz);
    out += ',';
    out += std::to_string(s.memory_used_bytes);
    out += ',';
    out += s.valid ? '1' : '0';
    out += '\n';
  }
  return out;
}

TelemetryTrace trace_from_csv(std::string_view csv, int interval_ms) {
  const auto rows = parse_csv(csv);
  if (rows.empty()) throw ParseError("empty trace file", 0);
  std::string header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) {
    if (i) header += ',';
    header += rows[0][i];
  }
  if (header != kTraceCsvHeader) throw ParseError("unexpected trace header: " + header, 0);

  TelemetryTrace trace;
  trace.interval_ms = interval_ms;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    if (f.size() != 7) {
      throw ParseError("trace row " + std::to_string(r) + " has wrong field count", 0);
    }
    PowerSample s;
    s.t_ns = parse_int(f[0]);
    s.device_id = f[1];
    s.power_W = parse_double(f[2]);
    s.sm_clock_MHz = parse_double(f[3]);
    s.mem_clock_MHz = parse_double(f[4]);
    s.memory_used_bytes = static_cast<std::uint64_t>(parse_int(f[5]));
    if (f[6] != "0" && f[6] != "1") throw ParseError("valid must be 0 or 1", 0);
    s.valid = f[6] == "1";
    if (trace.device_id.empty()) trace.device_id = s.device_id;
    trace.samples.push_back(std::move(s));
  }
  flag_gaps(trace);
  return trace;
}

}  // namespace powerbench
