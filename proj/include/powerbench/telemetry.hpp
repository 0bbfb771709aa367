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

#pragma once

#include <cstdint>
#include <span>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include "powerbench/clock.hpp"
#include "powerbench/device.hpp"

namespace powerbench {

inline constexpr int kDefaultSamplingIntervalMs = 100;
inline constexpr double kDefaultEnforcementTolerance = 0.05;

struct PowerSample {
  std::int64_t t_ns = 0;
  std::string device_id;
  double power_W = 0.0;
  double sm_clock_MHz = 0.0;
  double mem_clock_MHz = 0.0;
  std::uint64_t memory_used_bytes = 0;
  bool valid = false;

  bool operator==(const PowerSample&) const = default;
};

struct TelemetryTrace {
  std::string device_id;
  int interval_ms = kDefaultSamplingIntervalMs;
  std::vector<PowerSample> samples;
  /// Indices of samples preceded by an over-long gap or that are invalid.
  std::vector<std::size_t> gap_flags;
  /// Set when the device vanished mid-run and sampling stopped early.
  bool incomplete = false;

  std::int64_t span_start_ns() const;
  std::int64_t span_end_ns() const;
  std::size_t valid_count() const;

  bool operator==(const TelemetryTrace&) const = default;
};

/// Half-open in spirit, but both ends are treated as closed by the
/// integration routines. Times are harness nanoseconds.
struct TimeWindow {
  std::int64_t t_start_ns = 0;
  std::int64_t t_end_ns = 0;

  double duration_s() const {
    return static_cast<double>(t_end_ns - t_start_ns) * 1e-9;
  }
};

/// One stamped reading. Backend failures come back as valid=false instead
/// of being thrown, except device_lost which propagates.
PowerSample read_telemetry_sample(DeviceBackend& backend,
                                  const std::string& device_id,
                                  const Clock& clock);

/// Samples every `interval_ms` until `stop` is requested. Invalid reads are
/// kept as valid=false slots; a lost device truncates the trace and marks
/// it incomplete.
TelemetryTrace run_sampler(DeviceBackend& backend, const std::string& device_id,
                           int interval_ms, std::stop_token stop,
                           const Clock& clock);

/// Recomputes gap_flags: a sample is flagged when it is invalid or when the
/// gap to its predecessor exceeds interval * (1 + jitter_tolerance).
void flag_gaps(TelemetryTrace& trace, double jitter_tolerance = 0.5);

/// Trapezoidal energy in joules over `window`. Power is the piecewise
/// linear interpolant through valid samples, so invalid slots are bridged
/// and the window edges are interpolated from their neighbours. Throws
/// insufficient_data with fewer than two valid samples or when the window
/// leaves the valid span.
double integrate_energy(const TelemetryTrace& trace, TimeWindow window);

/// Sum over disjoint windows.
double integrate_energy(const TelemetryTrace& trace,
                        std::span<const TimeWindow> windows);

double mean_power(const TelemetryTrace& trace, TimeWindow window);
double mean_power(const TelemetryTrace& trace,
                  std::span<const TimeWindow> windows);

struct ClockSummary {
  double sm_clock_mean = 0.0;
  double sm_clock_p5 = 0.0;
  double sm_clock_p95 = 0.0;
  double mem_clock_mode = 0.0;
  std::size_t sample_count = 0;

  bool operator==(const ClockSummary&) const = default;
};

/// Statistics over valid samples whose timestamps fall inside a window.
/// Percentiles interpolate linearly between order statistics; the memory
/// clock mode breaks ties toward the lower clock.
ClockSummary clock_summary(const TelemetryTrace& trace, TimeWindow window);
ClockSummary clock_summary(std::span<const TelemetryTrace> traces,
                           std::span<const TimeWindow> windows);

struct EnforcementVerdict {
  double cap_W = 0.0;
  double mean_power_W = 0.0;
  bool enforced = true;
  double excess_fraction = 0.0;

  bool operator==(const EnforcementVerdict&) const = default;
};

EnforcementVerdict enforcement_verdict(
    double cap_W, double mean_power_W,
    double tolerance = kDefaultEnforcementTolerance);

EnforcementVerdict check_cap_enforcement(
    const TelemetryTrace& trace, std::span<const TimeWindow> windows,
    double cap_W, double tolerance = kDefaultEnforcementTolerance);

/// Trace CSV with header
/// `t_ns,device_id,power_w,sm_clock_mhz,mem_clock_mhz,memory_used_bytes,valid`.
inline constexpr std::string_view kTraceCsvHeader =
    "t_ns,device_id,power_w,sm_clock_mhz,mem_clock_mhz,memory_used_bytes,valid";

std::string trace_to_csv(const TelemetryTrace& trace);
TelemetryTrace trace_from_csv(std::string_view csv, int interval_ms);

}  // namespace powerbench
