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

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "powerbench/orchestrator.hpp"
#include "powerbench/protocol.hpp"
#include "powerbench/telemetry.hpp"

namespace powerbench {

inline constexpr double kDefaultNodeOverheadW = 100.0;

/// measured: integrate the sampled GPU power over the measurement windows.
/// cap_proxy: assume every GPU draws exactly its cap (published tables
/// carry no traces).
enum class PowerSource { measured, cap_proxy };

std::string_view to_string(PowerSource source);
PowerSource power_source_from_string(std::string_view text);

struct MetricsOptions {
  double overhead_W = kDefaultNodeOverheadW;
  PowerSource power_source = PowerSource::measured;
  double enforcement_tolerance = kDefaultEnforcementTolerance;
};

struct RunMetrics {
  std::string run_id;  // empty for replayed rows
  std::string workload;
  std::string device;
  WorkUnit unit = WorkUnit::images;
  int gpu_count = 1;
  double cap_W = 0.0;
  double throughput_per_gpu = 0.0;
  double node_throughput = 0.0;
  std::optional<double> energy_J;  // GPU sum over the windows
  std::optional<double> active_time_s;
  double mean_power_per_gpu_W = 0.0;
  double node_power_W = 0.0;  // GPU sum + overhead
  double overhead_W = kDefaultNodeOverheadW;
  double efficiency = 0.0;  // node_throughput / node_power_W
  /// throughput_per_gpu / mean_power_per_gpu_W, i.e. without the node
  /// overhead.
  double per_gpu_efficiency = 0.0;
  PowerSource power_source = PowerSource::measured;
  bool enforced = true;
  std::optional<EnforcementVerdict> enforcement;  // measured verdict
  std::optional<ClockSummary> clocks;

  bool operator==(const RunMetrics&) const = default;
};

/// Throws undefined_metrics for a record that did not complete or whose
/// windows add up to zero time; insufficient_data propagates from the
/// window and energy routines.
RunMetrics compute_run_metrics(const RunRecord& record,
                               const MetricsOptions& options = {});

/// Mean of throughput, energy and power per cap; efficiency is recomputed
/// from the means so the node identity still holds.
std::vector<RunMetrics> aggregate_repeats(std::span<const RunMetrics> metrics);

struct CurvePoint {
  double cap_W = 0.0;
  double performance = 0.0;  // per-GPU throughput
  double efficiency = 0.0;   // node units per joule

  bool operator==(const CurvePoint&) const = default;
};

struct EfficiencyCurve {
  std::string workload;
  std::string device;
  WorkUnit unit = WorkUnit::images;
  std::vector<CurvePoint> points;  // strictly increasing cap

  bool operator==(const EfficiencyCurve&) const = default;
};

/// Throws invalid_argument for mixed workloads/devices or duplicate caps.
EfficiencyCurve build_efficiency_curve(std::span<const RunMetrics> metrics);

struct EfficiencyPeak {
  double cap_W = 0.0;
  double efficiency = 0.0;
  std::size_t index = 0;
};

/// Argmax of efficiency, ties to the lower cap. Needs at least two points.
EfficiencyPeak find_efficiency_peak(const EfficiencyCurve& curve);

struct UnimodalityVerdict {
  bool unimodal = false;
  std::size_t peak_index = 0;
};

/// Rises to the peak and falls after it; steps against that direction
/// smaller than tolerance * max(efficiency) are forgiven. Needs three
/// points.
UnimodalityVerdict check_unimodal(const EfficiencyCurve& curve,
                                  double tolerance = 0.0);

struct ParetoPoint {
  double performance = 0.0;
  double efficiency = 0.0;

  bool operator==(const ParetoPoint&) const = default;
};

struct ParetoFront {
  std::vector<ParetoPoint> points;   // ascending performance, stable
  std::vector<std::size_t> indices;  // positions in the input
};

/// Non-dominated subset under (performance up, efficiency up). Equal
/// points do not dominate each other.
ParetoFront pareto_front(std::span<const ParetoPoint> points);

std::vector<ParetoPoint> curve_points(const EfficiencyCurve& curve);

struct PlatformRanking {
  double cap_W = 0.0;
  /// Devices by descending per-GPU throughput; equal values keep name
  /// order.
  std::vector<std::pair<std::string, double>> order;
  bool tie_at_top = false;
};

struct Crossover {
  double cap_W = 0.0;  // first cap where `to` leads
  std::string from;
  std::string to;
};

struct ComparisonTable {
  std::string workload;
  std::vector<PlatformRanking> rankings;  // common caps, ascending
  std::vector<Crossover> crossovers;
};

/// Needs two devices sharing at least one cap.
ComparisonTable compare_platforms(
    const std::map<std::string, EfficiencyCurve>& curves_by_device);

struct CurveAnalysis {
  EfficiencyCurve curve;
  std::vector<RunMetrics> metrics;  // aligned with curve.points
  std::optional<EfficiencyPeak> peak;
  std::optional<UnimodalityVerdict> unimodality;
  std::vector<bool> on_pareto_front;
  std::string note;  // why peak/unimodality were skipped, if they were
};

struct AnalysisReport {
  PowerSource power_source = PowerSource::measured;
  double overhead_W = kDefaultNodeOverheadW;
  double unimodal_tolerance = 0.0;
  std::vector<CurveAnalysis> curves;  // sorted by (workload, device)
  std::vector<ComparisonTable> comparisons;
};

/// Groups by (workload, device), aggregates repeats, and runs every curve
/// analysis.
AnalysisReport analyze_metrics(std::span<const RunMetrics> metrics,
                               PowerSource power_source, double overhead_W,
                               double unimodal_tolerance = 0.0);

/// Metrics for every completed record; failed and degraded runs are left
/// out.
std::vector<RunMetrics> metrics_for_records(std::span<const RunRecord> records,
                                            const MetricsOptions& options);

nlohmann::json to_json(const RunMetrics& metrics);
nlohmann::json to_json(const AnalysisReport& report);

/// The results document: pretty-printed JSON, LF-terminated.
std::string render_analysis_document(const AnalysisReport& report);

/// "H100/ResNet-50: 300 W" per curve, with a proxy flag under cap_proxy.
std::vector<std::string> peak_summary_lines(const AnalysisReport& report);

// Replay of published throughput tables.

/// Header: `workload,device,cap_w,throughput_per_gpu,unit,gpus`.
inline constexpr std::string_view kReplayCsvHeader =
    "workload,device,cap_w,throughput_per_gpu,unit,gpus";

struct ReplayRow {
  std::string workload;
  std::string device;
  double cap_W = 0.0;
  double throughput_per_gpu = 0.0;
  WorkUnit unit = WorkUnit::images;
  int gpus = 1;
};

/// Throws ParseError on a header or field mismatch and insufficient_data
/// when there are no rows.
std::vector<ReplayRow> parse_replay_csv(std::string_view text);

/// Caps below these values are known not to be enforced on the named
/// device. The defaults hold the one platform where that was observed.
std::map<std::string, double> default_enforcement_floors();

/// Rows into metrics. Only cap_proxy is meaningful here; measured throws
/// invalid_argument.
std::vector<RunMetrics> replay_metrics(
    std::span<const ReplayRow> rows, const MetricsOptions& options,
    const std::map<std::string, double>& enforcement_floors =
        default_enforcement_floors());

}  // namespace powerbench
