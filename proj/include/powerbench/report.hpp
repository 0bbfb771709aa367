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

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "powerbench/analysis.hpp"

namespace powerbench {

enum class TableFormat { markdown, csv };

std::string_view to_string(TableFormat format);
TableFormat table_format_from_string(std::string_view text);

inline constexpr std::string_view kThroughputCsvHeader =
    "device,cap_w,value,enforced";
inline constexpr std::string_view kEfficiencyCsvHeader =
    "workload,device,cap_w,performance_per_gpu,efficiency_units_per_j";
inline constexpr std::string_view kClockCsvHeader =
    "workload,device,cap_w,sm_clock_mean_mhz,mem_clock_mode_mhz";

/// Per-GPU throughput, devices by caps. Markdown renders one grid per
/// workload with `n/a` for missing cells and parentheses around unenforced
/// caps; CSV is one row per metric at full precision.
std::string emit_throughput_table(std::span<const RunMetrics> metrics,
                                  TableFormat format);

struct ThroughputCell {
  std::string device;
  double cap_W = 0.0;
  double value = 0.0;
  bool enforced = true;

  bool operator==(const ThroughputCell&) const = default;
};

std::vector<ThroughputCell> parse_throughput_csv(std::string_view csv);

/// One row per curve point, sorted by (workload, device, cap).
std::string emit_efficiency_plot_data(std::span<const EfficiencyCurve> curves);

/// SM clock mean and memory clock mode per run. Metrics without clock data
/// are skipped and counted in a trailing `# omitted: N` line.
std::string emit_clock_plot_data(std::span<const RunMetrics> metrics);

/// Markdown/number style used inside tables: two decimals with a trailing
/// zero dropped (771.68, 1312.8, 116.4).
std::string format_table_value(double value);

}  // namespace powerbench
