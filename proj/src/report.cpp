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

#include "powerbench/report.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "powerbench/error.hpp"
#include "powerbench/text.hpp"

namespace powerbench {

std::string_view to_string(TableFormat format) {
  return format == TableFormat::markdown ? "markdown" : "csv";
}

TableFormat table_format_from_string(std::string_view text) {
  if (text == "markdown") return TableFormat::markdown;
  if (text == "csv") return TableFormat::csv;
  throw Error(ErrorCode::invalid_argument, "unknown format '" + std::string(text) + "'");
}

std::string format_table_value(double value) {
  auto s = format_fixed(value, 2);
  if (s.size() > 1 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
  return s;
}

namespace {

std::vector<RunMetrics> sorted_metrics(std::span<const RunMetrics> metrics) {
  std::vector<RunMetrics> v(metrics.begin(), metrics.end());
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    return std::tie(a.workload, a.device, a.cap_W) < std::tie(b.workload, b.device, b.cap_W);
  });
  return v;
}

std::string markdown_tables(const std::vector<RunMetrics>& metrics) {
  std::map<std::string, std::vector<const RunMetrics*>> by_workload;
  for (const auto& m : metrics) by_workload[m.workload].push_back(&m);

  std::string out;
  for (const auto& [workload, group] : by_workload) {
    std::set<double> caps;
    std::set<std::string> devices;
    std::map<std::pair<std::string, double>, const RunMetrics*> cells;
    for (const auto* m : group) {
      caps.insert(m->cap_W);
      devices.insert(m->device);
      cells[{m->device, m->cap_W}] = m;
    }
    if (!out.empty()) out += '\n';
    out += "### " + workload + " (" + std::string(to_string(group.front()->unit)) +
           "/s per GPU)\n\n| Device |";
    for (double c : caps) out += " " + format_double(c) + " W |";
    out += "\n|---|";
    for (std::size_t i = 0; i < caps.size(); ++i) out += "---:|";
    out += '\n';
    for (const auto& d : devices) {
      out += "| " + d + " |";
      for (double c : caps) {
        const auto it = cells.find({d, c});
        std::string cell = "n/a";
        if (it != cells.end()) {
          cell = format_table_value(it->second->throughput_per_gpu);
          if (!it->second->enforced) cell = "(" + cell + ")";
        }
        out += " " + cell + " |";
      }
      out += '\n';
    }
  }
  return out;
}

}  // namespace

std::string emit_throughput_table(std::span<const RunMetrics> metrics, TableFormat format) {
  if (metrics.empty()) throw Error(ErrorCode::invalid_argument, "no metrics to tabulate");
  const auto sorted = sorted_metrics(aggregate_repeats(metrics));
  if (format == TableFormat::markdown) return markdown_tables(sorted);

  std::string out(kThroughputCsvHeader);
  out += '\n';
  for (const auto& m : sorted) {
    out += csv_quote(m.device) + "," + format_double(m.cap_W) + "," +
           format_double(m.throughput_per_gpu) + "," + (m.enforced ? "true" : "false") + "\n";
  }
  return out;
}

std::vector<ThroughputCell> parse_throughput_csv(std::string_view csv) {
  const auto rows = parse_csv(csv);
  if (rows.empty() || rows[0] != std::vector<std::string>{"device", "cap_w", "value", "enforced"}) {
    throw ParseError("throughput table header must be '" + std::string(kThroughputCsvHeader) +
                         "'",
                     0);
  }
  std::vector<ThroughputCell> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    if (f.size() != 4 || (f[3] != "true" && f[3] != "false")) {
      throw ParseError("malformed throughput row " + std::to_string(r), 0);
    }
    out.push_back({f[0], parse_double(f[1]), parse_double(f[2]), f[3] == "true"});
  }
  return out;
}

std::string emit_efficiency_plot_data(std::span<const EfficiencyCurve> curves) {
  if (curves.empty()) throw Error(ErrorCode::invalid_argument, "no curves to emit");
  std::vector<const EfficiencyCurve*> order;
  for (const auto& c : curves) order.push_back(&c);
  std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    return std::tie(a->workload, a->device) < std::tie(b->workload, b->device);
  });

  std::string out(kEfficiencyCsvHeader);
  out += '\n';
  for (const auto* c : order) {
    auto points = c->points;
    std::stable_sort(points.begin(), points.end(),
                     [](const auto& a, const auto& b) { return a.cap_W < b.cap_W; });
    for (const auto& p : points) {
      out += csv_quote(c->workload) + "," + csv_quote(c->device) + "," + format_double(p.cap_W) +
             "," + format_double(p.performance) + "," + format_double(p.efficiency) + "\n";
    }
  }
  return out;
}

std::string emit_clock_plot_data(std::span<const RunMetrics> metrics) {
  std::string out(kClockCsvHeader);
  out += '\n';
  std::size_t omitted = 0;
  for (const auto& m : sorted_metrics(metrics)) {
    if (!m.clocks) {
      ++omitted;
      continue;
    }
    out += csv_quote(m.workload) + "," + csv_quote(m.device) + "," + format_double(m.cap_W) +
           "," + format_double(m.clocks->sm_clock_mean) + "," +
           format_double(m.clocks->mem_clock_mode) + "\n";
  }
  if (omitted > 0) out += "# omitted: " + std::to_string(omitted) + "\n";
  return out;
}

}  // namespace powerbench
