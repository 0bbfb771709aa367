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

#include <algorithm>
#include <random>

#include "check_error.hpp"
#include "doctest.h"
#include "powerbench/analysis.hpp"
#include "powerbench/text.hpp"
#include "test_helpers.hpp"

using namespace powerbench;

namespace {

std::vector<RunMetrics> replay_file(const char* name, double overhead = 100.0) {
  const auto text =
      read_file(std::filesystem::path(POWERBENCH_SOURCE_DIR) / "data/replay" / name);
  MetricsOptions o;
  o.power_source = PowerSource::cap_proxy;
  o.overhead_W = overhead;
  const auto rows = parse_replay_csv(text);
  return replay_metrics(rows, o);
}

std::vector<RunMetrics> select(const std::vector<RunMetrics>& all, const std::string& workload,
                               const std::string& device) {
  std::vector<RunMetrics> out;
  for (const auto& m : all) {
    if (m.workload == workload && m.device == device) out.push_back(m);
  }
  return out;
}

EfficiencyCurve curve_of(std::vector<double> effs) {
  EfficiencyCurve c;
  double cap = 200;
  for (double e : effs) {
    c.points.push_back({cap, 0.0, e});
    cap += 100;
  }
  return c;
}

// O(n^2) dominance oracle.
std::vector<std::size_t> brute_front(const std::vector<ParetoPoint>& pts) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
      const bool ge = pts[j].performance >= pts[i].performance &&
                      pts[j].efficiency >= pts[i].efficiency;
      const bool gt = pts[j].performance > pts[i].performance ||
                      pts[j].efficiency > pts[i].efficiency;
      dominated = ge && gt;
    }
    if (!dominated) out.push_back(i);
  }
  return out;
}

}  // namespace

TEST_CASE("replayed efficiency values") {
  const auto cv = replay_file("table3_cv.csv");
  const auto h100 = select(cv, "ResNet-50", "H100");
  REQUIRE(h100.size() == 6);
  CHECK(h100[1].cap_W == 300);
  CHECK(h100[1].efficiency == doctest::Approx(4.0394).epsilon(1e-3 / 4.0394));
  CHECK(h100[0].efficiency == doctest::Approx(3.7457).epsilon(1e-4));
  CHECK(h100[2].efficiency == doctest::Approx(3.3553).epsilon(1e-4));
}

TEST_CASE("efficiency arithmetic") {
  std::vector<ReplayRow> rows{{"w", "d", 500, 500, WorkUnit::images, 2}};
  MetricsOptions o;
  o.power_source = PowerSource::cap_proxy;
  o.overhead_W = 0;
  auto m = replay_metrics(rows, o);
  CHECK(m[0].efficiency == doctest::Approx(1.0));
  CHECK(m[0].efficiency == doctest::Approx(rows[0].throughput_per_gpu / rows[0].cap_W));
  rows[0] = {"w", "d", 250, 1000, WorkUnit::images, 1};
  m = replay_metrics(rows, o);
  CHECK(m[0].efficiency == doctest::Approx(4.0));
  o.power_source = PowerSource::measured;
  CHECK_ERROR_CODE(replay_metrics(rows, o), ErrorCode::invalid_argument);
}

TEST_CASE("measured metrics from a synthetic record") {
  // Two devices at a flat 250 W, 10 batches of 1 s with 100 samples each.
  RunRecord rec;
  rec.status = RunStatus::completed;
  rec.config.run_id = "r";
  rec.config.cap_W = 300;
  rec.config.warmup = {0, 0};
  DeviceDescriptor d{"g0", Vendor::simulated, "dev", 700, 200, 700, 0, 2};
  rec.config.devices = {d, d};
  rec.config.devices[1].device_id = "g1";
  testing::StreamBuilder sb("w");
  rec.events = sb.handshake().epochs(1, 10, 100, 1'000'000'000, 0).run_end().events();
  std::vector<std::int64_t> t;
  std::vector<double> p;
  for (std::int64_t x = 0; x <= 13'000'000'000; x += 100'000'000) {
    t.push_back(x);
    p.push_back(250);
  }
  rec.traces = {testing::make_trace(t, p), testing::make_trace(t, p)};
  rec.traces[1].device_id = "g1";

  const auto m = compute_run_metrics(rec, {});
  CHECK(m.node_throughput == doctest::Approx(100.0));
  CHECK(m.throughput_per_gpu == doctest::Approx(50.0));
  CHECK(m.mean_power_per_gpu_W == doctest::Approx(250.0));
  CHECK(m.node_power_W == doctest::Approx(600.0));
  CHECK(m.efficiency == doctest::Approx(100.0 / 600.0));
  CHECK(m.per_gpu_efficiency == doctest::Approx(0.2));
  CHECK(*m.energy_J == doctest::Approx(5000.0));
  CHECK(m.enforced);
  CHECK(m.clocks->sm_clock_mean == 1980);

  MetricsOptions proxy;
  proxy.power_source = PowerSource::cap_proxy;
  const auto q = compute_run_metrics(rec, proxy);
  CHECK(q.node_power_W == doctest::Approx(700.0));

  rec.status = RunStatus::degraded;
  CHECK_ERROR_CODE(compute_run_metrics(rec, {}), ErrorCode::undefined_metrics);
}

TEST_CASE("repeats are averaged") {
  auto rows = replay_file("table3_cv.csv");
  auto one = select(rows, "ResNet-50", "H100");
  auto twice = one;
  for (auto& m : twice) m.throughput_per_gpu *= 2, m.node_throughput *= 2;
  twice.insert(twice.end(), one.begin(), one.end());
  const auto agg = aggregate_repeats(twice);
  REQUIRE(agg.size() == 6);
  CHECK(agg[0].throughput_per_gpu == doctest::Approx(one[0].throughput_per_gpu * 1.5));
  CHECK(aggregate_repeats(one) == one);
}

TEST_CASE("curve construction") {
  auto rows = select(replay_file("table3_cv.csv"), "ResNet-50", "H100");
  std::reverse(rows.begin(), rows.end());
  const auto c = build_efficiency_curve(rows);
  CHECK(c.points.front().cap_W == 200);
  CHECK(c.points.back().cap_W == 700);
  rows.push_back(rows.front());
  CHECK_ERROR_CODE(build_efficiency_curve(rows), ErrorCode::invalid_argument);
  CHECK_ERROR_CODE(build_efficiency_curve({}), ErrorCode::invalid_argument);
  auto mixed = select(replay_file("table3_cv.csv"), "ResNet-50", "H200");
  mixed.push_back(rows[1]);
  CHECK_ERROR_CODE(build_efficiency_curve(mixed), ErrorCode::invalid_argument);
}

TEST_CASE("peaks") {
  const auto p = find_efficiency_peak(curve_of({3.7457, 4.0394, 3.3553, 3.1337}));
  CHECK(p.cap_W == 300);
  CHECK(p.index == 1);
  // Ties keep the lower cap.
  CHECK(find_efficiency_peak(curve_of({2, 5, 5})).cap_W == 300);
  CHECK_ERROR_CODE(find_efficiency_peak(curve_of({1})), ErrorCode::too_few_points);
}

TEST_CASE("unimodality") {
  const auto v = check_unimodal(curve_of({3.7457, 4.0394, 3.3553, 3.1337}));
  CHECK(v.unimodal);
  CHECK(v.peak_index == 1);
  CHECK_FALSE(check_unimodal(curve_of({1, 3, 1, 3})).unimodal);
  CHECK(check_unimodal(curve_of({1, 2, 3})).unimodal);
  CHECK(check_unimodal(curve_of({3, 2, 1})).unimodal);
  // A dip of 1% is forgiven at 2% tolerance.
  CHECK_FALSE(check_unimodal(curve_of({1.0, 2.0, 1.98, 2.5})).unimodal);
  CHECK(check_unimodal(curve_of({1.0, 2.0, 1.98, 2.5}), 0.02).unimodal);
  CHECK_ERROR_CODE(check_unimodal(curve_of({1, 2})), ErrorCode::too_few_points);
}

TEST_CASE("pareto examples") {
  const std::vector<ParetoPoint> a{{9, 6}, {10, 5}, {12, 4}};
  CHECK(pareto_front(a).indices == std::vector<std::size_t>{0, 1, 2});
  const std::vector<ParetoPoint> b{{9, 6}, {9, 4}, {12, 4}};
  const auto f = pareto_front(b);
  CHECK(f.points == std::vector<ParetoPoint>{{9, 6}, {12, 4}});
  CHECK(pareto_front(std::vector<ParetoPoint>{}).points.empty());
  // Exact duplicates both survive.
  const std::vector<ParetoPoint> dup{{5, 5}, {5, 5}};
  CHECK(pareto_front(dup).indices.size() == 2);
}

TEST_CASE("pareto front against a brute-force oracle") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> grid(0, 12);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<ParetoPoint> pts;
    const int n = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i) pts.push_back({double(grid(rng)), double(grid(rng))});
    auto got = pareto_front(pts).indices;
    std::sort(got.begin(), got.end());
    CHECK(got == brute_front(pts));
    const auto front = pareto_front(pts).points;
    CHECK(pareto_front(front).points == front);
  }
}

TEST_CASE("peak lies on the front") {
  const auto all = replay_file("table3_cv.csv");
  for (const char* dev : {"H100", "H200", "MI300X"}) {
    const auto c = build_efficiency_curve(select(all, "ResNet-50", dev));
    const auto peak = find_efficiency_peak(c);
    const auto idx = pareto_front(curve_points(c)).indices;
    CHECK(std::find(idx.begin(), idx.end(), peak.index) != idx.end());
  }
}

TEST_CASE("peak is invariant to throughput scaling") {
  const auto rows = select(replay_file("table4_llm.csv"), "pre-training", "H100");
  auto scaled = rows;
  for (auto& m : scaled) m.efficiency *= 3.7;
  CHECK(find_efficiency_peak(build_efficiency_curve(rows)).cap_W ==
        find_efficiency_peak(build_efficiency_curve(scaled)).cap_W);
}

TEST_CASE("larger overhead never lowers the peak cap") {
  for (const char* wl : {"ResNet-50", "ViT-L/16", "Stable-Diffusion-v2"}) {
    double prev = 0;
    for (double overhead : {0.0, 50.0, 100.0, 400.0, 2000.0, 20000.0}) {
      const auto rows = select(replay_file("table3_cv.csv", overhead), wl, "H200");
      const double cap = find_efficiency_peak(build_efficiency_curve(rows)).cap_W;
      CHECK(cap >= prev);
      prev = cap;
    }
  }
}

TEST_CASE("platform comparison") {
  const auto all = replay_file("table3_cv.csv");
  std::map<std::string, EfficiencyCurve> curves;
  for (const char* dev : {"H100", "H200", "MI300X"}) {
    curves[dev] = build_efficiency_curve(select(all, "ResNet-50", dev));
  }
  const auto t = compare_platforms(curves);
  CHECK(t.rankings.size() == 6);  // 750 W exists for one device only
  const auto& r700 = t.rankings.back();
  CHECK(r700.cap_W == 700);
  CHECK(r700.order[0].first == "H200");
  CHECK(r700.order[1].first == "H100");
  CHECK(r700.order[2].first == "MI300X");

  const auto llm = replay_file("table4_llm.csv");
  std::map<std::string, EfficiencyCurve> inf;
  for (const char* dev : {"H100", "H200", "MI300X"}) {
    inf[dev] = build_efficiency_curve(select(llm, "inference", dev));
  }
  CHECK(compare_platforms(inf).rankings.front().order[0].first == "MI300X");
  CHECK_FALSE(compare_platforms(inf).crossovers.empty());

  std::map<std::string, EfficiencyCurve> same{{"A", curves["H100"]}, {"B", curves["H100"]}};
  const auto tie = compare_platforms(same);
  CHECK(tie.crossovers.empty());
  for (const auto& r : tie.rankings) CHECK(r.tie_at_top);
  CHECK_ERROR_CODE(compare_platforms({{"A", curves["H100"]}}), ErrorCode::invalid_argument);
}

TEST_CASE("analysis report") {
  auto all = replay_file("table3_cv.csv");
  const auto report = analyze_metrics(all, PowerSource::cap_proxy, 100);
  CHECK(report.curves.size() == 9);
  CHECK(report.comparisons.size() == 3);
  const auto lines = peak_summary_lines(report);
  CHECK(std::find(lines.begin(), lines.end(), "H100/ResNet-50: 300 W [cap-proxy]") != lines.end());
  const auto doc = render_analysis_document(report);
  CHECK(doc == render_analysis_document(analyze_metrics(all, PowerSource::cap_proxy, 100)));
  CHECK(nlohmann::json::parse(doc).contains("peaks"));

  const auto single = analyze_metrics(std::vector<RunMetrics>{all[0]}, PowerSource::cap_proxy, 100);
  CHECK_FALSE(single.curves[0].peak);
  CHECK(single.curves[0].note == "peak analysis declined: needs at least 2 caps, curve has 1");
}

TEST_CASE("replay csv parsing") {
  CHECK_ERROR_CODE(parse_replay_csv("a,b\n1,2\n"), ErrorCode::parse_error);
  CHECK_ERROR_CODE(parse_replay_csv(std::string(kReplayCsvHeader) + "\n"),
                   ErrorCode::insufficient_data);
  const auto rows = parse_replay_csv(std::string(kReplayCsvHeader) + "\nw,d,300,10.5,tokens,8\n");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].unit == WorkUnit::tokens);
  CHECK(rows[0].gpus == 8);
}

TEST_CASE("unenforced replay rows") {
  const auto all = replay_file("table3_cv.csv");
  for (const auto& m : select(all, "ResNet-50", "MI300X")) CHECK(m.enforced == (m.cap_W >= 400));
  for (const auto& m : select(all, "ResNet-50", "H100")) CHECK(m.enforced);
}
