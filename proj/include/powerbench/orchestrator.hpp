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
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "powerbench/clock.hpp"
#include "powerbench/device.hpp"
#include "powerbench/protocol.hpp"
#include "powerbench/telemetry.hpp"

namespace powerbench {

inline constexpr int kDefaultSettleMs = 2000;

struct SweepSpec {
  double cap_start_W = 200.0;
  double cap_end_W = 700.0;
  double cap_step_W = 100.0;
  /// When non-empty, replaces the arithmetic sequence.
  std::vector<double> explicit_caps;
  bool include_device_max = true;
  int repeats = 1;
  std::vector<std::string> workload_command;
  /// Empty selects every enumerated device.
  std::vector<std::string> device_ids;
  WarmupPolicy warmup;
  int sampling_interval_ms = kDefaultSamplingIntervalMs;
  int settle_ms = kDefaultSettleMs;
  bool fail_fast = false;

  void validate() const;
  nlohmann::json to_json() const;
  static SweepSpec from_json(const nlohmann::json& j);
};

struct RunConfig {
  std::string run_id;
  double cap_W = 0.0;
  int repeat_index = 0;
  std::vector<DeviceDescriptor> devices;
  std::vector<std::string> workload_command;
  WarmupPolicy warmup;
  int sampling_interval_ms = kDefaultSamplingIntervalMs;
  int settle_ms = kDefaultSettleMs;

  bool operator==(const RunConfig&) const = default;
};

/// Cap list a spec produces for one device (or the intersection of a
/// device set's limits). Ascending, no duplicates.
std::vector<double> plan_caps(const SweepSpec& spec,
                              const DeviceDescriptor& descriptor);

/// One RunConfig per (cap, repeat), ascending cap then repeat. Throws
/// plan_error when no cap falls inside the device limits.
std::vector<RunConfig> plan_sweep(const SweepSpec& spec,
                                  const DeviceDescriptor& descriptor);

/// Descriptor whose limits are the intersection of all given devices.
DeviceDescriptor combined_limits(const std::vector<DeviceDescriptor>& devices);

std::string make_run_id(double cap_W, int repeat_index);

enum class RunStatus { completed, degraded, failed };

std::string_view to_string(RunStatus status);
RunStatus run_status_from_string(std::string_view text);

struct RunRecord {
  RunConfig config;
  RunStatus status = RunStatus::failed;
  std::string failure_reason;
  std::vector<double> prior_caps_W;
  std::vector<AppliedCap> applied_caps;
  std::vector<double> restored_caps_W;
  std::int64_t cap_applied_t_ns = 0;
  std::int64_t wall_start_unix_ms = 0;
  std::int64_t wall_end_unix_ms = 0;
  std::optional<int> workload_exit_code;
  std::vector<TelemetryTrace> traces;  // one per device, config order
  std::vector<WorkloadEvent> events;

  bool operator==(const RunRecord&) const = default;
};

/// How the workload and samplers are driven for one run. The orchestrator's
/// state machine is identical for both implementations.
class RunDriver {
 public:
  virtual ~RunDriver() = default;

  virtual const Clock& clock() const = 0;
  virtual void start_sampling(DeviceBackend& backend,
                              const std::vector<std::string>& device_ids,
                              int interval_ms) = 0;
  virtual void settle(int settle_ms) = 0;

  struct WorkloadOutcome {
    int exit_code = 0;
    std::string error;  // protocol failure, empty when clean
  };

  /// Launches the workload and feeds every received line to `parser`.
  virtual WorkloadOutcome run_workload(const RunConfig& config,
                                       DeviceBackend& backend,
                                       EventStreamParser& parser) = 0;

  virtual std::vector<TelemetryTrace> stop_sampling() = 0;
};

/// Real time: one sampler thread per device and the workload as a child
/// process whose stdout carries the event protocol.
class ProcessDriver final : public RunDriver {
 public:
  ProcessDriver();
  ~ProcessDriver() override;

  const Clock& clock() const override { return clock_; }
  void start_sampling(DeviceBackend& backend,
                      const std::vector<std::string>& device_ids,
                      int interval_ms) override;
  void settle(int settle_ms) override;
  WorkloadOutcome run_workload(const RunConfig& config, DeviceBackend& backend,
                               EventStreamParser& parser) override;
  std::vector<TelemetryTrace> stop_sampling() override;

 private:
  SteadyClock clock_;
  struct SamplerSlot;
  std::vector<std::unique_ptr<SamplerSlot>> samplers_;
};

/// The built-in synthetic workload: fixed-size batches whose duration is set
/// by the simulated devices' throughput at the current cap.
struct SyntheticWorkloadSpec {
  std::string name = "synthetic";
  WorkUnit unit = WorkUnit::images;
  int epochs = 11;
  int batches_per_epoch = 10;
  /// Node-level samples per batch; 0 picks roughly one second per batch at
  /// full clock.
  std::int64_t samples_per_batch = 0;
  double first_epoch_slowdown = 1.5;
  double inter_batch_gap_s = 0.02;

  nlohmann::json to_json() const;
  static SyntheticWorkloadSpec from_json(const nlohmann::json& j);
};

/// Command value that selects the built-in synthetic workload.
inline constexpr std::string_view kBuiltinSyntheticCommand = "builtin:synthetic";

/// Virtual time against a SimBackend: the synthetic workload and the
/// samplers advance a ManualClock, so a whole sweep runs in milliseconds and
/// is bit-for-bit reproducible.
class SimulatedDriver final : public RunDriver {
 public:
  explicit SimulatedDriver(SyntheticWorkloadSpec spec = {});

  const Clock& clock() const override { return clock_; }
  void start_sampling(DeviceBackend& backend,
                      const std::vector<std::string>& device_ids,
                      int interval_ms) override;
  void settle(int settle_ms) override;
  WorkloadOutcome run_workload(const RunConfig& config, DeviceBackend& backend,
                               EventStreamParser& parser) override;
  std::vector<TelemetryTrace> stop_sampling() override;

 private:
  void advance_to(std::int64_t t_ns);

  SyntheticWorkloadSpec spec_;
  ManualClock clock_{1'000'000'000};
  DeviceBackend* backend_ = nullptr;
  std::int64_t interval_ns_ = 0;
  std::int64_t next_tick_ns_ = 0;
  std::vector<TelemetryTrace> traces_;
};

/// Runs one configuration through the fixed sequence: record prior caps,
/// apply caps, verify read-back, start samplers, settle, launch and stream
/// the workload, stop samplers, restore caps, then persist when
/// `output_dir` is set. Failures after cap application still yield a
/// record holding everything gathered so far.
RunRecord execute_run(const RunConfig& config, DeviceBackend& backend,
                      RunDriver& driver,
                      const std::filesystem::path& output_dir = {});

enum class SweepStatus { completed, partial, aborted };
std::string_view to_string(SweepStatus status);

struct SweepResult {
  SweepStatus status = SweepStatus::completed;
  std::vector<RunRecord> records;
};

using RunObserver = std::function<void(const RunRecord&)>;

/// Plans against the selected devices and executes the runs strictly one
/// after another. A failed run aborts the sweep only with fail_fast.
SweepResult execute_sweep(const SweepSpec& spec, DeviceBackend& backend,
                          RunDriver& driver,
                          const std::filesystem::path& output_dir = {},
                          const RunObserver& on_run = {});

/// Writes `<dir>/<run_id>/{trace_<device>.csv,events.ndjson,run.json}` and
/// returns the run.json path. Throws persist_error.
std::filesystem::path persist_run(const RunRecord& record,
                                  const std::filesystem::path& output_dir);

/// Reloads a persisted run and verifies the artifact checksums.
RunRecord load_run(const std::filesystem::path& run_dir);

/// Sweep manifest listing run ids in execution order.
void persist_sweep_manifest(const SweepResult& result,
                            const std::filesystem::path& output_dir);
std::vector<RunRecord> load_sweep(const std::filesystem::path& output_dir);

}  // namespace powerbench
