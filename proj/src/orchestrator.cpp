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

#include "powerbench/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "powerbench/error.hpp"
#include "powerbench/process.hpp"
#include "powerbench/text.hpp"

namespace powerbench {
namespace {

constexpr double kCapEpsilonW = 1e-6;
// Read-back differences up to this are rounding in the vendor tool.
constexpr double kReadBackToleranceW = 0.5;

std::int64_t unix_ms_now() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error, std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

// Planning --------------------------------------------------------------------

void SweepSpec::validate() const {
  if (explicit_caps.empty()) {
    if (!(cap_step_W > 0.0)) {
      throw Error(ErrorCode::config_error, "cap_step_w must be > 0");
    }
    if (!(cap_start_W <= cap_end_W)) {
      throw Error(ErrorCode::config_error, "cap_start_w must not exceed cap_end_w");
    }
  }
  for (double c : explicit_caps) {
    if (!(c > 0.0)) throw Error(ErrorCode::config_error, "caps must be positive");
  }
  if (repeats < 1) throw Error(ErrorCode::config_error, "repeats must be >= 1");
  if (sampling_interval_ms < 1) {
    throw Error(ErrorCode::config_error, "sampling_interval_ms must be >= 1");
  }
  if (settle_ms < 0) throw Error(ErrorCode::config_error, "settle_ms must be >= 0");
  if (warmup.skip_epochs < 0 || warmup.skip_steps < 0) {
    throw Error(ErrorCode::config_error, "warm-up counts must be >= 0");
  }
  if (workload_command.empty()) {
    throw Error(ErrorCode::config_error, "workload_command must not be empty");
  }
}

nlohmann::json SweepSpec::to_json() const {
  return {
      {"cap_start_w", cap_start_W},
      {"cap_end_w", cap_end_W},
      {"cap_step_w", cap_step_W},
      {"caps", explicit_caps},
      {"include_device_max", include_device_max},
      {"repeats", repeats},
      {"workload_command", workload_command},
      {"device_ids", device_ids},
      {"warmup", {{"skip_epochs", warmup.skip_epochs}, {"skip_steps", warmup.skip_steps}}},
      {"sampling_interval_ms", sampling_interval_ms},
      {"settle_ms", settle_ms},
      {"fail_fast", fail_fast},
  };
}

SweepSpec SweepSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::config_error, "sweep must be an object");
  SweepSpec s;
  read_field(j, "cap_start_w", s.cap_start_W);
  read_field(j, "cap_end_w", s.cap_end_W);
  read_field(j, "cap_step_w", s.cap_step_W);
  read_field(j, "caps", s.explicit_caps);
  read_field(j, "include_device_max", s.include_device_max);
  read_field(j, "repeats", s.repeats);
  read_field(j, "workload_command", s.workload_command);
  read_field(j, "device_ids", s.device_ids);
  if (j.contains("warmup")) {
    read_field(j.at("warmup"), "skip_epochs", s.warmup.skip_epochs);
    read_field(j.at("warmup"), "skip_steps", s.warmup.skip_steps);
  }
  read_field(j, "sampling_interval_ms", s.sampling_interval_ms);
  read_field(j, "settle_ms", s.settle_ms);
  read_field(j, "fail_fast", s.fail_fast);
  return s;
}

std::vector<double> plan_caps(const SweepSpec& spec, const DeviceDescriptor& descriptor) {
  std::vector<double> caps;
  if (!spec.explicit_caps.empty()) {
    caps = spec.explicit_caps;
  } else {
    if (!(spec.cap_step_W > 0.0)) {
      throw Error(ErrorCode::plan_error, "cap step must be positive");
    }
    for (int i = 0;; ++i) {
      const double cap = spec.cap_start_W + i * spec.cap_step_W;
      if (cap > spec.cap_end_W + kCapEpsilonW) break;
      caps.push_back(cap);
    }
  }
  std::erase_if(caps, [&](double c) {
    return c < descriptor.cap_min_W - kCapEpsilonW || c > descriptor.cap_max_W + kCapEpsilonW;
  });
  if (spec.explicit_caps.empty() && spec.include_device_max && !caps.empty()) {
    const bool present = std::any_of(caps.begin(), caps.end(), [&](double c) {
      return std::abs(c - descriptor.cap_max_W) <= kCapEpsilonW;
    });
    if (!present) caps.push_back(descriptor.cap_max_W);
  }
  std::sort(caps.begin(), caps.end());
  caps.erase(std::unique(caps.begin(), caps.end(),
                         [](double a, double b) { return std::abs(a - b) <= kCapEpsilonW; }),
             caps.end());
  if (caps.empty()) {
    throw Error(ErrorCode::plan_error,
                "no cap of the sweep lies within [" + format_double(descriptor.cap_min_W) +
                    ", " + format_double(descriptor.cap_max_W) + "] W");
  }
  return caps;
}

std::string make_run_id(double cap_W, int repeat_index) {
  return "cap" + format_double(cap_W) + "W_rep" + std::to_string(repeat_index);
}

std::vector<RunConfig> plan_sweep(const SweepSpec& spec, const DeviceDescriptor& descriptor) {
  if (spec.repeats < 1) throw Error(ErrorCode::plan_error, "repeats must be >= 1");
  std::vector<RunConfig> out;
  for (double cap : plan_caps(spec, descriptor)) {
    for (int r = 0; r < spec.repeats; ++r) {
      RunConfig c;
      c.run_id = make_run_id(cap, r);
      c.cap_W = cap;
      c.repeat_index = r;
      c.devices = {descriptor};
      c.workload_command = spec.workload_command;
      c.warmup = spec.warmup;
      c.sampling_interval_ms = spec.sampling_interval_ms;
      c.settle_ms = spec.settle_ms;
      out.push_back(std::move(c));
    }
  }
  return out;
}

DeviceDescriptor combined_limits(const std::vector<DeviceDescriptor>& devices) {
  if (devices.empty()) throw Error(ErrorCode::plan_error, "no devices selected");
  DeviceDescriptor d = devices.front();
  for (const auto& other : devices) {
    d.cap_min_W = std::max(d.cap_min_W, other.cap_min_W);
    d.cap_max_W = std::min(d.cap_max_W, other.cap_max_W);
  }
  if (d.cap_min_W > d.cap_max_W) {
    throw Error(ErrorCode::plan_error, "selected devices share no common cap range");
  }
  return d;
}

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::completed: return "completed";
    case RunStatus::degraded: return "degraded";
    case RunStatus::failed: return "failed";
  }
  return "failed";
}

RunStatus run_status_from_string(std::string_view text) {
  if (text == "completed") return RunStatus::completed;
  if (text == "degraded") return RunStatus::degraded;
  if (text == "failed") return RunStatus::failed;
  throw Error(ErrorCode::parse_error, "unknown run status '" + std::string(text) + "'");
}

std::string_view to_string(SweepStatus status) {
  switch (status) {
    case SweepStatus::completed: return "completed";
    case SweepStatus::partial: return "partial";
    case SweepStatus::aborted: return "aborted";
  }
  return "aborted";
}

// ProcessDriver ---------------------------------------------------------------

struct ProcessDriver::SamplerSlot {
  std::string device_id;
  TelemetryTrace trace;
  std::jthread thread;
};

ProcessDriver::ProcessDriver() = default;

ProcessDriver::~ProcessDriver() { stop_sampling(); }

void ProcessDriver::start_sampling(DeviceBackend& backend,
                                   const std::vector<std::string>& device_ids,
                                   int interval_ms) {
  for (const auto& id : device_ids) {
    auto slot = std::make_unique<SamplerSlot>();
    slot->device_id = id;
    auto* raw = slot.get();
    slot->thread = std::jthread([this, &backend, raw, interval_ms](std::stop_token st) {
      try {
        raw->trace = run_sampler(backend, raw->device_id, interval_ms, st, clock_);
      } catch (const Error&) {
        raw->trace.device_id = raw->device_id;
        raw->trace.interval_ms = interval_ms;
        raw->trace.incomplete = true;
      }
    });
    samplers_.push_back(std::move(slot));
  }
}

void ProcessDriver::settle(int settle_ms) {
  if (settle_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(settle_ms));
}

RunDriver::WorkloadOutcome ProcessDriver::run_workload(const RunConfig& config,
                                                       DeviceBackend& backend,
                                                       EventStreamParser& parser) {
  WorkloadOutcome outcome;
  if (!config.workload_command.empty() &&
      config.workload_command.front() == kBuiltinSyntheticCommand) {
    outcome.exit_code = 2;
    outcome.error = "the built-in synthetic workload needs the simulated driver";
    return outcome;
  }
  backend.set_workload_active(true);
  try {
    ChildProcess child(config.workload_command);
    std::int64_t last = 0;
    while (auto line = child.read_line()) {
      std::int64_t t = clock_.now_ns();
      if (t <= last) t = last + 1;
      last = t;
      if (trim(*line).empty()) continue;
      try {
        parser.feed(*line, t);
      } catch (const Error& e) {
        outcome.error = std::string(to_string(e.code())) + ": " + e.what();
        child.terminate();
        break;
      }
    }
    outcome.exit_code = child.wait();
  } catch (const Error& e) {
    outcome.exit_code = 127;
    outcome.error = e.what();
  }
  backend.set_workload_active(false);
  return outcome;
}

std::vector<TelemetryTrace> ProcessDriver::stop_sampling() {
  std::vector<TelemetryTrace> traces;
  for (auto& slot : samplers_) {
    slot->thread.request_stop();
    if (slot->thread.joinable()) slot->thread.join();
    traces.push_back(std::move(slot->trace));
  }
  samplers_.clear();
  return traces;
}

// SimulatedDriver -------------------------------------------------------------

nlohmann::json SyntheticWorkloadSpec::to_json() const {
  return {
      {"name", name},
      {"unit", to_string(unit)},
      {"epochs", epochs},
      {"batches_per_epoch", batches_per_epoch},
      {"samples_per_batch", samples_per_batch},
      {"first_epoch_slowdown", first_epoch_slowdown},
      {"inter_batch_gap_s", inter_batch_gap_s},
  };
}

SyntheticWorkloadSpec SyntheticWorkloadSpec::from_json(const nlohmann::json& j) {
  SyntheticWorkloadSpec s;
  read_field(j, "name", s.name);
  if (j.contains("unit")) s.unit = work_unit_from_string(j.at("unit").get<std::string>());
  read_field(j, "epochs", s.epochs);
  read_field(j, "batches_per_epoch", s.batches_per_epoch);
  read_field(j, "samples_per_batch", s.samples_per_batch);
  read_field(j, "first_epoch_slowdown", s.first_epoch_slowdown);
  read_field(j, "inter_batch_gap_s", s.inter_batch_gap_s);
  if (s.epochs < 1 || s.batches_per_epoch < 1 || s.samples_per_batch < 0 ||
      s.first_epoch_slowdown < 1.0 || s.inter_batch_gap_s < 0.0) {
    throw Error(ErrorCode::config_error, "invalid synthetic workload settings");
  }
  return s;
}

SimulatedDriver::SimulatedDriver(SyntheticWorkloadSpec spec) : spec_(std::move(spec)) {}

void SimulatedDriver::advance_to(std::int64_t t_ns) {
  while (backend_ && next_tick_ns_ <= t_ns) {
    clock_.set(next_tick_ns_);
    for (auto& trace : traces_) {
      if (trace.incomplete) continue;
      try {
        trace.samples.push_back(read_telemetry_sample(*backend_, trace.device_id, clock_));
      } catch (const Error&) {
        trace.incomplete = true;
      }
    }
    next_tick_ns_ += interval_ns_;
  }
  clock_.set(std::max(t_ns, clock_.now_ns()));
}

void SimulatedDriver::start_sampling(DeviceBackend& backend,
                                     const std::vector<std::string>& device_ids,
                                     int interval_ms) {
  if (interval_ms < 1) {
    throw Error(ErrorCode::invalid_argument, "sampling interval must be >= 1 ms");
  }
  backend_ = &backend;
  interval_ns_ = static_cast<std::int64_t>(interval_ms) * 1'000'000;
  next_tick_ns_ = clock_.now_ns();
  traces_.clear();
  for (const auto& id : device_ids) {
    TelemetryTrace t;
    t.device_id = id;
    t.interval_ms = interval_ms;
    traces_.push_back(std::move(t));
  }
  advance_to(clock_.now_ns());
}

void SimulatedDriver::settle(int settle_ms) {
  advance_to(clock_.now_ns() + static_cast<std::int64_t>(settle_ms) * 1'000'000);
}

RunDriver::WorkloadOutcome SimulatedDriver::run_workload(const RunConfig& config,
                                                         DeviceBackend& backend,
                                                         EventStreamParser& parser) {
  WorkloadOutcome outcome;
  auto* sim = dynamic_cast<SimBackend*>(&backend);
  if (!sim) {
    outcome.exit_code = 2;
    outcome.error = "the simulated driver needs the sim backend";
    return outcome;
  }

  double node_rate = 0.0;
  double node_peak = 0.0;
  for (const auto& d : config.devices) {
    const auto& profile = sim->device(d.device_id).profile;
    node_rate +=
        simulate_operating_point(profile, sim->get_power_cap(d.device_id)).throughput_units_per_s;
    node_peak += simulate_operating_point(profile, profile.max_power_W()).throughput_units_per_s;
  }
  const std::int64_t samples =
      spec_.samples_per_batch > 0 ? spec_.samples_per_batch
                                  : std::max<std::int64_t>(1, std::llround(node_peak));
  const auto batch_ns = static_cast<std::int64_t>(
      std::llround(static_cast<double>(samples) / node_rate * 1e9));
  const auto gap_ns = static_cast<std::int64_t>(std::llround(spec_.inter_batch_gap_s * 1e9));
  constexpr std::int64_t kEventSpacingNs = 1'000;

  std::int64_t seq = 0;
  auto emit = [&](WorkloadEvent ev) {
    ev.seq = seq++;
    advance_to(clock_.now_ns() + kEventSpacingNs);
    parser.feed(serialize_event(ev), clock_.now_ns());
  };
  auto event = [](EventKind kind, std::int64_t epoch = 0, std::int64_t n = 0) {
    WorkloadEvent ev;
    ev.kind = kind;
    ev.epoch_index = epoch;
    ev.samples = n;
    return ev;
  };

  sim->set_workload_active(true);
  try {
    WorkloadEvent hello = event(EventKind::handshake);
    hello.workload = spec_.name;
    hello.unit = spec_.unit;
    emit(hello);
    for (int e = 0; e < spec_.epochs; ++e) {
      emit(event(EventKind::epoch_begin, e));
      const auto duration =
          e == 0 ? static_cast<std::int64_t>(std::llround(batch_ns * spec_.first_epoch_slowdown))
                 : batch_ns;
      for (int b = 0; b < spec_.batches_per_epoch; ++b) {
        emit(event(EventKind::batch_begin, e));
        advance_to(clock_.now_ns() + duration - kEventSpacingNs);
        emit(event(EventKind::batch_end, e, samples));
        advance_to(clock_.now_ns() + gap_ns);
      }
      emit(event(EventKind::epoch_end, e));
    }
    emit(event(EventKind::run_end));
  } catch (const Error& e) {
    outcome.exit_code = 1;
    outcome.error = e.what();
  }
  // Process teardown outlasts the next sampler tick.
  advance_to(std::max(next_tick_ns_, clock_.now_ns() + kEventSpacingNs));
  sim->set_workload_active(false);
  return outcome;
}

std::vector<TelemetryTrace> SimulatedDriver::stop_sampling() {
  advance_to(clock_.now_ns());
  for (auto& t : traces_) flag_gaps(t);
  backend_ = nullptr;
  return std::move(traces_);
}

// Execution -------------------------------------------------------------------

namespace {

void restore_caps(RunRecord& rec, DeviceBackend& backend) {
  rec.restored_caps_W.clear();
  for (std::size_t i = 0; i < rec.prior_caps_W.size(); ++i) {
    const auto& id = rec.config.devices[i].device_id;
    try {
      backend.set_power_cap(id, rec.prior_caps_W[i]);
      rec.restored_caps_W.push_back(backend.get_power_cap(id));
    } catch (const Error& e) {
      rec.restored_caps_W.push_back(std::nan(""));
      if (rec.status == RunStatus::completed) {
        rec.status = RunStatus::degraded;
        rec.failure_reason = std::string("cap restore failed: ") + e.what();
      }
    }
  }
}

}  // namespace

RunRecord execute_run(const RunConfig& config, DeviceBackend& backend, RunDriver& driver,
                      const std::filesystem::path& output_dir) {
  RunRecord rec;
  rec.config = config;
  rec.wall_start_unix_ms = unix_ms_now();
  rec.status = RunStatus::failed;

  std::vector<std::string> ids;
  for (const auto& d : config.devices) ids.push_back(d.device_id);

  auto finish = [&]() -> RunRecord {
    rec.wall_end_unix_ms = unix_ms_now();
    if (!output_dir.empty()) {
      try {
        persist_run(rec, output_dir);
      } catch (const Error& e) {
        rec.status = RunStatus::failed;
        rec.failure_reason = std::string("persist failed: ") + e.what();
      }
    }
    return rec;
  };

  // Apply caps, verify read-back.
  try {
    for (const auto& id : ids) rec.prior_caps_W.push_back(backend.get_power_cap(id));
    for (const auto& id : ids) rec.applied_caps.push_back(backend.set_power_cap(id, config.cap_W));
  } catch (const Error& e) {
    rec.failure_reason = std::string("cap apply failed: ") + e.what();
    rec.prior_caps_W.resize(std::min(rec.prior_caps_W.size(), rec.applied_caps.size()));
    restore_caps(rec, backend);
    return finish();
  }
  for (std::size_t i = 0; i < rec.applied_caps.size(); ++i) {
    const auto& a = rec.applied_caps[i];
    if (std::abs(a.reported_W - a.requested_W) > kReadBackToleranceW) {
      rec.failure_reason = "cap read-back mismatch on " + ids[i] + ": requested " +
                           format_double(a.requested_W) + " W, reported " +
                           format_double(a.reported_W) + " W";
      restore_caps(rec, backend);
      return finish();
    }
  }
  rec.cap_applied_t_ns = driver.clock().now_ns();

  // Sample, settle, run the workload.
  EventStreamParser parser;
  RunDriver::WorkloadOutcome outcome;
  driver.start_sampling(backend, ids, config.sampling_interval_ms);
  driver.settle(config.settle_ms);
  outcome = driver.run_workload(config, backend, parser);
  rec.traces = driver.stop_sampling();
  rec.events = parser.take_events();
  rec.workload_exit_code = outcome.exit_code;

  if (!outcome.error.empty()) {
    rec.status = RunStatus::failed;
    rec.failure_reason = outcome.error;
  } else if (outcome.exit_code != 0) {
    rec.status = RunStatus::failed;
    rec.failure_reason = "workload exited with status " + std::to_string(outcome.exit_code);
  } else if (!parser.saw_run_end()) {
    rec.status = RunStatus::degraded;
    rec.failure_reason = "workload exited without run_end";
  } else if (std::any_of(rec.traces.begin(), rec.traces.end(),
                         [](const auto& t) { return t.incomplete; })) {
    rec.status = RunStatus::degraded;
    rec.failure_reason = "telemetry incomplete";
  } else {
    rec.status = RunStatus::completed;
  }

  restore_caps(rec, backend);
  return finish();
}

SweepResult execute_sweep(const SweepSpec& spec, DeviceBackend& backend, RunDriver& driver,
                          const std::filesystem::path& output_dir, const RunObserver& on_run) {
  spec.validate();
  auto all = backend.enumerate_devices();
  std::vector<DeviceDescriptor> selected;
  if (spec.device_ids.empty()) {
    selected = all;
  } else {
    for (const auto& id : spec.device_ids) {
      auto it = std::find_if(all.begin(), all.end(),
                             [&](const auto& d) { return d.device_id == id; });
      if (it == all.end()) throw Error(ErrorCode::plan_error, "unknown device '" + id + "'");
      selected.push_back(*it);
    }
  }
  auto plan = plan_sweep(spec, combined_limits(selected));
  for (auto& c : plan) c.devices = selected;

  SweepResult result;
  for (const auto& config : plan) {
    result.records.push_back(execute_run(config, backend, driver, output_dir));
    const auto& rec = result.records.back();
    if (on_run) on_run(rec);
    if (rec.status != RunStatus::completed) {
      result.status = SweepStatus::partial;
      if (spec.fail_fast) {
        result.status = SweepStatus::aborted;
        break;
      }
    }
  }
  if (!output_dir.empty()) persist_sweep_manifest(result, output_dir);
  return result;
}

// Persistence -----------------------------------------------------------------

namespace {

std::string trace_file_name(const std::string& device_id) {
  std::string safe = device_id;
  for (char& c : safe) {
    if (c == '/' || c == '\\' || c == ':' || c == ' ') c = '_';
  }
  return "trace_" + safe + ".csv";
}

nlohmann::json config_to_json(const RunConfig& c) {
  auto devices = nlohmann::json::array();
  for (const auto& d : c.devices) devices.push_back(to_json(d));
  return {
      {"cap_w", c.cap_W},
      {"repeat_index", c.repeat_index},
      {"devices", devices},
      {"workload_command", c.workload_command},
      {"warmup", {{"skip_epochs", c.warmup.skip_epochs}, {"skip_steps", c.warmup.skip_steps}}},
      {"sampling_interval_ms", c.sampling_interval_ms},
      {"settle_ms", c.settle_ms},
  };
}

RunConfig config_from_json(const nlohmann::json& j, const std::string& run_id) {
  RunConfig c;
  c.run_id = run_id;
  c.cap_W = j.at("cap_w").get<double>();
  c.repeat_index = j.at("repeat_index").get<int>();
  for (const auto& d : j.at("devices")) c.devices.push_back(descriptor_from_json(d));
  c.workload_command = j.at("workload_command").get<std::vector<std::string>>();
  c.warmup.skip_epochs = j.at("warmup").at("skip_epochs").get<std::int64_t>();
  c.warmup.skip_steps = j.at("warmup").at("skip_steps").get<std::int64_t>();
  c.sampling_interval_ms = j.at("sampling_interval_ms").get<int>();
  c.settle_ms = j.at("settle_ms").get<int>();
  return c;
}

nlohmann::json nullable(double v) {
  return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v);
}

double from_nullable(const nlohmann::json& j) {
  return j.is_null() ? std::nan("") : j.get<double>();
}

}  // namespace

std::filesystem::path persist_run(const RunRecord& record,
                                  const std::filesystem::path& output_dir) {
  const auto dir = output_dir / record.config.run_id;
  nlohmann::json traces = nlohmann::json::array();
  for (const auto& t : record.traces) {
    const auto name = trace_file_name(t.device_id);
    const auto csv = trace_to_csv(t);
    write_file(dir / name, csv);
    traces.push_back({{"device_id", t.device_id},
                      {"file", name},
                      {"sha256", sha256_hex(csv)},
                      {"interval_ms", t.interval_ms},
                      {"incomplete", t.incomplete}});
  }
  const auto events = events_to_ndjson(record.events);
  write_file(dir / "events.ndjson", events);

  nlohmann::json applied = nlohmann::json::array();
  for (const auto& a : record.applied_caps) {
    applied.push_back({{"requested_w", a.requested_W}, {"reported_w", a.reported_W}});
  }
  nlohmann::json restored = nlohmann::json::array();
  for (double v : record.restored_caps_W) restored.push_back(nullable(v));

  nlohmann::json j = {
      {"run_id", record.config.run_id},
      {"status", to_string(record.status)},
      {"failure_reason", record.failure_reason},
      {"config", config_to_json(record.config)},
      {"prior_caps_w", record.prior_caps_W},
      {"applied_caps", applied},
      {"restored_caps_w", restored},
      {"cap_applied_t_ns", record.cap_applied_t_ns},
      {"wall_start_unix_ms", record.wall_start_unix_ms},
      {"wall_end_unix_ms", record.wall_end_unix_ms},
      {"workload_exit_code", record.workload_exit_code
                                 ? nlohmann::json(*record.workload_exit_code)
                                 : nlohmann::json(nullptr)},
      {"traces", traces},
      {"events", {{"file", "events.ndjson"}, {"sha256", sha256_hex(events)}}},
  };
  const auto path = dir / "run.json";
  write_file(path, j.dump(2) + "\n");
  return path;
}

RunRecord load_run(const std::filesystem::path& run_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(run_dir / "run.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, (run_dir / "run.json").string() + ": " + e.what());
  }

  auto load_checked = [&](const nlohmann::json& entry) {
    const auto file = entry.at("file").get<std::string>();
    auto text = read_file(run_dir / file);
    if (sha256_hex(text) != entry.at("sha256").get<std::string>()) {
      throw Error(ErrorCode::persist_error, "checksum mismatch for " + (run_dir / file).string());
    }
    return text;
  };

  try {
    RunRecord rec;
    rec.config = config_from_json(j.at("config"), j.at("run_id").get<std::string>());
    rec.status = run_status_from_string(j.at("status").get<std::string>());
    rec.failure_reason = j.at("failure_reason").get<std::string>();
    rec.prior_caps_W = j.at("prior_caps_w").get<std::vector<double>>();
    for (const auto& a : j.at("applied_caps")) {
      rec.applied_caps.push_back({a.at("requested_w").get<double>(), a.at("reported_w").get<double>()});
    }
    for (const auto& v : j.at("restored_caps_w")) rec.restored_caps_W.push_back(from_nullable(v));
    rec.cap_applied_t_ns = j.at("cap_applied_t_ns").get<std::int64_t>();
    rec.wall_start_unix_ms = j.at("wall_start_unix_ms").get<std::int64_t>();
    rec.wall_end_unix_ms = j.at("wall_end_unix_ms").get<std::int64_t>();
    if (!j.at("workload_exit_code").is_null()) {
      rec.workload_exit_code = j.at("workload_exit_code").get<int>();
    }
    for (const auto& t : j.at("traces")) {
      auto trace = trace_from_csv(load_checked(t), t.at("interval_ms").get<int>());
      trace.device_id = t.at("device_id").get<std::string>();
      trace.incomplete = t.at("incomplete").get<bool>();
      rec.traces.push_back(std::move(trace));
    }
    rec.events = events_from_ndjson(load_checked(j.at("events")));
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, (run_dir / "run.json").string() + ": " + e.what());
  }
}

void persist_sweep_manifest(const SweepResult& result, const std::filesystem::path& output_dir) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : result.records) {
    runs.push_back({{"run_id", r.config.run_id},
                    {"cap_w", r.config.cap_W},
                    {"repeat_index", r.config.repeat_index},
                    {"status", to_string(r.status)}});
  }
  nlohmann::json j = {{"status", to_string(result.status)}, {"runs", runs}};
  write_file(output_dir / "sweep.json", j.dump(2) + "\n");
}

std::vector<RunRecord> load_sweep(const std::filesystem::path& output_dir) {
  if (std::filesystem::exists(output_dir / "run.json")) return {load_run(output_dir)};
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(output_dir / "sweep.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, (output_dir / "sweep.json").string() + ": " + e.what());
  }
  std::vector<RunRecord> out;
  for (const auto& r : j.at("runs")) {
    out.push_back(load_run(output_dir / r.at("run_id").get<std::string>()));
  }
  return out;
}

}  // namespace powerbench
