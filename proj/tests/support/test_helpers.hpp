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

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "powerbench/protocol.hpp"
#include "powerbench/telemetry.hpp"

namespace powerbench::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("powerbench_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Builds event streams with explicit receipt times.
class StreamBuilder {
 public:
  explicit StreamBuilder(std::string workload = "synthetic", WorkUnit unit = WorkUnit::images)
      : workload_(std::move(workload)), unit_(unit) {}

  StreamBuilder& at(std::int64_t t_ns) {
    t_ = t_ns;
    return *this;
  }
  StreamBuilder& handshake() { return push(EventKind::handshake, 0, 0); }
  StreamBuilder& epoch_begin(std::int64_t e) { return push(EventKind::epoch_begin, e, 0); }
  StreamBuilder& epoch_end(std::int64_t e) { return push(EventKind::epoch_end, e, 0); }
  StreamBuilder& batch_begin(std::int64_t e) { return push(EventKind::batch_begin, e, 0); }
  StreamBuilder& batch_end(std::int64_t e, std::int64_t n) {
    return push(EventKind::batch_end, e, n);
  }
  StreamBuilder& run_end() { return push(EventKind::run_end, 0, 0); }

  /// Full training-shaped stream: every batch lasts batch_ns, followed by
  /// gap_ns of idle time.
  StreamBuilder& epochs(int epochs, int batches, std::int64_t samples, std::int64_t batch_ns,
                        std::int64_t gap_ns, std::int64_t first_epoch_batch_ns = 0) {
    for (int e = 0; e < epochs; ++e) {
      epoch_begin(e);
      t_ += 1;
      for (int b = 0; b < batches; ++b) {
        batch_begin(e);
        t_ += (e == 0 && first_epoch_batch_ns > 0) ? first_epoch_batch_ns : batch_ns;
        batch_end(e, samples);
        t_ += gap_ns;
      }
      epoch_end(e);
      t_ += 1;
    }
    return *this;
  }

  std::vector<WorkloadEvent> events() const { return events_; }
  std::int64_t now() const { return t_; }

 private:
  StreamBuilder& push(EventKind kind, std::int64_t epoch, std::int64_t samples) {
    WorkloadEvent ev;
    ev.kind = kind;
    ev.seq = seq_++;
    ev.epoch_index = epoch;
    ev.samples = samples;
    ev.unit = unit_;
    ev.recv_t_ns = t_;
    if (kind == EventKind::handshake) ev.workload = workload_;
    events_.push_back(ev);
    return *this;
  }

  std::string workload_;
  WorkUnit unit_;
  std::int64_t t_ = 1'000'000'000;
  std::int64_t seq_ = 0;
  std::vector<WorkloadEvent> events_;
};

inline TelemetryTrace make_trace(const std::vector<std::int64_t>& t_ns,
                                 const std::vector<double>& power, int interval_ms = 100) {
  TelemetryTrace trace;
  trace.device_id = "gpu0";
  trace.interval_ms = interval_ms;
  for (std::size_t i = 0; i < t_ns.size(); ++i) {
    PowerSample s;
    s.t_ns = t_ns[i];
    s.device_id = trace.device_id;
    s.power_W = power[i];
    s.valid = true;
    s.sm_clock_MHz = 1980;
    s.mem_clock_MHz = 2619;
    trace.samples.push_back(s);
  }
  flag_gaps(trace);
  return trace;
}

/// Random piecewise-linear trace with jittered sample spacing.
inline TelemetryTrace random_trace(std::mt19937_64& rng, int n, int interval_ms = 100) {
  std::uniform_real_distribution<double> power(50.0, 700.0);
  std::uniform_int_distribution<std::int64_t> jitter(-interval_ms * 200'000LL,
                                                     interval_ms * 200'000LL);
  std::vector<std::int64_t> t;
  std::vector<double> p;
  std::int64_t now = 5'000'000'000;
  for (int i = 0; i < n; ++i) {
    t.push_back(now);
    p.push_back(power(rng));
    now += interval_ms * 1'000'000LL + jitter(rng);
  }
  return make_trace(t, p, interval_ms);
}

}  // namespace powerbench::testing
