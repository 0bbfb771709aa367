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

#include <atomic>
#include <cstdint>

namespace powerbench {

/// Harness time source. Telemetry samples and workload events are stamped
/// from the same clock so that windows and traces line up.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ns() const = 0;
};

/// std::chrono::steady_clock, nanoseconds since an arbitrary epoch.
class SteadyClock final : public Clock {
 public:
  std::int64_t now_ns() const override;
};

/// Virtual time that only moves when told to. Used by the simulated run
/// driver and by tests.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(std::int64_t start_ns = 0) : now_(start_ns) {}

  std::int64_t now_ns() const override { return now_.load(); }
  void set(std::int64_t t_ns) { now_.store(t_ns); }
  void advance(std::int64_t dt_ns) { now_.fetch_add(dt_ns); }

 private:
  std::atomic<std::int64_t> now_;
};

}  // namespace powerbench
