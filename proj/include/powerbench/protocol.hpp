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

// Workload event protocol, version 1.
//
// A workload writes one JSON object per line to stdout:
//
//   {"ev":"handshake","seq":0,"workload":"resnet50","unit":"images","version":1}
//   {"ev":"epoch_begin","seq":1,"epoch":0}
//   {"ev":"batch_begin","seq":2,"epoch":0}
//   {"ev":"batch_end","seq":3,"epoch":0,"samples":256}
//   {"ev":"epoch_end","seq":4,"epoch":0}
//   {"ev":"run_end","seq":5}
//
// Unknown fields are ignored, unknown "ev" values are rejected. The harness
// stamps each line with its own receipt time, and those stamps (not any
// adapter-side time) delimit the measurement windows.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "powerbench/telemetry.hpp"

namespace powerbench {

inline constexpr int kProtocolVersion = 1;

enum class EventKind {
  handshake,
  epoch_begin,
  batch_begin,
  batch_end,
  epoch_end,
  run_end,
};

enum class WorkUnit { images, tokens };

std::string_view to_string(EventKind kind);
std::string_view to_string(WorkUnit unit);
WorkUnit work_unit_from_string(std::string_view text);

struct WorkloadEvent {
  EventKind kind = EventKind::handshake;
  std::int64_t seq = 0;
  std::int64_t epoch_index = 0;  // epoch/batch events only
  std::int64_t samples = 0;      // batch_end only
  WorkUnit unit = WorkUnit::images;
  std::string workload;  // handshake only
  int version = kProtocolVersion;
  std::int64_t recv_t_ns = 0;

  bool operator==(const WorkloadEvent&) const = default;
};

/// Parses one protocol line. Throws ParseError (with byte offset) for
/// malformed JSON or missing/mistyped fields, Error(protocol_error) for an
/// unknown "ev" value or unsupported version.
WorkloadEvent parse_event_line(std::string_view line, std::int64_t recv_t_ns = 0);

/// Protocol-defined fields only, compact JSON, no trailing newline.
std::string serialize_event(const WorkloadEvent& event);

/// Stream-level validation on top of parse_event_line: the first event must
/// be a handshake, seq must strictly increase, and later events inherit the
/// handshake's unit.
class EventStreamParser {
 public:
  WorkloadEvent feed(std::string_view line, std::int64_t recv_t_ns);

  const std::vector<WorkloadEvent>& events() const { return events_; }
  std::vector<WorkloadEvent> take_events() { return std::move(events_); }
  bool saw_run_end() const { return saw_run_end_; }

 private:
  std::vector<WorkloadEvent> events_;
  bool saw_run_end_ = false;
};

/// Events log persisted as NDJSON: the protocol fields plus the harness
/// receipt stamp under "recv_t_ns".
std::string events_to_ndjson(std::span<const WorkloadEvent> events);
std::vector<WorkloadEvent> events_from_ndjson(std::string_view text);

struct WarmupPolicy {
  std::int64_t skip_epochs = 1;
  std::int64_t skip_steps = 0;

  bool operator==(const WarmupPolicy&) const = default;
};

struct MeasurementWindow {
  std::int64_t t_start_ns = 0;
  std::int64_t t_end_ns = 0;
  std::int64_t epoch_index = 0;
  std::int64_t samples_in_window = 0;

  TimeWindow span() const { return {t_start_ns, t_end_ns}; }
  bool operator==(const MeasurementWindow&) const = default;
};

/// One window per batch_begin/batch_end pair. Epochs below skip_epochs are
/// dropped, then the first skip_steps remaining windows. A trailing
/// unpaired batch_begin is ignored. Throws protocol_error for a batch_end
/// without a matching batch_begin, nested batches, or a stream that does not
/// open with a handshake.
std::vector<MeasurementWindow> build_measurement_windows(
    std::span<const WorkloadEvent> events, const WarmupPolicy& policy);

std::vector<TimeWindow> time_windows(std::span<const MeasurementWindow> windows);

struct WorkUnits {
  std::int64_t total_samples = 0;
  double active_time_s = 0.0;
  WorkUnit unit = WorkUnit::images;

  double throughput() const { return total_samples / active_time_s; }
};

/// Throws insufficient_data for an empty window list.
WorkUnits compute_work_units(std::span<const MeasurementWindow> windows,
                             WorkUnit unit);

/// Unit and workload name announced by the stream's handshake.
std::optional<WorkloadEvent> find_handshake(std::span<const WorkloadEvent> events);

}  // namespace powerbench
