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

#include "powerbench/protocol.hpp"

#include "json.hpp"
#include "powerbench/error.hpp"
#include "powerbench/text.hpp"

namespace powerbench {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::handshake: return "handshake";
    case EventKind::epoch_begin: return "epoch_begin";
    case EventKind::batch_begin: return "batch_begin";
    case EventKind::batch_end: return "batch_end";
    case EventKind::epoch_end: return "epoch_end";
    case EventKind::run_end: return "run_end";
  }
  return "handshake";
}

std::string_view to_string(WorkUnit unit) {
  return unit == WorkUnit::images ? "images" : "tokens";
}

WorkUnit work_unit_from_string(std::string_view text) {
  if (text == "images") return WorkUnit::images;
  if (text == "tokens") return WorkUnit::tokens;
  throw Error(ErrorCode::invalid_argument, "unknown unit '" + std::string(text) + "'");
}

namespace {

using nlohmann::json;

std::optional<EventKind> kind_from_string(std::string_view ev) {
  if (ev == "handshake") return EventKind::handshake;
  if (ev == "epoch_begin") return EventKind::epoch_begin;
  if (ev == "batch_begin") return EventKind::batch_begin;
  if (ev == "batch_end") return EventKind::batch_end;
  if (ev == "epoch_end") return EventKind::epoch_end;
  if (ev == "run_end") return EventKind::run_end;
  return std::nullopt;
}

bool carries_epoch(EventKind k) {
  return k == EventKind::epoch_begin || k == EventKind::epoch_end ||
         k == EventKind::batch_begin || k == EventKind::batch_end;
}

std::int64_t require_int(const json& j, const char* key, std::size_t line_size) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw ParseError(std::string("missing field \"") + key + "\"", line_size);
  }
  if (!it->is_number_integer()) {
    throw ParseError(std::string("field \"") + key + "\" must be an integer", line_size);
  }
  return it->get<std::int64_t>();
}

std::string require_string(const json& j, const char* key, std::size_t line_size) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw ParseError(std::string("missing field \"") + key + "\"", line_size);
  }
  if (!it->is_string()) {
    throw ParseError(std::string("field \"") + key + "\" must be a string", line_size);
  }
  return it->get<std::string>();
}

}  // namespace

WorkloadEvent parse_event_line(std::string_view line, std::int64_t recv_t_ns) {
  json j;
  try {
    j = json::parse(line.begin(), line.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed event line: ") + e.what(), e.byte);
  }
  if (!j.is_object()) throw ParseError("event line is not an object", 0);

  WorkloadEvent ev;
  ev.recv_t_ns = recv_t_ns;
  const auto name = require_string(j, "ev", line.size());
  const auto kind = kind_from_string(name);
  if (!kind) throw Error(ErrorCode::protocol_error, "unknown event '" + name + "'");
  ev.kind = *kind;
  ev.seq = require_int(j, "seq", line.size());
  if (ev.seq < 0) throw ParseError("seq must be >= 0", line.size());

  if (carries_epoch(ev.kind)) {
    ev.epoch_index = require_int(j, "epoch", line.size());
    if (ev.epoch_index < 0) throw ParseError("epoch must be >= 0", line.size());
  }
  if (ev.kind == EventKind::batch_end) {
    ev.samples = require_int(j, "samples", line.size());
    if (ev.samples < 0) throw ParseError("samples must be >= 0", line.size());
  }
  if (ev.kind == EventKind::handshake) {
    ev.workload = require_string(j, "workload", line.size());
    const auto unit = require_string(j, "unit", line.size());
    if (unit != "images" && unit != "tokens") {
      throw ParseError("unit must be \"images\" or \"tokens\"", line.size());
    }
    ev.unit = work_unit_from_string(unit);
    const auto version = require_int(j, "version", line.size());
    if (version != kProtocolVersion) {
      throw Error(ErrorCode::protocol_error,
                  "unsupported protocol version " + std::to_string(version));
    }
    ev.version = static_cast<int>(version);
  }
  return ev;
}

std::string serialize_event(const WorkloadEvent& event) {
  // ordered_json keeps the conventional field order on the wire.
  nlohmann::ordered_json j;
  j["ev"] = to_string(event.kind);
  j["seq"] = event.seq;
  if (event.kind == EventKind::handshake) {
    j["workload"] = event.workload;
    j["unit"] = to_string(event.unit);
    j["version"] = event.version;
  }
  if (carries_epoch(event.kind)) j["epoch"] = event.epoch_index;
  if (event.kind == EventKind::batch_end) j["samples"] = event.samples;
  return j.dump();
}

WorkloadEvent EventStreamParser::feed(std::string_view line, std::int64_t recv_t_ns) {
  auto ev = parse_event_line(line, recv_t_ns);
  if (events_.empty()) {
    if (ev.kind != EventKind::handshake) {
      throw Error(ErrorCode::protocol_error, "stream must open with a handshake");
    }
  } else {
    if (ev.kind == EventKind::handshake) {
      throw Error(ErrorCode::protocol_error, "repeated handshake");
    }
    if (saw_run_end_) throw Error(ErrorCode::protocol_error, "event after run_end");
    if (ev.seq <= events_.back().seq) {
      throw Error(ErrorCode::protocol_error,
                  "out-of-order seq " + std::to_string(ev.seq) + " after " +
                      std::to_string(events_.back().seq));
    }
    ev.unit = events_.front().unit;
  }
  if (ev.kind == EventKind::run_end) saw_run_end_ = true;
  events_.push_back(ev);
  return ev;
}

std::string events_to_ndjson(std::span<const WorkloadEvent> events) {
  std::string out;
  for (const auto& ev : events) {
    auto line = serialize_event(ev);
    line.pop_back();  // closing brace
    line += ",\"recv_t_ns\":" + std::to_string(ev.recv_t_ns) + "}\n";
    out += line;
  }
  return out;
}

std::vector<WorkloadEvent> events_from_ndjson(std::string_view text) {
  EventStreamParser parser;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty()) continue;
    const auto j = json::parse(line.begin(), line.end(), nullptr, false);
    if (j.is_discarded() || !j.contains("recv_t_ns") || !j["recv_t_ns"].is_number_integer()) {
      throw ParseError("events log line lacks recv_t_ns", start);
    }
    parser.feed(line, j["recv_t_ns"].get<std::int64_t>());
  }
  return parser.take_events();
}

std::vector<MeasurementWindow> build_measurement_windows(std::span<const WorkloadEvent> events,
                                                         const WarmupPolicy& policy) {
  if (policy.skip_epochs < 0 || policy.skip_steps < 0) {
    throw Error(ErrorCode::invalid_argument, "warm-up counts must be >= 0");
  }
  if (events.empty() || events.front().kind != EventKind::handshake) {
    throw Error(ErrorCode::protocol_error, "event stream must open with a handshake");
  }
  std::vector<MeasurementWindow> windows;
  const WorkloadEvent* open = nullptr;
  for (const auto& ev : events) {
    if (ev.kind == EventKind::batch_begin) {
      if (open) {
        throw Error(ErrorCode::protocol_error,
                    "batch_begin seq " + std::to_string(ev.seq) +
                        " while batch seq " + std::to_string(open->seq) + " is open");
      }
      open = &ev;
    } else if (ev.kind == EventKind::batch_end) {
      if (!open) {
        throw Error(ErrorCode::protocol_error,
                    "batch_end seq " + std::to_string(ev.seq) + " without batch_begin");
      }
      if (open->epoch_index != ev.epoch_index) {
        throw Error(ErrorCode::protocol_error,
                    "batch_end seq " + std::to_string(ev.seq) + " closes a batch of epoch " +
                        std::to_string(open->epoch_index));
      }
      if (ev.recv_t_ns <= open->recv_t_ns) {
        throw Error(ErrorCode::protocol_error,
                    "batch ending at seq " + std::to_string(ev.seq) + " has no duration");
      }
      if (ev.epoch_index >= policy.skip_epochs) {
        windows.push_back({open->recv_t_ns, ev.recv_t_ns, ev.epoch_index, ev.samples});
      }
      open = nullptr;
    }
  }
  const auto skip = std::min<std::size_t>(static_cast<std::size_t>(policy.skip_steps),
                                          windows.size());
  windows.erase(windows.begin(), windows.begin() + static_cast<std::ptrdiff_t>(skip));
  return windows;
}

std::vector<TimeWindow> time_windows(std::span<const MeasurementWindow> windows) {
  std::vector<TimeWindow> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(w.span());
  return out;
}

WorkUnits compute_work_units(std::span<const MeasurementWindow> windows, WorkUnit unit) {
  if (windows.empty()) {
    throw Error(ErrorCode::insufficient_data, "no measurement windows");
  }
  WorkUnits out;
  out.unit = unit;
  std::int64_t active_ns = 0;
  for (const auto& w : windows) {
    out.total_samples += w.samples_in_window;
    active_ns += w.t_end_ns - w.t_start_ns;
  }
  out.active_time_s = static_cast<double>(active_ns) * 1e-9;
  return out;
}

std::optional<WorkloadEvent> find_handshake(std::span<const WorkloadEvent> events) {
  for (const auto& ev : events) {
    if (ev.kind == EventKind::handshake) return ev;
  }
  return std::nullopt;
}

}  // namespace powerbench
