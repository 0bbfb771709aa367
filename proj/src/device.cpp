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

#include "powerbench/device.hpp"

#include <algorithm>
#include <cmath>

#include "powerbench/error.hpp"
#include "powerbench/process.hpp"
#include "powerbench/text.hpp"

namespace powerbench {

std::string_view to_string(Vendor vendor) {
  switch (vendor) {
    case Vendor::nvidia_like: return "nvidia-like";
    case Vendor::amd_like: return "amd-like";
    case Vendor::simulated: return "simulated";
  }
  return "simulated";
}

Vendor vendor_from_string(std::string_view text) {
  if (text == "nvidia-like") return Vendor::nvidia_like;
  if (text == "amd-like") return Vendor::amd_like;
  if (text == "simulated") return Vendor::simulated;
  throw Error(ErrorCode::config_error, "unknown vendor '" + std::string(text) + "'");
}

void DeviceDescriptor::validate() const {
  if (!(cap_min_W > 0.0) || !(cap_min_W <= cap_max_W)) {
    throw Error(ErrorCode::invalid_argument,
                "device " + device_id + ": need 0 < cap_min_W <= cap_max_W");
  }
  if (gpus_per_node < 1) {
    throw Error(ErrorCode::invalid_argument,
                "device " + device_id + ": gpus_per_node must be >= 1");
  }
}

double DeviceProfile::power_at(double sm_clock_MHz) const {
  return p_idle_W + k * std::pow(sm_clock_MHz, alpha);
}

void DeviceProfile::validate() const {
  if (!(alpha > 1.0)) {
    throw Error(ErrorCode::invalid_argument, "profile: alpha must exceed 1");
  }
  if (!(k > 0.0) || !(p_idle_W >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "profile: need k > 0 and p_idle_W >= 0");
  }
  if (!(f_min_MHz > 0.0) || !(f_min_MHz < f_max_MHz)) {
    throw Error(ErrorCode::invalid_argument, "profile: need 0 < f_min < f_max");
  }
  if (!(f_knee_MHz > 0.0) || !(t_max_units_per_s > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "profile: need f_knee > 0 and t_max > 0");
  }
  if (enforce_floor_W < 0.0 || mem_step_W < 0.0) {
    throw Error(ErrorCode::invalid_argument,
                "profile: enforce_floor_W and mem_step_W must be >= 0");
  }
}

OperatingPoint simulate_operating_point(const DeviceProfile& profile,
                                        double cap_W) {
  if (!(cap_W > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "cap must be positive");
  }
  const double target = std::clamp(std::max(cap_W, profile.enforce_floor_W),
                                    profile.min_power_W(), profile.max_power_W());
  double clock = std::pow((target - profile.p_idle_W) / profile.k, 1.0 / profile.alpha);
  clock = std::clamp(clock, profile.f_min_MHz, profile.f_max_MHz);

  OperatingPoint op;
  op.sm_clock_MHz = clock;
  op.power_W = profile.power_at(clock);
  if (profile.f_knee_MHz <= profile.f_max_MHz) {
    op.throughput_units_per_s =
        profile.t_max_units_per_s * std::min(clock, profile.f_knee_MHz) / profile.f_knee_MHz;
  } else {
    op.throughput_units_per_s = profile.t_max_units_per_s * clock / profile.f_max_MHz;
  }
  op.mem_clock_MHz =
      cap_W < profile.mem_step_W ? profile.mem_clock_low_MHz : profile.mem_clock_high_MHz;
  return op;
}

namespace {

constexpr std::uint64_t kGB = 1'000'000'000ULL;

// TDP, cap range, memory and node size follow the published device
// specifications; the model constants only shape the simulated curve.
SimDevice h100_like() {
  SimDevice d;
  d.descriptor = {"", Vendor::simulated, "h100-like", 700.0, 200.0, 700.0, 94 * kGB, 4};
  d.profile.p_idle_W = 80.0;
  d.profile.alpha = 1.5;
  d.profile.k = 620.0 / std::pow(1980.0, 1.5);
  d.profile.f_min_MHz = 345.0;
  d.profile.f_max_MHz = 1980.0;
  d.profile.f_knee_MHz = 1980.0;
  d.profile.t_max_units_per_s = 1500.0;
  d.profile.enforce_floor_W = 0.0;
  d.profile.mem_clock_low_MHz = 2619.0;
  d.profile.mem_clock_high_MHz = 2619.0;
  d.profile.mem_step_W = 0.0;
  return d;
}

SimDevice h200_like() {
  SimDevice d;
  d.descriptor = {"", Vendor::simulated, "h200-like", 700.0, 200.0, 700.0, 141 * kGB, 4};
  d.profile.p_idle_W = 115.0;
  d.profile.alpha = 1.5;
  d.profile.k = 585.0 / std::pow(1980.0, 1.5);
  d.profile.f_min_MHz = 345.0;
  d.profile.f_max_MHz = 1980.0;
  d.profile.f_knee_MHz = 2250.0;  // no plateau inside the cap range
  d.profile.t_max_units_per_s = 1650.0;
  d.profile.enforce_floor_W = 0.0;
  d.profile.mem_clock_low_MHz = 3201.0;
  d.profile.mem_clock_high_MHz = 3201.0;
  d.profile.mem_step_W = 0.0;
  return d;
}

SimDevice mi300x_like() {
  SimDevice d;
  d.descriptor = {"", Vendor::simulated, "mi300x-like", 750.0, 200.0, 750.0, 192 * kGB, 8};
  d.profile.p_idle_W = 100.0;
  d.profile.alpha = 1.5;
  d.profile.k = 650.0 / std::pow(2100.0, 1.5);
  d.profile.f_min_MHz = 500.0;
  d.profile.f_max_MHz = 2100.0;
  d.profile.f_knee_MHz = 2100.0;
  d.profile.t_max_units_per_s = 1200.0;
  d.profile.enforce_floor_W = 400.0;
  d.profile.mem_clock_low_MHz = 900.0;
  d.profile.mem_clock_high_MHz = 1300.0;
  d.profile.mem_step_W = 500.0;
  return d;
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error,
                std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

std::vector<std::string> builtin_profile_names() {
  return {"h100-like", "h200-like", "mi300x-like"};
}

SimDevice builtin_sim_device(std::string_view profile_name) {
  if (profile_name == "h100-like") return h100_like();
  if (profile_name == "h200-like") return h200_like();
  if (profile_name == "mi300x-like") return mi300x_like();
  throw Error(ErrorCode::config_error,
              "unknown profile '" + std::string(profile_name) + "'");
}

std::vector<SimDevice> make_sim_node(std::string_view profile_name, int count) {
  std::vector<SimDevice> out;
  for (int i = 0; i < count; ++i) {
    SimDevice d = builtin_sim_device(profile_name);
    d.descriptor.device_id = "sim" + std::to_string(i);
    out.push_back(std::move(d));
  }
  return out;
}

DeviceDescriptor descriptor_from_json(const nlohmann::json& j) {
  DeviceDescriptor d;
  read_field(j, "device_id", d.device_id);
  if (j.contains("vendor")) d.vendor = vendor_from_string(j.at("vendor").get<std::string>());
  read_field(j, "name", d.name);
  read_field(j, "tdp_w", d.tdp_W);
  read_field(j, "cap_min_w", d.cap_min_W);
  read_field(j, "cap_max_w", d.cap_max_W);
  read_field(j, "memory_capacity_bytes", d.memory_capacity_bytes);
  read_field(j, "gpus_per_node", d.gpus_per_node);
  return d;
}

nlohmann::json to_json(const DeviceDescriptor& d) {
  return {
      {"device_id", d.device_id},
      {"vendor", to_string(d.vendor)},
      {"name", d.name},
      {"tdp_w", d.tdp_W},
      {"cap_min_w", d.cap_min_W},
      {"cap_max_w", d.cap_max_W},
      {"memory_capacity_bytes", d.memory_capacity_bytes},
      {"gpus_per_node", d.gpus_per_node},
  };
}

nlohmann::json to_json(const SimDevice& device) {
  auto j = to_json(device.descriptor);
  const auto& p = device.profile;
  j["p_idle_w"] = p.p_idle_W;
  j["alpha"] = p.alpha;
  j["k"] = p.k;
  j["f_min_mhz"] = p.f_min_MHz;
  j["f_max_mhz"] = p.f_max_MHz;
  j["f_knee_mhz"] = p.f_knee_MHz;
  j["t_max_units_per_s"] = p.t_max_units_per_s;
  j["enforce_floor_w"] = p.enforce_floor_W;
  j["mem_clock_low_mhz"] = p.mem_clock_low_MHz;
  j["mem_clock_high_mhz"] = p.mem_clock_high_MHz;
  j["mem_step_w"] = p.mem_step_W;
  return j;
}

std::vector<SimDevice> parse_profile_catalog(const nlohmann::json& catalog) {
  if (!catalog.is_array()) {
    throw Error(ErrorCode::config_error, "profile catalog must be a JSON array");
  }
  std::vector<SimDevice> out;
  for (const auto& entry : catalog) {
    if (!entry.is_object()) {
      throw Error(ErrorCode::config_error, "catalog entries must be objects");
    }
    SimDevice d;
    if (entry.contains("profile")) {
      d = builtin_sim_device(entry.at("profile").get<std::string>());
    }
    const auto desc = descriptor_from_json(entry);
    if (entry.contains("device_id")) d.descriptor.device_id = desc.device_id;
    if (entry.contains("vendor")) d.descriptor.vendor = desc.vendor;
    if (entry.contains("name")) d.descriptor.name = desc.name;
    if (entry.contains("tdp_w")) d.descriptor.tdp_W = desc.tdp_W;
    if (entry.contains("cap_min_w")) d.descriptor.cap_min_W = desc.cap_min_W;
    if (entry.contains("cap_max_w")) d.descriptor.cap_max_W = desc.cap_max_W;
    if (entry.contains("memory_capacity_bytes")) {
      d.descriptor.memory_capacity_bytes = desc.memory_capacity_bytes;
    }
    if (entry.contains("gpus_per_node")) d.descriptor.gpus_per_node = desc.gpus_per_node;

    auto& p = d.profile;
    read_field(entry, "p_idle_w", p.p_idle_W);
    read_field(entry, "alpha", p.alpha);
    read_field(entry, "k", p.k);
    read_field(entry, "f_min_mhz", p.f_min_MHz);
    read_field(entry, "f_max_mhz", p.f_max_MHz);
    read_field(entry, "f_knee_mhz", p.f_knee_MHz);
    read_field(entry, "t_max_units_per_s", p.t_max_units_per_s);
    read_field(entry, "enforce_floor_w", p.enforce_floor_W);
    read_field(entry, "mem_clock_low_mhz", p.mem_clock_low_MHz);
    read_field(entry, "mem_clock_high_mhz", p.mem_clock_high_MHz);
    read_field(entry, "mem_step_w", p.mem_step_W);
    // cap_max defaults to TDP when only the latter is given.
    if (!entry.contains("cap_max_w") && entry.contains("tdp_w")) {
      d.descriptor.cap_max_W = d.descriptor.tdp_W;
    }
    if (d.descriptor.device_id.empty()) {
      throw Error(ErrorCode::config_error, "catalog entry without device_id");
    }
    try {
      d.descriptor.validate();
      p.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::config_error, e.what());
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<SimDevice> load_profile_catalog(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error&) {
    throw Error(ErrorCode::backend_unavailable,
                "profile catalog not found: " + path.string());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::config_error,
                "profile catalog " + path.string() + ": " + e.what());
  }
  return parse_profile_catalog(j);
}

// DeviceBackend ---------------------------------------------------------------

std::vector<DeviceDescriptor> DeviceBackend::enumerate_devices() {
  std::lock_guard lock(mutex_);
  auto devices = do_enumerate();
  std::sort(devices.begin(), devices.end(),
            [](const auto& a, const auto& b) { return a.device_id < b.device_id; });
  known_.clear();
  for (const auto& d : devices) known_[d.device_id] = d;
  return devices;
}

const DeviceDescriptor& DeviceBackend::descriptor(const std::string& device_id) {
  if (known_.empty()) {
    for (auto& d : do_enumerate()) known_[d.device_id] = d;
  }
  auto it = known_.find(device_id);
  if (it == known_.end()) {
    throw Error(ErrorCode::invalid_argument, "unknown device '" + device_id + "'");
  }
  return it->second;
}

AppliedCap DeviceBackend::set_power_cap(const std::string& device_id, double cap_W) {
  std::lock_guard lock(mutex_);
  const auto& d = descriptor(device_id);
  if (!(cap_W >= d.cap_min_W && cap_W <= d.cap_max_W)) {
    throw Error(ErrorCode::out_of_range,
                "cap " + format_double(cap_W) + " W outside [" +
                    format_double(d.cap_min_W) + ", " + format_double(d.cap_max_W) +
                    "] W for " + device_id);
  }
  do_set_power_cap(device_id, cap_W);
  return {cap_W, do_get_power_cap(device_id)};
}

double DeviceBackend::get_power_cap(const std::string& device_id) {
  std::lock_guard lock(mutex_);
  descriptor(device_id);
  return do_get_power_cap(device_id);
}

DeviceReading DeviceBackend::read(const std::string& device_id) {
  std::lock_guard lock(mutex_);
  return do_read(device_id);
}

// SimBackend ------------------------------------------------------------------

SimBackend::SimBackend(std::vector<SimDevice> devices) : devices_(std::move(devices)) {
  for (const auto& d : devices_) {
    d.descriptor.validate();
    d.profile.validate();
    caps_[d.descriptor.device_id] = d.descriptor.cap_max_W;
  }
}

void SimBackend::set_workload_active(bool active) {
  std::lock_guard lock(mutex_);
  active_ = active;
}

bool SimBackend::workload_active() const { return active_; }

const SimDevice& SimBackend::device(const std::string& device_id) const {
  for (const auto& d : devices_) {
    if (d.descriptor.device_id == device_id) return d;
  }
  throw Error(ErrorCode::invalid_argument, "unknown device '" + device_id + "'");
}

std::vector<DeviceDescriptor> SimBackend::do_enumerate() {
  std::vector<DeviceDescriptor> out;
  out.reserve(devices_.size());
  for (const auto& d : devices_) out.push_back(d.descriptor);
  return out;
}

void SimBackend::do_set_power_cap(const std::string& device_id, double cap_W) {
  device(device_id);
  caps_[device_id] = cap_W;
}

double SimBackend::do_get_power_cap(const std::string& device_id) {
  device(device_id);
  return caps_.at(device_id);
}

DeviceReading SimBackend::do_read(const std::string& device_id) {
  const auto& d = device(device_id);
  const auto op = simulate_operating_point(d.profile, caps_.at(device_id));
  DeviceReading r;
  if (active_) {
    r.power_W = op.power_W;
    r.sm_clock_MHz = op.sm_clock_MHz;
    r.memory_used_bytes = d.descriptor.memory_capacity_bytes / 5 * 4;
  } else {
    r.power_W = d.profile.p_idle_W;
    r.sm_clock_MHz = d.profile.f_min_MHz;
    r.memory_used_bytes = 0;
  }
  r.mem_clock_MHz = op.mem_clock_MHz;
  return r;
}

// CommandBackend --------------------------------------------------------------

std::string expand_template(std::string pattern,
                            const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    const std::string token = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = pattern.find(token, pos)) != std::string::npos) {
      pattern.replace(pos, token.size(), value);
      pos += value.size();
    }
  }
  return pattern;
}

CommandBackend::CommandBackend(CommandTemplates templates, Vendor vendor,
                               int gpus_per_node)
    : templates_(std::move(templates)), vendor_(vendor), gpus_per_node_(gpus_per_node) {}

std::vector<DeviceDescriptor> CommandBackend::do_enumerate() {
  if (templates_.query.empty()) {
    throw Error(ErrorCode::backend_unavailable, "no query command configured");
  }
  const auto result = run_shell(templates_.query);
  if (result.exit_code != 0) {
    throw Error(ErrorCode::backend_unavailable,
                "query command exited with status " + std::to_string(result.exit_code));
  }
  std::vector<DeviceDescriptor> out;
  for (const auto& raw : split(result.output, '\n')) {
    const auto line = trim(raw);
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 6) {
      throw Error(ErrorCode::backend_unavailable,
                  "query output line has " + std::to_string(fields.size()) +
                      " fields, expected 6: '" + std::string(line) + "'");
    }
    try {
      DeviceDescriptor d;
      d.device_id = std::string(trim(fields[0]));
      d.vendor = vendor_;
      d.name = std::string(trim(fields[1]));
      d.tdp_W = parse_double(fields[2]);
      d.cap_min_W = parse_double(fields[3]);
      d.cap_max_W = parse_double(fields[4]);
      d.memory_capacity_bytes =
          static_cast<std::uint64_t>(parse_double(fields[5]) * 1024.0 * 1024.0);
      out.push_back(std::move(d));
    } catch (const ParseError& e) {
      throw Error(ErrorCode::backend_unavailable,
                  std::string("query output: ") + e.what());
    }
  }
  const int node = gpus_per_node_ > 0 ? gpus_per_node_ : static_cast<int>(out.size());
  for (auto& d : out) d.gpus_per_node = std::max(node, 1);
  return out;
}

void CommandBackend::do_set_power_cap(const std::string& device_id, double cap_W) {
  const auto cmd = expand_template(
      templates_.set_cap, {{"device", device_id}, {"watts", format_double(cap_W)}});
  const auto result = run_shell(cmd);
  if (result.exit_code != 0) {
    throw Error(ErrorCode::backend_rejected,
                "set-cap command for " + device_id + " exited with status " +
                    std::to_string(result.exit_code));
  }
}

double CommandBackend::do_get_power_cap(const std::string& device_id) {
  const auto result =
      run_shell(expand_template(templates_.get_cap, {{"device", device_id}}));
  if (result.exit_code != 0) {
    throw Error(ErrorCode::read_failure,
                "get-cap command for " + device_id + " failed");
  }
  try {
    return parse_double(result.output);
  } catch (const ParseError&) {
    throw Error(ErrorCode::read_failure,
                "get-cap output is not a number: '" + result.output + "'");
  }
}

DeviceReading CommandBackend::do_read(const std::string& device_id) {
  const auto result =
      run_shell(expand_template(templates_.sample, {{"device", device_id}}));
  if (result.exit_code != 0) {
    throw Error(ErrorCode::read_failure,
                "sample command for " + device_id + " exited with status " +
                    std::to_string(result.exit_code));
  }
  const auto fields = split(trim(result.output), ',');
  if (fields.size() != 4) {
    throw Error(ErrorCode::read_failure,
                "malformed sample output: '" + result.output + "'");
  }
  try {
    DeviceReading r;
    r.power_W = parse_double(fields[0]);
    r.sm_clock_MHz = parse_double(fields[1]);
    r.mem_clock_MHz = parse_double(fields[2]);
    r.memory_used_bytes =
        static_cast<std::uint64_t>(parse_double(fields[3]) * 1024.0 * 1024.0);
    if (r.power_W < 0.0) throw ParseError("negative power", 0);
    return r;
  } catch (const ParseError& e) {
    throw Error(ErrorCode::read_failure,
                "malformed sample output: '" + result.output + "': " + e.what());
  }
}

// Configuration ---------------------------------------------------------------

BackendConfig BackendConfig::from_json(const nlohmann::json& j,
                                       const std::filesystem::path& base_dir) {
  if (!j.is_object()) {
    throw Error(ErrorCode::config_error, "backend config must be an object");
  }
  BackendConfig c;
  read_field(j, "backend", c.kind);
  if (c.kind != "sim" && c.kind != "command") {
    throw Error(ErrorCode::config_error,
                "backend must be \"sim\" or \"command\", got \"" + c.kind + "\"");
  }
  if (j.contains("commands")) {
    const auto& cmds = j.at("commands");
    read_field(cmds, "query", c.commands.query);
    read_field(cmds, "sample", c.commands.sample);
    read_field(cmds, "get_cap", c.commands.get_cap);
    read_field(cmds, "set_cap", c.commands.set_cap);
  }
  if (j.contains("vendor")) c.vendor = vendor_from_string(j.at("vendor").get<std::string>());
  read_field(j, "gpus_per_node", c.gpus_per_node);
  if (j.contains("profile_catalog")) {
    std::filesystem::path p = j.at("profile_catalog").get<std::string>();
    c.profile_catalog = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  }
  if (j.contains("devices")) c.sim_devices = parse_profile_catalog(j.at("devices"));
  read_field(j, "profile", c.sim_profile);
  return c;
}

nlohmann::json BackendConfig::to_json() const {
  nlohmann::json j = {{"backend", kind}};
  if (kind == "command") {
    j["commands"] = {{"query", commands.query},
                     {"sample", commands.sample},
                     {"get_cap", commands.get_cap},
                     {"set_cap", commands.set_cap}};
    j["vendor"] = to_string(vendor);
    j["gpus_per_node"] = gpus_per_node;
  } else if (!profile_catalog.empty()) {
    j["profile_catalog"] = profile_catalog.string();
  } else if (sim_devices.empty()) {
    j["profile"] = sim_profile;
    j["gpus_per_node"] = gpus_per_node;
  } else {
    auto devices = nlohmann::json::array();
    for (const auto& d : sim_devices) devices.push_back(powerbench::to_json(d));
    j["devices"] = devices;
  }
  return j;
}

std::unique_ptr<DeviceBackend> make_backend(const BackendConfig& config) {
  if (config.kind == "sim") {
    auto devices = config.profile_catalog.empty()
                       ? config.sim_devices
                       : load_profile_catalog(config.profile_catalog);
    if (devices.empty()) {
      devices = make_sim_node(config.sim_profile,
                              config.gpus_per_node > 0 ? config.gpus_per_node : 4);
    }
    return std::make_unique<SimBackend>(std::move(devices));
  }
  if (config.kind == "command") {
    return std::make_unique<CommandBackend>(config.commands, config.vendor,
                                            config.gpus_per_node);
  }
  throw Error(ErrorCode::backend_unavailable, "unknown backend '" + config.kind + "'");
}

std::vector<DeviceDescriptor> enumerate_devices(const BackendConfig& config) {
  return make_backend(config)->enumerate_devices();
}

}  // namespace powerbench
