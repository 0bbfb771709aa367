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
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace powerbench {

enum class Vendor { nvidia_like, amd_like, simulated };

std::string_view to_string(Vendor vendor);
Vendor vendor_from_string(std::string_view text);

struct DeviceDescriptor {
  std::string device_id;
  Vendor vendor = Vendor::simulated;
  std::string name;
  double tdp_W = 0.0;
  double cap_min_W = 0.0;
  double cap_max_W = 0.0;
  std::uint64_t memory_capacity_bytes = 0;
  int gpus_per_node = 1;

  /// Throws invalid_argument unless 0 < cap_min <= cap_max and
  /// gpus_per_node >= 1.
  void validate() const;

  bool operator==(const DeviceDescriptor&) const = default;
};

/// Parameters of the analytical GPU model used by the simulator backend.
///
/// Steady power at SM clock f is p_idle + k * f^alpha. Throughput rises
/// linearly with clock up to f_knee and stays flat above it. The memory
/// clock takes one of two levels depending on the requested cap, and caps
/// below enforce_floor are silently ignored by the "hardware".
struct DeviceProfile {
  double p_idle_W = 80.0;
  double alpha = 1.5;
  double k = 0.0;  // W / MHz^alpha
  double f_min_MHz = 345.0;
  double f_max_MHz = 1980.0;
  double f_knee_MHz = 1980.0;
  double t_max_units_per_s = 1500.0;
  double enforce_floor_W = 0.0;
  double mem_clock_low_MHz = 2619.0;
  double mem_clock_high_MHz = 2619.0;
  double mem_step_W = 0.0;

  /// p_idle + k * f^alpha.
  double power_at(double sm_clock_MHz) const;
  double min_power_W() const { return power_at(f_min_MHz); }
  double max_power_W() const { return power_at(f_max_MHz); }

  void validate() const;

  bool operator==(const DeviceProfile&) const = default;
};

struct OperatingPoint {
  double power_W = 0.0;
  double sm_clock_MHz = 0.0;
  double mem_clock_MHz = 0.0;
  double throughput_units_per_s = 0.0;
};

/// Steady state the modeled device settles into under a given cap.
OperatingPoint simulate_operating_point(const DeviceProfile& profile,
                                        double cap_W);

/// A simulated GPU: what enumeration reports plus the model behind it.
struct SimDevice {
  DeviceDescriptor descriptor;
  DeviceProfile profile;
};

/// Built-in profiles: "h100-like", "h200-like", "mi300x-like".
std::vector<std::string> builtin_profile_names();
SimDevice builtin_sim_device(std::string_view profile_name);

/// `count` identical devices named sim0..sim{count-1}.
std::vector<SimDevice> make_sim_node(std::string_view profile_name, int count);

/// Profile catalog: a JSON array, one entry per device. An entry may name a
/// built-in profile under "profile" and override any field, or spell out
/// every descriptor and profile field itself.
std::vector<SimDevice> load_profile_catalog(const std::filesystem::path& path);
std::vector<SimDevice> parse_profile_catalog(const nlohmann::json& catalog);
nlohmann::json to_json(const SimDevice& device);
nlohmann::json to_json(const DeviceDescriptor& descriptor);
DeviceDescriptor descriptor_from_json(const nlohmann::json& j);

struct AppliedCap {
  double requested_W = 0.0;
  double reported_W = 0.0;

  bool operator==(const AppliedCap&) const = default;
};

/// Instantaneous device readings; the sampler adds the timestamp.
struct DeviceReading {
  double power_W = 0.0;
  double sm_clock_MHz = 0.0;
  double mem_clock_MHz = 0.0;
  std::uint64_t memory_used_bytes = 0;
};

/// Uniform device access. Cap changes and reads on one backend serialize
/// through an internal mutex, so a sampler thread and the orchestrator may
/// share an instance.
class DeviceBackend {
 public:
  virtual ~DeviceBackend() = default;

  /// Sorted by device_id. Throws backend_unavailable.
  std::vector<DeviceDescriptor> enumerate_devices();

  /// Checks the cap against the device limits, then hands it to the
  /// backend and reads it back. Never clamps; callers compare
  /// requested_W with reported_W.
  AppliedCap set_power_cap(const std::string& device_id, double cap_W);

  double get_power_cap(const std::string& device_id);

  /// Throws read_failure (transient) or device_lost (permanent).
  DeviceReading read(const std::string& device_id);

  /// Lets the simulator know whether a workload is loading the devices.
  /// Real hardware ignores it.
  virtual void set_workload_active(bool active) { (void)active; }

  virtual std::string_view kind() const = 0;

 protected:
  virtual std::vector<DeviceDescriptor> do_enumerate() = 0;
  virtual void do_set_power_cap(const std::string& device_id, double cap_W) = 0;
  virtual double do_get_power_cap(const std::string& device_id) = 0;
  virtual DeviceReading do_read(const std::string& device_id) = 0;

  const DeviceDescriptor& descriptor(const std::string& device_id);

  std::mutex mutex_;

 private:
  std::map<std::string, DeviceDescriptor> known_;
};

class SimBackend final : public DeviceBackend {
 public:
  explicit SimBackend(std::vector<SimDevice> devices);

  void set_workload_active(bool active) override;
  std::string_view kind() const override { return "sim"; }

  const SimDevice& device(const std::string& device_id) const;
  bool workload_active() const;

 protected:
  std::vector<DeviceDescriptor> do_enumerate() override;
  void do_set_power_cap(const std::string& device_id, double cap_W) override;
  double do_get_power_cap(const std::string& device_id) override;
  DeviceReading do_read(const std::string& device_id) override;

 private:
  std::vector<SimDevice> devices_;
  std::map<std::string, double> caps_;
  bool active_ = false;
};

/// Shell command templates for vendor tools. `{device}` and `{watts}` are
/// substituted before the command runs under /bin/sh.
///
///   query   : one line per device, "id, name, default_W, min_W, max_W,
///             memory_MiB" (nvidia-smi --format=csv,noheader,nounits order)
///   sample  : "power_W, sm_MHz, mem_MHz, memory_used_MiB"
///   get_cap : a single number
///   set_cap : exit status 0 on success
struct CommandTemplates {
  std::string query;
  std::string sample;
  std::string get_cap;
  std::string set_cap;
};

class CommandBackend final : public DeviceBackend {
 public:
  CommandBackend(CommandTemplates templates, Vendor vendor,
                 int gpus_per_node = 0);

  std::string_view kind() const override { return "command"; }

 protected:
  std::vector<DeviceDescriptor> do_enumerate() override;
  void do_set_power_cap(const std::string& device_id, double cap_W) override;
  double do_get_power_cap(const std::string& device_id) override;
  DeviceReading do_read(const std::string& device_id) override;

 private:
  CommandTemplates templates_;
  Vendor vendor_;
  int gpus_per_node_;
};

/// Replaces every `{key}` in `pattern`.
std::string expand_template(std::string pattern,
                            const std::map<std::string, std::string>& values);

struct BackendConfig {
  std::string kind = "sim";  // "sim" | "command"
  CommandTemplates commands;
  Vendor vendor = Vendor::nvidia_like;
  int gpus_per_node = 0;  // 0: number of enumerated devices
  std::filesystem::path profile_catalog;
  std::vector<SimDevice> sim_devices;  // used when no catalog path is set
  /// With neither a catalog nor inline devices, the sim backend builds a
  /// node of this built-in profile (gpus_per_node devices, 4 when unset).
  std::string sim_profile = "h100-like";

  /// Accepts the "backend" object of a config file.
  static BackendConfig from_json(const nlohmann::json& j,
                                 const std::filesystem::path& base_dir = {});
  nlohmann::json to_json() const;
};

/// Builds the configured backend. Throws backend_unavailable.
std::unique_ptr<DeviceBackend> make_backend(const BackendConfig& config);

std::vector<DeviceDescriptor> enumerate_devices(const BackendConfig& config);

}  // namespace powerbench
