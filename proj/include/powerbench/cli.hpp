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

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "powerbench/analysis.hpp"
#include "powerbench/device.hpp"
#include "powerbench/orchestrator.hpp"

namespace powerbench {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRunFailure = 1;
inline constexpr int kExitUsage = 2;

/// Sweep configuration file:
///   { "backend": {...}, "sweep": {...}, "synthetic": {...}, "output_dir": "..." }
/// Relative paths resolve against the file's directory.
struct SweepConfigFile {
  BackendConfig backend;
  SweepSpec sweep;
  SyntheticWorkloadSpec synthetic;
  std::filesystem::path output_dir;
};

/// Throws config_error naming the path when it is missing or malformed.
SweepConfigFile load_sweep_config(const std::filesystem::path& path);

/// Applies POWERBENCH_BACKEND when set.
void apply_backend_override(BackendConfig& config);

/// Files a finished sweep leaves next to its run directories.
struct SweepOutputs {
  std::string analysis_document;
  std::string efficiency_csv;
  std::string clock_csv;
  std::string throughput_markdown;
};

SweepOutputs render_sweep_outputs(std::span<const RunRecord> records,
                                  const MetricsOptions& options);
void write_sweep_outputs(const SweepOutputs& outputs, const std::filesystem::path& dir);

/// Whole command line, argv[0] included. Returns the process exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace powerbench
