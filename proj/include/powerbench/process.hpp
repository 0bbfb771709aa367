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

#include <sys/types.h>

#include <optional>
#include <string>
#include <vector>

namespace powerbench {

struct ShellResult {
  int exit_code = -1;
  std::string output;  // stdout only
};

/// Runs `command` under /bin/sh -c and captures stdout.
ShellResult run_shell(const std::string& command);

/// A child process whose stdout is a pipe read line by line. The child is
/// killed and reaped on destruction if still running.
class ChildProcess {
 public:
  /// Throws Error(invalid_argument) on empty argv, Error(backend_unavailable)
  /// when the spawn itself fails.
  explicit ChildProcess(const std::vector<std::string>& argv);
  ~ChildProcess();

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  /// Next line without the trailing newline; nullopt at EOF. A final line
  /// without a newline is still returned.
  std::optional<std::string> read_line();

  /// Blocks until exit. Returns the exit status, or 128 + signal.
  int wait();

  void terminate();

  pid_t pid() const { return pid_; }

 private:
  pid_t pid_ = -1;
  int fd_ = -1;
  std::string buffer_;
  bool eof_ = false;
  std::optional<int> status_;
};

}  // namespace powerbench
