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

#include "powerbench/cli.hpp"

#include <cstdlib>
#include <ostream>

#include "CLI11.hpp"
#include "powerbench/error.hpp"
#include "powerbench/report.hpp"
#include "powerbench/text.hpp"

namespace powerbench {

SweepConfigFile load_sweep_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::config_error, "config file not found: " + path.string());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error, path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::config_error, path.string() + ": not an object");

  const auto base = path.parent_path();
  SweepConfigFile c;
  try {
    if (j.contains("backend")) c.backend = BackendConfig::from_json(j.at("backend"), base);
    if (j.contains("sweep")) c.sweep = SweepSpec::from_json(j.at("sweep"));
    if (j.contains("synthetic")) c.synthetic = SyntheticWorkloadSpec::from_json(j.at("synthetic"));
    if (j.contains("output_dir")) {
      std::filesystem::path out = j.at("output_dir").get<std::string>();
      c.output_dir = out.is_relative() ? base / out : out;
    }
  } catch (const Error& e) {
    throw Error(ErrorCode::config_error, path.string() + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error, path.string() + ": " + e.what());
  }
  if (c.sweep.workload_command.empty()) {
    c.sweep.workload_command = {std::string(kBuiltinSyntheticCommand)};
  }
  return c;
}

void apply_backend_override(BackendConfig& config) {
  if (const char* kind = std::getenv("POWERBENCH_BACKEND"); kind && *kind) {
    config.kind = kind;
  }
}

SweepOutputs render_sweep_outputs(std::span<const RunRecord> records,
                                  const MetricsOptions& options) {
  const auto metrics = metrics_for_records(records, options);
  const auto report = analyze_metrics(metrics, options.power_source, options.overhead_W);
  SweepOutputs o;
  o.analysis_document = render_analysis_document(report);
  std::vector<EfficiencyCurve> curves;
  for (const auto& c : report.curves) curves.push_back(c.curve);
  o.efficiency_csv = curves.empty() ? std::string(kEfficiencyCsvHeader) + "\n"
                                    : emit_efficiency_plot_data(curves);
  o.clock_csv = emit_clock_plot_data(metrics);
  if (!metrics.empty()) o.throughput_markdown = emit_throughput_table(metrics, TableFormat::markdown);
  return o;
}

void write_sweep_outputs(const SweepOutputs& outputs, const std::filesystem::path& dir) {
  write_file(dir / "analysis.json", outputs.analysis_document);
  write_file(dir / "efficiency.csv", outputs.efficiency_csv);
  write_file(dir / "clocks.csv", outputs.clock_csv);
  if (!outputs.throughput_markdown.empty()) {
    write_file(dir / "throughput.md", outputs.throughput_markdown);
  }
}

namespace {

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::config_error:
    case ErrorCode::parse_error:
    case ErrorCode::plan_error:
    case ErrorCode::invalid_argument:
    case ErrorCode::insufficient_data:
    case ErrorCode::too_few_points:
      return kExitUsage;
    default:
      return kExitRunFailure;
  }
}

struct CommonOptions {
  std::string config;
  std::string output;
  std::vector<double> caps;
  int repeats = 0;
  double overhead_W = kDefaultNodeOverheadW;
  std::string power_source;
  std::string format = "markdown";
};

MetricsOptions metrics_options(const CommonOptions& o, PowerSource fallback) {
  MetricsOptions m;
  m.overhead_W = o.overhead_W;
  m.power_source = o.power_source.empty() ? fallback : power_source_from_string(o.power_source);
  return m;
}

std::string run_line(const RunRecord& rec, const MetricsOptions& options) {
  std::string line = rec.config.run_id + "  cap=" + format_double(rec.config.cap_W) +
                     " W  status=" + std::string(to_string(rec.status));
  if (rec.status != RunStatus::completed) {
    return line + "  reason=" + rec.failure_reason;
  }
  try {
    const auto m = compute_run_metrics(rec, options);
    line += "  throughput=" + format_fixed(m.throughput_per_gpu, 2) + " " +
            std::string(to_string(m.unit)) + "/s/GPU  power=" +
            format_fixed(m.mean_power_per_gpu_W, 1) + " W/GPU  efficiency=" +
            format_fixed(m.efficiency, 4) + " units/J";
    if (!m.enforced) line += "  UNENFORCED";
  } catch (const Error& e) {
    line += "  metrics unavailable: " + std::string(e.what());
  }
  return line;
}

void print_analysis_summary(const SweepOutputs& outputs, std::ostream& out) {
  const auto doc = nlohmann::json::parse(outputs.analysis_document);
  for (const auto& line : doc.at("peaks")) out << "peak " << line.get<std::string>() << "\n";
  for (const auto& c : doc.at("curves")) {
    if (c.at("unimodality").is_null()) continue;
    out << "unimodal " << c.at("device").get<std::string>() << "/"
        << c.at("workload").get<std::string>() << ": "
        << (c.at("unimodality").at("unimodal").get<bool>() ? "yes" : "no") << "\n";
  }
}

std::unique_ptr<RunDriver> make_driver(const SweepSpec& spec, const DeviceBackend& backend,
                                       const SyntheticWorkloadSpec& synthetic) {
  const bool builtin =
      spec.workload_command.size() == 1 && spec.workload_command[0] == kBuiltinSyntheticCommand;
  if (builtin) {
    if (backend.kind() != "sim") {
      throw Error(ErrorCode::config_error,
                  "the built-in synthetic workload runs only on the sim backend");
    }
    return std::make_unique<SimulatedDriver>(synthetic);
  }
  return std::make_unique<ProcessDriver>();
}

int execute_and_report(SweepConfigFile config, const CommonOptions& opts, std::ostream& out,
                       std::ostream& err) {
  if (!opts.caps.empty()) config.sweep.explicit_caps = opts.caps;
  if (opts.repeats > 0) config.sweep.repeats = opts.repeats;
  if (!opts.output.empty()) config.output_dir = opts.output;
  config.sweep.validate();
  const auto options = metrics_options(opts, PowerSource::measured);

  auto backend = make_backend(config.backend);
  auto driver = make_driver(config.sweep, *backend, config.synthetic);

  std::size_t index = 0;
  auto result = execute_sweep(config.sweep, *backend, *driver, config.output_dir,
                              [&](const RunRecord& rec) {
                                out << "[" << ++index << "] " << run_line(rec, options) << "\n";
                                out.flush();
                              });
  out << "sweep status=" << to_string(result.status) << " runs=" << result.records.size()
      << "\n";

  try {
    const auto outputs = render_sweep_outputs(result.records, options);
    if (!config.output_dir.empty()) write_sweep_outputs(outputs, config.output_dir);
    print_analysis_summary(outputs, out);
  } catch (const Error& e) {
    err << "analysis failed: " << e.what() << "\n";
    return kExitRunFailure;
  }
  return result.status == SweepStatus::completed ? kExitOk : kExitRunFailure;
}

std::vector<RunMetrics> replay_files(const std::vector<std::string>& files,
                                     const MetricsOptions& options) {
  std::vector<RunMetrics> metrics;
  for (const auto& f : files) {
    const auto text = read_file(f);
    std::vector<ReplayRow> rows;
    try {
      rows = parse_replay_csv(text);
    } catch (const Error& e) {
      throw Error(e.code(), f + ": " + e.what());
    }
    auto m = replay_metrics(rows, options);
    metrics.insert(metrics.end(), m.begin(), m.end());
  }
  return metrics;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"powerbench: GPU power-cap sweeps, telemetry and energy-efficiency analysis"};
  app.require_subcommand(1);
  CommonOptions opts;

  auto add_metrics_flags = [&](CLI::App* sub) {
    sub->add_option("--overhead-w", opts.overhead_W, "Node overhead in watts")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--power-source", opts.power_source, "measured or cap-proxy")
        ->check(CLI::IsMember({"measured", "cap-proxy", "cap_proxy"}));
  };

  auto* run = app.add_subcommand("run", "Run the workload once at one cap");
  double run_cap = 0.0;
  run->add_option("--config", opts.config, "Sweep config file")->required();
  run->add_option("--cap", run_cap, "Power cap in watts")->required();
  run->add_option("--output", opts.output, "Output directory");
  add_metrics_flags(run);

  auto* sweep = app.add_subcommand("sweep", "Run a power-cap sweep");
  sweep->add_option("--config", opts.config, "Sweep config file")->required();
  sweep->add_option("--output", opts.output, "Output directory");
  sweep->add_option("--caps", opts.caps, "Explicit caps, comma separated")->delimiter(',');
  sweep->add_option("--repeats", opts.repeats, "Repeats per cap")->check(CLI::PositiveNumber);
  add_metrics_flags(sweep);

  auto* analyze = app.add_subcommand("analyze", "Analyze a persisted sweep");
  std::string analyze_dir;
  analyze->add_option("dir", analyze_dir, "Sweep or run directory")->required();
  analyze->add_option("--output", opts.output, "Write analysis files here");
  add_metrics_flags(analyze);

  auto* replay = app.add_subcommand("replay", "Analyze published throughput tables");
  std::vector<std::string> replay_inputs;
  replay->add_option("tables", replay_inputs, "Replay CSV files")->required();
  replay->add_option("--output", opts.output, "Write analysis files here");
  add_metrics_flags(replay);

  auto* report = app.add_subcommand("report", "Print the throughput table");
  std::vector<std::string> report_inputs;
  report->add_option("inputs", report_inputs, "Sweep directory or replay CSV files")->required();
  report->add_option("--format", opts.format, "markdown or csv")
      ->check(CLI::IsMember({"markdown", "csv"}));
  add_metrics_flags(report);

  auto* simulate = app.add_subcommand("simulate", "Sweep simulated devices");
  std::string profile = "h100-like";
  int gpus = 4;
  simulate->add_option("--profile", profile, "Built-in device profile");
  simulate->add_option("--gpus", gpus, "Devices in the node")->check(CLI::PositiveNumber);
  simulate->add_option("--caps", opts.caps, "Explicit caps, comma separated")->delimiter(',');
  simulate->add_option("--repeats", opts.repeats, "Repeats per cap")->check(CLI::PositiveNumber);
  simulate->add_option("--output", opts.output, "Output directory");
  add_metrics_flags(simulate);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run || *sweep) {
      auto config = load_sweep_config(opts.config);
      apply_backend_override(config.backend);
      if (*run) {
        opts.caps = {run_cap};
        opts.repeats = 1;
      }
      return execute_and_report(std::move(config), opts, out, err);
    }
    if (*simulate) {
      SweepConfigFile config;
      builtin_sim_device(profile);  // rejects unknown names up front
      config.backend.kind = "sim";
      config.backend.sim_profile = profile;
      config.backend.gpus_per_node = gpus;
      config.sweep.workload_command = {std::string(kBuiltinSyntheticCommand)};
      return execute_and_report(std::move(config), opts, out, err);
    }
    if (*analyze) {
      const auto records = load_sweep(analyze_dir);
      const auto outputs =
          render_sweep_outputs(records, metrics_options(opts, PowerSource::measured));
      if (opts.output.empty()) {
        out << outputs.analysis_document;
      } else {
        write_sweep_outputs(outputs, opts.output);
        print_analysis_summary(outputs, out);
      }
      return kExitOk;
    }
    if (*replay) {
      const auto options = metrics_options(opts, PowerSource::cap_proxy);
      const auto metrics = replay_files(replay_inputs, options);
      const auto analysis = analyze_metrics(metrics, options.power_source, options.overhead_W);
      for (const auto& line : peak_summary_lines(analysis)) out << line << "\n";
      if (!opts.output.empty()) {
        std::vector<EfficiencyCurve> curves;
        for (const auto& c : analysis.curves) curves.push_back(c.curve);
        const std::filesystem::path dir = opts.output;
        write_file(dir / "analysis.json", render_analysis_document(analysis));
        write_file(dir / "efficiency.csv", emit_efficiency_plot_data(curves));
        write_file(dir / "throughput.md", emit_throughput_table(metrics, TableFormat::markdown));
        write_file(dir / "throughput.csv", emit_throughput_table(metrics, TableFormat::csv));
      }
      return kExitOk;
    }
    if (*report) {
      const auto format = table_format_from_string(opts.format);
      std::vector<RunMetrics> metrics;
      if (report_inputs.size() == 1 && std::filesystem::is_directory(report_inputs[0])) {
        metrics = metrics_for_records(load_sweep(report_inputs[0]),
                                      metrics_options(opts, PowerSource::measured));
      } else {
        metrics = replay_files(report_inputs, metrics_options(opts, PowerSource::cap_proxy));
      }
      out << emit_throughput_table(metrics, format);
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "powerbench: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitUsage;
}

}  // namespace powerbench
