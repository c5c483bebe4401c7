#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "carbsim/cases.hpp"
#include "carbsim/config.hpp"
#include "carbsim/output.hpp"
#include "carbsim/runner.hpp"
#include "carbsim/validation.hpp"

namespace fs = std::filesystem;
using namespace carbsim;

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kAborted = 3 };

std::string quote(const std::string& s) {
  std::string q = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') q += '\\';
    q += c == '\n' ? ' ' : c;
  }
  return q + '"';
}

// one line, key=value
void report_error(const std::string& kind, const std::string& message, const std::string& extra = {}) {
  std::cerr << "carbsim: error kind=" << kind << " message=" << quote(message);
  if (!extra.empty()) std::cerr << ' ' << extra;
  std::cerr << '\n';
}

void print_summary(const RunReport& rep) {
  const auto& st = rep.result.stats;
  fmt::print("run {} t_end={:.6g} s steps={} rejected={} newton={}\n", rep.output_dir, rep.result.final_state.t,
             st.accepted_steps, st.rejected_steps, st.newton_iterations);
  if (rep.jacobian_error) fmt::print("jacobian_check max_rel_diff={:.3e}\n", *rep.jacobian_error);
  for (const auto& f : rep.files) fmt::print("wrote {}\n", f);
}

int run_config(const RunConfig& config) {
  try {
    print_summary(execute_run(config));
    return kOk;
  } catch (const SimulationAborted& e) {
    report_error("abort", e.what(), "dump=" + quote(e.dump_path()));
    return kAborted;
  }
}

int cmd_sweep(const std::string& out_dir) {
  const auto& levels = kCase4Humidities;
  std::vector<std::optional<RunReport>> reports(levels.size());
  std::vector<std::string> errors(levels.size());
  std::atomic<std::size_t> next{0};
  std::mutex io;
  auto worker = [&] {
    for (std::size_t k; (k = next++) < levels.size();) {
      RunConfig c;
      c.preset = "case4";
      c.scenario = case4_carbonation(levels[k]);
      c.output_dir = (fs::path(out_dir) / fmt::format("rh{:02d}", static_cast<int>(levels[k] * 100 + 0.5))).string();
      c.write_vtk = false;
      try {
        reports[k] = execute_run(c);
        std::lock_guard lock(io);
        fmt::print("done rh={:.2f}\n", levels[k]);
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  const unsigned n = worker_count(levels.size());
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (std::size_t k = 0; k < levels.size(); ++k)
    if (!errors[k].empty()) {
      report_error("runtime", fmt::format("rh={:.2f}: {}", levels[k], errors[k]));
      return kFailure;
    }

  // depths at the output times, one row per humidity
  std::vector<CsvColumn> cols{{"rh", "1"}};
  const auto& times = case4_carbonation(levels[0]).output_times;
  for (double t : times) cols.push_back({fmt::format("depth_{:g}d", t / kDay), "m"});
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const auto& res = reports[k]->result;
    const auto sc = case4_carbonation(levels[k]);
    std::size_t idx = 0;
    while (sc.probes[idx].kind != ProbeKind::carbonation_depth) ++idx;
    std::vector<double> row{levels[k]};
    for (const auto& s : res.outputs) row.push_back(evaluate_probes(sc, res.setup, s)[idx]);
    rows.push_back(std::move(row));
  }
  const auto path = (fs::path(out_dir) / "sweep_rh.csv").string();
  write_csv(path, cols, rows);
  fmt::print("wrote {}\n", path);
  return kOk;
}

int cmd_validate() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = run_invariant_suite();
  int failed = 0;
  for (const auto& r : results) {
    fmt::print("{} {} {}\n", r.passed ? "PASS" : "FAIL", r.name, r.detail);
    failed += r.passed ? 0 : 1;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  fmt::print("validate: {} checks, {} failed, {:.2f} s\n", results.size(), failed, secs);
  if (failed) report_error("validation", fmt::format("{} invariant checks failed", failed));
  return failed ? kFailure : kOk;
}

int cmd_export(const std::string& dir) {
  prepare_output_dir(dir);
  for (const auto& name : preset_names()) {
    RunConfig c;
    c.preset = name;
    c.scenario = preset(name);
    c.output_dir = "out/" + name;
    const auto path = (fs::path(dir) / (name + ".ini")).string();
    std::ofstream out(path);
    out << serialize_config(c);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    fmt::print("wrote {}\n", path);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coupled water transport, carbonation and corrosion in concrete"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  auto* run = app.add_subcommand("run", "Run a scenario described by a config file");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("-o,--output-dir", out_dir, "Override the output directory");

  int case_no = 0;
  bool cracked = false;
  std::optional<double> rh;
  auto* cs = app.add_subcommand("case", "Run one of the five case-study presets");
  cs->add_option("number", case_no, "Case number")->required()->check(CLI::Range(1, 5));
  cs->add_flag("--cracked", cracked, "Case 5 with the two surface cracks");
  cs->add_option("--rh", rh, "Case 4 relative humidity in percent")->check(CLI::Range(1.0, 99.0));
  cs->add_option("-o,--output-dir", out_dir, "Output directory");

  std::string sweep_dir = "out/sweep-rh";
  auto* sweep = app.add_subcommand("sweep-rh", "Case 4 at every tested relative humidity, in parallel");
  sweep->add_option("-o,--output-dir", sweep_dir, "Output directory");

  app.add_subcommand("validate", "Invariant checks on tiny meshes");

  std::string export_dir = "presets";
  auto* exp = app.add_subcommand("export-presets", "Write every preset as a config file");
  exp->add_option("dir", export_dir, "Target directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    return kUsage;
  }

  try {
    if (*run) {
      RunConfig c = load_config_file(config_path);
      if (!out_dir.empty()) c.output_dir = out_dir;
      return run_config(c);
    }
    if (*cs) {
      if (cracked && case_no != 5) {
        report_error("usage", "--cracked applies to case 5 only");
        return kUsage;
      }
      if (rh && case_no != 4) {
        report_error("usage", "--rh applies to case 4 only");
        return kUsage;
      }
      RunConfig c;
      c.preset = case_no == 5 && cracked ? "case5-cracked" : fmt::format("case{}", case_no);
      c.scenario = case_no == 4 && rh ? case4_carbonation(*rh / 100.0) : preset(c.preset);
      c.output_dir = out_dir.empty() ? "out/" + c.scenario.name : out_dir;
      return run_config(c);
    }
    if (*sweep) return cmd_sweep(sweep_dir);
    if (app.got_subcommand("validate")) return cmd_validate();
    if (*exp) return cmd_export(export_dir);
  } catch (const ConfigError& e) {
    report_error("config", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    report_error("runtime", e.what());
    return kFailure;
  }
  return kOk;
}
