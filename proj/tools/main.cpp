#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adrive/config.hpp"
#include "adrive/matrix.hpp"
#include "adrive/sim.hpp"

namespace {

using namespace adrive;

std::unique_ptr<std::ofstream> open_out(const std::string& path) {
  if (path.empty()) return nullptr;
  auto f = std::make_unique<std::ofstream>(path);
  if (!*f) throw CLI::RuntimeError("cannot open output file: " + path, 1);
  return f;
}

SimConfig load_base(const std::string& config_path, const std::string& preset) {
  SimConfig cfg;
  if (!config_path.empty()) cfg = SimConfig::load_file(config_path);
  if (!preset.empty()) cfg = apply_preset(cfg, preset);
  return cfg;
}

int run_exit_code(const RunResult& r) {
  if (!r.error.empty() || r.collisions > 0) return 2;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic shared-segment traffic simulator with "
               "cooperative deadlock recovery"};
  app.require_subcommand(1);

  // --- run ---------------------------------------------------------------
  auto* run = app.add_subcommand("run", "Run a single scenario");
  std::string run_config, run_preset, run_protocol, run_out, run_events;
  std::optional<std::uint64_t> run_seed;
  std::optional<double> run_vph, run_size, run_duration;
  run->add_option("--config", run_config, "Scenario config file (JSON)");
  run->add_option("--preset", run_preset, "Apply a named failure preset");
  run->add_option("--seed", run_seed, "Override the RNG seed");
  run->add_option("--protocol", run_protocol,
                  "Override protocol: adrive | lane-priority");
  run->add_option("--volume", run_vph, "Override arrival rate (veh/h)");
  run->add_option("--size", run_size, "Override section length (m)");
  run->add_option("--duration", run_duration, "Override run duration (s)");
  run->add_option("--out", run_out, "Write the result row as CSV");
  run->add_option("--events", run_events, "Stream the event log (JSONL)");

  // --- matrix ------------------------------------------------------------
  auto* matrix = app.add_subcommand("matrix", "Run the experiment matrix");
  std::string mx_config, mx_preset, mx_out;
  MatrixSpec spec;
  std::vector<std::string> mx_protocols;
  std::optional<std::uint64_t> mx_seed;
  bool mx_quiet = false;
  matrix->add_option("--config", mx_config, "Base scenario config (JSON)");
  matrix->add_option("--preset", mx_preset, "Apply a named failure preset");
  matrix->add_option("--volumes", spec.volumes,
                     "Arrival rates in veh/h (default 200 400 600 800)");
  matrix->add_option("--sizes", spec.sizes,
                     "Section lengths in m (default 10 40 70 100)");
  matrix->add_option("--protocols", mx_protocols,
                     "Protocols to sweep (default both)");
  matrix->add_option("--reps", spec.replications, "Seeds per cell (default 10)");
  matrix->add_option("--jobs", spec.jobs,
                     "Worker threads; 1 forces the serial path, 0 = all cores");
  matrix->add_option("--seed", mx_seed, "Base seed");
  matrix->add_option("--out", mx_out, "Results CSV (default stdout)");
  matrix->add_flag("--quiet", mx_quiet, "Suppress per-cell progress on stderr");

  // --- validate ----------------------------------------------------------
  auto* validate = app.add_subcommand("validate", "Check a config file");
  std::string val_config;
  bool val_print = false;
  validate->add_option("config", val_config, "Config file (JSON)")->required();
  validate->add_flag("--print", val_print, "Echo the normalized config");

  // --- presets -----------------------------------------------------------
  app.add_subcommand("presets", "List the named failure scenarios");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      SimConfig cfg = load_base(run_config, run_preset);
      if (run_seed) cfg.seed = *run_seed;
      if (!run_protocol.empty()) cfg.protocol = protocol_from_string(run_protocol);
      if (run_vph) cfg.arrival_vph = *run_vph;
      if (run_size) cfg.section_length_m = *run_size;
      if (run_duration) cfg.duration_s = *run_duration;

      auto events_file = open_out(run_events);
      Simulation sim(cfg);
      sim.events().keep_in_memory(false);
      if (events_file) sim.events().set_stream(events_file.get());
      RunResult r = sim.run();

      auto out = open_out(run_out);
      std::ostream& os = out ? *out : std::cout;
      os << RunResult::csv_header() << '\n' << r.csv_row() << '\n';
      if (!r.error.empty())
        std::cerr << "run aborted: " << r.error << '\n';
      else if (r.collisions > 0)
        std::cerr << "safety violation: " << r.collisions << " collision(s)\n";
      return run_exit_code(r);
    }

    if (matrix->parsed()) {
      if (!mx_config.empty() || !mx_preset.empty())
        spec.base = load_base(mx_config, mx_preset);
      if (mx_seed) spec.base.seed = *mx_seed;
      if (!mx_protocols.empty()) {
        spec.protocols.clear();
        for (const auto& p : mx_protocols)
          spec.protocols.push_back(protocol_from_string(p));
      }
      if (spec.replications < 1)
        throw std::invalid_argument("--reps must be at least 1");
      spec.base.validate();

      auto out = open_out(mx_out);
      std::ostream& os = out ? *out : std::cout;
      const int total = cell_count(spec);
      auto progress = [&](int index, const RunResult& r) {
        if (mx_quiet) return;
        std::fprintf(stderr, "[%d/%d] %s vph=%g size=%g seed=%llu%s\n",
                     index + 1, total, r.protocol.c_str(), r.volume_vph,
                     r.size_m, static_cast<unsigned long long>(r.seed),
                     r.error.empty() ? "" : "  ERROR");
      };
      auto results = run_matrix(spec, &os, progress);

      int bad = 0;
      for (const auto& r : results)
        if (!r.error.empty() || r.collisions > 0) ++bad;
      if (bad) {
        std::cerr << bad << " cell(s) failed or violated safety\n";
        return 2;
      }
      return 0;
    }

    if (validate->parsed()) {
      SimConfig cfg = SimConfig::load_file(val_config);
      cfg.validate();
      cfg.build_scene();  // scene construction errors count as lint failures
      if (val_print) std::cout << cfg.to_json() << '\n';
      std::cerr << "ok\n";
      return 0;
    }

    // presets
    for (const auto& p : failure_presets())
      std::cout << p.name << "\n    " << p.description << '\n';
    return 0;
  } catch (const CLI::RuntimeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.get_exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
