#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "adrive/sim.hpp"

namespace adrive {

// Cartesian experiment sweep: volumes x sizes x protocols x replications.
// Cell order is fixed (volume-major, replication-minor) so row indices and
// derived seeds are stable across runs and thread counts.
struct MatrixSpec {
  // The default sweep injects a small rate of stop-line overshoot and
  // localization drift so recovery episodes occur at every section size;
  // without any imperfection the two protocols never diverge on short
  // sections that the sensors cover end to end.
  MatrixSpec() {
    base.failure.overshoot_m = 2.5;
    base.failure.overshoot_fraction = 0.03;
    base.failure.localization_offset_m = -3.0;
    base.failure.localization_fraction = 0.03;
  }

  SimConfig base;
  std::vector<double> volumes{200.0, 400.0, 600.0, 800.0};
  std::vector<double> sizes{10.0, 40.0, 70.0, 100.0};
  std::vector<Protocol> protocols{Protocol::ADrive, Protocol::LanePriority};
  int replications = 10;
  int jobs = 0;  // 0: all available threads, 1: serial reference path
};

int cell_count(const MatrixSpec& spec);

// Config for one cell. Replication k reuses seed base+k across protocols so
// the two protocols face identical traffic (paired comparison).
SimConfig cell_config(const MatrixSpec& spec, int index);

// Runs every cell; rows are appended to `csv` (with header) in cell order as
// they complete, identically whether execution is serial or parallel. A cell
// that throws becomes a result with `error` set and a `#` comment line in the
// CSV. `progress` (optional) is invoked in completion order.
std::vector<RunResult> run_matrix(
    const MatrixSpec& spec, std::ostream* csv,
    const std::function<void(int, const RunResult&)>& progress = {});

}  // namespace adrive
