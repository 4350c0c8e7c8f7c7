// Compares the serial reference matrix path against the parallel path on a
// reduced sweep: reports wall time for each and verifies the CSV output is
// byte-identical.
#include <chrono>
#include <cstdio>
#include <sstream>
#include <string>

#include "adrive/matrix.hpp"

using namespace adrive;
using Clock = std::chrono::steady_clock;

int main(int argc, char** argv) {
  MatrixSpec spec;
  spec.base.duration_s = 600.0;
  spec.base.scoring_window_s = 400.0;
  spec.volumes = {400.0, 800.0};
  spec.sizes = {30.0, 100.0};
  spec.replications = 4;
  if (argc > 1) spec.replications = std::atoi(argv[1]);

  spec.jobs = 1;
  std::ostringstream serial_csv;
  auto t0 = Clock::now();
  run_matrix(spec, &serial_csv);
  auto serial_s = std::chrono::duration<double>(Clock::now() - t0).count();

  spec.jobs = 0;
  std::ostringstream parallel_csv;
  t0 = Clock::now();
  run_matrix(spec, &parallel_csv);
  auto parallel_s = std::chrono::duration<double>(Clock::now() - t0).count();

  const int cells = cell_count(spec);
  std::printf("cells: %d\n", cells);
  std::printf("serial:   %.2f s (%.2f s/cell)\n", serial_s, serial_s / cells);
  std::printf("parallel: %.2f s (%.2f s/cell, speedup %.2fx)\n", parallel_s,
              parallel_s / cells, serial_s / parallel_s);

  if (serial_csv.str() != parallel_csv.str()) {
    std::printf("MISMATCH: serial and parallel CSV outputs differ\n");
    return 1;
  }
  std::printf("outputs byte-identical\n");
  return 0;
}
