#include "adrive/matrix.hpp"

#include <exception>
#include <mutex>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace adrive {

int cell_count(const MatrixSpec& spec) {
  return static_cast<int>(spec.volumes.size() * spec.sizes.size() *
                          spec.protocols.size()) *
         spec.replications;
}

SimConfig cell_config(const MatrixSpec& spec, int index) {
  if (index < 0 || index >= cell_count(spec))
    throw std::out_of_range("matrix cell index out of range");
  const int reps = spec.replications;
  const int np = static_cast<int>(spec.protocols.size());
  const int ns = static_cast<int>(spec.sizes.size());

  const int rep = index % reps;
  const int pi = (index / reps) % np;
  const int si = (index / (reps * np)) % ns;
  const int vi = index / (reps * np * ns);

  SimConfig cfg = spec.base;
  cfg.arrival_vph = spec.volumes[vi];
  cfg.section_length_m = spec.sizes[si];
  cfg.protocol = spec.protocols[pi];
  cfg.seed = spec.base.seed + static_cast<std::uint64_t>(rep);
  return cfg;
}

namespace {

RunResult run_cell(const MatrixSpec& spec, int index) {
  SimConfig cfg = cell_config(spec, index);
  try {
    Simulation sim(cfg);
    return sim.run();
  } catch (const std::exception& e) {
    RunResult r;
    r.protocol = to_string(cfg.protocol);
    r.volume_vph = cfg.arrival_vph;
    r.size_m = cfg.section_length_m;
    r.seed = cfg.seed;
    r.error = e.what();
    return r;
  }
}

}  // namespace

std::vector<RunResult> run_matrix(
    const MatrixSpec& spec, std::ostream* csv,
    const std::function<void(int, const RunResult&)>& progress) {
  const int n = cell_count(spec);
  std::vector<RunResult> results(n);
  std::vector<char> done(n, 0);
  int next_write = 0;
  std::mutex mu;

  if (csv) *csv << RunResult::csv_header() << '\n';

  auto publish = [&](int index) {
    // Caller holds `mu`. Flush every contiguous finished row so the CSV is
    // ordered identically regardless of completion order.
    done[index] = 1;
    while (next_write < n && done[next_write]) {
      const RunResult& r = results[next_write];
      if (csv) {
        if (!r.error.empty()) *csv << "# cell " << next_write << " error: " << r.error << '\n';
        *csv << r.csv_row() << '\n';
      }
      ++next_write;
    }
  };

  const bool serial = spec.jobs == 1;
#ifdef _OPENMP
  if (!serial) {
    const int threads = spec.jobs > 0 ? spec.jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (int i = 0; i < n; ++i) {
      RunResult r = run_cell(spec, i);
      std::lock_guard<std::mutex> lock(mu);
      results[i] = std::move(r);
      if (progress) progress(i, results[i]);
      publish(i);
    }
    if (csv) csv->flush();
    return results;
  }
#endif
  for (int i = 0; i < n; ++i) {
    results[i] = run_cell(spec, i);
    if (progress) progress(i, results[i]);
    publish(i);
  }
  if (csv) csv->flush();
  return results;
}

}  // namespace adrive
