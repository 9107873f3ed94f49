// Benchmark: serial reference vs OpenMP-parallel validation kernels on a
// trig-modulated Dirac structure. Both modes must produce identical
// reports; the parallel path only distributes the per-sample work.
//
//   phdae_bench [samples]   (default 20000)

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>

#include "phdae/geometry.hpp"

using namespace phdae;

namespace {

DiracStructure bench_structure() {
  const int n = 4;
  const VarList vars = make_variables({"x1", "x2", "x3", "x4"});
  DiracStructure d;
  d.n = n;
  d.j = zero_matrix_expr(vars, n, n);
  // skew field with state-dependent couplings
  d.j(0, 1) = parse("1 + 0.5*sin(x3)", vars);
  d.j(1, 0) = -d.j(0, 1);
  d.j(0, 2) = parse("0.25*x4^2", vars);
  d.j(2, 0) = -d.j(0, 2);
  d.j(1, 3) = parse("cos(x1)", vars);
  d.j(3, 1) = -d.j(1, 3);
  d.j(2, 3) = parse("0.1 + x1^2", vars);
  d.j(3, 2) = -d.j(2, 3);

  d.b = zero_matrix_expr(vars, n, 1);
  d.b(0, 0) = parse("1", vars);
  d.b(1, 0) = parse("-1", vars);
  d.b(2, 0) = parse("0.5*tanh(x2)", vars);
  d.b(3, 0) = parse("0", vars);

  d.g_r = zero_matrix_expr(vars, n, 1);
  d.g_r(3, 0) = parse("1", vars);
  d.g = zero_matrix_expr(vars, n, 1);
  d.g(0, 0) = parse("1", vars);
  return d;
}

double run(const DiracStructure& d, const std::vector<Vec>& samples, RunMode mode,
           ValidationReport& report) {
  const auto start = std::chrono::steady_clock::now();
  report = validate_dirac(d, samples, kDefaultSeed, mode);
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(stop - start).count();
}

}  // namespace

int main(int argc, char** argv) {
  int count = 20000;
  if (argc > 1) count = std::atoi(argv[1]);
  if (count < 1) count = 1;

  const DiracStructure d = bench_structure();
  const std::vector<Vec> samples = sample_box(Box::centered(4), count, kDefaultSeed);

  ValidationReport serial_report, parallel_report;
  const double t_serial = run(d, samples, RunMode::serial, serial_report);
  const double t_parallel = run(d, samples, RunMode::parallel, parallel_report);

  bool identical = serial_report.samples.size() == parallel_report.samples.size();
  for (std::size_t i = 0; identical && i < serial_report.samples.size(); ++i) {
    identical = serial_report.samples[i].isotropy == parallel_report.samples[i].isotropy &&
                serial_report.samples[i].skewness == parallel_report.samples[i].skewness &&
                serial_report.samples[i].dim == parallel_report.samples[i].dim;
  }

  std::cout << "samples:   " << count << "\n";
  std::cout << "serial:    " << t_serial << " s\n";
  std::cout << "parallel:  " << t_parallel << " s\n";
  std::cout << "speedup:   " << (t_parallel > 0 ? t_serial / t_parallel : 0.0) << "x\n";
  std::cout << "reports:   " << (identical ? "identical" : "MISMATCH") << "\n";
  std::cout << "passed:    " << (serial_report.passed ? "yes" : "no")
            << " (max isotropy " << serial_report.max_isotropy << ")\n";
  return identical && serial_report.passed ? 0 : 1;
}
