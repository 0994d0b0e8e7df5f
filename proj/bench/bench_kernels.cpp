#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>

#include <omp.h>

#include "galvae/kernels.hpp"
#include "galvae/rng.hpp"

using namespace galvae;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rng.gaussian();
  return m;
}

std::vector<Vector> random_rows(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<Vector> rows(n, Vector(d));
  for (auto& row : rows)
    for (auto& v : row) v = rng.gaussian();
  return rows;
}

double best_ms(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void report(const char* name, int reps, const std::function<void()>& serial,
            const std::function<void()>& parallel) {
  const double s = best_ms(reps, serial);
  const double p = best_ms(reps, parallel);
  std::printf("%-14s serial %9.3f ms  parallel %9.3f ms  speedup %5.2fx\n", name, s, p, s / p);
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 256;
  const int reps = argc > 2 ? std::atoi(argv[2]) : 5;
  std::printf("n = %zu, reps = %d, threads = %d\n", n, reps, omp_get_max_threads());

  Rng rng(42);
  const Matrix a = random_matrix(n, n, rng);
  const Matrix b = random_matrix(n, n, rng);
  const Matrix centered = random_matrix(4 * n, n, rng);
  const auto real = random_rows(n, 32, rng);
  const auto gen = random_rows(2 * n, 32, rng);

  volatile double sink = 0.0;
  report("mat_mul", reps, [&] { sink = sink + kernels::mat_mul_serial(a, b)(0, 0); },
         [&] { sink = sink + kernels::mat_mul_parallel(a, b)(0, 0); });
  report("mat_mul_nt", reps, [&] { sink = sink + kernels::mat_mul_nt_serial(a, b)(0, 0); },
         [&] { sink = sink + kernels::mat_mul_nt_parallel(a, b)(0, 0); });
  report("mat_mul_tn", reps, [&] { sink = sink + kernels::mat_mul_tn_serial(a, b)(0, 0); },
         [&] { sink = sink + kernels::mat_mul_tn_parallel(a, b)(0, 0); });
  report("covariance", reps, [&] { sink = sink + kernels::covariance_serial(centered)(0, 0); },
         [&] { sink = sink + kernels::covariance_parallel(centered)(0, 0); });
  report("mean_cosine", reps, [&] { sink = sink + kernels::mean_cosine_serial(real, gen)[0]; },
         [&] { sink = sink + kernels::mean_cosine_parallel(real, gen)[0]; });
  report("max_cosine", reps, [&] { sink = sink + kernels::max_cosine_serial(real, gen)[0]; },
         [&] { sink = sink + kernels::max_cosine_parallel(real, gen)[0]; });
  return 0;
}
