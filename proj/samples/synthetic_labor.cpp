// Writes a synthetic wage/employment growth series from a VAR(6) whose
// structural impact matrix satisfies the labor-market restriction preset.
//
//   synthetic_labor [rows] [seed] > labor_growth.csv

#include <cstdlib>
#include <iostream>

#include "svarproj/io.hpp"
#include "svarproj/random.hpp"

using namespace svarproj;

int main(int argc, char** argv) {
  const Eigen::Index rows = argc > 1 ? std::atol(argv[1]) : 186;
  const std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 2024;
  const int n = 2, p = 6, burn = 300;

  Matrix A = Matrix::Zero(n, n * p);
  Matrix A1(2, 2);
  A1 << 0.20, 0.05, 0.05, 0.15;
  for (int m = 0; m < p; ++m) A.middleCols(m * n, n) = A1 * std::pow(0.4, m);

  // demand: wage +, employment +; supply: wage -, employment +
  Matrix B(2, 2);
  B << 1.0, -0.5, 0.6, 0.5;

  Rng rng = make_rng(seed, {});
  Matrix y = Matrix::Zero(rows + burn, n);
  for (Eigen::Index t = p; t < y.rows(); ++t) {
    Vector yt = B * standard_normal_vector(rng, n);
    for (int m = 1; m <= p; ++m) yt += A.middleCols((m - 1) * n, n) * y.row(t - m).transpose();
    y.row(t) = yt.transpose();
  }
  TimeSeriesData data;
  data.values = y.bottomRows(rows);
  data.names = {"wage_growth", "employment_growth"};
  write_csv(std::cout, data);
  return 0;
}
