// Library walk-through on the synthetic labor data: estimate, identified
// set at the estimate, baseline projection interval, delta-method interval.
//
//   api_example samples/data/labor_growth.csv

#include <iostream>

#include "svarproj/calibrate.hpp"
#include "svarproj/io.hpp"

using namespace svarproj;

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: api_example data.csv\n";
    return 2;
  }
  try {
    auto data = read_csv_file(argv[1]);
    auto rf = estimate(data, VarSpec{2, 6});
    auto rset = bh_labor_market_preset(1.0);
    std::cout << "T = " << rf.T << ", d = " << rf.d() << ", stability margin = " << stability_margin(rf.A) << "\n";

    // employment response to a demand shock, four periods out, cumulated
    Target t{4, 1, 0, true};
    auto plug = bounds(rf.A, rf.Sigma, rset, t);
    std::cout << "identified set at the estimate: [" << plug.lower << ", " << plug.upper << "]\n";

    const double c = chi2_quantile(static_cast<double>(rf.d()), 0.68);
    ProjectionProblem problem(rf, rset);
    auto iv = problem.interval(t, c);
    std::cout << "projection interval at c = " << c << ": [" << iv.lower << ", " << iv.upper << "] ("
              << to_string(iv.status) << ")\n";

    auto dm = dm_interval(rf, rset, t, 1.0, 0.0);
    std::cout << "delta-method interval, r = 1: [" << dm.lower << ", " << dm.upper << "]\n";
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
