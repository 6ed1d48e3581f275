#pragma once

#include <limits>
#include <string>
#include <vector>

namespace semilab {

struct TailPoint {
  double t = 0.0;
  double tail = 0.0;
  double bound = 0.0;
};

// fitted_constant: least c with tail <= c * envelope(t) on the grid.
// theory_constant: the proven constant when one is available, else NaN; bound uses it when finite.
struct TailCurve {
  std::string label;
  std::string envelope;
  double fitted_constant = 0.0;
  double theory_constant = std::numeric_limits<double>::quiet_NaN();
  std::vector<TailPoint> points;
};

}  // namespace semilab
