#pragma once

#include <vector>

namespace loclab {

// A point in [0,1]^d with label in {-1, +1}.
struct LabeledSample {
  std::vector<double> point;
  int label = 1;
};

using Dataset = std::vector<LabeledSample>;

}  // namespace loclab
