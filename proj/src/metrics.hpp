#pragma once

#include <array>
#include <vector>

namespace gridvit {

// Three-class classification metrics. Precision and recall are
// macro-averaged; a class with an empty denominator contributes 0.
struct MetricSet {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::array<std::array<int, 3>, 3> confusion = {};  // [label][prediction]
  int total = 0;
};

MetricSet compute_metrics(const std::vector<int>& predictions,
                          const std::vector<int>& labels);

}  // namespace gridvit
