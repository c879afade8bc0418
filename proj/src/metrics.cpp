#include "metrics.hpp"

#include <string>

#include "error.hpp"

namespace gridvit {

MetricSet compute_metrics(const std::vector<int>& predictions,
                          const std::vector<int>& labels) {
  if (predictions.size() != labels.size() || predictions.empty()) {
    fail(ErrorCode::validation,
         "compute_metrics needs equally sized, non-empty sequences (" +
             std::to_string(predictions.size()) + " predictions, " +
             std::to_string(labels.size()) + " labels)");
  }
  MetricSet m;
  m.total = static_cast<int>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int lbl = labels[i], pred = predictions[i];
    if (lbl < 0 || lbl > 2 || pred < 0 || pred > 2) {
      fail(ErrorCode::validation, "class values must lie in {0,1,2}");
    }
    m.confusion[static_cast<std::size_t>(lbl)][static_cast<std::size_t>(pred)] += 1;
  }

  int correct = 0;
  for (int c = 0; c < 3; ++c)
    correct += m.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
  m.accuracy = static_cast<double>(correct) / m.total;

  double precision_sum = 0.0, recall_sum = 0.0;
  for (int c = 0; c < 3; ++c) {
    int predicted = 0, actual = 0;
    for (int o = 0; o < 3; ++o) {
      predicted += m.confusion[static_cast<std::size_t>(o)][static_cast<std::size_t>(c)];
      actual += m.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(o)];
    }
    const int hit = m.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
    precision_sum += predicted > 0 ? static_cast<double>(hit) / predicted : 0.0;
    recall_sum += actual > 0 ? static_cast<double>(hit) / actual : 0.0;
  }
  m.precision = precision_sum / 3.0;
  m.recall = recall_sum / 3.0;
  return m;
}

}  // namespace gridvit
