#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "synthaug/common/json_io.hpp"
#include "synthaug/common/types.hpp"

namespace synthaug::classifier {

inline constexpr double kDecisionThreshold = 0.5;

using Probabilities = std::array<double, kNumClasses>;

// TP/FP/FN/TN pooled over both label decisions of every item.
struct MicroCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  MicroCounts& operator+=(const MicroCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const MicroCounts&, const MicroCounts&) = default;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// A label is predicted positive when its probability is >= threshold.
LabelVector threshold_predictions(const Probabilities& p, double threshold = kDecisionThreshold);

MicroCounts micro_counts(std::span<const LabelVector> truth, std::span<const LabelVector> predicted);

// Precision is 0 when nothing is predicted positive, recall is 0 when there
// are no positives, and F1 is 0 when both are 0.
Prf prf_from_counts(const MicroCounts& c);

Prf micro_prf(std::span<const LabelVector> truth, std::span<const LabelVector> predicted);

json to_json(const MicroCounts& c);

}  // namespace synthaug::classifier
