#include "synthaug/classifier/metrics.hpp"

#include "synthaug/common/errors.hpp"

namespace synthaug::classifier {

LabelVector threshold_predictions(const Probabilities& p, double threshold) {
  LabelVector out{0, 0};
  for (std::size_t k = 0; k < kNumClasses; ++k) out[k] = p[k] >= threshold ? 1 : 0;
  return out;
}

MicroCounts micro_counts(std::span<const LabelVector> truth, std::span<const LabelVector> predicted) {
  if (truth.size() != predicted.size()) throw DataError("truth and prediction counts differ");
  MicroCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      const int t = truth[i][k];
      const int p = predicted[i][k];
      if ((t != 0 && t != 1) || (p != 0 && p != 1)) throw DataError("labels must be 0 or 1");
      if (t && p) ++c.tp;
      else if (!t && p) ++c.fp;
      else if (t && !p) ++c.fn;
      else ++c.tn;
    }
  }
  return c;
}

Prf prf_from_counts(const MicroCounts& c) {
  Prf r;
  if (c.tp + c.fp > 0) r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (r.precision + r.recall > 0.0) r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

Prf micro_prf(std::span<const LabelVector> truth, std::span<const LabelVector> predicted) {
  return prf_from_counts(micro_counts(truth, predicted));
}

json to_json(const MicroCounts& c) { return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}}; }

}  // namespace synthaug::classifier
