#pragma once

// Trainable two-logit head over frozen features, with independent per-label
// binary cross-entropy and a decoupled-weight-decay Adam optimizer.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "synthaug/common/json_io.hpp"
#include "synthaug/common/random.hpp"

namespace synthaug::classifier {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct AdamWConfig {
  double lr = 3e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

json to_json(const AdamWConfig& c);

// Per-feature z-scoring fitted on training features.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& features);  // features: D x N
  Matrix apply(const Matrix& features) const;
};

// hidden > 0: in -> hidden (ReLU) -> 2. hidden == 0: in -> 2 (linear).
class Head {
 public:
  Head() = default;
  Head(int in_dim, int hidden, Rng& rng);

  int in_dim() const { return in_dim_; }
  int hidden() const { return hidden_; }

  // x: D x B. Returns 2 x B logits.
  Matrix logits(const Matrix& x) const;

  // One optimizer step on a minibatch; returns the mean BCE over the batch's
  // 2 x B label decisions before the step. y: 2 x B in {0, 1}.
  double train_step(const Matrix& x, const Matrix& y, const AdamWConfig& opt);

  // Mean BCE without updating.
  double loss(const Matrix& x, const Matrix& y) const;

  json to_json() const;
  static Head from_json(const json& j);

 private:
  struct Param {
    Matrix value;
    Matrix m;
    Matrix v;
  };
  std::vector<Param*> params();

  int in_dim_ = 0;
  int hidden_ = 0;
  // Layer 1 unused when hidden_ == 0.
  Param w1_, b1_, w2_, b2_;
  std::int64_t step_ = 0;
};

Matrix sigmoid(const Matrix& z);
// Numerically stable mean of BCE-with-logits over all entries.
double bce_with_logits(const Matrix& z, const Matrix& y);

}  // namespace synthaug::classifier
