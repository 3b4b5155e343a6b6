#include "synthaug/classifier/model.hpp"

#include <cmath>

#include "synthaug/common/errors.hpp"

namespace synthaug::classifier {

namespace {

void init_uniform(Matrix& m, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = uniform(rng, -bound, bound);
  }
}

json matrix_to_json(const Matrix& m) {
  std::vector<double> data(m.data(), m.data() + m.size());
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw DataError("checkpoint matrix size mismatch");
  return Eigen::Map<const Matrix>(data.data(), rows, cols);
}

}  // namespace

json to_json(const AdamWConfig& c) {
  return {{"lr", c.lr}, {"weight_decay", c.weight_decay}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}};
}

Standardizer Standardizer::fit(const Matrix& features) {
  if (features.cols() == 0) throw DataError("cannot standardize an empty feature set");
  Standardizer s;
  s.mean = features.rowwise().mean();
  const Matrix centered = features.colwise() - s.mean;
  s.scale = (centered.array().square().rowwise().sum() / static_cast<double>(features.cols())).sqrt();
  for (Eigen::Index i = 0; i < s.scale.size(); ++i) {
    if (s.scale(i) < 1e-8) s.scale(i) = 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& features) const {
  return (features.colwise() - mean).array().colwise() / scale.array();
}

Matrix sigmoid(const Matrix& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

double bce_with_logits(const Matrix& z, const Matrix& y) {
  // max(z, 0) - z*y + log(1 + exp(-|z|))
  const auto a = z.array();
  const auto l = a.max(0.0) - a * y.array() + (1.0 + (-a.abs()).exp()).log();
  return l.mean();
}

Head::Head(int in_dim, int hidden, Rng& rng) : in_dim_(in_dim), hidden_(hidden) {
  if (in_dim < 1 || hidden < 0) throw ConfigError("invalid head dimensions");
  const int out_in = hidden > 0 ? hidden : in_dim;
  if (hidden > 0) {
    w1_.value = Matrix(hidden, in_dim);
    b1_.value = Matrix(hidden, 1);
    init_uniform(w1_.value, in_dim, rng);
    init_uniform(b1_.value, in_dim, rng);
  }
  w2_.value = Matrix(2, out_in);
  b2_.value = Matrix(2, 1);
  init_uniform(w2_.value, out_in, rng);
  init_uniform(b2_.value, out_in, rng);
  for (auto* p : params()) {
    p->m = Matrix::Zero(p->value.rows(), p->value.cols());
    p->v = Matrix::Zero(p->value.rows(), p->value.cols());
  }
}

std::vector<Head::Param*> Head::params() {
  if (hidden_ > 0) return {&w1_, &b1_, &w2_, &b2_};
  return {&w2_, &b2_};
}

Matrix Head::logits(const Matrix& x) const {
  if (x.rows() != in_dim_) throw DataError("feature dimension does not match the head");
  if (hidden_ == 0) return (w2_.value * x).colwise() + b2_.value.col(0);
  const Matrix a1 = ((w1_.value * x).colwise() + b1_.value.col(0)).cwiseMax(0.0);
  return (w2_.value * a1).colwise() + b2_.value.col(0);
}

double Head::loss(const Matrix& x, const Matrix& y) const { return bce_with_logits(logits(x), y); }

double Head::train_step(const Matrix& x, const Matrix& y, const AdamWConfig& opt) {
  const double n = static_cast<double>(y.size());
  Matrix a1;
  Matrix z1;
  Matrix z2;
  if (hidden_ > 0) {
    z1 = (w1_.value * x).colwise() + b1_.value.col(0);
    a1 = z1.cwiseMax(0.0);
    z2 = (w2_.value * a1).colwise() + b2_.value.col(0);
  } else {
    z2 = (w2_.value * x).colwise() + b2_.value.col(0);
  }
  const double loss = bce_with_logits(z2, y);
  const Matrix dz2 = (sigmoid(z2) - y) / n;

  std::vector<Matrix> grads;
  if (hidden_ > 0) {
    const Matrix dz1 = ((w2_.value.transpose() * dz2).array() * (z1.array() > 0.0).cast<double>()).matrix();
    grads.push_back(dz1 * x.transpose());
    grads.push_back(dz1.rowwise().sum());
    grads.push_back(dz2 * a1.transpose());
    grads.push_back(dz2.rowwise().sum());
  } else {
    grads.push_back(dz2 * x.transpose());
    grads.push_back(dz2.rowwise().sum());
  }

  ++step_;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step_));
  auto ps = params();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Param& p = *ps[i];
    const Matrix& g = grads[i];
    p.value *= (1.0 - opt.lr * opt.weight_decay);
    p.m = opt.beta1 * p.m + (1.0 - opt.beta1) * g;
    p.v = opt.beta2 * p.v + (1.0 - opt.beta2) * g.cwiseProduct(g);
    p.value.array() -= opt.lr * (p.m.array() / bc1) / ((p.v.array() / bc2).sqrt() + opt.eps);
  }
  return loss;
}

json Head::to_json() const {
  json j{{"in_dim", in_dim_}, {"hidden", hidden_}, {"w2", matrix_to_json(w2_.value)},
         {"b2", matrix_to_json(b2_.value)}};
  if (hidden_ > 0) {
    j["w1"] = matrix_to_json(w1_.value);
    j["b1"] = matrix_to_json(b1_.value);
  }
  return j;
}

Head Head::from_json(const json& j) {
  Head h;
  try {
    h.in_dim_ = j.at("in_dim").get<int>();
    h.hidden_ = j.at("hidden").get<int>();
    h.w2_.value = matrix_from_json(j.at("w2"));
    h.b2_.value = matrix_from_json(j.at("b2"));
    if (h.hidden_ > 0) {
      h.w1_.value = matrix_from_json(j.at("w1"));
      h.b1_.value = matrix_from_json(j.at("b1"));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint head: ") + e.what());
  }
  for (auto* p : h.params()) {
    p->m = Matrix::Zero(p->value.rows(), p->value.cols());
    p->v = Matrix::Zero(p->value.rows(), p->value.cols());
  }
  return h;
}

}  // namespace synthaug::classifier
