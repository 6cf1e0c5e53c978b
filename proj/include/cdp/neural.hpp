#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>

#include <Eigen/Dense>
#include <json.hpp>

#include "cdp/rng.hpp"

namespace cdp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// input -> hidden (ReLU) -> output (linear). All parameters live in one flat
// vector: W1 (hidden x input, column-major), b1, W2 (output x hidden), b2.
class DenseNet {
 public:
  struct Cache {
    Matrix pre;     // hidden x batch, before ReLU
    Matrix hidden;  // hidden x batch
  };

  DenseNet() = default;
  DenseNet(int input, int hidden, int output);

  int input_size() const { return input_; }
  int hidden_size() const { return hidden_; }
  int output_size() const { return output_; }
  Eigen::Index parameter_count() const { return theta_.size(); }

  // Uniform in +-1/sqrt(fan_in) for every weight and bias of a layer.
  void init_uniform(std::uint64_t seed);

  Vector& parameters() { return theta_; }
  const Vector& parameters() const { return theta_; }
  void set_parameters(const Vector& theta);

  Eigen::Map<const Matrix> w1() const;
  Eigen::Map<const Vector> b1() const;
  Eigen::Map<const Matrix> w2() const;
  Eigen::Map<const Vector> b2() const;
  Eigen::Map<Matrix> w1();
  Eigen::Map<Vector> b1();
  Eigen::Map<Matrix> w2();
  Eigen::Map<Vector> b2();

  Vector forward(std::span<const double> x) const;
  // Columns of `x` are samples; returns output x batch.
  Matrix forward_batch(const Matrix& x, Cache* cache = nullptr) const;
  // Gradient of sum_j <upstream[:, j], out[:, j]> with respect to the flat
  // parameters, given the cache of the matching forward_batch call.
  Vector backward_batch(const Matrix& x, const Cache& cache, const Matrix& upstream) const;

 private:
  void check_input(Eigen::Index rows) const;

  int input_ = 0;
  int hidden_ = 0;
  int output_ = 0;
  Vector theta_;
};

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Vector m;
  Vector v;
  std::int64_t step = 0;
};

// One bias-corrected Adam descent step on `theta` along `grad`.
void adam_step(Vector& theta, const Vector& grad, AdamState& state, const AdamConfig& config);

// Max-subtracted softmax; throws NumericError on non-finite logits.
Vector softmax(const Vector& logits);
// Inverse CDF on a single uniform draw.
int sample_index(const Vector& probs, Rng& rng);
// First index of the largest probability.
int greedy_index(const Vector& probs);
double entropy(const Vector& probs);

// Largest relative difference between `analytic` and central differences of
// `f` around `theta`. The denominator is floored at `floor` to ignore
// entries that are both essentially zero.
double max_relative_error(const std::function<double(const Vector&)>& f, const Vector& theta,
                          const Vector& analytic, double step = 1e-6, double floor = 1e-7);

nlohmann::json net_to_json(const DenseNet& net);
DenseNet net_from_json(const nlohmann::json& j);

}  // namespace cdp
