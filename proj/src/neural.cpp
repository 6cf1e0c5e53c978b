#include "cdp/neural.hpp"

#include <cmath>
#include <random>
#include <string>

namespace cdp {

DenseNet::DenseNet(int input, int hidden, int output)
    : input_(input), hidden_(hidden), output_(output) {
  if (input < 1 || hidden < 1 || output < 1) {
    throw std::invalid_argument("network layer sizes must be positive");
  }
  theta_ = Vector::Zero(static_cast<Eigen::Index>(hidden) * input + hidden +
                        static_cast<Eigen::Index>(output) * hidden + output);
}

void DenseNet::init_uniform(std::uint64_t seed) {
  Rng rng(seed);
  auto fill = [&rng](double* p, Eigen::Index n, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index k = 0; k < n; ++k) p[k] = u(rng);
  };
  double* p = theta_.data();
  fill(p, static_cast<Eigen::Index>(hidden_) * input_ + hidden_, input_);
  p += static_cast<Eigen::Index>(hidden_) * input_ + hidden_;
  fill(p, static_cast<Eigen::Index>(output_) * hidden_ + output_, hidden_);
}

void DenseNet::set_parameters(const Vector& theta) {
  if (theta.size() != theta_.size()) {
    throw std::invalid_argument("parameter vector has " + std::to_string(theta.size()) +
                                " entries, network expects " +
                                std::to_string(theta_.size()));
  }
  theta_ = theta;
}

Eigen::Map<const Matrix> DenseNet::w1() const {
  return {theta_.data(), hidden_, input_};
}
Eigen::Map<const Vector> DenseNet::b1() const {
  return {theta_.data() + static_cast<Eigen::Index>(hidden_) * input_, hidden_};
}
Eigen::Map<const Matrix> DenseNet::w2() const {
  return {theta_.data() + static_cast<Eigen::Index>(hidden_) * (input_ + 1), output_, hidden_};
}
Eigen::Map<const Vector> DenseNet::b2() const {
  return {theta_.data() + static_cast<Eigen::Index>(hidden_) * (input_ + 1) +
              static_cast<Eigen::Index>(output_) * hidden_,
          output_};
}
Eigen::Map<Matrix> DenseNet::w1() { return {theta_.data(), hidden_, input_}; }
Eigen::Map<Vector> DenseNet::b1() {
  return {theta_.data() + static_cast<Eigen::Index>(hidden_) * input_, hidden_};
}
Eigen::Map<Matrix> DenseNet::w2() {
  return {theta_.data() + static_cast<Eigen::Index>(hidden_) * (input_ + 1), output_, hidden_};
}
Eigen::Map<Vector> DenseNet::b2() {
  return {theta_.data() + static_cast<Eigen::Index>(hidden_) * (input_ + 1) +
              static_cast<Eigen::Index>(output_) * hidden_,
          output_};
}

void DenseNet::check_input(Eigen::Index rows) const {
  if (rows != input_) {
    throw std::invalid_argument("network input has " + std::to_string(rows) +
                                " features, expected " + std::to_string(input_));
  }
}

Vector DenseNet::forward(std::span<const double> x) const {
  check_input(static_cast<Eigen::Index>(x.size()));
  const Eigen::Map<const Vector> in(x.data(), input_);
  const Vector h = (w1() * in + b1()).cwiseMax(0.0);
  return w2() * h + b2();
}

Matrix DenseNet::forward_batch(const Matrix& x, Cache* cache) const {
  check_input(x.rows());
  Matrix pre = w1() * x;
  pre.colwise() += b1();
  Matrix hidden = pre.cwiseMax(0.0);
  Matrix out = w2() * hidden;
  out.colwise() += b2();
  if (cache != nullptr) {
    cache->pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return out;
}

Vector DenseNet::backward_batch(const Matrix& x, const Cache& cache,
                                const Matrix& upstream) const {
  check_input(x.rows());
  if (upstream.rows() != output_ || upstream.cols() != x.cols()) {
    throw std::invalid_argument("upstream gradient shape does not match the batch");
  }
  DenseNet grad(input_, hidden_, output_);
  grad.w2().noalias() = upstream * cache.hidden.transpose();
  grad.b2() = upstream.rowwise().sum();
  const Matrix dh = (w2().transpose() * upstream).cwiseProduct(
      (cache.pre.array() > 0.0).cast<double>().matrix());
  grad.w1().noalias() = dh * x.transpose();
  grad.b1() = dh.rowwise().sum();
  if (!grad.theta_.allFinite()) throw NumericError("non-finite gradient");
  return std::move(grad.theta_);
}

void adam_step(Vector& theta, const Vector& grad, AdamState& state, const AdamConfig& config) {
  if (grad.size() != theta.size()) throw std::invalid_argument("gradient size mismatch");
  if (!grad.allFinite()) throw NumericError("non-finite gradient passed to Adam");
  if (state.m.size() != theta.size()) {
    state.m = Vector::Zero(theta.size());
    state.v = Vector::Zero(theta.size());
    state.step = 0;
  }
  ++state.step;
  state.m = config.beta1 * state.m + (1.0 - config.beta1) * grad;
  state.v = config.beta2 * state.v + (1.0 - config.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  theta.array() -= config.lr * (state.m.array() / c1) /
                   ((state.v.array() / c2).sqrt() + config.eps);
}

Vector softmax(const Vector& logits) {
  if (!logits.allFinite()) throw NumericError("non-finite logits");
  Vector p = (logits.array() - logits.maxCoeff()).exp().matrix();
  p /= p.sum();
  return p;
}

int sample_index(const Vector& probs, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  // Rounding left u above the last partial sum: take the last positive entry.
  for (Eigen::Index k = probs.size() - 1; k >= 0; --k) {
    if (probs[k] > 0.0) return static_cast<int>(k);
  }
  return 0;
}

int greedy_index(const Vector& probs) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < probs.size(); ++k) {
    if (probs[k] > probs[best]) best = k;
  }
  return static_cast<int>(best);
}

double entropy(const Vector& probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double max_relative_error(const std::function<double(const Vector&)>& f, const Vector& theta,
                          const Vector& analytic, double step, double floor) {
  if (analytic.size() != theta.size()) throw std::invalid_argument("gradient size mismatch");
  Vector probe = theta;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    probe[k] = theta[k] + step;
    const double up = f(probe);
    probe[k] = theta[k] - step;
    const double down = f(probe);
    probe[k] = theta[k];
    const double numeric = (up - down) / (2.0 * step);
    const double scale = std::max({std::abs(numeric), std::abs(analytic[k]), floor});
    worst = std::max(worst, std::abs(numeric - analytic[k]) / scale);
  }
  return worst;
}

nlohmann::json net_to_json(const DenseNet& net) {
  const Vector& theta = net.parameters();
  return {{"input", net.input_size()},
          {"hidden", net.hidden_size()},
          {"output", net.output_size()},
          {"parameters", std::vector<double>(theta.data(), theta.data() + theta.size())}};
}

DenseNet net_from_json(const nlohmann::json& j) {
  DenseNet net(j.at("input").get<int>(), j.at("hidden").get<int>(), j.at("output").get<int>());
  const auto values = j.at("parameters").get<std::vector<double>>();
  net.set_parameters(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
  return net;
}

}  // namespace cdp
