#include "dlf/ad/adam.hpp"

#include <cmath>

namespace dlf::ad {

Adam::Adam(std::size_t n, AdamConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

bool Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw std::invalid_argument("adam: shape mismatch");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) {
      skip();
      return false;
    }
  }
  consecutive_ = 0;
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
  }
  return true;
}

void Adam::skip() {
  ++skipped_;
  if (++consecutive_ >= cfg_.max_consecutive_skips) {
    throw TrainingAborted("adam: " + std::to_string(consecutive_) +
                          " consecutive non-finite gradient steps");
  }
}

bool EarlyStopping::update(double score) {
  if (!std::isfinite(score)) {
    ++since_improvement_;
    return false;
  }
  const bool is_best = score < best_;
  if (is_best) best_ = score;
  if (score < anchor_ - tol_) {
    anchor_ = score;
    since_improvement_ = 0;
  } else {
    ++since_improvement_;
  }
  return is_best;
}

}  // namespace dlf::ad
