#include "dlf/ad/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace dlf::ad {

namespace {

double affine(Tape*, std::span<const double> w, std::span<const double> x, double b) {
  double acc = b;
  for (std::size_t k = 0; k < w.size(); ++k) acc += w[k] * x[k];
  return acc;
}

Value affine(Tape* t, std::span<const Value> w, std::span<const Value> x, const Value& b) {
  return t->affine(w, x, b);
}

template <class T>
std::vector<T> prepare(Tape* t, std::vector<T> x) {
  if constexpr (std::is_same_v<T, Value>) {
    return t->gather(x);
  } else {
    (void)t;
    return x;
  }
}

double act_tanh(double x) { return std::tanh(x); }
Value act_tanh(const Value& x) { return tanh(x); }

template <class T>
std::vector<T> mlp_forward(Tape* t, const std::vector<int>& widths, std::span<const T> p,
                           std::span<const T> x) {
  if (static_cast<int>(x.size()) != widths.front()) {
    throw std::invalid_argument("mlp: input width mismatch");
  }
  std::vector<T> cur(x.begin(), x.end());
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l];
    const int out = widths[l + 1];
    cur = prepare(t, std::move(cur));
    std::vector<T> next(out);
    const std::size_t bias_off = off + static_cast<std::size_t>(in) * out;
    const bool hidden = l + 2 < widths.size();
    for (int j = 0; j < out; ++j) {
      T z = affine(t, p.subspan(off + static_cast<std::size_t>(j) * in, in), std::span<const T>(cur),
                   p[bias_off + j]);
      next[j] = hidden ? act_tanh(z) : z;
    }
    off = bias_off + out;
    cur = std::move(next);
  }
  return cur;
}

template <class T>
T lstm_forward(Tape* t, int hidden, int layers, std::size_t head_off, std::span<const T> p,
               std::span<const T> window) {
  if (window.empty()) throw std::invalid_argument("lstm: empty window");
  const auto n = window.size();
  const int h = hidden;
  std::vector<std::vector<T>> hs(layers, std::vector<T>(h, T(0.0)));
  std::vector<std::vector<T>> cs(layers, std::vector<T>(h, T(0.0)));
  for (std::size_t step = 0; step < n; ++step) {
    std::vector<T> input{window[n - 1 - step]};
    std::size_t off = 0;
    for (int l = 0; l < layers; ++l) {
      const int in = l == 0 ? 1 : h;
      const int cols = in + h;
      std::vector<T> xh(input);
      xh.insert(xh.end(), hs[l].begin(), hs[l].end());
      xh = prepare(t, std::move(xh));
      const std::size_t bias_off = off + static_cast<std::size_t>(4 * h) * cols;
      auto gate = [&](int row) {
        return affine(t, p.subspan(off + static_cast<std::size_t>(row) * cols, cols), std::span<const T>(xh),
                      p[bias_off + row]);
      };
      for (int j = 0; j < h; ++j) {
        T ig = sigmoid(gate(j));
        T fg = sigmoid(gate(h + j));
        T gg = act_tanh(gate(2 * h + j));
        T og = sigmoid(gate(3 * h + j));
        cs[l][j] = fg * cs[l][j] + ig * gg;
        hs[l][j] = og * act_tanh(cs[l][j]);
      }
      off = bias_off + 4 * h;
      input = hs[l];
    }
  }
  const T y1 = window[0];
  const T y2 = n >= 2 ? window[1] : y1;
  const T y3 = n >= 3 ? window[2] : y2;
  std::vector<T> feats = hs[layers - 1];
  feats.push_back(y1);
  feats.push_back(y1 - y2);
  feats.push_back(y1 - 2.0 * y2 + y3);
  feats = prepare(t, std::move(feats));
  // Head layout: w_h (h), bias, w_skip (3). Weights for features are w_h then w_skip.
  std::vector<T> w(p.begin() + head_off, p.begin() + head_off + h);
  w.push_back(p[head_off + h + 1]);
  w.push_back(p[head_off + h + 2]);
  w.push_back(p[head_off + h + 3]);
  if constexpr (std::is_same_v<T, Value>) {
    w = t->gather(w);
  }
  return affine(t, std::span<const T>(w), std::span<const T>(feats), p[head_off + h]);
}

}  // namespace

Mlp::Mlp(std::vector<int> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw std::invalid_argument("mlp: need at least input and output widths");
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    if (widths_[l] <= 0 || widths_[l + 1] <= 0) throw std::invalid_argument("mlp: non-positive width");
    n += static_cast<std::size_t>(widths_[l]) * widths_[l + 1] + widths_[l + 1];
  }
  params_.assign(n, 0.0);
}

void Mlp::init_glorot(std::mt19937_64& rng) {
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const int in = widths_[l];
    const int out = widths_[l + 1];
    const double a = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> u(-a, a);
    for (int k = 0; k < in * out; ++k) params_[off++] = u(rng);
    for (int k = 0; k < out; ++k) params_[off++] = 0.0;
  }
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  return mlp_forward<double>(nullptr, widths_, params_, x);
}

std::vector<double> Mlp::forward(std::span<const double> params, std::span<const double> x) const {
  if (params.size() != params_.size()) throw std::invalid_argument("mlp: parameter count mismatch");
  return mlp_forward<double>(nullptr, widths_, params, x);
}

std::vector<Value> Mlp::forward(Tape& tape, std::span<const Value> params, std::span<const Value> x) const {
  if (params.size() != params_.size()) throw std::invalid_argument("mlp: parameter count mismatch");
  return mlp_forward<Value>(&tape, widths_, params, x);
}

Lstm::Lstm(int hidden, int layers) : hidden_(hidden), layers_(layers) {
  if (hidden <= 0 || layers <= 0) throw std::invalid_argument("lstm: non-positive size");
  params_.assign(head_offset() + hidden_ + 4, 0.0);
}

std::size_t Lstm::layer_offset(int layer) const {
  std::size_t off = 0;
  for (int l = 0; l < layer; ++l) {
    off += static_cast<std::size_t>(4 * hidden_) * (layer_input(l) + hidden_) + 4 * hidden_;
  }
  return off;
}

std::size_t Lstm::head_offset() const { return layer_offset(layers_); }

void Lstm::init(std::mt19937_64& rng) {
  std::fill(params_.begin(), params_.end(), 0.0);
  for (int l = 0; l < layers_; ++l) {
    const int cols = layer_input(l) + hidden_;
    const double a = std::sqrt(6.0 / (cols + hidden_));
    std::uniform_real_distribution<double> u(-a, a);
    std::size_t off = layer_offset(l);
    for (int k = 0; k < 4 * hidden_ * cols; ++k) params_[off + k] = u(rng);
    const std::size_t bias = off + static_cast<std::size_t>(4 * hidden_) * cols;
    for (int j = 0; j < hidden_; ++j) params_[bias + hidden_ + j] = 1.0;
  }
  params_[head_offset() + hidden_ + 1] = 1.0;
}

double Lstm::forward(std::span<const double> window) const {
  return lstm_forward<double>(nullptr, hidden_, layers_, head_offset(), params_, window);
}

double Lstm::forward(std::span<const double> params, std::span<const double> window) const {
  if (params.size() != params_.size()) throw std::invalid_argument("lstm: parameter count mismatch");
  return lstm_forward<double>(nullptr, hidden_, layers_, head_offset(), params, window);
}

Value Lstm::forward(Tape& tape, std::span<const Value> params, std::span<const Value> window) const {
  if (params.size() != params_.size()) throw std::invalid_argument("lstm: parameter count mismatch");
  return lstm_forward<Value>(&tape, hidden_, layers_, head_offset(), params, window);
}

}  // namespace dlf::ad
