#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dlf/ad/value.hpp"

namespace dlf::ad {

/// Fully connected tanh network with a linear output layer.
/// Parameters are flat, per layer: W (out x in, row-major) then b (out).
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> widths);

  const std::vector<int>& widths() const { return widths_; }
  int input_size() const { return widths_.front(); }
  int output_size() const { return widths_.back(); }
  std::size_t num_params() const { return params_.size(); }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  void init_glorot(std::mt19937_64& rng);

  std::vector<double> forward(std::span<const double> x) const;
  /// Same network evaluated with an external parameter vector.
  std::vector<double> forward(std::span<const double> params, std::span<const double> x) const;
  /// Forward pass recorded on `tape` with `params` supplied as tape values
  /// (normally leaves created from params()).
  std::vector<Value> forward(Tape& tape, std::span<const Value> params,
                             std::span<const Value> x) const;

 private:
  std::vector<int> widths_;
  std::vector<double> params_;
};

/// Stacked LSTM mapping a lag window to a scalar one-step prediction.
///
/// The window is given most recent first, [y_{k-1}, y_{k-2}, ...], and is fed
/// to the recurrence oldest first. Gate order is (i, f, g, o); each layer has
/// one combined weight W (4h x (in + h)) acting on [x; h] plus a bias (4h).
/// The head reads the last hidden state of the top layer and three linear
/// skip features of the window, [y1, y1 - y2, y1 - 2 y2 + y3].
class Lstm {
 public:
  Lstm() = default;
  Lstm(int hidden, int layers);

  int hidden() const { return hidden_; }
  int layers() const { return layers_; }
  std::size_t num_params() const { return params_.size(); }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  /// Glorot gates, forget bias +1, zero hidden head, skip weights [1, 0, 0]
  /// (persistence forecast at initialization).
  void init(std::mt19937_64& rng);

  double forward(std::span<const double> window) const;
  double forward(std::span<const double> params, std::span<const double> window) const;
  Value forward(Tape& tape, std::span<const Value> params, std::span<const Value> window) const;

  /// Offset of the head block: hidden weights (h), bias, skip weights (3).
  std::size_t head_offset() const;

 private:
  std::size_t layer_offset(int layer) const;
  int layer_input(int layer) const { return layer == 0 ? 1 : hidden_; }

  int hidden_ = 0;
  int layers_ = 0;
  std::vector<double> params_;
};

}  // namespace dlf::ad
