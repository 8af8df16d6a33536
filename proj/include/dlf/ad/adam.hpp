#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dlf::ad {

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int max_consecutive_skips = 10;
};

/// Raised when training gives up after too many non-finite gradients in a row.
class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, AdamConfig cfg = {});

  /// One bias-corrected Adam update. Returns false (and leaves params and
  /// moments untouched) when any gradient entry is non-finite.
  bool step(std::span<double> params, std::span<const double> grads);

  /// Counts a skipped step without gradients (e.g. the forward pass blew up).
  void skip();

  const AdamConfig& config() const { return cfg_; }
  std::size_t steps() const { return t_; }
  std::size_t skipped() const { return skipped_; }
  int consecutive_skips() const { return consecutive_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
  std::size_t skipped_ = 0;
  int consecutive_ = 0;
};

/// Tracks the best validation score. `best` moves on any strict decrease;
/// the patience counter only resets when the gain exceeds `tol`.
class EarlyStopping {
 public:
  EarlyStopping(int patience, double tol) : patience_(patience), tol_(tol) {}

  /// Returns true when `score` is a new best.
  bool update(double score);
  bool should_stop() const { return since_improvement_ >= patience_; }
  double best() const { return best_; }
  int since_improvement() const { return since_improvement_; }

 private:
  int patience_;
  double tol_;
  double best_ = std::numeric_limits<double>::infinity();
  double anchor_ = std::numeric_limits<double>::infinity();
  int since_improvement_ = 0;
};

}  // namespace dlf::ad
