#include "dlf/hybrid/hybrid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dlf/ad/adam.hpp"
#include "dlf/ad/checkpoint.hpp"

namespace dlf::hybrid {

using ad::Tape;
using ad::Value;

namespace {

template <class T>
T row_dot(const ssm::Mat<T>& A, std::size_t row, const ssm::Mat<T>& m) {
  T acc = A(row, 0) * m[0];
  for (std::size_t j = 1; j < m.rows(); ++j) acc = acc + A(row, j) * m[j];
  return acc;
}

void check_window(const HybridSSM& model, std::span<const double> window) {
  if (window.size() != static_cast<std::size_t>(model.lag)) {
    throw std::invalid_argument("hybrid: window length must equal the lag");
  }
}

/// Scaled window [y_{k-1}, ..., y_{k-lag}] taken from ys.
std::vector<double> scaled_window(const HybridSSM& model, std::span<const double> ys, std::size_t k) {
  std::vector<double> w(model.lag);
  for (int i = 0; i < model.lag; ++i) w[i] = (ys[k - 1 - i] - model.shift) / model.scale;
  return w;
}

bool uses_lstm(const HybridSSM& model, std::size_t k) {
  return !model.linear_shim && k >= static_cast<std::size_t>(model.lag);
}

/// Least-squares fit of the head bias and linear skip weights to the
/// one-step targets, hidden-state weights left as initialized (zero).
void warm_start(HybridSSM& model, std::span<const double> ys) {
  const std::size_t lag = model.lag;
  if (ys.size() <= lag + 3) return;
  const std::size_t n = ys.size() - lag;
  Eigen::MatrixXd X(n, 4);
  Eigen::VectorXd y(n);
  for (std::size_t k = lag; k < ys.size(); ++k) {
    const auto w = scaled_window(model, ys, k);
    const double y1 = w[0];
    const double y2 = lag >= 2 ? w[1] : y1;
    const double y3 = lag >= 3 ? w[2] : y2;
    X.row(k - lag) << 1.0, y1, y1 - y2, y1 - 2.0 * y2 + y3;
    y[k - lag] = (ys[k] - model.shift) / model.scale;
  }
  const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
  if (!beta.allFinite()) return;
  const std::size_t head = model.lstm.head_offset() + model.lstm.hidden();
  auto& p = model.lstm.params();
  for (int i = 0; i < 4; ++i) p[head + i] = beta[i];
}

}  // namespace

double HybridSSM::predict_first(std::span<const double> window) const {
  std::vector<double> w(window.begin(), window.end());
  for (double& v : w) v = (v - shift) / scale;
  return shift + scale * lstm.forward(w);
}

std::vector<double> HybridSSM::flat_params() const {
  std::vector<double> p(params.log.begin(), params.log.end());
  p.insert(p.end(), lstm.params().begin(), lstm.params().end());
  return p;
}

void HybridSSM::set_flat_params(std::span<const double> p) {
  if (p.size() != 4 + lstm.num_params()) throw std::invalid_argument("hybrid: parameter count mismatch");
  std::copy(p.begin(), p.begin() + 4, params.log.begin());
  std::copy(p.begin() + 4, p.end(), lstm.params().begin());
}

ssm::FilterStep<double> hybrid_kf_step(const HybridSSM& model, const ssm::DiscreteSSM& lin,
                                       const ssm::GaussianBelief& b, std::span<const double> window, double y) {
  check_window(model, window);
  const double first = model.linear_shim ? row_dot(lin.A, 0, b.m) : model.predict_first(window);
  return hybrid_kf_step(lin, b, first, y);
}

ssm::FilterResult<double> hybrid_filter(const HybridSSM& model, std::span<const double> ys, std::size_t start) {
  if (start >= ys.size()) throw std::invalid_argument("hybrid_filter: empty sequence");
  const auto lin = model.linear(ys[start]);
  ssm::FilterResult<double> out;
  ssm::GaussianBelief b{lin.m0, lin.P0};
  for (std::size_t k = start; k < ys.size(); ++k) {
    const double first = uses_lstm(model, k) ? model.shift + model.scale * model.lstm.forward(scaled_window(model, ys, k))
                                             : row_dot(lin.A, 0, b.m);
    auto st = hybrid_kf_step(lin, b, first, ys[k]);
    out.nll += st.nll_increment;
    b = st.posterior;
    out.beliefs.push_back(b);
  }
  return out;
}

double hybrid_nll(const HybridSSM& model, std::span<const double> ys, std::size_t from) {
  if (from >= ys.size()) throw std::invalid_argument("hybrid_nll: nothing to score");
  const auto lin = model.linear(ys[0]);
  ssm::GaussianBelief b{lin.m0, lin.P0};
  double total = 0.0;
  for (std::size_t k = 0; k < ys.size(); ++k) {
    const double first = uses_lstm(model, k) ? model.shift + model.scale * model.lstm.forward(scaled_window(model, ys, k))
                                             : row_dot(lin.A, 0, b.m);
    auto st = hybrid_kf_step(lin, b, first, ys[k]);
    if (k >= from) total += st.nll_increment;
    b = st.posterior;
  }
  return total;
}

Value record_nll(Tape& tape, const HybridSSM& shape, std::span<const Value> p, std::span<const double> ys,
                 std::size_t begin, std::size_t end, ssm::GaussianBelief& belief) {
  if (p.size() != 4 + shape.lstm.num_params()) throw std::invalid_argument("record_nll: parameter count mismatch");
  if (begin >= end || end > ys.size()) throw std::invalid_argument("record_nll: bad range");
  const std::array<Value, 4> theta{p[0], p[1], p[2], p[3]};
  const auto lin = kernels::build<Value>(shape.kind, theta, shape.dt, ys[0]);
  const auto lstm_p = p.subspan(4);
  ssm::Belief<Value> b = begin == 0 ? ssm::Belief<Value>{lin.m0, lin.P0}
                                    : ssm::Belief<Value>{ssm::lift(belief.m), ssm::lift(belief.P)};
  std::vector<Value> terms;
  terms.reserve(end - begin);
  std::vector<Value> window(shape.lag);
  for (std::size_t k = begin; k < end; ++k) {
    Value first;
    if (uses_lstm(shape, k)) {
      const auto w = scaled_window(shape, ys, k);
      std::copy(w.begin(), w.end(), window.begin());
      first = shape.shift + shape.scale * shape.lstm.forward(tape, lstm_p, window);
    } else {
      first = row_dot(lin.A, 0, b.m);
    }
    auto st = hybrid_kf_step(lin, b, first, ys[k]);
    terms.push_back(st.nll_increment);
    b = st.posterior;
  }
  belief = {ssm::value_of(b.m), ssm::value_of(b.P)};
  return tape.sum(terms);
}

HybridFitReport fit_hybrid(kernels::KernelKind kind, std::span<const double> ys, std::span<const double> ys_val,
                           double dt, const HybridFitConfig& cfg) {
  if (cfg.lag < 1) throw std::invalid_argument("fit_hybrid: lag must be positive");
  if (ys.size() <= static_cast<std::size_t>(cfg.lag)) throw std::invalid_argument("fit_hybrid: sequence too short");
  if (cfg.chunk == 0) throw std::invalid_argument("fit_hybrid: chunk must be positive");
  const auto tr = cfg.train_window > 0 && cfg.train_window < ys.size() ? ys.last(cfg.train_window) : ys;

  HybridSSM model;
  model.kind = kind;
  model.dt = dt;
  model.lag = cfg.lag;
  model.params = cfg.init ? *cfg.init : kernels::initial_params(tr, dt);
  if (cfg.standardize) {
    double mean = 0.0;
    for (double y : tr) mean += y;
    mean /= static_cast<double>(tr.size());
    double var = 0.0;
    for (double y : tr) var += (y - mean) * (y - mean);
    var /= static_cast<double>(tr.size());
    model.shift = mean;
    model.scale = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  model.lstm = ad::Lstm(cfg.hidden, cfg.layers);
  std::mt19937_64 rng(cfg.seed);
  model.lstm.init(rng);
  if (cfg.warm_start_head) warm_start(model, tr);

  std::vector<double> joined;
  if (!ys_val.empty()) {
    joined.assign(tr.begin(), tr.end());
    joined.insert(joined.end(), ys_val.begin(), ys_val.end());
  }
  auto score = [&](const HybridSSM& m) {
    try {
      return ys_val.empty() ? hybrid_nll(m, tr) : hybrid_nll(m, joined, tr.size());
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  HybridFitReport rep;
  rep.model = model;
  rep.best_score = score(model);
  if (!std::isfinite(rep.best_score)) throw std::runtime_error("fit_hybrid: non-finite NLL at initialization");

  std::vector<double> p = model.flat_params();
  std::vector<double> g(p.size());
  ad::Adam opt(p.size(), ad::AdamConfig{.lr = cfg.lr});
  ad::EarlyStopping stop(cfg.patience, cfg.tol);
  stop.update(rep.best_score);
  Tape tape;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    std::fill(g.begin(), g.end(), 0.0);
    bool ok = true;
    try {
      ssm::GaussianBelief belief;
      for (std::size_t b = 0; b < tr.size(); b += cfg.chunk) {
        tape.clear();
        const auto pv = tape.variables(p);
        const Value L = record_nll(tape, model, pv, tr, b, std::min(tr.size(), b + cfg.chunk), belief);
        const auto adj = tape.backward(L);
        for (std::size_t i = 0; i < p.size(); ++i) g[i] += adj[pv[i].id()];
      }
    } catch (const ad::NonFiniteError&) {
      ok = false;
    } catch (const ssm::SingularInnovation&) {
      ok = false;
    }
    if (ok) {
      opt.step(p, g);
    } else {
      opt.skip();
    }
    model.set_flat_params(p);
    rep.iters = it;
    const double s = score(model);
    if (stop.update(s)) {
      rep.model = model;
      rep.best_score = s;
      rep.best_iter = it;
    }
    if (stop.should_stop()) break;
  }
  rep.skipped_steps = opt.skipped();
  return rep;
}

void hybrid_forecast_step(const HybridSSM& model, const ssm::DiscreteSSM& lin, const Eigen::MatrixXd& noise_factor,
                          std::vector<double>& state, std::vector<double>& window, std::mt19937_64& rng) {
  const std::size_t d = lin.dim();
  if (state.size() != d) throw std::invalid_argument("hybrid_forecast_step: state dimension mismatch");
  check_window(model, window);
  const auto x = ssm::Mat<double>::column(state);
  std::vector<double> next(d);
  next[0] = model.linear_shim ? row_dot(lin.A, 0, x) : model.predict_first(window);
  for (std::size_t i = 1; i < d; ++i) next[i] = row_dot(lin.A, i, x);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(noise_factor.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  const Eigen::VectorXd q = noise_factor * z;
  for (std::size_t i = 0; i < d; ++i) next[i] += q[static_cast<Eigen::Index>(i)];
  std::rotate(window.rbegin(), window.rbegin() + 1, window.rend());
  window[0] = next[0];
  state = std::move(next);
}

void save_hybrid(const std::filesystem::path& dir, const HybridSSM& model) {
  std::filesystem::create_directories(dir);
  kernels::save_kernel(dir / "kernel.txt", model.kernel());
  std::vector<ad::Record> recs;
  recs.push_back({"lstm_shape",
                  {3},
                  {static_cast<double>(model.lstm.hidden()), static_cast<double>(model.lstm.layers()),
                   static_cast<double>(model.lag)}});
  recs.push_back({"scaling", {2}, {model.shift, model.scale}});
  recs.push_back({"lstm", {model.lstm.num_params()}, model.lstm.params()});
  ad::write_checkpoint(dir / "lstm.ckpt", recs);
}

HybridSSM load_hybrid(const std::filesystem::path& dir) {
  HybridSSM model;
  const auto km = kernels::load_kernel(dir / "kernel.txt");
  model.kind = km.kind;
  model.params = km.params;
  model.dt = km.dt;
  const auto recs = ad::read_checkpoint(dir / "lstm.ckpt");
  const auto& shape = ad::find_record(recs, "lstm_shape").values;
  if (shape.size() != 3) throw std::runtime_error("load_hybrid: bad lstm_shape record");
  model.lstm = ad::Lstm(static_cast<int>(shape[0]), static_cast<int>(shape[1]));
  model.lag = static_cast<int>(shape[2]);
  const auto& sc = ad::find_record(recs, "scaling").values;
  if (sc.size() != 2) throw std::runtime_error("load_hybrid: bad scaling record");
  model.shift = sc[0];
  model.scale = sc[1];
  const auto& w = ad::find_record(recs, "lstm").values;
  if (w.size() != model.lstm.num_params()) throw std::runtime_error("load_hybrid: LSTM parameter count mismatch");
  model.lstm.params() = w;
  return model;
}

}  // namespace dlf::hybrid
