#include "dlf/forecast/forecast.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace dlf::forecast {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Eigen::VectorXd draw(const Eigen::VectorXd& mean, const Eigen::MatrixXd& factor, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(factor.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  return mean + factor * z;
}

}  // namespace

std::vector<double> Ensemble::mean() const {
  // shifted by the first sample so that constant steps come out exact
  std::vector<double> m(H, 0.0);
  if (M == 0) return m;
  for (int j = 1; j < M; ++j)
    for (int h = 0; h < H; ++h) m[h] += at(j, h) - at(0, h);
  for (int h = 0; h < H; ++h) m[h] = at(0, h) + m[h] / M;
  return m;
}

std::vector<double> Ensemble::variance() const {
  std::vector<double> var(H, 0.0);
  if (M < 2) return var;
  const auto m = mean();
  for (int j = 0; j < M; ++j)
    for (int h = 0; h < H; ++h) var[h] += (at(j, h) - m[h]) * (at(j, h) - m[h]);
  for (double& x : var) x /= (M - 1);
  return var;
}

InputModel InputModel::make_conventional(kernels::KernelModel km) {
  InputModel m;
  m.conventional = km;
  return m;
}

InputModel InputModel::make_hybrid(hybrid::HybridSSM hm) {
  InputModel m;
  m.hybrid = true;
  m.hyb = std::move(hm);
  return m;
}

std::size_t InputModel::history_needed(int init_steps) const {
  return static_cast<std::size_t>(init_steps) + (hybrid ? static_cast<std::size_t>(hyb.lag) : 0);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t channel, std::uint64_t trajectory) {
  return splitmix64(splitmix64(splitmix64(seed) ^ channel) ^ trajectory);
}

std::vector<Ensemble> forecast_inputs(std::span<const InputModel> models,
                                      const std::vector<std::span<const double>>& histories, const ForecastConfig& cfg,
                                      int* clipped) {
  if (cfg.H < 1 || cfg.M < 1 || cfg.init_steps < 1) throw std::invalid_argument("forecast: H, M, init_steps must be >= 1");
  if (histories.size() != models.size()) throw std::invalid_argument("forecast: one history per input model");
  if (clipped) *clipped = 0;
  std::vector<Ensemble> out;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const InputModel& im = models[i];
    const auto hist = histories[i];
    if (hist.size() < static_cast<std::size_t>(cfg.init_steps)) throw std::invalid_argument("forecast: history too short");
    const std::size_t start = hist.size() - cfg.init_steps;
    ssm::DiscreteSSM lin;
    ssm::GaussianBelief b;
    if (im.hybrid) {
      if (hist.size() < im.history_needed(cfg.init_steps)) {
        throw std::invalid_argument("forecast: hybrid history shorter than init_steps + lag");
      }
      lin = im.hyb.linear(hist[start]);
      b = hybrid::hybrid_filter(im.hyb, hist, start).beliefs.back();
    } else {
      lin = kernels::build(im.conventional, hist[start]);
      b = ssm::kf_filter(lin, hist.subspan(start)).beliefs.back();
    }
    bool was_clipped = false;
    const Eigen::MatrixXd Lp = ssm::psd_factor(b.P, &was_clipped);
    if (was_clipped && clipped) ++*clipped;
    const Eigen::MatrixXd Lq = ssm::psd_factor(lin.Q);
    const Eigen::MatrixXd A = ssm::to_eigen(lin.A);
    const Eigen::VectorXd m = ssm::to_eigen(b.m);

    Ensemble e(cfg.M, cfg.H);
    for (int j = 0; j < cfg.M; ++j) {
      std::mt19937_64 rng(stream_seed(cfg.seed, i, static_cast<std::uint64_t>(j)));
      Eigen::VectorXd x = draw(m, Lp, rng);
      if (im.hybrid) {
        std::vector<double> state(x.data(), x.data() + x.size());
        std::vector<double> window(im.hyb.lag);
        for (int k = 0; k < im.hyb.lag; ++k) window[k] = hist[hist.size() - 1 - k];
        for (int h = 0; h < cfg.H; ++h) {
          hybrid::hybrid_forecast_step(im.hyb, lin, Lq, state, window, rng);
          e.at(j, h) = state[0];
        }
      } else {
        for (int h = 0; h < cfg.H; ++h) {
          x = draw(A * x, Lq, rng);
          e.at(j, h) = x[0];
        }
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Ensemble> forecast_outputs(const pinn::OutputModel& model, std::span<const Ensemble> inputs,
                                       std::span<const double> u0) {
  const std::size_t n_in = model.config().system == pinn::System::Adpfr ? 2 : static_cast<std::size_t>(model.input_dim());
  if (inputs.size() != n_in) throw std::invalid_argument("forecast_outputs: input channel count mismatch");
  const int M = inputs[0].M;
  const int H = inputs[0].H;
  for (const auto& e : inputs) {
    if (e.M != M || e.H != H) throw std::invalid_argument("forecast_outputs: input ensembles not aligned");
  }
  std::vector<Ensemble> out(u0.size(), Ensemble(M, H));
  std::vector<double> x(n_in);
  for (int j = 0; j < M; ++j) {
    std::vector<double> u(u0.begin(), u0.end());
    for (int h = 0; h < H; ++h) {
      for (std::size_t c = 0; c < n_in; ++c) x[c] = inputs[c].at(j, h);
      u = model.step(x, u);
      if (u.size() != out.size()) throw std::invalid_argument("forecast_outputs: state size mismatch");
      for (std::size_t s = 0; s < u.size(); ++s) out[s].at(j, h) = u[s];
    }
  }
  return out;
}

double Metrics::mean_loglik() const {
  double s = 0.0;
  for (double l : loglik) s += l;
  return loglik.empty() ? 0.0 : s / static_cast<double>(loglik.size());
}

Metrics metrics(const Ensemble& e, std::span<const double> truth) {
  if (e.H == 0 || e.M == 0) throw std::invalid_argument("metrics: empty ensemble");
  if (truth.size() != static_cast<std::size_t>(e.H)) throw std::invalid_argument("metrics: truth length must equal H");
  const auto mean = e.mean();
  const auto var = e.variance();
  Metrics m;
  std::size_t n_rel = 0;
  for (int h = 0; h < e.H; ++h) {
    const double err = mean[h] - truth[h];
    m.mse += err * err;
    m.mae += std::abs(err);
    if (std::abs(truth[h]) >= 1e-9) {
      m.mre += std::abs(err) / std::abs(truth[h]);
      ++n_rel;
    }
    const double v = var[h] + 1e-12;
    m.loglik.push_back(-0.5 * std::log(2.0 * std::numbers::pi * v) - 0.5 * err * err / v);
  }
  m.mse /= e.H;
  m.mae /= e.H;
  m.mre = n_rel ? m.mre / static_cast<double>(n_rel) : 0.0;
  return m;
}

std::vector<std::size_t> forecast_origins(std::size_t begin, std::size_t end, int H, std::size_t history,
                                          std::size_t stride) {
  if (stride == 0 || history == 0) throw std::invalid_argument("forecast_origins: stride and history must be positive");
  std::vector<std::size_t> out;
  for (std::size_t n = begin + history - 1; n + static_cast<std::size_t>(H) < end; n += stride) out.push_back(n);
  return out;
}

std::vector<double> output_state(const sim::Dataset& ds, std::size_t n) {
  std::vector<double> u;
  for (const auto& ch : ds.outputs) u.push_back(ch.at(n));
  return u;
}

OriginForecast forecast_at(const sim::Dataset& ds, std::size_t origin, std::span<const InputModel> models,
                           const pinn::OutputModel* output_model, const ForecastConfig& cfg) {
  if (models.size() != ds.inputs.size()) throw std::invalid_argument("forecast_at: one input model per dataset input");
  if (origin >= ds.rows()) throw std::invalid_argument("forecast_at: origin out of range");
  std::vector<std::span<const double>> hist;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const std::size_t need = models[i].history_needed(cfg.init_steps);
    if (origin + 1 < need) throw std::invalid_argument("forecast_at: not enough history before the origin");
    hist.emplace_back(ds.inputs[i].data() + origin + 1 - need, need);
  }
  ForecastConfig c = cfg;
  c.seed = stream_seed(cfg.seed, ~0ull, origin);
  OriginForecast f;
  f.origin = origin;
  f.inputs = forecast_inputs(models, hist, c, &f.clipped);
  if (output_model) f.outputs = forecast_outputs(*output_model, f.inputs, output_state(ds, origin));
  return f;
}

void write_band(const std::filesystem::path& path, const Ensemble& e, std::span<const double> truth) {
  if (truth.size() != static_cast<std::size_t>(e.H)) throw std::invalid_argument("write_band: truth length must equal H");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_band: cannot open " + path.string());
  const auto mean = e.mean();
  const auto var = e.variance();
  out << "h,mean,lower95,upper95,truth\n";
  char buf[160];
  for (int h = 0; h < e.H; ++h) {
    const double sd = std::sqrt(var[h]);
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", h + 1, mean[h], mean[h] - 1.96 * sd,
                  mean[h] + 1.96 * sd, truth[h]);
    out << buf;
  }
}

}  // namespace dlf::forecast
