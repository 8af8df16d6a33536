// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any of them fails.
//
//   acceptance <configs-dir> <work-dir> [criterion ...]

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dlf/ad/nn.hpp"
#include "dlf/app/commands.hpp"
#include "dlf/forecast/forecast.hpp"
#include "dlf/hybrid/hybrid.hpp"
#include "dlf/kernels/kernels.hpp"
#include "dlf/pinn/model.hpp"
#include "dlf/pinn/tableau.hpp"
#include "dlf/ssm/ssm.hpp"
#include "gradcheck.hpp"

using namespace dlf;
namespace fs = std::filesystem;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Tolerances.
constexpr double kDiscretizationTol = 1e-9;
constexpr double kDiscretizationSeconds = 5.0;
constexpr double kLyapunovTol = 1e-9;
constexpr double kNllTol = 1e-8;
constexpr double kGradTol = 1e-4;
constexpr double kIrkTol = 1e-10;
constexpr double kMcSigmas = 3.0;
constexpr int kMcSamples = 10000;
constexpr int kCstrTrainPoints = 15;
constexpr int kMaxEpochs = 50000;
constexpr double kCstrMinutes = 30.0;
constexpr std::size_t kMinOrigins = 20;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel_frob(const MatrixXd& a, const MatrixXd& ref) { return (a - ref).norm() / std::max(ref.norm(), 1e-300); }

kernels::KernelParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return kernels::KernelParams::natural(std::exp(1.5 * u(rng)), std::exp(2.0 * u(rng)), std::exp(2.0 * u(rng) - 2.0),
                                        std::exp(u(rng) - 3.0));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1

Outcome discretization() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> udt(0.01, 3.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto p = random_params(rng);
    const double dt = udt(rng);
    const auto m = kernels::build_matern32(p, dt);
    const auto [Am, Qm] = ssm::discretize(kernels::matern32_continuous(p), dt);
    const auto e = kernels::build_exponential(p, dt);
    const auto [Ae, Qe] = ssm::discretize(kernels::exponential_continuous(p), dt);
    worst = std::max({worst, rel_frob(ssm::to_eigen(m.A), Am), rel_frob(ssm::to_eigen(m.Q), Qm),
                      rel_frob(ssm::to_eigen(e.A), Ae), rel_frob(ssm::to_eigen(e.Q), Qe)});
  }
  const double secs = seconds_since(t0);
  return {worst < kDiscretizationTol && secs < kDiscretizationSeconds,
          fmt("worst relative Frobenius error %.2e (< %.0e) over 2 x 100 draws, %.2f s (< %.0f s)", worst,
              kDiscretizationTol, secs, kDiscretizationSeconds)};
}

// ---------------------------------------------------------------- 2

// Stationary covariance from the Kronecker form of the continuous Lyapunov
// equation F P + P F^T + L Sigma L^T = 0, independent of the library solver.
MatrixXd lyapunov_kron(const ssm::ContinuousSSM& c) {
  const auto m = c.F.rows();
  const MatrixXd I = MatrixXd::Identity(m, m);
  MatrixXd K = MatrixXd::Zero(m * m, m * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      K.block(i * m, j * m, m, m) += c.F(i, j) * I;
      K.block(i * m, j * m, m, m) += (i == j ? 1.0 : 0.0) * c.F;
    }
  const MatrixXd LQL = c.L * c.Sigma_w * c.L.transpose();
  const VectorXd rhs = -Eigen::Map<const VectorXd>(LQL.data(), m * m);
  const VectorXd v = K.fullPivLu().solve(rhs);
  return Eigen::Map<const MatrixXd>(v.data(), m, m);
}

Outcome lyapunov() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> udt(0.01, 3.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto p = random_params(rng);
    const double dt = udt(rng);
    for (const auto& c : {kernels::matern32_stationary(p), kernels::exponential_stationary(p)}) {
      const MatrixXd P = lyapunov_kron(c);
      const auto [A, Q] = ssm::discretize(c, dt);
      worst = std::max(worst, rel_frob(P - A * P * A.transpose(), Q));
    }
  }
  return {worst < kLyapunovTol,
          fmt("worst relative error of P - A P A^T against the integral Q %.2e (< %.0e), 200 models", worst,
              kLyapunovTol)};
}

// ---------------------------------------------------------------- 3

double brute_force_nll(const ssm::DiscreteSSM& d, const std::vector<double>& ys) {
  const int T = static_cast<int>(ys.size());
  const int m = static_cast<int>(d.dim());
  const MatrixXd A = ssm::to_eigen(d.A), Q = ssm::to_eigen(d.Q), H = ssm::to_eigen(d.H);
  std::vector<MatrixXd> Ap(T + 1, MatrixXd::Identity(m, m));
  for (int k = 1; k <= T; ++k) Ap[k] = A * Ap[k - 1];
  VectorXd mu(T);
  MatrixXd S(T, T);
  for (int k = 1; k <= T; ++k) {
    mu[k - 1] = (H * Ap[k] * ssm::to_eigen(d.m0))(0, 0);
    for (int l = 1; l <= T; ++l) {
      MatrixXd c = Ap[k] * ssm::to_eigen(d.P0) * Ap[l].transpose();
      for (int j = 1; j <= std::min(k, l); ++j) c += Ap[k - j] * Q * Ap[l - j].transpose();
      S(k - 1, l - 1) = (H * c * H.transpose())(0, 0) + (k == l ? d.R : 0.0);
    }
  }
  const VectorXd r = Eigen::Map<const VectorXd>(ys.data(), T) - mu;
  Eigen::LLT<MatrixXd> llt(S);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return 0.5 * (T * std::log(2.0 * std::numbers::pi) + logdet + r.dot(llt.solve(r)));
}

Outcome kalman_nll() {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  int n = 0;
  for (int rep = 0; rep < 5; ++rep)
    for (int T = 1; T <= 8; ++T) {
      const int m = 1 + (T + rep) % 3;
      MatrixXd B(m, m), Sk(m, m), L(m, m);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          B(i, j) = nd(rng);
          Sk(i, j) = nd(rng);
          L(i, j) = nd(rng);
        }
      ssm::ContinuousSSM c;
      c.F = -(0.3 * B * B.transpose() + 0.5 * MatrixXd::Identity(m, m)) + 0.5 * (Sk - Sk.transpose());
      c.L = L;
      c.Sigma_w = 0.7 * MatrixXd::Identity(m, m);
      const auto [A, Q] = ssm::discretize(c, 0.4);
      ssm::DiscreteSSM d;
      d.A = ssm::from_eigen(A);
      d.Q = ssm::from_eigen(Q);
      d.H = ssm::Mat<double>(1, m);
      d.m0 = ssm::Mat<double>(m, 1);
      for (int i = 0; i < m; ++i) {
        d.H(0, i) = nd(rng);
        d.m0[i] = nd(rng);
      }
      d.R = 0.3;
      MatrixXd G(m, m);
      for (auto& g : G.reshaped()) g = nd(rng);
      d.P0 = ssm::from_eigen(G * G.transpose() + MatrixXd::Identity(m, m));
      std::vector<double> ys(T);
      for (auto& y : ys) y = nd(rng);
      const double got = ssm::kf_filter(d, ys).nll;
      const double ref = brute_force_nll(d, ys);
      worst = std::max(worst, std::abs(got - ref) / std::max(1.0, std::abs(ref)));
      ++n;
    }
  return {worst < kNllTol, fmt("worst |filter NLL - joint Gaussian NLL| %.2e (< %.0e), %d models with T <= 8", worst,
                                kNllTol, n)};
}

// ---------------------------------------------------------------- 4

double mlp_grad_error(int seed) {
  std::mt19937_64 rng(seed);
  ad::Mlp net({3, 5, 4, 6, 2});
  net.init_glorot(rng);
  std::normal_distribution<double> nd(0.0, 0.3);
  for (auto& p : net.params()) p += nd(rng);
  const std::vector<double> x{nd(rng), nd(rng), nd(rng)};
  return testutil::max_grad_error(
      [&](ad::Tape& t, std::span<const ad::Value> pv) {
        std::vector<ad::Value> xv(x.begin(), x.end());
        auto y = net.forward(t, pv, xv);
        return 0.5 * y[0] * y[0] + 1.5 * y[1];
      },
      net.params());
}

double lstm_grad_error(int seed) {
  std::mt19937_64 rng(100 + seed);
  ad::Lstm net(4, 2);
  net.init(rng);
  std::normal_distribution<double> nd(0.0, 0.3);
  for (auto& p : net.params()) p += nd(rng);
  const std::vector<double> w{nd(rng), nd(rng), nd(rng)};
  return testutil::max_grad_error(
      [&](ad::Tape& t, std::span<const ad::Value> pv) {
        std::vector<ad::Value> wv(w.begin(), w.end());
        const ad::Value y = net.forward(t, pv, wv);
        return y * y;
      },
      net.params());
}

double kernel_grad_error(int seed) {
  std::mt19937_64 rng(300 + seed);
  const auto p = random_params(rng);
  const auto kind = seed % 2 ? kernels::KernelKind::ExponentialAugmented : kernels::KernelKind::Matern32Augmented;
  std::normal_distribution<double> nd;
  std::vector<double> ys(30);
  for (std::size_t k = 0; k < ys.size(); ++k) ys[k] = 1.0 + 0.4 * std::sin(0.3 * k) + 0.05 * nd(rng);
  const std::vector<double> theta(p.log.begin(), p.log.end());
  return testutil::max_grad_error(
      [&](ad::Tape& t, std::span<const ad::Value> pv) {
        const std::array<ad::Value, 4> lt{pv[0], pv[1], pv[2], pv[3]};
        return ssm::kf_filter(kernels::build<ad::Value>(kind, lt, 0.5, ys[0]), ys).nll;
      },
      theta);
}

double hybrid_grad_error(int seed) {
  const auto kind = seed % 2 ? kernels::KernelKind::ExponentialAugmented : kernels::KernelKind::Matern32Augmented;
  hybrid::HybridSSM m;
  m.kind = kind;
  m.params = kernels::KernelParams::natural(0.4, 0.8, 0.01, 0.02);
  m.dt = 0.5;
  m.lstm = ad::Lstm(3, 1);
  std::mt19937_64 rng(500 + seed);
  m.lstm.init(rng);
  m.shift = 1.0;
  m.scale = 0.5;
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  auto p = m.flat_params();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] += (i < 4 ? 1.0 : 0.5) * u(rng);
  std::vector<double> ys(10);
  for (std::size_t k = 0; k < ys.size(); ++k) ys[k] = 1.0 + 0.5 * std::sin(0.2 * k + 0.3) + 0.2 * std::cos(0.05 * k);
  return testutil::max_grad_error(
      [&](ad::Tape& t, std::span<const ad::Value> pv) {
        ssm::GaussianBelief b;
        return hybrid::record_nll(t, m, pv, ys, 0, ys.size(), b);
      },
      p);
}

std::vector<pinn::Sample> pinn_batch(pinn::System sys, int n, bool labelled, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<pinn::Sample> out(n);
  for (auto& s : out) {
    switch (sys) {
      case pinn::System::Cstr:
        s.x = {2.0 + 0.3 * u(rng)};
        s.u_n = {0.85 + 0.1 * u(rng)};
        if (labelled) s.u_next = {0.85 + 0.1 * u(rng)};
        break;
      case pinn::System::Adpfr:
        s.x = {1.0 + 0.15 * u(rng), 0.05 + 0.01 * u(rng), 0.5 + 0.5 * u(rng)};
        s.u_n = {0.5 + 0.2 * u(rng)};
        if (labelled) s.u_next = {0.5 + 0.2 * u(rng)};
        break;
      case pinn::System::Flotation:
        s.x = {1.0 + 0.1 * u(rng), 4.0 + 0.3 * u(rng), 3.6 + 0.25 * u(rng), 0.4 + 0.03 * u(rng)};
        s.u_n = {0.98 + 0.05 * u(rng), 1.0 + 0.1 * u(rng)};
        if (labelled) s.u_next = {0.98 + 0.05 * u(rng), 1.0 + 0.1 * u(rng)};
        break;
    }
  }
  return out;
}

pinn::OutputModel small_pinn(pinn::System sys, std::mt19937_64& rng) {
  pinn::OutputModelConfig c;
  c.system = sys;
  c.q = 3;
  c.dt = sys == pinn::System::Adpfr ? 0.5 : 1.0;
  c.hidden = {5, 4};
  c.rate_hidden = 6;
  pinn::OutputModel m(c);
  m.init(rng);
  std::normal_distribution<double> nd(0.0, 0.1);
  for (auto& p : m.params()) p += nd(rng);
  return m;
}

double pinn_grad_error(pinn::System sys, int seed) {
  std::mt19937_64 rng(1000 + seed);
  auto m = small_pinn(sys, rng);
  auto batch = pinn_batch(sys, 3, true, rng);
  if (sys != pinn::System::Adpfr) {
    const auto col = pinn_batch(sys, 2, false, rng);
    batch.insert(batch.end(), col.begin(), col.end());
  }
  return testutil::max_grad_error(
      [&](ad::Tape& t, std::span<const ad::Value> pv) { return m.loss(t, pv, batch); }, m.params());
}

// u_zz from the tape against central differences of the tape's u_z.
double zz_error(int seed) {
  std::mt19937_64 rng(2000 + seed);
  auto m = small_pinn(pinn::System::Adpfr, rng);
  const auto s = pinn_batch(pinn::System::Adpfr, 1, true, rng)[0];
  auto uz = [&](double z) {
    ad::Tape t;
    const auto pv = t.variables(m.params());
    auto at = s;
    at.x[2] = z;
    std::vector<double> v;
    for (const auto& x : m.forward(t, pv, at, 1).u_z) v.push_back(x.value());
    return v;
  };
  ad::Tape t;
  const auto pv = t.variables(m.params());
  const auto f = m.forward(t, pv, s, 2);
  const double h = 1e-4;
  const auto up = uz(s.x[2] + h), dn = uz(s.x[2] - h);
  double worst = 0.0;
  for (std::size_t j = 0; j < up.size(); ++j)
    worst = std::max(worst, testutil::rel_err(f.u_zz[j].value(), (up[j] - dn[j]) / (2 * h)));
  return worst;
}

Outcome gradients() {
  std::map<std::string, double> worst;
  for (int seed = 0; seed < 20; ++seed) {
    auto upd = [&](const std::string& k, double e) { worst[k] = std::max(worst[k], e); };
    upd("mlp", mlp_grad_error(seed));
    upd("lstm", lstm_grad_error(seed));
    upd("kernel-nll", kernel_grad_error(seed));
    upd("hybrid-nll", hybrid_grad_error(seed));
    upd("pinn-cstr", pinn_grad_error(pinn::System::Cstr, seed));
    upd("pinn-adpfr", pinn_grad_error(pinn::System::Adpfr, seed));
    upd("pinn-flotation", pinn_grad_error(pinn::System::Flotation, seed));
    upd("d2/dz2", zz_error(seed));
  }
  bool ok = true;
  std::string d;
  for (const auto& [k, v] : worst) {
    ok = ok && v < kGradTol;
    d += fmt("%s %.1e, ", k.c_str(), v);
  }
  return {ok, "worst relative error over 20 seeds: " + d + fmt("(< %.0e)", kGradTol)};
}

// ---------------------------------------------------------------- 5

Outcome irk() {
  const auto tab = pinn::gauss_legendre_tableau(3);
  const double dt = 0.5;
  const double u1 = pinn::irk_step(
      tab, [](double u) { return -u; }, [](double) { return -1.0; }, 1.0, dt);
  const double err = std::abs(u1 - std::exp(-dt));
  return {err < kIrkTol, fmt("q = 3, dt = 0.5: |u_1 - e^-dt| = %.3e (< %.0e)", err, kIrkTol)};
}

// ---------------------------------------------------------------- 6

Outcome monte_carlo() {
  std::vector<double> ys(40);
  for (std::size_t k = 0; k < ys.size(); ++k) ys[k] = 2.0 + 0.3 * std::sin(0.1 * k) + 0.1 * std::cos(0.37 * k);
  using kernels::KernelKind;
  using kernels::KernelParams;
  const std::vector<kernels::KernelModel> models{
      {KernelKind::ExponentialAugmented, KernelParams::natural(0.3, 0.05, 1e-3, 1e-3), 1.0},
      {KernelKind::Matern32Augmented, KernelParams::natural(0.2, 0.01, 1e-4, 1e-3), 1.0}};
  double worst = 0.0;
  for (const auto& km : models) {
    forecast::ForecastConfig cfg;
    cfg.M = kMcSamples;
    cfg.H = 10;
    cfg.seed = 17;
    const std::vector<forecast::InputModel> in{forecast::InputModel::make_conventional(km)};
    const auto e = forecast::forecast_inputs(in, {std::span<const double>(ys)}, cfg)[0];
    const auto em = e.mean();
    // Analytic: filter the last three points, then propagate mean and covariance.
    const auto lin = kernels::build(km, ys[ys.size() - 3]);
    const auto b = ssm::kf_filter(lin, std::span<const double>(ys).last(3)).beliefs.back();
    VectorXd m = ssm::to_eigen(b.m);
    MatrixXd P = ssm::to_eigen(b.P);
    const MatrixXd A = ssm::to_eigen(lin.A), Q = ssm::to_eigen(lin.Q);
    for (int h = 0; h < cfg.H; ++h) {
      m = A * m;
      P = A * P * A.transpose() + Q;
      worst = std::max(worst, std::abs(em[h] - m[0]) / std::sqrt(P(0, 0) / cfg.M));
    }
  }
  return {worst < kMcSigmas, fmt("worst |ensemble mean - analytic| = %.2f sigma/sqrt(M) (< %.0f), M = %d, H = 10, "
                                 "exponential and Matern",
                                 worst, kMcSigmas, kMcSamples)};
}

// ---------------------------------------------------------------- 7-9

struct Pipeline {
  app::ExperimentConfig cfg;
  std::vector<app::MetricRow> rows;
  nlohmann::json outputs;
  double seconds = 0.0;
  std::string error;
};

Pipeline run_pipeline(const fs::path& config, const fs::path& out) {
  Pipeline p;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    p.cfg = app::load_config(config);
    const app::RunOptions o{out, true, nullptr};
    app::cmd_simulate(p.cfg, o);
    app::cmd_train_input(p.cfg, o);
    app::cmd_train_output(p.cfg, o);
    p.rows = app::cmd_evaluate(p.cfg, o);
    std::ifstream in(out / app::layout::outputs / app::layout::manifest);
    p.outputs = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    p.error = e.what();
  }
  p.seconds = seconds_since(t0);
  return p;
}

const app::MetricRow* find_row(const Pipeline& p, const std::string& in, const std::string& out,
                               const std::string& ch) {
  for (const auto& r : p.rows)
    if (r.input_model == in && r.output_model == out && r.channel == ch) return &r;
  return nullptr;
}

Outcome cstr_outputs(const Pipeline& p) {
  if (!p.error.empty()) return {false, "pipeline failed: " + p.error};
  const auto& r = p.outputs.at("results");
  const double pinn = r.at("pinn").at("test_mse"), ffnn = r.at("ffnn").at("test_mse");
  const bool budget = p.cfg.pinn.train_points == kCstrTrainPoints && p.cfg.pinn.train.epochs <= kMaxEpochs;
  const bool ok = budget && pinn < ffnn && p.seconds < kCstrMinutes * 60.0;
  return {ok, fmt("CSTR one-step test MSE: PINN %.3e vs FFNN %.3e (%zu training points, %d epochs; full CSTR "
                  "pipeline %.0f s)",
                  pinn, ffnn, p.cfg.pinn.train_points, p.cfg.pinn.train.epochs, p.seconds)};
}

Outcome cstr_inputs(const Pipeline& p) {
  if (!p.error.empty()) return {false, "pipeline failed: " + p.error};
  const auto* h = find_row(p, "hybrid_matern", "", "C_in");
  const auto* c = find_row(p, "matern", "", "C_in");
  if (!h || !c) return {false, "missing matern or hybrid_matern rows"};
  const bool ok = h->origins >= kMinOrigins && h->mse < c->mse;
  return {ok, fmt("CSTR C_in %d-step MSE: hybrid Matern %.3e vs Matern %.3e over %zu origins (>= %zu)",
                  p.cfg.forecaster.H, h->mse, c->mse, h->origins, kMinOrigins)};
}

Outcome ordering(const std::vector<const Pipeline*>& runs) {
  bool ok = true;
  std::string d;
  for (const auto* p : runs) {
    if (!p->error.empty()) return {false, "pipeline failed: " + p->error};
    std::set<std::string> channels;
    for (const auto& r : p->rows)
      if (!r.output_model.empty()) channels.insert(r.channel);
    for (const auto& [hyb, conv] : {std::pair{"hybrid_matern", "matern"}, {"hybrid_exponential", "exponential"}}) {
      for (const auto& ch : channels) {
        const auto* a = find_row(*p, hyb, "pinn", ch);
        const auto* b = find_row(*p, conv, "ffnn", ch);
        if (!a || !b) return {false, "missing rows for " + ch};
        const bool mse = a->mse < b->mse, ll = a->mean_loglik > b->mean_loglik;
        ok = ok && mse && ll && a->origins >= kMinOrigins;
        d += fmt("%s %s %s: MSE %.2e vs %.2e %s, loglik %.3g vs %.3g %s; ", pinn::to_string(p->cfg.system).c_str(),
                 hyb, ch.c_str(), a->mse, b->mse, mse ? "ok" : "X", a->mean_loglik, b->mean_loglik, ll ? "ok" : "X");
      }
    }
  }
  return {ok, "PINN+hybrid vs FFNN+conventional: " + d};
}

// ---------------------------------------------------------------- 10

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), root).generic_string()] = ss.str();
  }
  return files;
}

Outcome determinism(const fs::path& work) {
  // Shrunken budgets over every system, run twice into separate directories.
  const std::vector<std::pair<std::string, std::string>> tiny{
      {"cstr", R"({"experiment": {"system": "cstr", "seed": 11},
         "simulators": {"samples": 400, "split": [300, 50, 50]},
         "kernels": {"max_iters": 10}, "hybrid_ssm": {"max_iters": 3, "train_window": 120, "chunk": 40},
         "pinn": {"q": 3, "hidden": [6], "train_points": 10, "collocation": 10, "epochs": 40, "eval_every": 20},
         "forecaster": {"H": 5, "M": 20, "stride": 10, "max_origins": 3}})"},
      {"flotation", R"({"experiment": {"system": "flotation", "seed": 11},
         "simulators": {"samples": 400, "split": [300, 50, 50]},
         "kernels": {"max_iters": 10}, "hybrid_ssm": {"max_iters": 3, "train_window": 120, "chunk": 40},
         "pinn": {"q": 3, "hidden": [6], "rate_hidden": 5, "train_points": 20, "collocation": 10, "epochs": 40,
                  "eval_every": 20},
         "forecaster": {"H": 5, "M": 20, "stride": 10, "max_origins": 3}})"},
      {"adpfr", R"({"experiment": {"system": "adpfr", "seed": 11},
         "simulators": {"samples": 300, "split": [200, 50, 50], "adpfr": {"nodes": 41, "profile_stride": 10}},
         "kernels": {"max_iters": 10}, "hybrid_ssm": {"max_iters": 3, "train_window": 120, "chunk": 40},
         "pinn": {"q": 3, "hidden": [6], "train_points": 30, "val_points": 30, "test_points": 30, "epochs": 30,
                  "eval_every": 10},
         "forecaster": {"H": 5, "M": 20, "stride": 10, "max_origins": 3}})"}};
  const char* verbs[] = {"simulate", "train-input", "train-output", "forecast", "evaluate", "report"};
  std::size_t files = 0;
  std::string d;
  bool ok = true;
  std::ostringstream sink;
  auto* old = std::cout.rdbuf(sink.rdbuf());
  for (const auto& [name, text] : tiny) {
    const fs::path dir = work / ("determinism_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg = dir / "config.json";
    std::ofstream(cfg) << text;
    for (const char* v : verbs)
      for (const char* run : {"a", "b"}) {
        const int code =
            app::cli_main(std::vector<std::string>{"--config", cfg.string(), "--out", (dir / run).string(), "-q", v});
        if (code != 0) {
          ok = false;
          d += fmt("%s %s exit %d; ", name.c_str(), v, code);
        }
      }
    const auto a = snapshot(dir / "a"), b = snapshot(dir / "b");
    files += a.size();
    if (a != b) {
      ok = false;
      for (const auto& [f, bytes] : a)
        if (!b.count(f) || b.at(f) != bytes) d += name + "/" + f + " differs; ";
    }
  }
  std::cout.rdbuf(old);
  return {ok, fmt("every verb twice on cstr, flotation and adpfr: %zu artifact files byte-identical. ", files) + d};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: acceptance <configs-dir> <work-dir> [criterion ...]\n");
    return 2;
  }
  const fs::path configs = argv[1], work = argv[2];
  std::set<int> only;
  for (int i = 3; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto wanted = [&](int k) { return only.empty() || only.count(k); };
  fs::create_directories(work);

  std::optional<Pipeline> cstr, flotation;
  auto need_cstr = [&]() -> const Pipeline& {
    if (!cstr) cstr = run_pipeline(configs / "cstr.json", work / "cstr");
    return *cstr;
  };
  auto need_flotation = [&]() -> const Pipeline& {
    if (!flotation) flotation = run_pipeline(configs / "flotation.json", work / "flotation");
    return *flotation;
  };

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"discretization oracle", discretization},
      {"Lyapunov consistency", lyapunov},
      {"Kalman NLL oracle", kalman_nll},
      {"gradient suite", gradients},
      {"IRK exactness", irk},
      {"Monte Carlo soundness", monte_carlo},
      {"PINN vs FFNN on CSTR", [&] { return cstr_outputs(need_cstr()); }},
      {"hybrid vs conventional Matern inputs", [&] { return cstr_inputs(need_cstr()); }},
      {"complete forecast ordering", [&] { return ordering({&need_cstr(), &need_flotation()}); }},
      {"CLI determinism", [&] { return determinism(work); }},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!wanted(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
