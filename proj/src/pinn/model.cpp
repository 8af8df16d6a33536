#include "dlf/pinn/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "dlf/ad/adam.hpp"

namespace dlf::pinn {

using ad::Tape;
using ad::Value;

std::string to_string(System s) {
  switch (s) {
    case System::Cstr: return "cstr";
    case System::Adpfr: return "adpfr";
    case System::Flotation: return "flotation";
  }
  return "?";
}

System system_from_string(const std::string& s) {
  if (s == "cstr") return System::Cstr;
  if (s == "adpfr") return System::Adpfr;
  if (s == "flotation") return System::Flotation;
  throw std::invalid_argument("unknown system '" + s + "'");
}

OutputModel::OutputModel(OutputModelConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.physics) {
    if (!(cfg_.dt > 0.0)) throw std::invalid_argument("output model: dt must be positive");
    tab_ = gauss_legendre_tableau(cfg_.q);
  }
  const int in = input_dim() + (carries_state() ? state_dim() : 0);
  if (cfg_.input_shift.size() != cfg_.input_scale.size() ||
      (!cfg_.input_shift.empty() && static_cast<int>(cfg_.input_shift.size()) != in) ||
      (!cfg_.output_scale.empty() && static_cast<int>(cfg_.output_scale.size()) != state_dim())) {
    throw std::invalid_argument("output model: scaling vectors have the wrong size");
  }
  std::vector<int> widths{in};
  widths.insert(widths.end(), cfg_.hidden.begin(), cfg_.hidden.end());
  widths.push_back(outputs_per_state());
  std::size_t off = 0;
  for (int s = 0; s < state_dim(); ++s) {
    nets_.emplace_back(widths);
    offsets_.push_back(off);
    off += nets_.back().num_params();
  }
  if (cfg_.physics && cfg_.system == System::Flotation) {
    rate_net_ = ad::Mlp({2, cfg_.rate_hidden, 1});
    offsets_.push_back(off);
    off += rate_net_.num_params();
  }
  params_.assign(off, 0.0);
}

int OutputModel::input_dim() const {
  switch (cfg_.system) {
    case System::Cstr: return 1;
    case System::Adpfr: return 3;
    case System::Flotation: return 4;
  }
  return 0;
}

void OutputModel::init(std::mt19937_64& rng) {
  for (std::size_t k = 0; k < nets_.size(); ++k) {
    nets_[k].init_glorot(rng);
    std::copy(nets_[k].params().begin(), nets_[k].params().end(), params_.begin() + offsets_[k]);
  }
  if (offsets_.size() > nets_.size()) {
    rate_net_.init_glorot(rng);
    std::copy(rate_net_.params().begin(), rate_net_.params().end(), params_.begin() + offsets_.back());
  }
}

std::vector<double> OutputModel::net_input(std::span<const double> x, std::span<const double> u_n) const {
  if (static_cast<int>(x.size()) != input_dim()) throw std::invalid_argument("output model: wrong input size");
  std::vector<double> in(x.begin(), x.end());
  if (carries_state()) {
    if (static_cast<int>(u_n.size()) != state_dim()) throw std::invalid_argument("output model: wrong state size");
    in.insert(in.end(), u_n.begin(), u_n.end());
  }
  for (std::size_t i = 0; i < cfg_.input_shift.size(); ++i) in[i] = (in[i] - cfg_.input_shift[i]) / cfg_.input_scale[i];
  return in;
}

std::vector<double> OutputModel::predict(std::span<const double> x, std::span<const double> u_n) const {
  const auto in = net_input(x, u_n);
  std::vector<double> out(state_dim());
  for (int s = 0; s < state_dim(); ++s) {
    std::span<const double> p(params_.data() + offsets_[s], nets_[s].num_params());
    out[s] = out_scale(s) * nets_[s].forward(p, in).back();
    if (carries_state() && cfg_.residual_skip) out[s] += u_n[s];
  }
  return out;
}

std::vector<double> OutputModel::step(std::span<const double> inputs, std::span<const double> state) const {
  if (carries_state()) return predict(inputs, state);
  if (inputs.size() != 2) throw std::invalid_argument("adpfr step: expected inputs (C_in, v)");
  std::vector<double> out;
  out.reserve(cfg_.profile_z.size());
  for (double z : cfg_.profile_z) {
    const double x[3] = {inputs[0], inputs[1], z};
    out.push_back(predict(x, {})[0]);
  }
  return out;
}

Forward OutputModel::forward(Tape& tape, std::span<const Value> params, const Sample& s, int deriv_order) const {
  if (params.size() != params_.size()) throw std::invalid_argument("output model: parameter count mismatch");
  const auto in_d = net_input(s.x, s.u_n);
  std::vector<Value> in(in_d.begin(), in_d.end());
  Value z;
  const bool derivs = cfg_.system == System::Adpfr && deriv_order > 0 && cfg_.physics;
  if (derivs) {
    // derivatives are taken with respect to the unscaled coordinate
    z = tape.variable(s.x[2]);
    in[2] = cfg_.input_shift.empty() ? z : (z - cfg_.input_shift[2]) * (1.0 / cfg_.input_scale[2]);
  }
  Forward f;
  for (int k = 0; k < state_dim(); ++k) {
    auto out = nets_[k].forward(tape, params.subspan(offsets_[k], nets_[k].num_params()), in);
    if (out_scale(k) != 1.0) {
      for (auto& o : out) o = o * out_scale(k);
    }
    if (carries_state() && cfg_.residual_skip) {
      for (auto& o : out) o = o + s.u_n[k];
    }
    f.stages.push_back(std::move(out));
  }
  if (derivs) {
    const std::vector<Value> zs{z};
    for (int j = 0; j < cfg_.q; ++j) {
      const Value dz = tape.grad(f.stages[0][j], zs)[0];
      f.u_z.push_back(dz);
      if (deriv_order > 1) f.u_zz.push_back(tape.grad(dz, zs)[0]);
    }
  }
  if (cfg_.physics && cfg_.system == System::Flotation) {
    f.rate_inputs = {f.stages[0].back(), f.stages[1].back()};
    f.rate = rate_net_.forward(tape, params.subspan(offsets_.back(), rate_net_.num_params()), f.rate_inputs)[0];
  }
  return f;
}

std::vector<Value> OutputModel::residuals(Tape& tape, std::span<const Value> params, const Sample& s) const {
  if (!cfg_.physics) throw std::logic_error("output model: baseline has no stage residuals");
  return residuals_from(forward(tape, params, s, 2), s);
}

std::vector<Value> OutputModel::residuals_from(const Forward& f, const Sample& s) const {
  const int q = cfg_.q;
  std::vector<std::vector<Value>> N(state_dim());
  switch (cfg_.system) {
    case System::Cstr:
      for (int j = 0; j < q; ++j) N[0].push_back(cstr_operator(f.stages[0][j], s.x[0], cfg_.cstr));
      break;
    case System::Adpfr:
      for (int j = 0; j < q; ++j)
        N[0].push_back(pfr_operator(f.stages[0][j], f.u_z[j], f.u_zz[j], s.x[1], cfg_.pfr));
      break;
    case System::Flotation: {
      const FlotationInputsAt xin{s.x[0], s.x[1], s.x[2], s.x[3]};
      for (int j = 0; j < q; ++j) {
        auto [np, nf] = flotation_operators(f.stages[0][j], f.stages[1][j], xin, f.rate, cfg_.flotation);
        N[0].push_back(np);
        N[1].push_back(nf);
      }
      break;
    }
  }
  std::vector<Value> res;
  for (int k = 0; k < state_dim(); ++k) {
    auto r = stage_residuals<Value>(tab_, cfg_.dt, f.stages[k], N[k], s.u_n[k]);
    res.insert(res.end(), r.begin(), r.end());
  }
  return res;
}

Value OutputModel::loss(Tape& tape, std::span<const Value> params, std::span<const Sample> batch,
                        LossParts* parts) const {
  if (batch.empty()) throw std::invalid_argument("output model: empty batch");
  std::size_t labelled = 0;
  for (const auto& s : batch) labelled += s.u_next.empty() ? 0 : 1;
  if (!cfg_.physics && labelled == 0) throw std::invalid_argument("output model: baseline needs labelled samples");

  std::vector<Value> fterms, uterms, bterms;
  for (const auto& s : batch) {
    if (cfg_.physics) {
      const Forward f = forward(tape, params, s, 2);
      for (const Value& r : residuals_from(f, s)) fterms.push_back(ad::square(r));
      if (!s.u_next.empty()) {
        for (int k = 0; k < state_dim(); ++k) uterms.push_back(ad::square(f.stages[k].back() - s.u_next[k]));
      }
      if (cfg_.system == System::Adpfr && !s.u_next.empty()) {
        const double c_in = s.x[0], v = s.x[1];
        Sample at = s;
        at.x[2] = 0.0;
        const Forward f0 = forward(tape, params, at, 1);
        at.x[2] = cfg_.pfr.L;
        const Forward fL = forward(tape, params, at, 1);
        for (int j = 0; j < cfg_.q; ++j) {
          bterms.push_back(ad::square(v * (c_in - f0.stages[0][j]) + cfg_.pfr.D * f0.u_z[j]));
          bterms.push_back(ad::square(fL.u_z[j]));
        }
      }
    } else if (!s.u_next.empty()) {
      const Forward f = forward(tape, params, s, 0);
      for (int k = 0; k < state_dim(); ++k) uterms.push_back(ad::square(f.stages[k].back() - s.u_next[k]));
    }
  }
  Value lf = fterms.empty() ? Value(0.0) : tape.sum(fterms) * (1.0 / static_cast<double>(batch.size()));
  Value lu = uterms.empty() ? Value(0.0) : tape.sum(uterms) * (1.0 / static_cast<double>(labelled));
  Value lb = bterms.empty() ? Value(0.0) : tape.sum(bterms) * (1.0 / static_cast<double>(labelled));
  if (parts) *parts = {lf.value(), lu.value(), lb.value()};
  return lf + lu + lb;
}

double OutputModel::loss(std::span<const double> params, std::span<const Sample> batch, LossParts* parts) const {
  Tape tape;
  const auto pv = tape.variables(params);
  return loss(tape, pv, batch, parts).value();
}

double OutputModel::mse(std::span<const Sample> batch) const {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& s : batch) {
    if (s.u_next.empty()) continue;
    const auto y = predict(s.x, s.u_n);
    for (int k = 0; k < state_dim(); ++k) {
      acc += (y[k] - s.u_next[k]) * (y[k] - s.u_next[k]);
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("output model: no labelled samples");
  return acc / static_cast<double>(n);
}

namespace {
const char* net_name(std::size_t k) { return k == 0 ? "u_net" : "uf_net"; }
}  // namespace

std::vector<ad::Record> OutputModel::records() const {
  std::vector<ad::Record> out;
  for (std::size_t k = 0; k < nets_.size(); ++k) {
    const auto n = nets_[k].num_params();
    out.push_back({net_name(k), {n},
                   std::vector<double>(params_.begin() + offsets_[k], params_.begin() + offsets_[k] + n)});
  }
  if (offsets_.size() > nets_.size()) {
    const auto n = rate_net_.num_params();
    out.push_back({"rate_net", {n},
                   std::vector<double>(params_.begin() + offsets_.back(), params_.begin() + offsets_.back() + n)});
  }
  if (!cfg_.input_shift.empty()) {
    out.push_back({"input_shift", {cfg_.input_shift.size()}, cfg_.input_shift});
    out.push_back({"input_scale", {cfg_.input_scale.size()}, cfg_.input_scale});
  }
  if (!cfg_.output_scale.empty()) out.push_back({"output_scale", {cfg_.output_scale.size()}, cfg_.output_scale});
  return out;
}

void OutputModel::load_records(const std::vector<ad::Record>& recs) {
  auto load = [&](const std::string& name, std::size_t off, std::size_t n) {
    const auto& r = ad::find_record(recs, name);
    if (r.values.size() != n) throw std::runtime_error("output model: record '" + name + "' has the wrong size");
    std::copy(r.values.begin(), r.values.end(), params_.begin() + off);
  };
  for (std::size_t k = 0; k < nets_.size(); ++k) load(net_name(k), offsets_[k], nets_[k].num_params());
  if (offsets_.size() > nets_.size()) load("rate_net", offsets_.back(), rate_net_.num_params());
  // scaling is part of the checkpoint; a checkpoint without it has none
  auto vec = [&](const char* name) {
    for (const auto& r : recs)
      if (r.name == name) return r.values;
    return std::vector<double>{};
  };
  auto shift = vec("input_shift"), scale = vec("input_scale"), oscale = vec("output_scale");
  const std::size_t width = static_cast<std::size_t>(input_dim() + (carries_state() ? state_dim() : 0));
  if (shift.size() != scale.size() || (!shift.empty() && shift.size() != width) ||
      (!oscale.empty() && oscale.size() != static_cast<std::size_t>(state_dim()))) {
    throw std::runtime_error("output model: scaling records have the wrong size");
  }
  cfg_.input_shift = std::move(shift);
  cfg_.input_scale = std::move(scale);
  cfg_.output_scale = std::move(oscale);
}

void fit_scaling(OutputModelConfig& cfg, std::span<const Sample> labelled) {
  const bool carry = cfg.system != System::Adpfr;
  std::vector<std::vector<double>> ins, outs;
  for (const auto& s : labelled) {
    if (s.u_next.empty()) continue;
    std::vector<double> in(s.x.begin(), s.x.end());
    if (carry) in.insert(in.end(), s.u_n.begin(), s.u_n.end());
    ins.push_back(std::move(in));
    std::vector<double> d(s.u_next.begin(), s.u_next.end());
    if (carry && cfg.residual_skip)
      for (std::size_t k = 0; k < d.size(); ++k) d[k] -= s.u_n[k];
    outs.push_back(std::move(d));
  }
  if (ins.empty()) throw std::invalid_argument("fit_scaling: no labelled samples");
  auto moments = [](const std::vector<std::vector<double>>& rows, std::vector<double>& mean, std::vector<double>& sd) {
    const std::size_t n = rows.size(), w = rows[0].size();
    mean.assign(w, 0.0);
    sd.assign(w, 0.0);
    for (const auto& r : rows)
      for (std::size_t i = 0; i < w; ++i) mean[i] += r[i] / static_cast<double>(n);
    for (const auto& r : rows)
      for (std::size_t i = 0; i < w; ++i) sd[i] += (r[i] - mean[i]) * (r[i] - mean[i]) / static_cast<double>(n);
    for (double& v : sd) v = v > 0.0 ? std::sqrt(v) : 1.0;
  };
  std::vector<double> omean;
  moments(ins, cfg.input_shift, cfg.input_scale);
  moments(outs, omean, cfg.output_scale);
}

std::vector<double> profile_grid(const sim::Dataset& ds) {
  std::vector<double> z;
  for (const auto& name : ds.output_names) {
    if (name.rfind("C@", 0) != 0) throw std::invalid_argument("adpfr dataset: unexpected channel " + name);
    z.push_back(std::stod(name.substr(2)));
  }
  return z;
}

std::vector<Sample> transition_samples(const sim::Dataset& ds, System sys, std::size_t first, std::size_t last,
                                       std::size_t node_stride) {
  last = std::min(last, ds.rows());
  std::vector<Sample> out;
  if (last < first + 2) return out;
  switch (sys) {
    case System::Cstr: {
      const auto& cin = ds.input("C_in");
      const auto& c = ds.output("C");
      for (std::size_t n = first; n + 1 < last; ++n) out.push_back({{cin[n + 1]}, {c[n]}, {c[n + 1]}});
      break;
    }
    case System::Flotation: {
      const auto& cf = ds.input("C_feed");
      const auto& qf = ds.input("Q_feed");
      const auto& qt = ds.input("Q_t");
      const auto& qc = ds.input("Q_c");
      const auto& cp = ds.output("C_p");
      const auto& cfr = ds.output("C_f");
      for (std::size_t n = first; n + 1 < last; ++n)
        out.push_back({{cf[n + 1], qf[n + 1], qt[n + 1], qc[n + 1]}, {cp[n], cfr[n]}, {cp[n + 1], cfr[n + 1]}});
      break;
    }
    case System::Adpfr: {
      const auto z = profile_grid(ds);
      const auto& cin = ds.input("C_in");
      const auto& v = ds.input("v");
      if (node_stride == 0) node_stride = 1;
      for (std::size_t n = first; n + 1 < last; ++n)
        for (std::size_t i = 0; i < z.size(); i += node_stride)
          out.push_back({{cin[n + 1], v[n + 1], z[i]}, {ds.outputs[i][n]}, {ds.outputs[i][n + 1]}});
      break;
    }
  }
  return out;
}

std::vector<Sample> random_subset(std::span<const Sample> all, std::size_t n, std::mt19937_64& rng) {
  if (n >= all.size()) return {all.begin(), all.end()};
  std::vector<std::size_t> idx(all.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  // partial Fisher–Yates with an explicit uniform draw (portable across standard libraries)
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  std::vector<Sample> out;
  for (auto i : idx) out.push_back(all[i]);
  return out;
}

std::vector<Sample> collocation_samples(std::span<const Sample> labelled, std::size_t n, double margin,
                                        std::mt19937_64& rng) {
  if (labelled.empty()) throw std::invalid_argument("collocation: need labelled samples for the box");
  const std::size_t nx = labelled[0].x.size(), nu = labelled[0].u_n.size();
  std::vector<double> lo(nx + nu, std::numeric_limits<double>::infinity());
  std::vector<double> hi(nx + nu, -std::numeric_limits<double>::infinity());
  for (const auto& s : labelled) {
    for (std::size_t d = 0; d < nx; ++d) {
      lo[d] = std::min(lo[d], s.x[d]);
      hi[d] = std::max(hi[d], s.x[d]);
    }
    for (std::size_t d = 0; d < nu; ++d) {
      lo[nx + d] = std::min(lo[nx + d], s.u_n[d]);
      hi[nx + d] = std::max(hi[nx + d], s.u_n[d]);
    }
  }
  for (std::size_t d = 0; d < lo.size(); ++d) {
    const double w = std::max(hi[d] - lo[d], 1e-3 * std::max(1.0, std::abs(hi[d])));
    lo[d] -= margin * w;
    hi[d] += margin * w;
  }
  std::vector<Sample> out(n);
  for (auto& s : out) {
    s.x.resize(nx);
    s.u_n.resize(nu);
    for (std::size_t d = 0; d < nx + nu; ++d) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      const double val = lo[d] + (hi[d] - lo[d]) * u;
      (d < nx ? s.x[d] : s.u_n[d - nx]) = val;
    }
  }
  return out;
}

TrainReport train_output_model(OutputModel& model, std::span<const Sample> train, std::span<const Sample> val,
                               const TrainConfig& cfg, std::ostream* log) {
  if (train.empty()) throw std::invalid_argument("train_output_model: empty training batch");
  if (cfg.epochs < 0 || cfg.eval_every < 1) throw std::invalid_argument("train_output_model: bad budget");
  auto& p = model.params();
  ad::Adam adam(p.size(), ad::AdamConfig{.lr = cfg.lr});
  ad::EarlyStopping stop(std::max(1, cfg.patience / cfg.eval_every), cfg.tol);
  const std::span<const Sample> score_set = val.empty() ? train : val;

  TrainReport rep;
  std::vector<double> best = p;
  double train_loss = model.loss(p, train);
  stop.update(model.mse(score_set));
  rep.best_val = stop.best();
  auto write_row = [&](int epoch, double tl, double vl) {
    if (!log) return;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", epoch, tl, vl);
    *log << buf;
  };
  if (log) *log << "epoch,train_loss,val_loss\n";
  write_row(0, train_loss, rep.best_val);

  std::vector<double> grads(p.size());
  ad::Tape tape;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    tape.clear();
    const auto pv = tape.variables(p);
    try {
      const Value L = model.loss(tape, pv, train);
      train_loss = L.value();
      const auto adj = tape.backward(L);
      for (std::size_t i = 0; i < p.size(); ++i) grads[i] = adj[pv[i].id()];
      adam.step(p, grads);
    } catch (const ad::NonFiniteError&) {
      adam.skip();
    }
    rep.epochs_run = epoch;
    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      const double v = model.mse(score_set);
      write_row(epoch, train_loss, v);
      if (stop.update(v)) {
        best = p;
        rep.best_epoch = epoch;
        rep.best_val = v;
      }
      if (stop.should_stop()) break;
    }
  }
  p = best;
  rep.skipped_steps = adam.skipped();
  rep.final_train_loss = model.loss(p, train);
  return rep;
}

}  // namespace dlf::pinn
