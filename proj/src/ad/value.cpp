#include "dlf/ad/value.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace dlf::ad {

namespace {

Tape* common_tape(const Value& a, const Value& b) {
  if (a.tape() && b.tape() && a.tape() != b.tape()) {
    throw std::logic_error("ad: operands recorded on different tapes");
  }
  return a.tape() ? a.tape() : b.tape();
}

double eval_unary(Op op, double x, double k) {
  switch (op) {
    case Op::Identity: return x;
    case Op::Neg: return -x;
    case Op::AddConst: return x + k;
    case Op::MulConst: return x * k;
    case Op::ConstDiv: return k / x;
    case Op::Square: return x * x;
    case Op::Sqrt: return std::sqrt(x);
    case Op::Exp: return std::exp(x);
    case Op::Log: return std::log(x);
    case Op::Tanh: return std::tanh(x);
    case Op::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    default: throw std::logic_error("ad: not a unary op");
  }
}

double eval_binary(Op op, double x, double y) {
  switch (op) {
    case Op::Add: return x + y;
    case Op::Sub: return x - y;
    case Op::Mul: return x * y;
    case Op::Div: return x / y;
    default: throw std::logic_error("ad: not a binary op");
  }
}

}  // namespace

Value Tape::push(Node n) {
  if (nodes_.size() >= kNoOperand) throw std::length_error("ad: tape overflow");
  nodes_.push_back(n);
  return Value(this, static_cast<std::uint32_t>(nodes_.size() - 1), n.value);
}

std::uint32_t Tape::as_node(const Value& v) {
  if (v.tape_ == this) return v.id_;
  if (v.tape_ != nullptr) throw std::logic_error("ad: operand recorded on a different tape");
  return variable(v.val_).id_;
}

Value Tape::variable(double v) {
  Node n;
  n.value = v;
  n.op = Op::Leaf;
  return push(n);
}

std::vector<Value> Tape::variables(std::span<const double> vs) {
  std::vector<Value> out;
  out.reserve(vs.size());
  for (double v : vs) out.push_back(variable(v));
  return out;
}

void Tape::clear() {
  nodes_.clear();
  operands_.clear();
  coeffs_.clear();
}

Value Tape::unary(Op op, const Value& a, double k) {
  if (a.is_constant()) return Value(eval_unary(op, a.val_, k));
  Node n;
  n.op = op;
  n.a = as_node(a);
  n.k = k;
  n.value = eval_unary(op, a.val_, k);
  return push(n);
}

Value Tape::binary(Op op, const Value& a, const Value& b) {
  Node n;
  n.op = op;
  n.a = as_node(a);
  n.b = as_node(b);
  n.value = eval_binary(op, nodes_[n.a].value, nodes_[n.b].value);
  return push(n);
}

std::vector<Value> Tape::gather(std::span<const Value> xs) {
  bool contiguous = true;
  for (std::size_t i = 0; i < xs.size() && contiguous; ++i) {
    contiguous = xs[i].tape_ == this && xs[i].id_ == xs[0].id_ + i;
  }
  if (contiguous) return {xs.begin(), xs.end()};
  std::vector<Value> out;
  out.reserve(xs.size());
  for (const Value& x : xs) {
    if (x.is_constant()) {
      out.push_back(variable(x.val_));
    } else {
      Node n;
      n.op = Op::Identity;
      n.a = as_node(x);
      n.value = x.val_;
      out.push_back(push(n));
    }
  }
  return out;
}

Value Tape::affine(std::span<const Value> w, std::span<const Value> x, const Value& bias) {
  if (w.size() != x.size()) throw std::invalid_argument("ad: affine size mismatch");
  if (w.empty()) return bias;
  auto start = [this](std::span<const Value> v) {
    bool contiguous = true;
    for (std::size_t i = 0; i < v.size() && contiguous; ++i) {
      contiguous = v[i].tape_ == this && v[i].id_ == v[0].id_ + i;
    }
    return contiguous ? v[0].id_ : gather(v)[0].id_;
  };
  Node n;
  n.op = Op::Affine;
  n.a = start(w);
  n.b = start(x);
  n.n = static_cast<std::uint32_t>(w.size());
  double acc = 0.0;
  if (bias.is_constant()) {
    n.k = bias.val_;
    acc = bias.val_;
  } else {
    n.c = as_node(bias);
    acc = bias.val_;
  }
  const Node* base = nodes_.data();
  for (std::uint32_t i = 0; i < n.n; ++i) acc += base[n.a + i].value * base[n.b + i].value;
  n.value = acc;
  return push(n);
}

Value Tape::dot(std::span<const Value> a, std::span<const Value> b) {
  if (a.size() != b.size()) throw std::invalid_argument("ad: dot size mismatch");
  Node n;
  n.op = Op::Dot;
  n.a = static_cast<std::uint32_t>(operands_.size());
  double constant = 0.0;
  double acc = 0.0;
  std::uint32_t pairs = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].is_constant() && b[i].is_constant()) {
      constant += a[i].val_ * b[i].val_;
      continue;
    }
    operands_.push_back(as_node(a[i]));
    operands_.push_back(as_node(b[i]));
    acc += a[i].val_ * b[i].val_;
    ++pairs;
  }
  if (pairs == 0) {
    operands_.resize(n.a);
    return Value(constant);
  }
  n.n = pairs;
  n.k = constant;
  n.value = acc + constant;
  return push(n);
}

Value Tape::sum(std::span<const Value> xs) {
  Node n;
  n.op = Op::Dot;
  n.a = static_cast<std::uint32_t>(operands_.size());
  double constant = 0.0;
  double acc = 0.0;
  std::uint32_t terms = 0;
  for (const Value& x : xs) {
    if (x.is_constant()) {
      constant += x.val_;
      continue;
    }
    operands_.push_back(as_node(x));
    operands_.push_back(kNoOperand);
    acc += x.val_;
    ++terms;
  }
  if (terms == 0) {
    operands_.resize(n.a);
    return Value(constant);
  }
  n.n = terms;
  n.k = constant;
  n.value = acc + constant;
  return push(n);
}

Value Tape::lincomb(std::span<const double> w, std::span<const Value> x, double k) {
  if (w.size() != x.size()) throw std::invalid_argument("ad: lincomb size mismatch");
  Node n;
  n.op = Op::Lincomb;
  n.a = static_cast<std::uint32_t>(operands_.size());
  n.b = static_cast<std::uint32_t>(coeffs_.size());
  double acc = 0.0;
  std::uint32_t terms = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].is_constant()) {
      k += w[i] * x[i].val_;
      continue;
    }
    operands_.push_back(as_node(x[i]));
    coeffs_.push_back(w[i]);
    acc += w[i] * x[i].val_;
    ++terms;
  }
  if (terms == 0) return Value(k);
  n.n = terms;
  n.k = k;
  n.value = acc + k;
  return push(n);
}

std::vector<double> Tape::backward(const Value& loss) const {
  if (loss.tape_ != this) throw std::invalid_argument("ad: loss not recorded on this tape");
  const std::size_t count = static_cast<std::size_t>(loss.id_) + 1;
  std::vector<double> adj(count, 0.0);
  adj[loss.id_] = 1.0;
  const Node* nd = nodes_.data();
  const std::uint32_t* ops = operands_.data();
  for (std::size_t ii = count; ii-- > 0;) {
    const double g = adj[ii];
    if (g == 0.0) continue;
    const Node& n = nd[ii];
    const auto id = static_cast<std::uint32_t>(ii);
    if (!std::isfinite(n.value)) {
      throw NonFiniteError(id, "ad: non-finite value at node " + std::to_string(id));
    }
    if (!std::isfinite(g)) {
      throw NonFiniteError(id, "ad: non-finite adjoint at node " + std::to_string(id));
    }
    switch (n.op) {
      case Op::Leaf: break;
      case Op::Identity:
      case Op::AddConst: adj[n.a] += g; break;
      case Op::Add:
        adj[n.a] += g;
        adj[n.b] += g;
        break;
      case Op::Sub:
        adj[n.a] += g;
        adj[n.b] -= g;
        break;
      case Op::Mul:
        adj[n.a] += g * nd[n.b].value;
        adj[n.b] += g * nd[n.a].value;
        break;
      case Op::Div:
        adj[n.a] += g / nd[n.b].value;
        adj[n.b] -= g * n.value / nd[n.b].value;
        break;
      case Op::Neg: adj[n.a] -= g; break;
      case Op::MulConst: adj[n.a] += g * n.k; break;
      case Op::ConstDiv: adj[n.a] -= g * n.value / nd[n.a].value; break;
      case Op::Square: adj[n.a] += 2.0 * g * nd[n.a].value; break;
      case Op::Sqrt: adj[n.a] += 0.5 * g / n.value; break;
      case Op::Exp: adj[n.a] += g * n.value; break;
      case Op::Log: adj[n.a] += g / nd[n.a].value; break;
      case Op::Tanh: adj[n.a] += g * (1.0 - n.value * n.value); break;
      case Op::Sigmoid: adj[n.a] += g * n.value * (1.0 - n.value); break;
      case Op::Affine: {
        double* aw = adj.data() + n.a;
        double* ax = adj.data() + n.b;
        const Node* w = nd + n.a;
        const Node* x = nd + n.b;
        for (std::uint32_t k = 0; k < n.n; ++k) {
          aw[k] += g * x[k].value;
          ax[k] += g * w[k].value;
        }
        if (n.c != kNoOperand) adj[n.c] += g;
        break;
      }
      case Op::Lincomb:
        for (std::uint32_t k = 0; k < n.n; ++k) adj[ops[n.a + k]] += g * coeffs_[n.b + k];
        break;
      case Op::Dot: {
        const std::uint32_t* p = ops + n.a;
        for (std::uint32_t k = 0; k < n.n; ++k) {
          const std::uint32_t lhs = p[2 * k];
          const std::uint32_t rhs = p[2 * k + 1];
          if (rhs == kNoOperand) {
            adj[lhs] += g;
          } else {
            adj[lhs] += g * nd[rhs].value;
            adj[rhs] += g * nd[lhs].value;
          }
        }
        break;
      }
    }
  }
  return adj;
}

std::vector<Value> Tape::grad(const Value& y, std::span<const Value> xs) {
  std::vector<Value> out(xs.size(), Value(0.0));
  if (y.is_constant()) return out;
  if (y.tape_ != this) throw std::invalid_argument("ad: output not recorded on this tape");

  std::uint32_t lo = y.id_;
  for (const Value& x : xs) {
    if (x.tape_ == this) lo = std::min(lo, x.id_);
  }
  const std::uint32_t hi = y.id_;
  const std::size_t span_len = static_cast<std::size_t>(hi - lo) + 1;

  // Forward dependency marking restricted to [lo, hi].
  std::vector<char> dep(span_len, 0);
  for (const Value& x : xs) {
    if (x.tape_ == this && x.id_ <= hi) dep[x.id_ - lo] = 1;
  }
  auto depends = [&](std::uint32_t id) {
    return id != kNoOperand && id >= lo && id <= hi && dep[id - lo];
  };
  for (std::uint32_t i = lo; i <= hi; ++i) {
    if (dep[i - lo]) continue;
    const Node& n = nodes_[i];
    bool d = false;
    switch (n.op) {
      case Op::Leaf: break;
      case Op::Affine:
        d = depends(n.c);
        for (std::uint32_t k = 0; k < n.n && !d; ++k) d = depends(n.a + k) || depends(n.b + k);
        break;
      case Op::Dot:
        for (std::uint32_t k = 0; k < n.n && !d; ++k) {
          d = depends(operands_[n.a + 2 * k]) || depends(operands_[n.a + 2 * k + 1]);
        }
        break;
      case Op::Lincomb:
        for (std::uint32_t k = 0; k < n.n && !d; ++k) d = depends(operands_[n.a + k]);
        break;
      default: d = depends(n.a) || depends(n.b);
    }
    dep[i - lo] = d ? 1 : 0;
  }

  struct Term {
    Value lhs;
    Value rhs;
    bool product;
  };
  std::vector<std::vector<Term>> pending(span_len);
  auto add = [&](std::uint32_t id, const Value& g) {
    if (depends(id)) pending[id - lo].push_back({g, Value(1.0), false});
  };
  auto add_product = [&](std::uint32_t id, const Value& g, const Value& f) {
    if (depends(id)) pending[id - lo].push_back({g, f, true});
  };

  auto materialize = [&](std::vector<Term>& terms) -> Value {
    if (terms.empty()) return Value(0.0);
    if (terms.size() == 1 && !terms[0].product) return terms[0].lhs;
    std::vector<Value> lhs;
    std::vector<Value> rhs;
    lhs.reserve(terms.size());
    rhs.reserve(terms.size());
    for (const Term& t : terms) {
      lhs.push_back(t.lhs);
      rhs.push_back(t.rhs);
    }
    return dot(lhs, rhs);
  };

  pending[hi - lo].push_back({Value(1.0), Value(1.0), false});
  auto node_value = [&](std::uint32_t id) { return Value(this, id, nodes_[id].value); };

  for (std::uint32_t i = hi + 1; i-- > lo;) {
    if (!dep[i - lo] || pending[i - lo].empty()) continue;
    const Value g = materialize(pending[i - lo]);
    pending[i - lo].clear();
    pending[i - lo].shrink_to_fit();
    for (std::size_t j = 0; j < xs.size(); ++j) {
      if (xs[j].tape_ == this && xs[j].id_ == i) out[j] = g;
    }
    // Copy: pushing new nodes below may reallocate nodes_.
    const Node n = nodes_[i];
    const Value self = node_value(i);
    switch (n.op) {
      case Op::Leaf: break;
      case Op::Identity:
      case Op::AddConst: add(n.a, g); break;
      case Op::Add:
        add(n.a, g);
        add(n.b, g);
        break;
      case Op::Sub:
        add(n.a, g);
        if (depends(n.b)) add(n.b, -g);
        break;
      case Op::Mul:
        add_product(n.a, g, node_value(n.b));
        add_product(n.b, g, node_value(n.a));
        break;
      case Op::Div:
        if (depends(n.a)) add(n.a, g / node_value(n.b));
        if (depends(n.b)) add(n.b, -(g * self) / node_value(n.b));
        break;
      case Op::Neg:
        if (depends(n.a)) add(n.a, -g);
        break;
      case Op::MulConst:
        if (depends(n.a)) add(n.a, g * n.k);
        break;
      case Op::ConstDiv:
        if (depends(n.a)) add(n.a, -(g * self) / node_value(n.a));
        break;
      case Op::Square:
        if (depends(n.a)) add_product(n.a, g, 2.0 * node_value(n.a));
        break;
      case Op::Sqrt:
        if (depends(n.a)) add(n.a, 0.5 * g / self);
        break;
      case Op::Exp: add_product(n.a, g, self); break;
      case Op::Log:
        if (depends(n.a)) add(n.a, g / node_value(n.a));
        break;
      case Op::Tanh:
        if (depends(n.a)) add_product(n.a, g, 1.0 - square(self));
        break;
      case Op::Sigmoid:
        if (depends(n.a)) add_product(n.a, g, self * (1.0 - self));
        break;
      case Op::Affine:
        for (std::uint32_t k = 0; k < n.n; ++k) {
          add_product(n.b + k, g, node_value(n.a + k));
          add_product(n.a + k, g, node_value(n.b + k));
        }
        if (n.c != kNoOperand) add(n.c, g);
        break;
      case Op::Lincomb:
        for (std::uint32_t k = 0; k < n.n; ++k) {
          const std::uint32_t id = operands_[n.a + k];
          if (depends(id)) add(id, g * coeffs_[n.b + k]);
        }
        break;
      case Op::Dot:
        for (std::uint32_t k = 0; k < n.n; ++k) {
          const std::uint32_t lhs = operands_[n.a + 2 * k];
          const std::uint32_t rhs = operands_[n.a + 2 * k + 1];
          if (rhs == kNoOperand) {
            add(lhs, g);
          } else {
            add_product(lhs, g, node_value(rhs));
            add_product(rhs, g, node_value(lhs));
          }
        }
        break;
    }
  }
  return out;
}

Value operator+(const Value& a, const Value& b) {
  Tape* t = common_tape(a, b);
  if (!t) return Value(a.value() + b.value());
  if (a.is_constant()) return t->unary(Op::AddConst, b, a.value());
  if (b.is_constant()) return t->unary(Op::AddConst, a, b.value());
  return t->binary(Op::Add, a, b);
}

Value operator-(const Value& a, const Value& b) {
  Tape* t = common_tape(a, b);
  if (!t) return Value(a.value() - b.value());
  if (a.is_constant()) return t->unary(Op::AddConst, t->unary(Op::Neg, b), a.value());
  if (b.is_constant()) return t->unary(Op::AddConst, a, -b.value());
  return t->binary(Op::Sub, a, b);
}

Value operator*(const Value& a, const Value& b) {
  Tape* t = common_tape(a, b);
  if (!t) return Value(a.value() * b.value());
  if (a.is_constant()) return t->unary(Op::MulConst, b, a.value());
  if (b.is_constant()) return t->unary(Op::MulConst, a, b.value());
  return t->binary(Op::Mul, a, b);
}

Value operator/(const Value& a, const Value& b) {
  Tape* t = common_tape(a, b);
  if (!t) return Value(a.value() / b.value());
  if (a.is_constant()) return t->unary(Op::ConstDiv, b, a.value());
  if (b.is_constant()) return t->unary(Op::MulConst, a, 1.0 / b.value());
  return t->binary(Op::Div, a, b);
}

Value operator-(const Value& a) {
  if (a.is_constant()) return Value(-a.value());
  return a.tape()->unary(Op::Neg, a);
}

Value exp(const Value& a) {
  return a.is_constant() ? Value(std::exp(a.value())) : a.tape()->unary(Op::Exp, a);
}
Value log(const Value& a) {
  return a.is_constant() ? Value(std::log(a.value())) : a.tape()->unary(Op::Log, a);
}
Value sqrt(const Value& a) {
  return a.is_constant() ? Value(std::sqrt(a.value())) : a.tape()->unary(Op::Sqrt, a);
}
Value tanh(const Value& a) {
  return a.is_constant() ? Value(std::tanh(a.value())) : a.tape()->unary(Op::Tanh, a);
}
Value sigmoid(const Value& a) {
  return a.is_constant() ? Value(sigmoid(a.value())) : a.tape()->unary(Op::Sigmoid, a);
}
Value square(const Value& a) {
  return a.is_constant() ? Value(a.value() * a.value()) : a.tape()->unary(Op::Square, a);
}

}  // namespace dlf::ad
