#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dlf::ad {

class Tape;

enum class Op : std::uint8_t {
  Leaf,
  Identity,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  AddConst,
  MulConst,
  ConstDiv,  // k / a
  Square,
  Sqrt,
  Exp,
  Log,
  Tanh,
  Sigmoid,
  Affine,  // bias + sum_k w[a+k] * x[b+k], contiguous id ranges
  Dot,     // sum over operand pairs, second id may be kNoOperand
  Lincomb, // k + sum_i coeffs[b+i] * operands[a+i]
};

/// Thrown when a forward value or adjoint is NaN/Inf. Carries the node id.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::uint32_t node, const std::string& what)
      : std::runtime_error(what), node_(node) {}
  std::uint32_t node() const { return node_; }

 private:
  std::uint32_t node_;
};

/// Scalar handle into a Tape. A Value without a tape is a plain constant, so
/// generic code can freely mix `double` and `Value`.
class Value {
 public:
  Value() = default;
  Value(double constant) : val_(constant) {}  // NOLINT(implicit)

  double value() const { return val_; }
  bool is_constant() const { return tape_ == nullptr; }
  Tape* tape() const { return tape_; }
  std::uint32_t id() const { return id_; }

 private:
  friend class Tape;
  Value(Tape* tape, std::uint32_t id, double v) : tape_(tape), id_(id), val_(v) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
  double val_ = 0.0;
};

/// Append-only Wengert list. Nodes are recorded in creation order, which is a
/// topological order, so reverse passes are a single backwards sweep.
class Tape {
 public:
  static constexpr std::uint32_t kNoOperand = 0xffffffffu;

  struct Node {
    double value = 0.0;
    double k = 0.0;
    std::uint32_t a = kNoOperand;
    std::uint32_t b = kNoOperand;
    std::uint32_t c = kNoOperand;
    std::uint32_t n = 0;
    Op op = Op::Leaf;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Value variable(double v);
  /// Leaves with consecutive ids, in order.
  std::vector<Value> variables(std::span<const double> vs);

  std::size_t size() const { return nodes_.size(); }
  void clear();
  void reserve(std::size_t nodes) { nodes_.reserve(nodes); }
  const Node& node(std::uint32_t id) const { return nodes_[id]; }

  /// Returns `xs` unchanged when it already occupies consecutive tape ids,
  /// otherwise copies it into fresh consecutive nodes.
  std::vector<Value> gather(std::span<const Value> xs);

  /// bias + <w, x>. Both ranges must have equal length; they are gathered to
  /// consecutive ids when needed.
  Value affine(std::span<const Value> w, std::span<const Value> x, const Value& bias);
  Value dot(std::span<const Value> a, std::span<const Value> b);
  Value sum(std::span<const Value> xs);
  /// k + sum_i w[i] x[i] with constant weights, as a single node.
  Value lincomb(std::span<const double> w, std::span<const Value> x, double k = 0.0);

  /// Reverse sweep seeded with d(loss)/d(loss) = 1. The returned adjoint
  /// vector is indexed by node id and sized loss.id() + 1.
  std::vector<double> backward(const Value& loss) const;

  /// Gradient of `y` w.r.t. each of `xs`, recorded on this tape so that it can
  /// be differentiated again. Only nodes that depend on `xs` get adjoints.
  std::vector<Value> grad(const Value& y, std::span<const Value> xs);

  // Node constructors used by the free operators.
  Value unary(Op op, const Value& a, double k = 0.0);
  Value binary(Op op, const Value& a, const Value& b);

 private:
  Value push(Node n);
  std::uint32_t as_node(const Value& v);

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> operands_;
  std::vector<double> coeffs_;
};

Value operator+(const Value& a, const Value& b);
Value operator-(const Value& a, const Value& b);
Value operator*(const Value& a, const Value& b);
Value operator/(const Value& a, const Value& b);
Value operator-(const Value& a);
inline Value& operator+=(Value& a, const Value& b) { return a = a + b; }
inline Value& operator-=(Value& a, const Value& b) { return a = a - b; }
inline Value& operator*=(Value& a, const Value& b) { return a = a * b; }
inline Value& operator/=(Value& a, const Value& b) { return a = a / b; }

Value exp(const Value& a);
Value log(const Value& a);
Value sqrt(const Value& a);
Value tanh(const Value& a);
Value sigmoid(const Value& a);
Value square(const Value& a);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double square(double x) { return x * x; }
inline double value_of(double x) { return x; }
inline double value_of(const Value& x) { return x.value(); }

}  // namespace dlf::ad
