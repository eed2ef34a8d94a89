#pragma once

// Reverse-accumulation tape over vector-valued nodes.
//
// Every node holds a flat vector of doubles. Batched quantities use a
// row-major "rows x B" layout: row r occupies [r*B, (r+1)*B). With B == 1
// this is an ordinary column vector, so the same primitives serve single
// rollouts and batched one-step predictions.

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mdac::ad {

/// Smoothing radius of |x| and sign(x) inside recorded programs.
inline constexpr double kSmoothKappa = 1e-8;

enum class Op : std::uint8_t {
  kLeaf,
  kConst,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kScale,
  kShift,
  kPow,
  kExp,
  kLog,
  kTanh,
  kSin,
  kCos,
  kSqrt,
  kAbsSmooth,
  kSignSmooth,
  kSum,
  kSumRows,
  kSlice,
  kConcat,
  kBroadcastRows,
  kMatMul,
  kMatMulConst,
  kAddBias,
  kBMatVec,
  kBMatTVec,
};

const char* op_name(Op op);

/// Raised when a primitive produces NaN or infinity.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(int node, Op op);
  int node() const { return node_; }
  Op op() const { return op_; }

 private:
  int node_;
  Op op_;
};

class Tape;

/// Handle to a tape node. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  int size() const;
  std::span<const double> value() const;
  Eigen::VectorXd eval() const;
  double scalar() const { return value()[0]; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(const Eigen::Ref<const Eigen::VectorXd>& value);
  Var constant(const Eigen::Ref<const Eigen::VectorXd>& value);
  Var constant(double value);

  /// Copies a matrix into the tape; the returned id feeds matmul_const.
  int register_matrix(const Eigen::MatrixXd& m);
  const Eigen::MatrixXd& matrix(int id) const { return matrices_[id]; }

  // Node construction. Each call records the node and evaluates it.
  Var push(Op op, std::initializer_list<Var> inputs, int size, int i0 = 0,
           int i1 = 0, int i2 = 0, double c = 0.0);
  Var push(Op op, const std::vector<Var>& inputs, int size, int i0 = 0,
           int i1 = 0, int i2 = 0, double c = 0.0);

  std::size_t num_nodes() const { return nodes_.size(); }
  std::span<const double> value(int id) const;
  std::span<const double> adjoint(int id) const;
  int size(int id) const { return nodes_[id].size; }
  Op op(int id) const { return nodes_[id].op; }

  /// Reverse sweep from a scalar node. Adjoints of every node are reset.
  void backward(const Var& output);

  /// Overwrites leaf values (in creation order) and re-evaluates every node.
  void replay(const std::vector<Eigen::VectorXd>& leaf_values);

  std::vector<int> leaves() const { return leaves_; }

  /// Drops every node but keeps the allocated storage for the next recording.
  void clear();

 private:
  Var push_span(Op op, std::span<const Var> inputs, int size, int i0, int i1,
                int i2, double c);

  struct Node {
    Op op;
    int size;
    std::int64_t offset;
    int in_begin;
    int in_count;
    int i0, i1, i2;
    double c;
  };

  const Node& node(int id) const { return nodes_[id]; }
  int input(const Node& n, int k) const { return inputs_[n.in_begin + k]; }
  double* val(int id) { return values_.data() + nodes_[id].offset; }
  const double* val(int id) const { return values_.data() + nodes_[id].offset; }
  double* adj(int id) { return adjoints_.data() + nodes_[id].offset; }

  void forward(int id);
  void reverse(int id);

  std::vector<Node> nodes_;
  std::vector<int> inputs_;
  std::vector<double> values_;
  std::vector<double> adjoints_;
  std::vector<int> leaves_;
  std::vector<Eigen::MatrixXd> matrices_;
};

// ---- primitives --------------------------------------------------------
// Binary elementwise ops accept equal sizes or a size-1 operand (broadcast).

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator*(double s, const Var& a);
Var operator*(const Var& a, double s);
Var operator+(const Var& a, double s);
Var operator+(double s, const Var& a);
Var operator-(const Var& a, double s);
Var operator-(double s, const Var& a);
Var operator/(const Var& a, double s);
Var operator+(const Var& a, const Eigen::VectorXd& b);
Var operator+(const Eigen::VectorXd& a, const Var& b);
Var operator-(const Var& a, const Eigen::VectorXd& b);
Var operator-(const Eigen::VectorXd& a, const Var& b);

Var emul(const Var& a, const Var& b);
Var emul(const Var& a, const Eigen::VectorXd& b);
Var emul(const Eigen::VectorXd& a, const Var& b);
Var ediv(const Var& a, const Var& b);
Var ediv(double a, const Var& b);
Var vpow(const Var& base, const Var& exponent);
Var vexp(const Var& a);
Var vlog(const Var& a);
Var vtanh(const Var& a);
Var vsin(const Var& a);
Var vcos(const Var& a);
Var vsqrt(const Var& a);
/// sqrt(x^2 + kappa^2) - kappa.
Var vabs(const Var& a);
/// x / sqrt(x^2 + kappa^2).
Var vsign(const Var& a);
Var sum(const Var& a);
Var dot(const Var& a, const Var& b);
/// Per-column sum of a rows x B block -> B.
Var sum_rows(const Var& x, int rows, int batch);
Var slice(const Var& a, int start, int len);
Var concat(std::initializer_list<Var> parts);
Var concat(const std::vector<Var>& parts);
/// rows -> rows x B, repeating each entry along its row.
Var broadcast_rows(const Var& v, int batch);
/// W (rows x cols, row-major, flat) times X (cols x B) -> rows x B.
Var matmul(const Var& w, const Var& x, int rows, int cols, int batch);
Var matmul_const(int matrix_id, const Var& x, int batch);
/// X (rows x B) plus bias b (rows) broadcast along each row.
Var add_bias(const Var& x, const Var& b, int rows, int batch);
/// Per-column Y (n x d) times a (d) with Y stored as (n*d) x B.
Var bmatvec(const Var& y, const Var& a, int n, int d, int batch);
/// Per-column Y^T s with Y stored as (n*d) x B.
Var bmattvec(const Var& y, const Var& s, int n, int d, int batch);

/// Constant on the same tape as `like`.
Var lift(const Var& like, const Eigen::VectorXd& value);
Var lift(const Var& like, double value);
inline Var shift(const Var& v, double c) { return v + c; }
inline double scalar_of(const Var& v) { return v.scalar(); }

// ---- drivers -----------------------------------------------------------

/// A differentiable scalar computation of a flat parameter vector.
using Program = std::function<Var(const Var& params)>;

struct ValueAndGrad {
  double value;
  Eigen::VectorXd gradient;
};

ValueAndGrad value_and_grad(const Program& program,
                            const Eigen::VectorXd& params);

/// Plain forward evaluation (records a throwaway tape).
double evaluate(const Program& program, const Eigen::VectorXd& params);

/// Central-difference gradient of the program.
Eigen::VectorXd finite_difference_gradient(const Program& program,
                                           const Eigen::VectorXd& params,
                                           double step,
                                           std::span<const int> coords = {});

/// max_i |g_i - fd_i| / max(1, |fd_i|) over the probed coordinates (all when
/// `coords` is empty).
double grad_check(const Program& program, const Eigen::VectorXd& params,
                  double step, std::span<const int> coords = {});

}  // namespace mdac::ad
