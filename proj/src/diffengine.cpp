#include "mdac/diffengine.hpp"

#include <algorithm>
#include <cmath>

namespace mdac::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;
using CMapRow = Eigen::Map<const RowMat>;
using MapRow = Eigen::Map<RowMat>;
using CMapVec = Eigen::Map<const Eigen::VectorXd>;
using MapVec = Eigen::Map<Eigen::VectorXd>;

int broadcast_size(const Var& a, const Var& b) {
  const int na = a.size();
  const int nb = b.size();
  if (na == nb || nb == 1) return na;
  if (na == 1) return nb;
  throw std::invalid_argument("elementwise size mismatch: " +
                              std::to_string(na) + " vs " +
                              std::to_string(nb));
}

Tape* tape_of(const Var& a) {
  if (a.tape() == nullptr) throw std::invalid_argument("unbound Var");
  return a.tape();
}

Tape* tape_of(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) throw std::invalid_argument("Vars on different tapes");
  return tape_of(a);
}

// Accumulate g (length n) into a broadcastable adjoint of length na.
void accumulate(double* dst, int na, const double* g, int n, double scale) {
  if (na == n) {
    for (int i = 0; i < n; ++i) dst[i] += scale * g[i];
  } else {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += g[i];
    dst[0] += scale * s;
  }
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kConst: return "const";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kNeg: return "neg";
    case Op::kScale: return "scale";
    case Op::kShift: return "shift";
    case Op::kPow: return "pow";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kTanh: return "tanh";
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kSqrt: return "sqrt";
    case Op::kAbsSmooth: return "abs_smooth";
    case Op::kSignSmooth: return "sign_smooth";
    case Op::kSum: return "sum";
    case Op::kSumRows: return "sum_rows";
    case Op::kSlice: return "slice";
    case Op::kConcat: return "concat";
    case Op::kBroadcastRows: return "broadcast_rows";
    case Op::kMatMul: return "matmul";
    case Op::kMatMulConst: return "matmul_const";
    case Op::kAddBias: return "add_bias";
    case Op::kBMatVec: return "bmatvec";
    case Op::kBMatTVec: return "bmattvec";
  }
  return "?";
}

NonFiniteError::NonFiniteError(int node, Op op)
    : std::runtime_error("non-finite value at tape node " +
                         std::to_string(node) + " (" + op_name(op) + ")"),
      node_(node),
      op_(op) {}

int Var::size() const { return tape_->size(id_); }

std::span<const double> Var::value() const { return tape_->value(id_); }

Eigen::VectorXd Var::eval() const {
  auto v = value();
  return CMapVec(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::span<const double> Tape::value(int id) const {
  return {val(id), static_cast<std::size_t>(nodes_[id].size)};
}

std::span<const double> Tape::adjoint(int id) const {
  if (adjoints_.size() < values_.size()) return {};
  return {adjoints_.data() + nodes_[id].offset,
          static_cast<std::size_t>(nodes_[id].size)};
}

Var Tape::leaf(const Eigen::Ref<const Eigen::VectorXd>& value) {
  Var v = push(Op::kLeaf, {}, static_cast<int>(value.size()));
  std::copy(value.data(), value.data() + value.size(), val(v.id()));
  leaves_.push_back(v.id());
  forward(v.id());
  return v;
}

Var Tape::constant(const Eigen::Ref<const Eigen::VectorXd>& value) {
  Var v = push(Op::kConst, {}, static_cast<int>(value.size()));
  std::copy(value.data(), value.data() + value.size(), val(v.id()));
  forward(v.id());
  return v;
}

Var Tape::constant(double value) {
  Var v = push(Op::kConst, {}, 1);
  *val(v.id()) = value;
  forward(v.id());
  return v;
}

int Tape::register_matrix(const Eigen::MatrixXd& m) {
  matrices_.push_back(m);
  return static_cast<int>(matrices_.size()) - 1;
}

Var Tape::push(Op op, std::initializer_list<Var> inputs, int size, int i0,
               int i1, int i2, double c) {
  return push_span(op, std::span<const Var>(inputs.begin(), inputs.size()), size, i0, i1,
                   i2, c);
}

Var Tape::push(Op op, const std::vector<Var>& inputs, int size, int i0, int i1,
               int i2, double c) {
  return push_span(op, std::span<const Var>(inputs), size, i0, i1, i2, c);
}

Var Tape::push_span(Op op, std::span<const Var> inputs, int size, int i0, int i1,
                    int i2, double c) {
  Node n{};
  n.op = op;
  n.size = size;
  n.offset = static_cast<std::int64_t>(values_.size());
  n.in_begin = static_cast<int>(inputs_.size());
  n.in_count = static_cast<int>(inputs.size());
  n.i0 = i0;
  n.i1 = i1;
  n.i2 = i2;
  n.c = c;
  for (const Var& v : inputs) {
    if (v.tape() != this) throw std::invalid_argument("input from another tape");
    inputs_.push_back(v.id());
  }
  values_.resize(values_.size() + static_cast<std::size_t>(size), 0.0);
  nodes_.push_back(n);
  const int id = static_cast<int>(nodes_.size()) - 1;
  if (op != Op::kLeaf && op != Op::kConst) forward(id);
  return Var(this, id);
}

void Tape::forward(int id) {
  const Node& n = nodes_[id];
  double* y = val(id);
  const int size = n.size;
  auto in = [&](int k) { return val(input(n, k)); };
  auto in_size = [&](int k) { return nodes_[input(n, k)].size; };

  switch (n.op) {
    case Op::kLeaf:
    case Op::kConst:
      break;
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv:
    case Op::kPow: {
      const double* a = in(0);
      const double* b = in(1);
      const int sa = in_size(0) == 1 ? 0 : 1;
      const int sb = in_size(1) == 1 ? 0 : 1;
      for (int i = 0; i < size; ++i) {
        const double x = a[i * sa];
        const double z = b[i * sb];
        switch (n.op) {
          case Op::kAdd: y[i] = x + z; break;
          case Op::kSub: y[i] = x - z; break;
          case Op::kMul: y[i] = x * z; break;
          case Op::kDiv: y[i] = x / z; break;
          default: y[i] = std::pow(x, z); break;
        }
      }
      break;
    }
    case Op::kNeg: {
      const double* a = in(0);
      for (int i = 0; i < size; ++i) y[i] = -a[i];
      break;
    }
    case Op::kScale: {
      const double* a = in(0);
      for (int i = 0; i < size; ++i) y[i] = n.c * a[i];
      break;
    }
    case Op::kShift: {
      const double* a = in(0);
      for (int i = 0; i < size; ++i) y[i] = a[i] + n.c;
      break;
    }
    case Op::kExp: {
      const double* a = in(0);
      for (int i = 0; i < size; ++i) y[i] = std::exp(a[i]);
      break;
    }
    case Op::kLog: {
      const double* a = in(0);
      for (int i = 0; i < size; ++i) y[i] = std::log(a[i]);
      break;
    }
    case Op::kTanh: {
      const double* a = in(0);
      for (int i = 0; i < size; ++i) y[i] = std::tanh(a[i]);
      break;
    }
    case Op::kSin: {
      const double* a = in(0);
      for (int i = 0; i < size; ++i) y[i] = std::sin(a[i]);
      break;
    }
    case Op::kCos: {
      const double* a = in(0);
      for (int i = 0; i < size; ++i) y[i] = std::cos(a[i]);
      break;
    }
    case Op::kSqrt: {
      const double* a = in(0);
      for (int i = 0; i < size; ++i) y[i] = std::sqrt(a[i]);
      break;
    }
    case Op::kAbsSmooth: {
      const double* a = in(0);
      for (int i = 0; i < size; ++i)
        y[i] = std::sqrt(a[i] * a[i] + n.c * n.c) - n.c;
      break;
    }
    case Op::kSignSmooth: {
      const double* a = in(0);
      for (int i = 0; i < size; ++i)
        y[i] = a[i] / std::sqrt(a[i] * a[i] + n.c * n.c);
      break;
    }
    case Op::kSum: {
      const double* a = in(0);
      double s = 0.0;
      for (int i = 0; i < in_size(0); ++i) s += a[i];
      y[0] = s;
      break;
    }
    case Op::kSumRows: {
      const double* a = in(0);
      const int rows = n.i0;
      const int batch = n.i2;
      for (int b = 0; b < batch; ++b) y[b] = 0.0;
      for (int r = 0; r < rows; ++r)
        for (int b = 0; b < batch; ++b) y[b] += a[r * batch + b];
      break;
    }
    case Op::kSlice: {
      const double* a = in(0);
      std::copy(a + n.i0, a + n.i0 + size, y);
      break;
    }
    case Op::kConcat: {
      int off = 0;
      for (int k = 0; k < n.in_count; ++k) {
        const int len = in_size(k);
        std::copy(in(k), in(k) + len, y + off);
        off += len;
      }
      break;
    }
    case Op::kBroadcastRows: {
      const double* a = in(0);
      const int rows = n.i0;
      const int batch = n.i2;
      for (int r = 0; r < rows; ++r)
        for (int b = 0; b < batch; ++b) y[r * batch + b] = a[r];
      break;
    }
    case Op::kMatMul: {
      const int rows = n.i0, cols = n.i1, batch = n.i2;
      CMapRow w(in(0), rows, cols);
      CMapRow x(in(1), cols, batch);
      MapRow out(y, rows, batch);
      out.noalias() = w * x;
      break;
    }
    case Op::kMatMulConst: {
      const Eigen::MatrixXd& w = matrices_[n.i0];
      const int batch = n.i2;
      CMapRow x(in(0), w.cols(), batch);
      MapRow out(y, w.rows(), batch);
      out.noalias() = w * x;
      break;
    }
    case Op::kAddBias: {
      const double* x = in(0);
      const double* bias = in(1);
      const int rows = n.i0, batch = n.i2;
      for (int r = 0; r < rows; ++r)
        for (int b = 0; b < batch; ++b)
          y[r * batch + b] = x[r * batch + b] + bias[r];
      break;
    }
    case Op::kBMatVec: {
      const double* ym = in(0);
      const double* a = in(1);
      const int nn = n.i0, d = n.i1, batch = n.i2;
      for (int i = 0; i < nn; ++i)
        for (int b = 0; b < batch; ++b) {
          double s = 0.0;
          for (int k = 0; k < d; ++k) s += ym[(i * d + k) * batch + b] * a[k * batch + b];
          y[i * batch + b] = s;
        }
      break;
    }
    case Op::kBMatTVec: {
      const double* ym = in(0);
      const double* s = in(1);
      const int nn = n.i0, d = n.i1, batch = n.i2;
      for (int k = 0; k < d; ++k)
        for (int b = 0; b < batch; ++b) {
          double acc = 0.0;
          for (int i = 0; i < nn; ++i) acc += ym[(i * d + k) * batch + b] * s[i * batch + b];
          y[k * batch + b] = acc;
        }
      break;
    }
  }

  for (int i = 0; i < size; ++i) {
    if (!std::isfinite(y[i])) throw NonFiniteError(id, n.op);
  }
}

void Tape::reverse(int id) {
  const Node& n = nodes_[id];
  const double* g = adj(id);
  const double* y = val(id);
  const int size = n.size;
  auto in = [&](int k) { return val(input(n, k)); };
  auto gin = [&](int k) { return adj(input(n, k)); };
  auto in_size = [&](int k) { return nodes_[input(n, k)].size; };

  switch (n.op) {
    case Op::kLeaf:
    case Op::kConst:
      break;
    case Op::kAdd:
      accumulate(gin(0), in_size(0), g, size, 1.0);
      accumulate(gin(1), in_size(1), g, size, 1.0);
      break;
    case Op::kSub:
      accumulate(gin(0), in_size(0), g, size, 1.0);
      accumulate(gin(1), in_size(1), g, size, -1.0);
      break;
    case Op::kMul:
    case Op::kDiv:
    case Op::kPow: {
      const double* a = in(0);
      const double* b = in(1);
      double* ga = gin(0);
      double* gb = gin(1);
      const int sa = in_size(0) == 1 ? 0 : 1;
      const int sb = in_size(1) == 1 ? 0 : 1;
      for (int i = 0; i < size; ++i) {
        const double x = a[i * sa];
        const double z = b[i * sb];
        double dx = 0.0;
        double dz = 0.0;
        if (n.op == Op::kMul) {
          dx = z;
          dz = x;
        } else if (n.op == Op::kDiv) {
          dx = 1.0 / z;
          dz = -x / (z * z);
        } else {
          // x^z at x == 0: the one-sided limits are taken as zero.
          if (x != 0.0) {
            dx = z * std::pow(x, z - 1.0);
            dz = y[i] * std::log(x);
          }
        }
        ga[i * sa] += g[i] * dx;
        gb[i * sb] += g[i] * dz;
      }
      break;
    }
    case Op::kNeg: {
      double* ga = gin(0);
      for (int i = 0; i < size; ++i) ga[i] -= g[i];
      break;
    }
    case Op::kScale: {
      double* ga = gin(0);
      for (int i = 0; i < size; ++i) ga[i] += n.c * g[i];
      break;
    }
    case Op::kShift: {
      double* ga = gin(0);
      for (int i = 0; i < size; ++i) ga[i] += g[i];
      break;
    }
    case Op::kExp: {
      double* ga = gin(0);
      for (int i = 0; i < size; ++i) ga[i] += g[i] * y[i];
      break;
    }
    case Op::kLog: {
      const double* a = in(0);
      double* ga = gin(0);
      for (int i = 0; i < size; ++i) ga[i] += g[i] / a[i];
      break;
    }
    case Op::kTanh: {
      double* ga = gin(0);
      for (int i = 0; i < size; ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
      break;
    }
    case Op::kSin: {
      const double* a = in(0);
      double* ga = gin(0);
      for (int i = 0; i < size; ++i) ga[i] += g[i] * std::cos(a[i]);
      break;
    }
    case Op::kCos: {
      const double* a = in(0);
      double* ga = gin(0);
      for (int i = 0; i < size; ++i) ga[i] -= g[i] * std::sin(a[i]);
      break;
    }
    case Op::kSqrt: {
      double* ga = gin(0);
      for (int i = 0; i < size; ++i)
        if (y[i] != 0.0) ga[i] += g[i] / (2.0 * y[i]);
      break;
    }
    case Op::kAbsSmooth: {
      const double* a = in(0);
      double* ga = gin(0);
      for (int i = 0; i < size; ++i)
        ga[i] += g[i] * a[i] / std::sqrt(a[i] * a[i] + n.c * n.c);
      break;
    }
    case Op::kSignSmooth: {
      const double* a = in(0);
      double* ga = gin(0);
      const double k2 = n.c * n.c;
      for (int i = 0; i < size; ++i) {
        const double r = a[i] * a[i] + k2;
        ga[i] += g[i] * k2 / (r * std::sqrt(r));
      }
      break;
    }
    case Op::kSum: {
      double* ga = gin(0);
      for (int i = 0; i < in_size(0); ++i) ga[i] += g[0];
      break;
    }
    case Op::kSumRows: {
      double* ga = gin(0);
      const int rows = n.i0, batch = n.i2;
      for (int r = 0; r < rows; ++r)
        for (int b = 0; b < batch; ++b) ga[r * batch + b] += g[b];
      break;
    }
    case Op::kSlice: {
      double* ga = gin(0) + n.i0;
      for (int i = 0; i < size; ++i) ga[i] += g[i];
      break;
    }
    case Op::kConcat: {
      int off = 0;
      for (int k = 0; k < n.in_count; ++k) {
        const int len = in_size(k);
        double* ga = gin(k);
        for (int i = 0; i < len; ++i) ga[i] += g[off + i];
        off += len;
      }
      break;
    }
    case Op::kBroadcastRows: {
      double* ga = gin(0);
      const int rows = n.i0, batch = n.i2;
      for (int r = 0; r < rows; ++r) {
        double s = 0.0;
        for (int b = 0; b < batch; ++b) s += g[r * batch + b];
        ga[r] += s;
      }
      break;
    }
    case Op::kMatMul: {
      const int rows = n.i0, cols = n.i1, batch = n.i2;
      CMapRow w(in(0), rows, cols);
      CMapRow x(in(1), cols, batch);
      CMapRow gy(g, rows, batch);
      MapRow gw(gin(0), rows, cols);
      MapRow gx(gin(1), cols, batch);
      gw.noalias() += gy * x.transpose();
      gx.noalias() += w.transpose() * gy;
      break;
    }
    case Op::kMatMulConst: {
      const Eigen::MatrixXd& w = matrices_[n.i0];
      const int batch = n.i2;
      CMapRow gy(g, w.rows(), batch);
      MapRow gx(gin(0), w.cols(), batch);
      gx.noalias() += w.transpose() * gy;
      break;
    }
    case Op::kAddBias: {
      double* gx = gin(0);
      double* gb = gin(1);
      const int rows = n.i0, batch = n.i2;
      for (int r = 0; r < rows; ++r) {
        double s = 0.0;
        for (int b = 0; b < batch; ++b) {
          gx[r * batch + b] += g[r * batch + b];
          s += g[r * batch + b];
        }
        gb[r] += s;
      }
      break;
    }
    case Op::kBMatVec: {
      const double* ym = in(0);
      const double* a = in(1);
      double* gy = gin(0);
      double* ga = gin(1);
      const int nn = n.i0, d = n.i1, batch = n.i2;
      for (int i = 0; i < nn; ++i)
        for (int k = 0; k < d; ++k)
          for (int b = 0; b < batch; ++b) {
            const double gi = g[i * batch + b];
            gy[(i * d + k) * batch + b] += gi * a[k * batch + b];
            ga[k * batch + b] += gi * ym[(i * d + k) * batch + b];
          }
      break;
    }
    case Op::kBMatTVec: {
      const double* ym = in(0);
      const double* s = in(1);
      double* gy = gin(0);
      double* gs = gin(1);
      const int nn = n.i0, d = n.i1, batch = n.i2;
      for (int i = 0; i < nn; ++i)
        for (int k = 0; k < d; ++k)
          for (int b = 0; b < batch; ++b) {
            const double gk = g[k * batch + b];
            gy[(i * d + k) * batch + b] += gk * s[i * batch + b];
            gs[i * batch + b] += gk * ym[(i * d + k) * batch + b];
          }
      break;
    }
  }
}

void Tape::clear() {
  nodes_.clear();
  inputs_.clear();
  values_.clear();
  adjoints_.clear();
  leaves_.clear();
  matrices_.clear();
}

void Tape::backward(const Var& output) {
  if (output.tape() != this) throw std::invalid_argument("output from another tape");
  if (output.size() != 1) throw std::invalid_argument("backward needs a scalar output");
  adjoints_.assign(values_.size(), 0.0);
  adj(output.id())[0] = 1.0;
  for (int id = output.id(); id >= 0; --id) reverse(id);
}

void Tape::replay(const std::vector<Eigen::VectorXd>& leaf_values) {
  if (leaf_values.size() != leaves_.size())
    throw std::invalid_argument("replay: leaf count mismatch");
  for (std::size_t k = 0; k < leaves_.size(); ++k) {
    const int id = leaves_[k];
    if (leaf_values[k].size() != nodes_[id].size)
      throw std::invalid_argument("replay: leaf size mismatch");
    std::copy(leaf_values[k].data(), leaf_values[k].data() + nodes_[id].size,
              val(id));
  }
  for (int id = 0; id < static_cast<int>(nodes_.size()); ++id) forward(id);
}

// ---- primitives --------------------------------------------------------

Var operator+(const Var& a, const Var& b) {
  return tape_of(a, b)->push(Op::kAdd, {a, b}, broadcast_size(a, b));
}
Var operator-(const Var& a, const Var& b) {
  return tape_of(a, b)->push(Op::kSub, {a, b}, broadcast_size(a, b));
}
Var operator-(const Var& a) { return tape_of(a)->push(Op::kNeg, {a}, a.size()); }
Var operator*(double s, const Var& a) {
  return tape_of(a)->push(Op::kScale, {a}, a.size(), 0, 0, 0, s);
}
Var operator*(const Var& a, double s) { return s * a; }
Var operator+(const Var& a, double s) {
  return tape_of(a)->push(Op::kShift, {a}, a.size(), 0, 0, 0, s);
}
Var operator+(double s, const Var& a) { return a + s; }
Var operator-(const Var& a, double s) { return a + (-s); }
Var operator-(double s, const Var& a) { return (-a) + s; }
Var operator/(const Var& a, double s) { return (1.0 / s) * a; }
Var operator+(const Var& a, const Eigen::VectorXd& b) { return a + lift(a, b); }
Var operator+(const Eigen::VectorXd& a, const Var& b) { return lift(b, a) + b; }
Var operator-(const Var& a, const Eigen::VectorXd& b) { return a - lift(a, b); }
Var operator-(const Eigen::VectorXd& a, const Var& b) { return lift(b, a) - b; }

Var emul(const Var& a, const Var& b) {
  return tape_of(a, b)->push(Op::kMul, {a, b}, broadcast_size(a, b));
}
Var emul(const Var& a, const Eigen::VectorXd& b) { return emul(a, lift(a, b)); }
Var emul(const Eigen::VectorXd& a, const Var& b) { return emul(lift(b, a), b); }
Var ediv(const Var& a, const Var& b) {
  return tape_of(a, b)->push(Op::kDiv, {a, b}, broadcast_size(a, b));
}
Var ediv(double a, const Var& b) {
  return ediv(tape_of(b)->constant(a), b);
}
Var vpow(const Var& base, const Var& exponent) {
  return tape_of(base, exponent)
      ->push(Op::kPow, {base, exponent}, broadcast_size(base, exponent));
}
Var vexp(const Var& a) { return tape_of(a)->push(Op::kExp, {a}, a.size()); }
Var vlog(const Var& a) { return tape_of(a)->push(Op::kLog, {a}, a.size()); }
Var vtanh(const Var& a) { return tape_of(a)->push(Op::kTanh, {a}, a.size()); }
Var vsin(const Var& a) { return tape_of(a)->push(Op::kSin, {a}, a.size()); }
Var vcos(const Var& a) { return tape_of(a)->push(Op::kCos, {a}, a.size()); }
Var vsqrt(const Var& a) { return tape_of(a)->push(Op::kSqrt, {a}, a.size()); }
Var vabs(const Var& a) {
  return tape_of(a)->push(Op::kAbsSmooth, {a}, a.size(), 0, 0, 0, kSmoothKappa);
}
Var vsign(const Var& a) {
  return tape_of(a)->push(Op::kSignSmooth, {a}, a.size(), 0, 0, 0, kSmoothKappa);
}
Var sum(const Var& a) { return tape_of(a)->push(Op::kSum, {a}, 1); }
Var dot(const Var& a, const Var& b) { return sum(emul(a, b)); }

Var sum_rows(const Var& x, int rows, int batch) {
  if (x.size() != rows * batch) throw std::invalid_argument("sum_rows: shape");
  return tape_of(x)->push(Op::kSumRows, {x}, batch, rows, 0, batch);
}

Var slice(const Var& a, int start, int len) {
  if (start < 0 || len < 0 || start + len > a.size())
    throw std::invalid_argument("slice out of range");
  return tape_of(a)->push(Op::kSlice, {a}, len, start);
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat of nothing");
  int total = 0;
  for (const Var& p : parts) {
    tape_of(parts.front(), p);
    total += p.size();
  }
  return parts.front().tape()->push(Op::kConcat, parts, total);
}

Var concat(std::initializer_list<Var> parts) {
  return concat(std::vector<Var>(parts));
}

Var broadcast_rows(const Var& v, int batch) {
  if (batch == 1) return v;
  return tape_of(v)->push(Op::kBroadcastRows, {v}, v.size() * batch, v.size(),
                          0, batch);
}

Var matmul(const Var& w, const Var& x, int rows, int cols, int batch) {
  if (w.size() != rows * cols || x.size() != cols * batch)
    throw std::invalid_argument("matmul: shape mismatch");
  return tape_of(w, x)->push(Op::kMatMul, {w, x}, rows * batch, rows, cols,
                             batch);
}

Var matmul_const(int matrix_id, const Var& x, int batch) {
  Tape* t = tape_of(x);
  const Eigen::MatrixXd& w = t->matrix(matrix_id);
  if (x.size() != w.cols() * batch)
    throw std::invalid_argument("matmul_const: shape mismatch");
  return t->push(Op::kMatMulConst, {x}, static_cast<int>(w.rows()) * batch,
                 matrix_id, 0, batch);
}

Var add_bias(const Var& x, const Var& b, int rows, int batch) {
  if (x.size() != rows * batch || b.size() != rows)
    throw std::invalid_argument("add_bias: shape mismatch");
  return tape_of(x, b)->push(Op::kAddBias, {x, b}, rows * batch, rows, 0,
                             batch);
}

Var bmatvec(const Var& y, const Var& a, int n, int d, int batch) {
  if (y.size() != n * d * batch || a.size() != d * batch)
    throw std::invalid_argument("bmatvec: shape mismatch");
  return tape_of(y, a)->push(Op::kBMatVec, {y, a}, n * batch, n, d, batch);
}

Var bmattvec(const Var& y, const Var& s, int n, int d, int batch) {
  if (y.size() != n * d * batch || s.size() != n * batch)
    throw std::invalid_argument("bmattvec: shape mismatch");
  return tape_of(y, s)->push(Op::kBMatTVec, {y, s}, d * batch, n, d, batch);
}

Var lift(const Var& like, const Eigen::VectorXd& value) {
  return tape_of(like)->constant(value);
}

Var lift(const Var& like, double value) { return tape_of(like)->constant(value); }

// ---- drivers -----------------------------------------------------------

ValueAndGrad value_and_grad(const Program& program,
                            const Eigen::VectorXd& params) {
  Tape tape;
  Var x = tape.leaf(params);
  Var out = program(x);
  if (out.size() != 1) throw std::invalid_argument("program must return a scalar");
  tape.backward(out);
  auto g = tape.adjoint(x.id());
  return {out.scalar(), CMapVec(g.data(), params.size())};
}

double evaluate(const Program& program, const Eigen::VectorXd& params) {
  Tape tape;
  return program(tape.leaf(params)).scalar();
}

Eigen::VectorXd finite_difference_gradient(const Program& program,
                                           const Eigen::VectorXd& params,
                                           double step,
                                           std::span<const int> coords) {
  if (!(step > 0.0)) throw std::invalid_argument("finite difference step must be > 0");
  Eigen::VectorXd fd = Eigen::VectorXd::Zero(params.size());
  std::vector<int> idx(coords.begin(), coords.end());
  if (idx.empty()) {
    idx.resize(static_cast<std::size_t>(params.size()));
    for (int i = 0; i < params.size(); ++i) idx[static_cast<std::size_t>(i)] = i;
  }
  for (int i : idx) {
    Eigen::VectorXd xp = params;
    Eigen::VectorXd xm = params;
    xp[i] += step;
    xm[i] -= step;
    fd[i] = (evaluate(program, xp) - evaluate(program, xm)) / (2.0 * step);
  }
  return fd;
}

double grad_check(const Program& program, const Eigen::VectorXd& params,
                  double step, std::span<const int> coords) {
  const Eigen::VectorXd g = value_and_grad(program, params).gradient;
  const Eigen::VectorXd fd =
      finite_difference_gradient(program, params, step, coords);
  std::vector<int> idx(coords.begin(), coords.end());
  if (idx.empty())
    for (int i = 0; i < params.size(); ++i) idx.push_back(i);
  double worst = 0.0;
  for (int i : idx) {
    worst = std::max(worst, std::abs(g[i] - fd[i]) / std::max(1.0, std::abs(fd[i])));
  }
  return worst;
}

}  // namespace mdac::ad
