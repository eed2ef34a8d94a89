#pragma once

// Double-precision counterparts of the tape primitives. Templated numerics
// call these unqualified so the same source runs on Eigen::VectorXd and on
// ad::Var.

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace mdac {

using Vec = Eigen::VectorXd;

inline Vec slice(const Vec& a, int start, int len) { return a.segment(start, len); }

inline Vec concat(const std::vector<Vec>& parts) {
  Eigen::Index n = 0;
  for (const Vec& p : parts) n += p.size();
  Vec out(n);
  Eigen::Index off = 0;
  for (const Vec& p : parts) {
    out.segment(off, p.size()) = p;
    off += p.size();
  }
  return out;
}

inline Vec concat(std::initializer_list<Vec> parts) {
  return concat(std::vector<Vec>(parts));
}

inline Vec emul(const Vec& a, const Vec& b) {
  if (a.size() == 1) return a[0] * b;
  if (b.size() == 1) return b[0] * a;
  return a.cwiseProduct(b);
}
inline Vec ediv(const Vec& a, const Vec& b) {
  if (b.size() == 1) return a / b[0];
  if (a.size() == 1) return a[0] * b.cwiseInverse();
  return a.cwiseQuotient(b);
}
inline Vec ediv(double a, const Vec& b) { return a * b.cwiseInverse(); }

inline Vec vpow(const Vec& base, const Vec& exponent) {
  const Eigen::Index n = std::max(base.size(), exponent.size());
  Vec out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out[i] = std::pow(base[base.size() == 1 ? 0 : i],
                      exponent[exponent.size() == 1 ? 0 : i]);
  }
  return out;
}
inline Vec vexp(const Vec& a) { return a.array().exp().matrix(); }
inline Vec vlog(const Vec& a) { return a.array().log().matrix(); }
inline Vec vtanh(const Vec& a) { return a.array().tanh().matrix(); }
inline Vec vsin(const Vec& a) { return a.array().sin().matrix(); }
inline Vec vcos(const Vec& a) { return a.array().cos().matrix(); }
inline Vec vsqrt(const Vec& a) { return a.array().sqrt().matrix(); }
inline Vec vabs(const Vec& a) { return a.cwiseAbs(); }
inline Vec vsign(const Vec& a) { return a.array().sign().matrix(); }

inline Vec sum(const Vec& a) { return Vec::Constant(1, a.sum()); }
inline Vec dot(const Vec& a, const Vec& b) { return Vec::Constant(1, a.dot(b)); }

inline Vec sum_rows(const Vec& x, int rows, int batch) {
  Vec out = Vec::Zero(batch);
  for (int r = 0; r < rows; ++r) out += x.segment(r * batch, batch);
  return out;
}

inline Vec broadcast_rows(const Vec& v, int batch) {
  Vec out(v.size() * batch);
  for (Eigen::Index r = 0; r < v.size(); ++r)
    out.segment(r * batch, batch).setConstant(v[r]);
  return out;
}

using RowMajorMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Vec matmul(const Vec& w, const Vec& x, int rows, int cols, int batch) {
  Eigen::Map<const RowMajorMat> wm(w.data(), rows, cols);
  Eigen::Map<const RowMajorMat> xm(x.data(), cols, batch);
  RowMajorMat out = wm * xm;
  return Eigen::Map<const Vec>(out.data(), out.size());
}

inline Vec add_bias(const Vec& x, const Vec& b, int rows, int batch) {
  Vec out = x;
  for (int r = 0; r < rows; ++r) out.segment(r * batch, batch).array() += b[r];
  return out;
}

inline Vec bmatvec(const Vec& y, const Vec& a, int n, int d, int batch) {
  Vec out = Vec::Zero(n * batch);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k)
      for (int b = 0; b < batch; ++b)
        out[i * batch + b] += y[(i * d + k) * batch + b] * a[k * batch + b];
  return out;
}

inline Vec bmattvec(const Vec& y, const Vec& s, int n, int d, int batch) {
  Vec out = Vec::Zero(d * batch);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k)
      for (int b = 0; b < batch; ++b)
        out[k * batch + b] += y[(i * d + k) * batch + b] * s[i * batch + b];
  return out;
}

inline Vec lift(const Vec&, const Vec& value) { return value; }
inline Vec lift(const Vec&, double value) { return Vec::Constant(1, value); }

inline Vec shift(const Vec& v, double c) { return (v.array() + c).matrix(); }

inline double scalar_of(const Vec& v) { return v[0]; }

/// Concatenation usable from templates (braced lists defeat argument lookup).
template <class V, class... Rest>
V cat(const V& first, const Rest&... rest) {
  return concat(std::vector<V>{first, V(rest)...});
}

}  // namespace mdac
