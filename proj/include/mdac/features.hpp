#pragma once

// Tanh multilayer perceptrons: the feature network Yhat(q, qd) and the
// surrogate disturbance networks fhat(q, qd).

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mdac/diffengine.hpp"
#include "mdac/numeric.hpp"

namespace mdac {

struct Architecture {
  int input = 6;
  std::vector<int> hidden{32, 32};
  int output = 3;

  /// Layer widths including input and output.
  std::vector<int> widths() const;
  int num_params() const;
  bool operator==(const Architecture&) const = default;
};

Architecture feature_architecture(int d, std::vector<int> hidden = {32, 32});
Architecture surrogate_architecture(std::vector<int> hidden = {32, 32});

struct MlpParams {
  Architecture arch;
  std::vector<Eigen::MatrixXd> weights;  // out x in
  std::vector<Eigen::VectorXd> biases;
  std::uint64_t seed = 0;

  /// Per layer: weights row-major, then bias.
  Eigen::VectorXd flatten() const;
  static MlpParams unflatten(const Architecture& arch, const Eigen::VectorXd& flat,
                             std::uint64_t seed = 0);
};

/// Glorot-uniform weights, zero biases.
MlpParams init_mlp(std::uint64_t seed, const Architecture& arch);

/// Forward pass on a batch X (input x B, row-major) with the parameters read
/// from `flat` starting at `offset`. Works for Eigen::VectorXd and ad::Var.
template <class V>
V mlp_forward(const V& flat, int offset, const Architecture& arch, const V& x, int batch) {
  const std::vector<int> w = arch.widths();
  V h = x;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const int in = w[l];
    const int out = w[l + 1];
    const V wl = slice(flat, offset, out * in);
    offset += out * in;
    const V bl = slice(flat, offset, out);
    offset += out;
    V z = add_bias(matmul(wl, h, out, in, batch), bl, out, batch);
    h = (l + 2 < w.size()) ? V(vtanh(z)) : z;
  }
  return h;
}

/// Network whose weights are constants of a tape.
class TapeMlp {
 public:
  TapeMlp(ad::Tape& tape, const MlpParams& params);
  ad::Var operator()(const ad::Var& x, int batch) const;

 private:
  std::vector<int> matrices_;
  std::vector<ad::Var> biases_;
};

/// n x d feature matrix at a single state (row-major reshape of the output).
Eigen::MatrixXd feature_net(const MlpParams& theta, const Eigen::VectorXd& q,
                            const Eigen::VectorXd& qd, int d);
Eigen::VectorXd surrogate_net(const MlpParams& xi, const Eigen::VectorXd& q,
                              const Eigen::VectorXd& qd);

nlohmann::json to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MlpParams& params, int d);
MlpParams mlp_from_json(const nlohmann::json& j);

}  // namespace mdac
