#include "mdac/features.hpp"

#include <cmath>
#include <stdexcept>

#include "mdac/errors.hpp"
#include "mdac/io.hpp"
#include "mdac/rng.hpp"

namespace mdac {

std::vector<int> Architecture::widths() const {
  std::vector<int> w{input};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(output);
  return w;
}

int Architecture::num_params() const {
  const auto w = widths();
  int total = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) total += w[l + 1] * (w[l] + 1);
  return total;
}

Architecture feature_architecture(int d, std::vector<int> hidden) {
  if (d < 1) throw std::invalid_argument("feature count d must be >= 1");
  return Architecture{6, std::move(hidden), 3 * d};
}

Architecture surrogate_architecture(std::vector<int> hidden) {
  return Architecture{6, std::move(hidden), 3};
}

Eigen::VectorXd MlpParams::flatten() const {
  Eigen::VectorXd flat(arch.num_params());
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const Eigen::MatrixXd& w = weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat[off++] = w(r, c);
    flat.segment(off, biases[l].size()) = biases[l];
    off += biases[l].size();
  }
  return flat;
}

MlpParams MlpParams::unflatten(const Architecture& arch, const Eigen::VectorXd& flat,
                               std::uint64_t seed) {
  if (flat.size() != arch.num_params())
    throw std::invalid_argument("flat parameter length does not match architecture");
  MlpParams p;
  p.arch = arch;
  p.seed = seed;
  const auto w = arch.widths();
  Eigen::Index off = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    Eigen::MatrixXd m(w[l + 1], w[l]);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = flat[off++];
    p.weights.push_back(m);
    p.biases.push_back(flat.segment(off, w[l + 1]));
    off += w[l + 1];
  }
  return p;
}

MlpParams init_mlp(std::uint64_t seed, const Architecture& arch) {
  MlpParams p;
  p.arch = arch;
  p.seed = seed;
  Rng rng(splitmix64(seed));
  const auto w = arch.widths();
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const double limit = std::sqrt(6.0 / (w[l] + w[l + 1]));
    std::uniform_real_distribution<double> u(-limit, limit);
    Eigen::MatrixXd m(w[l + 1], w[l]);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = u(rng);
    p.weights.push_back(m);
    p.biases.push_back(Eigen::VectorXd::Zero(w[l + 1]));
  }
  return p;
}

TapeMlp::TapeMlp(ad::Tape& tape, const MlpParams& params) {
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    matrices_.push_back(tape.register_matrix(params.weights[l]));
    biases_.push_back(tape.constant(params.biases[l]));
  }
}

ad::Var TapeMlp::operator()(const ad::Var& x, int batch) const {
  ad::Var h = x;
  for (std::size_t l = 0; l < matrices_.size(); ++l) {
    const int out = biases_[l].size();
    ad::Var z = add_bias(matmul_const(matrices_[l], h, batch), biases_[l], out, batch);
    h = (l + 1 < matrices_.size()) ? vtanh(z) : z;
  }
  return h;
}

namespace {

Eigen::VectorXd run(const MlpParams& p, const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
  if (q.size() + qd.size() != p.arch.input)
    throw std::invalid_argument("network input dimension mismatch");
  Eigen::VectorXd h(p.arch.input);
  h << q, qd;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    Eigen::VectorXd z = p.weights[l] * h + p.biases[l];
    h = (l + 1 < p.weights.size()) ? Eigen::VectorXd(z.array().tanh().matrix()) : z;
  }
  return h;
}

}  // namespace

Eigen::MatrixXd feature_net(const MlpParams& theta, const Eigen::VectorXd& q,
                            const Eigen::VectorXd& qd, int d) {
  const int n = static_cast<int>(q.size());
  if (theta.arch.output != n * d)
    throw std::invalid_argument("feature network output is not n * d");
  const Eigen::VectorXd out = run(theta, q, qd);
  Eigen::MatrixXd y(n, d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) y(i, k) = out[i * d + k];
  return y;
}

Eigen::VectorXd surrogate_net(const MlpParams& xi, const Eigen::VectorXd& q,
                              const Eigen::VectorXd& qd) {
  if (xi.arch.output != q.size())
    throw std::invalid_argument("surrogate output dimension mismatch");
  return run(xi, q, qd);
}

nlohmann::json to_json(const Architecture& arch) {
  return {{"input", arch.input},
          {"hidden", arch.hidden},
          {"output", arch.output},
          {"activation", "tanh"}};
}

Architecture architecture_from_json(const nlohmann::json& j) {
  try {
    Architecture a;
    a.input = j.at("input").get<int>();
    a.hidden = j.at("hidden").get<std::vector<int>>();
    a.output = j.at("output").get<int>();
    if (j.contains("activation") && j.at("activation") != "tanh")
      throw ConfigError("only tanh activations are supported");
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad architecture: ") + e.what());
  }
}

nlohmann::json to_json(const MlpParams& params, int d) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    nlohmann::json rows = nlohmann::json::array();
    const Eigen::MatrixXd& w = params.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(w.cols()));
      for (Eigen::Index c = 0; c < w.cols(); ++c) row[static_cast<std::size_t>(c)] = w(r, c);
      rows.push_back(row);
    }
    layers.push_back({{"weights", rows}, {"bias", to_std(params.biases[l])}});
  }
  return {{"architecture", to_json(params.arch)},
          {"layers", layers},
          {"seed", params.seed},
          {"d", d}};
}

MlpParams mlp_from_json(const nlohmann::json& j) {
  try {
    MlpParams p;
    p.arch = architecture_from_json(j.at("architecture"));
    p.seed = j.value("seed", std::uint64_t{0});
    const auto w = p.arch.widths();
    const auto& layers = j.at("layers");
    if (layers.size() + 1 != w.size()) throw ConfigError("layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto rows = layers[l].at("weights").get<std::vector<std::vector<double>>>();
      const auto bias = layers[l].at("bias").get<std::vector<double>>();
      if (static_cast<int>(rows.size()) != w[l + 1] ||
          static_cast<int>(bias.size()) != w[l + 1])
        throw ConfigError("layer shape mismatch");
      Eigen::MatrixXd m(w[l + 1], w[l]);
      for (int r = 0; r < w[l + 1]; ++r) {
        if (static_cast<int>(rows[r].size()) != w[l]) throw ConfigError("layer shape mismatch");
        for (int c = 0; c < w[l]; ++c) m(r, c) = rows[r][c];
      }
      if (!m.allFinite()) throw ConfigError("non-finite network weight");
      p.weights.push_back(m);
      p.biases.push_back(to_eigen(bias));
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model file: ") + e.what());
  }
}

}  // namespace mdac
