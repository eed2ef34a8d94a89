#pragma once

// Bi-level meta-training of theta = {feature net, p, Lambda, K, P} through
// differentiable closed-loop rollouts against surrogate disturbance models.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mdac/controller.hpp"
#include "mdac/features.hpp"
#include "mdac/optim.hpp"
#include "mdac/potential.hpp"
#include "mdac/reference.hpp"
#include "mdac/simulate.hpp"

namespace mdac {

/// Decoded p never drops below this floor.
inline constexpr double kPFloor = 1.0 + kDeltaP;

/// Loss assigned to a task whose rollout diverged (its gradient is zero).
inline constexpr double kDivergencePenalty = 1e6;

struct MetaConfig {
  std::uint64_t seed = 0;
  int M = 10;
  int N = 5;
  double T = 5.0;
  double dt = 0.01;
  double mu_ctrl = 1e-3;
  double mu_meta = 1e-4;
  int steps = 500;
  double lr = 1e-3;
  int d = 10;
  bool learn_p = true;
  double p_init = 2.0;
  double epsilon = kDefaultEpsilon;
  std::vector<int> architecture{32, 32};
  /// "surrogate" trains against the fitted ensemble, "true" against the drag
  /// model itself.
  std::string dynamics = "surrogate";
};

nlohmann::json to_json(const MetaConfig& c);
/// Missing keys keep their defaults; throws ConfigError on bad values.
MetaConfig meta_config_from_json(const nlohmann::json& j);

struct MetaParams {
  MlpParams theta_y;
  double raw_p = 0.0;
  Eigen::VectorXd raw_lambda;  // 3
  Eigen::VectorXd raw_k;       // 3
  Eigen::VectorXd raw_gain_p;  // d
  int d = 0;
  bool learn_p = true;
  double p_init = 2.0;
  double epsilon = kDefaultEpsilon;

  /// [theta_y | raw_p | raw_lambda | raw_k | raw_gain_p]
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);

  int num_params() const;
  int offset_raw_p() const { return theta_y.arch.num_params(); }
  int offset_lambda() const { return offset_raw_p() + 1; }
  int offset_k() const { return offset_lambda() + 3; }
  int offset_gain_p() const { return offset_k() + 3; }

  /// p_floor + (p_init - p_floor) exp(raw_p); exactly p_init when frozen.
  double p() const;
  Gains gains() const;
  PotentialParams potential() const { return {p(), epsilon}; }
  ControllerConfig controller() const;
};

double decode_p(double raw_p, double p_init);

/// Random feature net (Glorot) and log-normal gains around Lambda = 2,
/// K = 4, P = 1; raw_p = 0 so the decoded exponent equals p_init.
MetaParams init_meta_params(const MetaConfig& config);

/// w_j = 6 xi_j with xi_j ~ Beta(5, 9).
std::vector<double> sample_tasks(std::uint64_t seed, int M);

struct MetaTask {
  double w = 0.0;
  std::vector<std::shared_ptr<const RefTrajectory>> refs;
};

/// Tasks with N random-walk references each, all drawn from `seed`.
std::vector<MetaTask> make_meta_dataset(std::uint64_t seed, const std::vector<double>& winds,
                                        int N, double T);

struct MetaEvaluation {
  double loss = 0.0;
  Eigen::VectorXd gradient;  // empty when not requested
  std::vector<double> task_losses;
  int diverged = 0;
};

/// (1/M) sum_j task_loss_j + mu_meta |theta|^2. `surrogates` has one entry
/// per task (ignored when config.dynamics == "true").
MetaEvaluation meta_loss(const MetaParams& theta, const std::vector<MetaTask>& tasks,
                         const std::vector<MlpParams>& surrogates, const MetaConfig& config,
                         bool with_gradient, int threads = 1);

/// Differentiable loss of one task as a function of the flat parameters.
ad::Var task_loss_tape(const ad::Var& flat, const MetaParams& layout, const MetaTask& task,
                       const MlpParams* surrogate, const MetaConfig& config);

/// One Adam step; returns false (and leaves theta unchanged) when the
/// gradient is not finite. The raw_p entry is masked when p is frozen.
bool meta_step(MetaParams& theta, Eigen::VectorXd grad, Adam& optimizer);

struct HistoryRow {
  int step = 0;
  double meta_loss = 0.0;
  double decoded_p = 0.0;
  double min_gain = 0.0;
  double max_gain = 0.0;
};

struct TrainResult {
  MetaParams best;
  double best_loss = 0.0;
  /// Index of the best iterate: -1 - i when it came from candidates[i].
  int best_step = 0;
  std::vector<HistoryRow> history;
  int skipped_steps = 0;
};

/// Full-batch Adam on meta_loss for config.steps steps, keeping the best
/// iterate. Candidate parameter sets are scored under the same objective and
/// win when better.
TrainResult train(const MetaConfig& config, const std::vector<MetaTask>& tasks,
                  const std::vector<MlpParams>& surrogates,
                  const std::vector<MetaParams>& candidates = {}, int threads = 1,
                  const std::function<void(const HistoryRow&)>& on_step = {});

/// Same as train but continues from `init`.
TrainResult train_from(const MetaParams& init, const MetaConfig& config,
                       const std::vector<MetaTask>& tasks,
                       const std::vector<MlpParams>& surrogates,
                       const std::vector<MetaParams>& candidates = {}, int threads = 1,
                       const std::function<void(const HistoryRow&)>& on_step = {});

nlohmann::json checkpoint_json(const MetaParams& theta);
MetaParams checkpoint_from_json(const nlohmann::json& j);

std::string history_csv(const std::vector<HistoryRow>& rows);

}  // namespace mdac
