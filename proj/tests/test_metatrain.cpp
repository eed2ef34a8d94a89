#include "mdac/metatrain.hpp"

#include <cmath>
#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>

#include <gtest/gtest.h>

#include "mdac/errors.hpp"

namespace mdac {
namespace {

MetaConfig tiny(int steps = 0) {
  MetaConfig c;
  c.seed = 1;
  c.M = 2;
  c.N = 1;
  c.T = 1.0;
  c.dt = 0.02;
  c.d = 3;
  c.architecture = {8, 8};
  c.dynamics = "true";
  c.steps = steps;
  c.lr = 1e-2;
  return c;
}

std::vector<MetaTask> tasks_for(const MetaConfig& c) {
  return make_meta_dataset(c.seed, sample_tasks(c.seed, c.M), c.N, c.T);
}

TEST(Tasks, BetaScaledDraws) {
  const std::vector<double> w = sample_tasks(3, 100000);
  double mean = 0.0;
  for (double x : w) {
    ASSERT_GE(x, 0.0);
    ASSERT_LE(x, 6.0);
    mean += x;
  }
  mean /= static_cast<double>(w.size());
  EXPECT_NEAR(mean, 6.0 * 5.0 / 14.0, 0.02 * 6.0 * 5.0 / 14.0);
  EXPECT_EQ(sample_tasks(3, 50), sample_tasks(3, 50));
  EXPECT_NE(sample_tasks(3, 50), sample_tasks(4, 50));
}

TEST(Params, DecodeKeepsExponentAboveFloor) {
  for (double raw : {-50.0, -3.0, 0.0, 2.0}) EXPECT_GE(decode_p(raw, 2.0), kPFloor);
  EXPECT_GT(decode_p(-3.0, 2.0), kPFloor);
  EXPECT_DOUBLE_EQ(decode_p(0.0, 2.0), 2.0);
  EXPECT_DOUBLE_EQ(decode_p(std::log(2.0), 2.0), kPFloor + 2.0 * (2.0 - kPFloor));
}

TEST(Params, FlattenRoundTripAndPositiveGains) {
  MetaParams p = init_meta_params(tiny());
  const Eigen::VectorXd flat = p.flatten();
  ASSERT_EQ(flat.size(), p.num_params());
  MetaParams q = p;
  q.assign(flat);
  EXPECT_EQ(q.flatten(), flat);
  const Gains g = p.gains();
  EXPECT_TRUE((g.lambda().array() > 0).all());
  EXPECT_TRUE((g.k().array() > 0).all());
  EXPECT_TRUE((g.p().array() > 0).all());
  EXPECT_DOUBLE_EQ(p.p(), 2.0);
  p.learn_p = false;
  p.raw_p = 3.0;
  EXPECT_DOUBLE_EQ(p.p(), 2.0);
}

TEST(MetaLoss, RegularizerAloneWhenRolloutsAreExact) {
  MetaConfig c = tiny();
  c.mu_ctrl = 0.0;
  const MetaParams p = init_meta_params(c);
  auto hover = std::make_shared<HoverReference>(Eigen::Vector3d(0.3, 1.0, 0.0), c.T);
  const std::vector<MetaTask> tasks{{0.0, {hover}}, {0.0, {hover}}};
  const MetaEvaluation ev = meta_loss(p, tasks, {}, c, true);
  const double reg = c.mu_meta * p.flatten().squaredNorm();
  EXPECT_NEAR(ev.loss, reg, 1e-15 * reg);
  EXPECT_LT((ev.gradient - 2.0 * c.mu_meta * p.flatten()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MetaLoss, SingleTaskSingleReferenceReducesToTaskLoss) {
  MetaConfig c = tiny();
  c.M = 1;
  const MetaParams p = init_meta_params(c);
  const std::vector<MetaTask> tasks = tasks_for(c);
  const MetaEvaluation ev = meta_loss(p, tasks, {}, c, false);

  PlanarQuadrotor model;
  const WindDrag wd{tasks[0].w};
  const DisturbanceFn f = [wd](const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
    return wind_drag(q, qd, wd);
  };
  // The double path uses the exact potential Hessian; with p = 2 it matches
  // the smoothed tape form exactly.
  const Trajectory tr = rollout(model, f, p.controller(), *tasks[0].refs[0], c.T, c.dt);
  const double expected = task_loss({tr}, c.mu_ctrl) + c.mu_meta * p.flatten().squaredNorm();
  EXPECT_NEAR(ev.loss, expected, 1e-6 * expected);
  EXPECT_EQ(ev.task_losses.size(), 1u);
  EXPECT_EQ(ev.diverged, 0);
}

TEST(MetaLoss, GradientMatchesFiniteDifferences) {
  MetaConfig c = tiny();
  c.M = 1;
  c.T = 0.5;
  c.dt = 0.01;
  c.dynamics = "surrogate";
  c.p_init = 2.2;
  MetaParams p = init_meta_params(c);
  const std::vector<MetaTask> tasks = tasks_for(c);
  const std::vector<MlpParams> sur{init_mlp(9, surrogate_architecture({8, 8}))};
  const MetaEvaluation ev = meta_loss(p, tasks, sur, c, true);
  const Eigen::VectorXd flat = p.flatten();
  const std::vector<int> probe{3, p.offset_raw_p() - 2, p.offset_raw_p(), p.offset_lambda() + 1,
                               p.offset_k() + 2, p.offset_gain_p()};
  for (int i : probe) {
    const double h = 1e-5;
    MetaParams plus = p, minus = p;
    Eigen::VectorXd fp = flat, fm = flat;
    fp[i] += h;
    fm[i] -= h;
    plus.assign(fp);
    minus.assign(fm);
    const double fd = (meta_loss(plus, tasks, sur, c, false).loss -
                       meta_loss(minus, tasks, sur, c, false).loss) / (2 * h);
    const double rel = std::abs(ev.gradient[i] - fd) / std::max(std::abs(fd), 1e-8);
    EXPECT_LT(rel, 1e-4) << "coordinate " << i << " ad " << ev.gradient[i] << " fd " << fd;
  }
}

TEST(MetaLoss, ThreadCountDoesNotChangeResult) {
  const MetaConfig c = tiny();
  const MetaParams p = init_meta_params(c);
  const std::vector<MetaTask> tasks = tasks_for(c);
  const MetaEvaluation a = meta_loss(p, tasks, {}, c, true, 1);
  const MetaEvaluation b = meta_loss(p, tasks, {}, c, true, 2);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_TRUE((a.gradient.array() == b.gradient.array()).all());
}

TEST(MetaLoss, SurrogateCountIsChecked) {
  MetaConfig c = tiny();
  c.dynamics = "surrogate";
  EXPECT_THROW(meta_loss(init_meta_params(c), tasks_for(c), {}, c, false), std::invalid_argument);
}

TEST(MetaStep, ZeroGradientLeavesParameters) {
  MetaParams p = init_meta_params(tiny());
  const Eigen::VectorXd before = p.flatten();
  Adam adam(before.size());
  for (int k = 0; k < 5; ++k) ASSERT_TRUE(meta_step(p, Eigen::VectorXd::Zero(before.size()), adam));
  EXPECT_EQ(p.flatten(), before);
}

TEST(MetaStep, ConstantGradientMovesAgainstIt) {
  MetaParams p = init_meta_params(tiny());
  const Eigen::VectorXd before = p.flatten();
  Eigen::VectorXd g(before.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = (i % 3 == 0) ? 1.0 : -0.5;
  Adam adam(before.size(), {1e-2});
  for (int k = 0; k < 50; ++k) ASSERT_TRUE(meta_step(p, g, adam));
  const Eigen::VectorXd delta = p.flatten() - before;
  for (Eigen::Index i = 0; i < g.size(); ++i) ASSERT_LT(delta[i] * g[i], 0.0) << i;
}

TEST(MetaStep, FrozenExponentIgnoresItsGradient) {
  MetaParams p = init_meta_params(tiny());
  p.learn_p = false;
  Adam adam(p.num_params(), {1e-2});
  ASSERT_TRUE(meta_step(p, Eigen::VectorXd::Ones(p.num_params()), adam));
  EXPECT_EQ(p.raw_p, 0.0);
  EXPECT_EQ(p.p(), 2.0);
}

TEST(MetaStep, NonFiniteGradientIsSkipped) {
  MetaParams p = init_meta_params(tiny());
  const Eigen::VectorXd before = p.flatten();
  Eigen::VectorXd g = Eigen::VectorXd::Ones(before.size());
  g[4] = std::nan("");
  Adam adam(before.size());
  EXPECT_FALSE(meta_step(p, g, adam));
  EXPECT_EQ(p.flatten(), before);
}

// Training runs are shared between tests.
const TrainResult& run(bool learn_p) {
  static std::map<bool, TrainResult> cache;
  auto it = cache.find(learn_p);
  if (it == cache.end()) {
    MetaConfig c = tiny(200);
    c.learn_p = learn_p;
    it = cache.emplace(learn_p, train(c, tasks_for(c), {})).first;
  }
  return it->second;
}

TEST(Train, TwoHundredStepsReduceLossByThirtyPercent) {
  const TrainResult& r = run(false);
  ASSERT_EQ(r.history.size(), 200u);
  std::printf("meta loss: init %.6g best %.6g\n", r.history.front().meta_loss, r.best_loss);
  EXPECT_LE(r.best_loss, 0.7 * r.history.front().meta_loss);
}

TEST(Train, TrackingOnlyObjectiveReducesByThirtyPercent) {
  // Same problem without the control-effort term, whose hover part
  // (mu_ctrl |u|^2 ~ 1e-3 * 9.81^2) no gain choice can remove.
  MetaConfig c = tiny(200);
  c.learn_p = false;
  c.mu_ctrl = 0.0;
  const TrainResult r = train(c, tasks_for(c), {});
  std::printf("tracking-only meta loss: init %.6g best %.6g\n", r.history.front().meta_loss,
              r.best_loss);
  EXPECT_LE(r.best_loss, 0.7 * r.history.front().meta_loss);
}

TEST(Train, FrozenExponentStaysAtTwo) {
  const TrainResult& r = run(false);
  for (const HistoryRow& h : r.history) ASSERT_EQ(h.decoded_p, 2.0);
  EXPECT_EQ(r.best.p(), 2.0);
  EXPECT_FALSE(r.best.learn_p);
}

TEST(Train, LearnedExponentMovesWithoutIncreasingLoss) {
  const TrainResult& r = run(true);
  double moved = 0.0;
  for (const HistoryRow& h : r.history) moved = std::max(moved, std::abs(h.decoded_p - 2.0));
  std::printf("learned p: final %.6f, largest excursion %.6f\n", r.history.back().decoded_p,
              moved);
  EXPECT_GT(moved, 1e-3);
  EXPECT_LE(r.best_loss, r.history.front().meta_loss);
}

TEST(Train, RunningMinimumIsNonIncreasing) {
  const TrainResult& r = run(true);
  double running = std::numeric_limits<double>::infinity();
  double previous = running;
  for (const HistoryRow& h : r.history) {
    running = std::min(running, h.meta_loss);
    ASSERT_LE(running, previous);
    previous = running;
  }
  EXPECT_LE(r.best_loss, running);
  for (std::size_t k = 0; k < r.history.size(); ++k) EXPECT_EQ(r.history[k].step, static_cast<int>(k));
}

TEST(Train, LearnedExponentContainsFrozenBaseline) {
  MetaConfig frozen = tiny(5);
  frozen.learn_p = false;
  const std::vector<MetaTask> tasks = tasks_for(frozen);
  const TrainResult f = train(frozen, tasks, {});
  MetaConfig learn = frozen;
  learn.learn_p = true;
  learn.lr = 0.3;  // large steps so the learnable run alone does worse
  const TrainResult l = train(learn, tasks, {}, {f.best});
  EXPECT_LE(l.best_loss, f.best_loss + 1e-6);
  EXPECT_TRUE(l.best.learn_p);
}

TEST(Train, Deterministic) {
  const MetaConfig c = tiny(3);
  const std::vector<MetaTask> tasks = tasks_for(c);
  const TrainResult a = train(c, tasks, {}), b = train(c, tasks, {}, {}, 2);
  EXPECT_EQ(a.best.flatten(), b.best.flatten());
  EXPECT_EQ(history_csv(a.history), history_csv(b.history));
}

TEST(Checkpoint, RoundTripIsExact) {
  MetaParams p = init_meta_params(tiny());
  p.raw_p = 0.123456789;
  const MetaParams q = checkpoint_from_json(nlohmann::json::parse(checkpoint_json(p).dump()));
  EXPECT_EQ(q.flatten(), p.flatten());
  EXPECT_EQ(q.p(), p.p());
  EXPECT_EQ(q.learn_p, p.learn_p);
  EXPECT_EQ(q.d, p.d);
  EXPECT_EQ(q.epsilon, p.epsilon);
}

TEST(Config, JsonRoundTripAndValidation) {
  MetaConfig c = tiny(7);
  c.architecture = {5, 6, 7};
  const MetaConfig back = meta_config_from_json(nlohmann::json::parse(to_json(c).dump()));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_THROW(meta_config_from_json({{"M", 0}}), ConfigError);
  EXPECT_THROW(meta_config_from_json({{"p_init", 1.0}}), ConfigError);
  EXPECT_THROW(meta_config_from_json({{"dynamics", "other"}}), ConfigError);
  EXPECT_THROW(meta_config_from_json({{"T", 1.0}, {"dt", 0.3}}), ConfigError);
}

TEST(History, CsvLayout) {
  const std::string csv = history_csv({{0, 1.5, 2.0, 0.5, 4.0}, {1, 1.25, 2.0, 0.5, 4.0}});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,meta_loss,decoded_p,min_gain,max_gain");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

}  // namespace
}  // namespace mdac
