#include "probekit/mlp.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "support.hpp"

namespace probekit {
namespace {

LabeledData<double> blobs(std::size_t n, std::uint64_t seed, double separation = 4.0) {
  Rng rng(seed);
  LabeledData<double> d;
  d.features.resize(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    const double centre = y ? separation / 2 : -separation / 2;
    d.features(static_cast<Eigen::Index>(i), 0) = centre + 0.5 * testing::normal(rng);
    d.features(static_cast<Eigen::Index>(i), 1) = centre + 0.5 * testing::normal(rng);
    d.labels.push_back(y);
  }
  return d;
}

MatrixX<double> random_batch(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  MatrixX<double> x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = testing::normal(rng);
  return x;
}

TEST(InitMlpTest, SameSeedSameWeights) {
  const MlpConfig c{4, {10, 10}, 3, 99};
  EXPECT_TRUE(Mlp<double>::init(c) == Mlp<double>::init(c));
  MlpConfig other = c;
  other.seed = 100;
  EXPECT_FALSE(Mlp<double>::init(c) == Mlp<double>::init(other));
}

TEST(InitMlpTest, ShapesChain) {
  const auto m = Mlp<double>::init({4, {10}, 2, 1});
  ASSERT_EQ(m.layers().size(), 2u);
  EXPECT_EQ(m.layers()[0].weights.rows(), 4);
  EXPECT_EQ(m.layers()[0].weights.cols(), 10);
  EXPECT_EQ(m.layers()[0].bias.size(), 10);
  EXPECT_EQ(m.layers()[1].weights.rows(), 10);
  EXPECT_EQ(m.layers()[1].weights.cols(), 2);
  EXPECT_EQ(m.layers()[1].bias.size(), 2);
  EXPECT_EQ(m.layers()[0].bias.cwiseAbs().sum(), 0.0);
  const double limit = std::sqrt(6.0 / 4.0);
  EXPECT_LE(m.layers()[0].weights.cwiseAbs().maxCoeff(), limit);
}

TEST(InitMlpTest, RejectsBadConfigs) {
  EXPECT_THROW(Mlp<double>::init({4, {}, 2, 1}), ValidationError);
  EXPECT_THROW(Mlp<double>::init({0, {10}, 2, 1}), ValidationError);
  EXPECT_THROW(Mlp<double>::init({4, {0}, 2, 1}), ValidationError);
  EXPECT_THROW(Mlp<double>::init({4, {10}, 0, 1}), ValidationError);
  EXPECT_NO_THROW(Mlp<double>::init({4, {}, 2, 1, true}));
}

TEST(ForwardTest, ZeroWeightsGiveUniform) {
  auto m = Mlp<double>::init({3, {5}, 4, 1});
  for (auto& l : m.layers()) l.weights.setZero();
  const auto p = m.forward(VectorX<double>::Constant(3, 0.7));
  for (Eigen::Index k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(p(k), 0.25);
}

TEST(ForwardTest, OutputsSumToOne) {
  Rng rng(2);
  const auto m = Mlp<double>::init({6, {10, 10, 10}, 5, 3});
  const auto p = m.predict_proba(random_batch(rng, 50, 6) * 10.0);
  for (Eigen::Index r = 0; r < p.rows(); ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-9);
}

TEST(ForwardTest, HandComputedSingleHiddenUnit) {
  DenseLayer<double> hidden{MatrixX<double>(2, 1), VectorX<double>(1)};
  hidden.weights << 0.5, 0.25;
  hidden.bias << 0.1;
  DenseLayer<double> out{MatrixX<double>(1, 2), VectorX<double>(2)};
  out.weights << 1.0, -1.0;
  out.bias << 0.2, 0.0;
  const Mlp<double> m({hidden, out});
  VectorX<double> x(2);
  x << 1.0, 2.0;
  // h = relu(0.5 + 0.5 + 0.1) = 1.1; logits = (1.3, -1.1); p0 = 1 / (1 + e^-2.4)
  const double p0 = 1.0 / (1.0 + std::exp(-2.4));
  const auto p = m.forward(x);
  EXPECT_NEAR(p(0), p0, 1e-12);
  EXPECT_NEAR(p(1), 1.0 - p0, 1e-12);
}

TEST(ForwardTest, DimensionMismatch) {
  const auto m = Mlp<double>::init({3, {5}, 2, 1});
  EXPECT_THROW(m.forward(VectorX<double>::Zero(4)), ValidationError);
}

TEST(GradCheckTest, SmallRandomModel) {
  Rng rng(17);
  const auto m = Mlp<double>::init({4, {10}, 3, 5});
  const auto x = random_batch(rng, 8, 4);
  const std::vector<int> y{0, 1, 2, 0, 1, 2, 2, 1};
  const auto report = grad_check(m, x, y);
  EXPECT_LT(report.max_relative_error, 1e-4);
  EXPECT_EQ(report.parameters_checked, 4u * 10 + 10 + 10 * 3 + 3);
}

TEST(GradCheckTest, FloatModelCheckedInDouble) {
  Rng rng(18);
  const auto m = Mlp<float>::init({3, {6, 6}, 2, 5});
  const auto x = random_batch(rng, 5, 3);
  const std::vector<int> y{0, 1, 1, 0, 1};
  EXPECT_LT(grad_check(m, x, y).max_relative_error, 1e-4);
}

TEST(GradCheckTest, ConvergedSeparableBatchHasZeroGradient) {
  // A linear head whose margins are so large that softmax saturates: the
  // gradient is ~e^-100 in both routes.
  DenseLayer<double> head{MatrixX<double>(1, 2), VectorX<double>::Zero(2)};
  head.weights << -50.0, 50.0;
  const Mlp<double> m({head});
  MatrixX<double> x(4, 1);
  x << -1, -2, 1, 2;
  const std::vector<int> y{0, 0, 1, 1};
  const auto report = grad_check(m, x, y);
  EXPECT_LT(report.max_absolute_error, 1e-6);
  const auto g = m.loss_and_gradient(x, y);
  EXPECT_LT(g.layers[0].weights.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(GradCheckTest, LinearModelMatchesClosedForm) {
  // One input, two classes, zero bias: L = -log softmax(x w)_y, so
  // dL/dw_k = x (p_k - [k == y]) for a single example.
  DenseLayer<double> head{MatrixX<double>(1, 2), VectorX<double>::Zero(2)};
  head.weights << 0.3, -0.2;
  const Mlp<double> m({head});
  MatrixX<double> x(1, 1);
  x << 1.7;
  const std::vector<int> y{1};
  const double z0 = 0.3 * 1.7, z1 = -0.2 * 1.7;
  const double p1 = std::exp(z1) / (std::exp(z0) + std::exp(z1));
  const auto g = m.loss_and_gradient(x, y);
  EXPECT_NEAR(g.layers[0].weights(0, 1), 1.7 * (p1 - 1.0), 1e-7);
  EXPECT_NEAR(g.layers[0].weights(0, 0), 1.7 * (1.0 - p1), 1e-7);
  EXPECT_NEAR(g.loss, -std::log(p1), 1e-12);
  EXPECT_LT(grad_check(m, x, y).max_absolute_error, 1e-7);
}

TEST(GradCheckTest, ManyRandomDraws) {
  Rng rng(23);
  for (int draw = 0; draw < 100; ++draw) {
    const std::size_t in = 1 + rng.below(6), classes = 2 + rng.below(4);
    std::vector<std::size_t> hidden(1 + rng.below(3));
    for (auto& h : hidden) h = 1 + rng.below(8);
    auto m = Mlp<double>::init({in, hidden, classes, rng.next()});
    // Zero biases put whole layers of pre-activations exactly on the ReLU
    // kink once an upstream layer is dead; a random model should not.
    for (auto& l : m.layers())
      for (Eigen::Index j = 0; j < l.bias.size(); ++j) l.bias(j) = rng.uniform() - 0.5;
    const auto n = static_cast<Eigen::Index>(1 + rng.below(10));
    const auto x = random_batch(rng, n, static_cast<Eigen::Index>(in));
    std::vector<int> y;
    for (Eigen::Index i = 0; i < n; ++i) y.push_back(static_cast<int>(rng.below(classes)));
    if (testing::min_preactivation(m, x) < 1e-3) continue;
    EXPECT_LT(grad_check(m, x, y).max_relative_error, 1e-4) << "draw " << draw;
  }
}

TEST(TrainTest, SeparableBlobsReachPerfectValidation) {
  const auto train_set = blobs(200, 1);
  const auto val_set = blobs(100, 2);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.patience = 50;
  cfg.seed = 3;
  const auto r = train(Mlp<double>::init({2, {10}, 2, 4}), train_set, val_set, cfg);
  ASSERT_TRUE(r.best_val_accuracy.has_value());
  EXPECT_EQ(*r.best_val_accuracy, 1.0);
  EXPECT_LE(r.best_epoch, 50u);
  EXPECT_EQ(accuracy(r.model, val_set), 1.0);
}

TEST(TrainTest, EarlyStopsWithinPatience) {
  auto train_set = blobs(64, 5);
  auto val_set = blobs(20, 6);
  TrainConfig cfg;
  cfg.learning_rate = 1e-4;
  cfg.patience = 5;
  cfg.max_epochs = 50;
  const auto r = train(Mlp<double>::init({2, {3}, 2, 9}), train_set, val_set, cfg);
  EXPECT_LE(r.history.size(), r.best_epoch + 5);
  for (const auto& h : r.history) EXPECT_LE(h.val_accuracy, *r.best_val_accuracy);
}

TEST(TrainTest, SaturatedAccuracyPrefersLowerValidationLoss) {
  const auto train_set = blobs(200, 1);
  const auto val_set = blobs(100, 2);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.max_epochs = 40;
  const auto r = train(Mlp<double>::init({2, {10}, 2, 4}), train_set, val_set, cfg);
  ASSERT_EQ(*r.best_val_accuracy, 1.0);
  const auto& best = r.history[r.best_epoch - 1];
  for (const auto& h : r.history) {
    if (h.val_accuracy == best.val_accuracy) EXPECT_GE(h.val_loss, best.val_loss);
  }
  // Training ran past the first perfect epoch because the loss kept falling.
  const auto first_perfect = std::find_if(r.history.begin(), r.history.end(),
                                          [](const EpochRecord& h) { return h.val_accuracy == 1.0; });
  EXPECT_GT(r.best_epoch, first_perfect->epoch);
}

TEST(TrainTest, SameSeedSameHistory) {
  const auto train_set = blobs(100, 1, 1.0);
  const auto val_set = blobs(40, 2, 1.0);
  TrainConfig cfg;
  cfg.seed = 77;
  cfg.max_epochs = 8;
  const auto a = train(Mlp<double>::init({2, {10}, 2, 4}), train_set, val_set, cfg);
  const auto b = train(Mlp<double>::init({2, {10}, 2, 4}), train_set, val_set, cfg);
  EXPECT_EQ(a.step_losses, b.step_losses);
  EXPECT_TRUE(a.model == b.model);
}

TEST(TrainTest, FullBatchLossNonIncreasingAtSmallRate) {
  const auto train_set = blobs(128, 4, 2.0);
  TrainConfig cfg;
  cfg.learning_rate = 1e-4;
  cfg.batch_size = train_set.size();
  cfg.max_epochs = 40;
  const auto r = train(Mlp<double>::init({2, {10}, 2, 8}), train_set, LabeledData<double>{}, cfg);
  ASSERT_EQ(r.step_losses.size(), 40u);
  for (std::size_t i = 1; i < r.step_losses.size(); ++i) EXPECT_LE(r.step_losses[i], r.step_losses[i - 1]);
  EXPECT_EQ(r.best_epoch, 40u);
  EXPECT_FALSE(r.best_val_accuracy.has_value());
}

TEST(TrainTest, RejectsEmptyTrainAndBadLabels) {
  TrainConfig cfg;
  const auto m = Mlp<double>::init({2, {3}, 2, 1});
  EXPECT_THROW(train(m, LabeledData<double>{}, blobs(4, 1), cfg), ValidationError);
  auto bad = blobs(4, 1);
  bad.labels[0] = 5;
  EXPECT_THROW(train(m, bad, blobs(4, 2), cfg), ValidationError);
}

TEST(GridSearchTest, SingleCell) {
  TrainConfig cfg;
  cfg.max_epochs = 5;
  const std::vector<GridCell> grid{{{2, {5}, 2, 1}, cfg}};
  const auto r = grid_search<double>(grid, blobs(60, 1), blobs(20, 2));
  EXPECT_EQ(r.best_index, 0u);
  EXPECT_EQ(r.val_accuracy.size(), 1u);
}

TEST(GridSearchTest, EmptyGridRejected) {
  EXPECT_THROW(grid_search<double>(std::vector<GridCell>{}, blobs(10, 1), blobs(10, 2)), ValidationError);
}

TEST(GridSearchTest, ShuffledLabelsLose) {
  const auto train_set = blobs(200, 11);
  const auto val_set = blobs(100, 12);
  auto shuffled = train_set;
  Rng rng(13);
  rng.shuffle(shuffled.labels.begin(), shuffled.labels.end());

  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  const GridCell cell{{2, {10}, 2, 3}, cfg};
  const auto clean = grid_search<double>(std::vector<GridCell>{cell}, train_set, val_set);
  const auto noisy = grid_search<double>(std::vector<GridCell>{cell}, shuffled, val_set);
  EXPECT_GT(clean.val_accuracy[0], noisy.val_accuracy[0]);
  EXPECT_GT(clean.val_accuracy[0], 0.95);
}

TEST(GridSearchTest, DefaultGridHasTwelveCells) {
  const std::vector<std::size_t> depths{1, 2, 3}, units{10, 100};
  const std::vector<double> rates{1e-3, 1e-4};
  TrainConfig cfg;
  cfg.max_epochs = 2;
  const auto grid = architecture_grid(2, 2, depths, units, rates, cfg, 5);
  ASSERT_EQ(grid.size(), 12u);
  EXPECT_EQ(grid[0].model.hidden_layers, (std::vector<std::size_t>{10}));
  EXPECT_EQ(grid[11].model.hidden_layers, (std::vector<std::size_t>{100, 100, 100}));
  EXPECT_EQ(grid[1].train.learning_rate, 1e-4);
  const auto r = grid_search<double>(grid, blobs(40, 1), blobs(20, 2));
  EXPECT_EQ(r.val_accuracy.size(), 12u);
  for (double a : r.val_accuracy) EXPECT_LE(a, r.val_accuracy[r.best_index]);
}

TEST(CheckpointTest, RoundTripAndLayout) {
  const auto m = Mlp<double>::init({3, {4}, 2, 6});
  std::stringstream buf;
  save_checkpoint(buf, m);
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 4), "LPNN");
  // magic + version + count, then per layer 8 bytes of shape + 8 per value
  EXPECT_EQ(bytes.size(), 12u + (8 + 8 * (12 + 4)) + (8 + 8 * (8 + 2)));
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1u);
  EXPECT_TRUE(load_checkpoint(buf) == m);

  std::stringstream bad("LPNX....");
  EXPECT_THROW(load_checkpoint(bad), FormatError);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(load_checkpoint(truncated), FormatError);
}

TEST(HistoryCsvTest, Format) {
  const std::vector<EpochRecord> h{{1, 0.5, 0.75}, {2, 0.25, 1.0}};
  std::ostringstream out;
  write_history_csv(out, h);
  EXPECT_EQ(out.str(), "epoch,train_loss,val_acc\n1,0.5,0.75\n2,0.25,1\n");
}

}  // namespace
}  // namespace probekit
