#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "probekit/error.hpp"
#include "probekit/hashing.hpp"

namespace probekit {

struct MlpConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_layers;
  std::size_t n_classes = 0;
  std::uint64_t seed = 0;
  /// Permit an empty hidden_layers list, giving a single linear map onto the
  /// classes. Off for the architecture grids, which need 1-3 hidden layers.
  bool allow_linear = false;
};

/// Adam over shuffled minibatches with early stopping on validation accuracy.
struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
};

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Rows of `features` are samples; labels index classes.
template <typename Scalar>
struct LabeledData {
  MatrixX<Scalar> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
};

/// y = x W + b; W is (inputs x outputs).
template <typename Scalar>
struct DenseLayer {
  MatrixX<Scalar> weights;
  VectorX<Scalar> bias;

  bool operator==(const DenseLayer& o) const { return weights == o.weights && bias == o.bias; }
};

template <typename Scalar>
class Mlp {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;
  using Layer = DenseLayer<Scalar>;

  Mlp() = default;
  explicit Mlp(std::vector<Layer> layers);

  /// Weights ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)), biases zero.
  static Mlp init(const MlpConfig& config);

  std::size_t input_dim() const { return static_cast<std::size_t>(layers_.front().weights.rows()); }
  std::size_t n_classes() const { return static_cast<std::size_t>(layers_.back().weights.cols()); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  std::size_t parameter_count() const;
  /// Flat view over all weights then biases, layer by layer.
  Scalar& parameter(std::size_t i);

  /// Class probabilities, one row per input row.
  Matrix predict_proba(const Matrix& inputs) const;
  Vector forward(const Vector& x) const;
  std::vector<int> predict(const Matrix& inputs) const;

  /// Mean cross-entropy.
  Scalar loss(const Matrix& inputs, std::span<const int> labels) const;

  struct Gradient {
    Scalar loss;
    std::vector<Layer> layers;
  };
  Gradient loss_and_gradient(const Matrix& inputs, std::span<const int> labels) const;

  template <typename Other>
  Mlp<Other> cast() const {
    std::vector<DenseLayer<Other>> out;
    for (const auto& l : layers_) out.push_back({l.weights.template cast<Other>(), l.bias.template cast<Other>()});
    return Mlp<Other>(std::move(out));
  }

  bool operator==(const Mlp& o) const { return layers_ == o.layers_; }

 private:
  void check_input(const Matrix& inputs) const;
  std::vector<Layer> layers_;
};

template <typename Scalar>
double accuracy(const Mlp<Scalar>& model, const LabeledData<Scalar>& data);

struct GradCheckReport {
  double max_relative_error = 0;
  double max_absolute_error = 0;
  std::size_t parameters_checked = 0;
};

/// Central differences over every parameter, always in double precision.
/// Relative error is |a - n| / max(|a|, |n|, 1e-6); below 1e-6 the differences
/// are dominated by roundoff (about eps * loss / step), so the floor applies.
template <typename Scalar>
GradCheckReport grad_check(const Mlp<Scalar>& model, const MatrixX<double>& inputs, std::span<const int> labels,
                           double step = 1e-5);

struct EpochRecord {
  std::size_t epoch;
  double train_loss;
  /// NaN when training ran without a validation set.
  double val_accuracy;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
};

template <typename Scalar>
struct TrainResult {
  Mlp<Scalar> model;
  std::vector<EpochRecord> history;
  /// Minibatch loss before each update, in step order.
  std::vector<double> step_losses;
  std::size_t best_epoch = 0;
  std::optional<double> best_val_accuracy;
};

/// Returns the parameters of the best-validation-accuracy epoch; among epochs
/// of equal accuracy the lower validation loss wins, then the earlier epoch.
/// Patience counts epochs since the last such improvement. With an empty
/// validation set, runs max_epochs and returns the final parameters.
template <typename Scalar>
TrainResult<Scalar> train(Mlp<Scalar> model, const LabeledData<Scalar>& train_set, const LabeledData<Scalar>& val_set,
                          const TrainConfig& config);

struct GridCell {
  MlpConfig model;
  TrainConfig train;
};

template <typename Scalar>
struct GridSearchResult {
  std::size_t best_index = 0;
  std::vector<double> val_accuracy;
  TrainResult<Scalar> best;
};

/// Trains every cell on train_set and keeps the highest validation accuracy;
/// ties go to the earlier cell.
template <typename Scalar>
GridSearchResult<Scalar> grid_search(std::span<const GridCell> grid, const LabeledData<Scalar>& train_set,
                                     const LabeledData<Scalar>& val_set);

/// Hidden-layer counts x units per layer x learning rates, in that nesting
/// order. Cell seeds are derived from `seed` and the cell index.
std::vector<GridCell> architecture_grid(std::size_t input_dim, std::size_t n_classes,
                                        std::span<const std::size_t> depths, std::span<const std::size_t> units,
                                        std::span<const double> learning_rates, const TrainConfig& base,
                                        std::uint64_t seed);

/// Linear heads (no hidden layer), one per learning rate.
std::vector<GridCell> linear_grid(std::size_t input_dim, std::size_t n_classes, std::span<const double> learning_rates,
                                  const TrainConfig& base, std::uint64_t seed);

std::string describe(const GridCell& cell);

/// "LPNN" checkpoint: version u32, layer count u32, then per layer rows u32,
/// cols u32, row-major f64 weights and cols f64 biases; little-endian.
void save_checkpoint(std::ostream& out, const Mlp<double>& model);
void save_checkpoint(const Mlp<double>& model, const std::filesystem::path& path);
Mlp<double> load_checkpoint(std::istream& in);
Mlp<double> load_checkpoint(const std::filesystem::path& path);

/// CSV with header epoch,train_loss,val_acc.
void write_history_csv(std::ostream& out, std::span<const EpochRecord> history);

}  // namespace probekit

#include "probekit/mlp.tpp"
