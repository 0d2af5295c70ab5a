#pragma once

namespace probekit {

namespace detail {

template <typename Scalar>
MatrixX<Scalar> softmax_rows(MatrixX<Scalar> z) {
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
  return z;
}

template <typename Scalar>
MatrixX<Scalar> gather_rows(const MatrixX<Scalar>& m, std::span<const std::size_t> rows) {
  MatrixX<Scalar> out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

template <typename Scalar>
void check_labels(const LabeledData<Scalar>& data, std::size_t n_classes, const char* what) {
  if (static_cast<std::size_t>(data.features.rows()) != data.labels.size())
    throw ValidationError(std::string(what) + ": feature rows and label count differ");
  for (int y : data.labels)
    if (y < 0 || static_cast<std::size_t>(y) >= n_classes)
      throw ValidationError(std::string(what) + ": label " + std::to_string(y) + " outside [0, " +
                            std::to_string(n_classes) + ")");
}

}  // namespace detail

template <typename Scalar>
Mlp<Scalar>::Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ValidationError("network needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.weights.rows() == 0 || l.weights.cols() == 0) throw ValidationError("zero-sized layer");
    if (l.bias.size() != l.weights.cols()) throw ValidationError("bias length does not match layer width");
    if (i > 0 && layers_[i - 1].weights.cols() != l.weights.rows())
      throw ValidationError("layer shapes do not chain");
  }
}

template <typename Scalar>
Mlp<Scalar> Mlp<Scalar>::init(const MlpConfig& config) {
  if (config.input_dim == 0 || config.n_classes == 0) throw ValidationError("network dimensions must be positive");
  if (config.hidden_layers.empty() && !config.allow_linear)
    throw ValidationError("network needs at least one hidden layer");
  if (config.hidden_layers.size() > 3) throw ValidationError("at most three hidden layers are supported");
  for (auto units : config.hidden_layers)
    if (units == 0) throw ValidationError("hidden layer width must be positive");

  std::vector<std::size_t> dims{config.input_dim};
  dims.insert(dims.end(), config.hidden_layers.begin(), config.hidden_layers.end());
  dims.push_back(config.n_classes);

  Rng rng(config.seed);
  std::vector<Layer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const auto fan_in = dims[i];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    Layer l;
    l.weights.resize(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(dims[i + 1]));
    for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
      for (Eigen::Index r = 0; r < l.weights.rows(); ++r) l.weights(r, c) = static_cast<Scalar>(rng.uniform(-limit, limit));
    l.bias = Vector::Zero(static_cast<Eigen::Index>(dims[i + 1]));
    layers.push_back(std::move(l));
  }
  return Mlp(std::move(layers));
}

template <typename Scalar>
std::size_t Mlp<Scalar>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

template <typename Scalar>
Scalar& Mlp<Scalar>::parameter(std::size_t i) {
  for (auto& l : layers_) {
    const auto w = static_cast<std::size_t>(l.weights.size());
    if (i < w) return l.weights.data()[i];
    i -= w;
    const auto b = static_cast<std::size_t>(l.bias.size());
    if (i < b) return l.bias.data()[i];
    i -= b;
  }
  throw ValidationError("parameter index out of range");
}

template <typename Scalar>
void Mlp<Scalar>::check_input(const Matrix& inputs) const {
  if (static_cast<std::size_t>(inputs.cols()) != input_dim())
    throw ValidationError("input width " + std::to_string(inputs.cols()) + " does not match network input " +
                          std::to_string(input_dim()));
}

template <typename Scalar>
auto Mlp<Scalar>::predict_proba(const Matrix& inputs) const -> Matrix {
  check_input(inputs);
  Matrix a = inputs;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Matrix z = (a * layers_[i].weights).rowwise() + layers_[i].bias.transpose();
    if (i + 1 < layers_.size())
      a = z.cwiseMax(Scalar(0));
    else
      a = detail::softmax_rows<Scalar>(std::move(z));
  }
  return a;
}

template <typename Scalar>
auto Mlp<Scalar>::forward(const Vector& x) const -> Vector {
  return predict_proba(x.transpose()).row(0).transpose();
}

template <typename Scalar>
std::vector<int> Mlp<Scalar>::predict(const Matrix& inputs) const {
  const Matrix p = predict_proba(inputs);
  std::vector<int> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    Eigen::Index best;
    p.row(r).maxCoeff(&best);
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

template <typename Scalar>
Scalar Mlp<Scalar>::loss(const Matrix& inputs, std::span<const int> labels) const {
  return loss_and_gradient(inputs, labels).loss;
}

template <typename Scalar>
auto Mlp<Scalar>::loss_and_gradient(const Matrix& inputs, std::span<const int> labels) const -> Gradient {
  check_input(inputs);
  const auto n = inputs.rows();
  if (n == 0 || static_cast<std::size_t>(n) != labels.size()) throw ValidationError("batch and labels differ in size");

  // Forward pass, keeping every activation for the backward pass.
  std::vector<Matrix> acts{inputs};
  std::vector<Matrix> pre;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Matrix z = (acts.back() * layers_[i].weights).rowwise() + layers_[i].bias.transpose();
    pre.push_back(z);
    if (i + 1 < layers_.size())
      acts.push_back(z.cwiseMax(Scalar(0)));
    else
      acts.push_back(detail::softmax_rows<Scalar>(std::move(z)));
  }

  const Matrix& probs = acts.back();
  Scalar loss = 0;
  Matrix delta = probs;
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= probs.cols()) throw ValidationError("label out of range");
    loss -= std::log(std::max(probs(r, y), std::numeric_limits<Scalar>::min()));
    delta(r, y) -= Scalar(1);
  }
  loss /= static_cast<Scalar>(n);
  delta /= static_cast<Scalar>(n);

  Gradient g{loss, std::vector<Layer>(layers_.size())};
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g.layers[i].weights = acts[i].transpose() * delta;
    g.layers[i].bias = delta.colwise().sum().transpose();
    if (i > 0) {
      Matrix back = delta * layers_[i].weights.transpose();
      delta = (pre[i - 1].array() > Scalar(0)).select(back.array(), Scalar(0)).matrix();
    }
  }
  return g;
}

template <typename Scalar>
double accuracy(const Mlp<Scalar>& model, const LabeledData<Scalar>& data) {
  if (data.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto pred = model.predict(data.features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

template <typename Scalar>
GradCheckReport grad_check(const Mlp<Scalar>& model, const MatrixX<double>& inputs, std::span<const int> labels,
                           double step) {
  Mlp<double> probe = model.template cast<double>();
  const auto analytic = probe.loss_and_gradient(inputs, labels);
  Mlp<double> flat_grad(analytic.layers);

  GradCheckReport report;
  report.parameters_checked = probe.parameter_count();
  for (std::size_t i = 0; i < probe.parameter_count(); ++i) {
    double& p = probe.parameter(i);
    const double saved = p;
    p = saved + step;
    const double up = probe.loss(inputs, labels);
    p = saved - step;
    const double down = probe.loss(inputs, labels);
    p = saved;
    const double numeric = (up - down) / (2 * step);
    const double a = flat_grad.parameter(i);
    const double abs_err = std::abs(a - numeric);
    const double rel_err = abs_err / std::max({std::abs(a), std::abs(numeric), 1e-6});
    report.max_absolute_error = std::max(report.max_absolute_error, abs_err);
    report.max_relative_error = std::max(report.max_relative_error, rel_err);
  }
  return report;
}

template <typename Scalar>
TrainResult<Scalar> train(Mlp<Scalar> model, const LabeledData<Scalar>& train_set, const LabeledData<Scalar>& val_set,
                          const TrainConfig& config) {
  if (train_set.empty()) throw ValidationError("training set is empty");
  if (config.learning_rate <= 0 || config.batch_size == 0 || config.max_epochs == 0 || config.patience == 0 ||
      config.epsilon <= 0)
    throw ValidationError("training configuration values must be positive");
  detail::check_labels(train_set, model.n_classes(), "train set");
  detail::check_labels(val_set, model.n_classes(), "validation set");
  if (!val_set.empty() && static_cast<std::size_t>(val_set.features.cols()) != model.input_dim())
    throw ValidationError("validation width does not match network input");

  using Layer = DenseLayer<Scalar>;
  std::vector<Layer> m, v;
  for (const auto& l : model.layers()) {
    m.push_back({MatrixX<Scalar>::Zero(l.weights.rows(), l.weights.cols()), VectorX<Scalar>::Zero(l.bias.size())});
    v.push_back(m.back());
  }

  TrainResult<Scalar> result;
  result.model = model;
  const bool validate = !val_set.empty();
  double best_acc = -1;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t step_count = 0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const auto b1 = static_cast<Scalar>(config.beta1);
  const auto b2 = static_cast<Scalar>(config.beta2);
  const auto eps = static_cast<Scalar>(config.epsilon);
  const auto lr = static_cast<Scalar>(config.learning_rate);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, {epoch}));
    rng.shuffle(order.begin(), order.end());

    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto count = std::min(config.batch_size, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, count);
      const auto xb = detail::gather_rows(train_set.features, idx);
      std::vector<int> yb(count);
      for (std::size_t i = 0; i < count; ++i) yb[i] = train_set.labels[idx[i]];

      const auto g = model.loss_and_gradient(xb, yb);
      result.step_losses.push_back(static_cast<double>(g.loss));
      loss_sum += static_cast<double>(g.loss);
      ++batches;
      ++step_count;

      const Scalar c1 = Scalar(1) - static_cast<Scalar>(std::pow(config.beta1, static_cast<double>(step_count)));
      const Scalar c2 = Scalar(1) - static_cast<Scalar>(std::pow(config.beta2, static_cast<double>(step_count)));
      auto& layers = model.layers();
      for (std::size_t l = 0; l < layers.size(); ++l) {
        m[l].weights = b1 * m[l].weights + (Scalar(1) - b1) * g.layers[l].weights;
        v[l].weights = b2 * v[l].weights + (Scalar(1) - b2) * g.layers[l].weights.cwiseAbs2();
        m[l].bias = b1 * m[l].bias + (Scalar(1) - b1) * g.layers[l].bias;
        v[l].bias = b2 * v[l].bias + (Scalar(1) - b2) * g.layers[l].bias.cwiseAbs2();
        layers[l].weights.array() -=
            lr * (m[l].weights.array() / c1) / ((v[l].weights.array() / c2).sqrt() + eps);
        layers[l].bias.array() -= lr * (m[l].bias.array() / c1) / ((v[l].bias.array() / c2).sqrt() + eps);
      }
    }

    const double train_loss = loss_sum / static_cast<double>(batches);
    if (!validate) {
      result.history.push_back({epoch, train_loss, std::numeric_limits<double>::quiet_NaN()});
      continue;
    }
    const double acc = accuracy(model, val_set);
    const double val_loss = static_cast<double>(model.loss(val_set.features, val_set.labels));
    result.history.push_back({epoch, train_loss, acc, val_loss});
    // Equal accuracy counts as progress when the validation loss drops, so a
    // saturated accuracy keeps training toward wider margins.
    if (acc > best_acc || (acc == best_acc && val_loss < best_loss)) {
      best_acc = acc;
      best_loss = val_loss;
      result.best_epoch = epoch;
      result.model = model;
    } else if (epoch - result.best_epoch >= config.patience) {
      break;
    }
  }

  if (validate) {
    result.best_val_accuracy = best_acc;
  } else {
    result.model = model;
    result.best_epoch = result.history.size();
  }
  return result;
}

template <typename Scalar>
GridSearchResult<Scalar> grid_search(std::span<const GridCell> grid, const LabeledData<Scalar>& train_set,
                                     const LabeledData<Scalar>& val_set) {
  if (grid.empty()) throw ValidationError("hyperparameter grid is empty");
  if (val_set.empty()) throw ValidationError("grid search needs a validation set");
  GridSearchResult<Scalar> out;
  double best = -1;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto r = train(Mlp<Scalar>::init(grid[i].model), train_set, val_set, grid[i].train);
    const double acc = *r.best_val_accuracy;
    out.val_accuracy.push_back(acc);
    if (acc > best) {
      best = acc;
      out.best_index = i;
      out.best = std::move(r);
    }
  }
  return out;
}

}  // namespace probekit
