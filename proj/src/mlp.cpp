#include "probekit/mlp.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>

#include "probekit/csv.hpp"

namespace probekit {

std::vector<GridCell> architecture_grid(std::size_t input_dim, std::size_t n_classes,
                                        std::span<const std::size_t> depths, std::span<const std::size_t> units,
                                        std::span<const double> learning_rates, const TrainConfig& base,
                                        std::uint64_t seed) {
  std::vector<GridCell> grid;
  for (auto d : depths)
    for (auto u : units)
      for (auto lr : learning_rates) {
        GridCell cell;
        const auto index = grid.size();
        cell.model = MlpConfig{input_dim, std::vector<std::size_t>(d, u), n_classes, derive_seed(seed, {index, 1}), false};
        cell.train = base;
        cell.train.learning_rate = lr;
        cell.train.seed = derive_seed(seed, {index, 2});
        grid.push_back(std::move(cell));
      }
  return grid;
}

std::vector<GridCell> linear_grid(std::size_t input_dim, std::size_t n_classes, std::span<const double> learning_rates,
                                  const TrainConfig& base, std::uint64_t seed) {
  std::vector<GridCell> grid;
  for (auto lr : learning_rates) {
    GridCell cell;
    const auto index = grid.size();
    cell.model = MlpConfig{input_dim, {}, n_classes, derive_seed(seed, {index, 1}), true};
    cell.train = base;
    cell.train.learning_rate = lr;
    cell.train.seed = derive_seed(seed, {index, 2});
    grid.push_back(std::move(cell));
  }
  return grid;
}

std::string describe(const GridCell& cell) {
  std::string s = "hidden=[";
  for (std::size_t i = 0; i < cell.model.hidden_layers.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(cell.model.hidden_layers[i]);
  }
  char buf[48];
  std::snprintf(buf, sizeof buf, "] lr=%g", cell.train.learning_rate);
  return s + buf;
}

namespace {

constexpr char kMagic[4] = {'L', 'P', 'N', 'N'};

void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b += static_cast<char>((v >> (8 * i)) & 0xff);
}

void put_f64(std::string& b, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) b += static_cast<char>((v >> (8 * i)) & 0xff);
}

struct Cursor {
  const std::string& bytes;
  std::size_t pos = 0;

  std::uint64_t take(int n) {
    if (bytes.size() - pos < static_cast<std::size_t>(n)) throw FormatError("truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += static_cast<std::size_t>(n);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  double f64() { return std::bit_cast<double>(take(8)); }
};

}  // namespace

void save_checkpoint(std::ostream& out, const Mlp<double>& model) {
  std::string b(kMagic, 4);
  put_u32(b, 1);
  put_u32(b, static_cast<std::uint32_t>(model.layers().size()));
  for (const auto& l : model.layers()) {
    put_u32(b, static_cast<std::uint32_t>(l.weights.rows()));
    put_u32(b, static_cast<std::uint32_t>(l.weights.cols()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) put_f64(b, l.weights(r, c));
    for (Eigen::Index c = 0; c < l.bias.size(); ++c) put_f64(b, l.bias(c));
  }
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
  if (!out) throw IoError("failed writing checkpoint");
}

void save_checkpoint(const Mlp<double>& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  save_checkpoint(out, model);
}

Mlp<double> load_checkpoint(std::istream& in) {
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("not a checkpoint: bad magic");
  Cursor c{bytes, 4};
  if (c.u32() != 1) throw FormatError("unsupported checkpoint version");
  const auto n_layers = c.u32();
  std::vector<DenseLayer<double>> layers;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const auto rows = c.u32();
    const auto cols = c.u32();
    DenseLayer<double> l{MatrixX<double>(rows, cols), VectorX<double>(cols)};
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index k = 0; k < l.weights.cols(); ++k) l.weights(r, k) = c.f64();
    for (Eigen::Index k = 0; k < l.bias.size(); ++k) l.bias(k) = c.f64();
    layers.push_back(std::move(l));
  }
  if (c.pos != bytes.size()) throw FormatError("trailing bytes after checkpoint");
  return Mlp<double>(std::move(layers));
}

Mlp<double> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  return load_checkpoint(in);
}

void write_history_csv(std::ostream& out, std::span<const EpochRecord> history) {
  out << "epoch,train_loss,val_acc\n";
  for (const auto& h : history)
    out << h.epoch << ',' << csv::format_number(h.train_loss) << ','
        << (std::isnan(h.val_accuracy) ? std::string() : csv::format_number(h.val_accuracy)) << '\n';
}

}  // namespace probekit
