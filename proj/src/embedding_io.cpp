#include "probekit/embedding_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_map>
#include <unordered_set>

#include "probekit/error.hpp"

namespace probekit {

namespace {

constexpr char kMagic[4] = {'L', 'P', 'E', 'M'};

void check_shapes(const std::vector<std::string>& ids, const std::vector<EmbeddingStore::LayerMatrix>& layers) {
  if (layers.empty()) throw ValidationError("embedding store needs at least one layer");
  const auto dim = layers.front().cols();
  if (dim == 0) throw ValidationError("embedding dimension must be positive");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (static_cast<std::size_t>(layers[l].rows()) != ids.size())
      throw ValidationError("layer " + std::to_string(l + 1) + " has " + std::to_string(layers[l].rows()) +
                            " rows, expected " + std::to_string(ids.size()));
    if (layers[l].cols() != dim)
      throw ValidationError("layer " + std::to_string(l + 1) + " has width " + std::to_string(layers[l].cols()) +
                            ", expected " + std::to_string(dim));
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (id.size() > 0xffff) throw ValidationError("id longer than 65535 bytes");
    if (!seen.insert(id).second) throw ValidationError("duplicate embedding id '" + id + "'");
  }
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf += static_cast<char>((v >> (8 * i)) & 0xff);
}

void put_u16(std::string& buf, std::uint16_t v) {
  buf += static_cast<char>(v & 0xff);
  buf += static_cast<char>(v >> 8);
}

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n)
      throw FormatError(std::string("truncated embedding file: ") + what + " needs " + std::to_string(n) +
                        " bytes, " + std::to_string(remaining()) + " left");
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint16_t u16(const char* what) {
    need(2, what);
    auto v = static_cast<std::uint16_t>(static_cast<unsigned char>(bytes_[pos_]) |
                                        (static_cast<unsigned char>(bytes_[pos_ + 1]) << 8));
    pos_ += 2;
    return v;
  }

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  float f32() {
    return std::bit_cast<float>(u32("payload"));
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

EmbeddingStore::EmbeddingStore(std::vector<std::string> ids, std::vector<LayerMatrix> layers)
    : ids_(std::move(ids)), layers_(std::move(layers)) {
  check_shapes(ids_, layers_);
}

const EmbeddingStore::LayerMatrix& EmbeddingStore::layer(std::size_t one_based) const {
  if (one_based < 1 || one_based > layers_.size())
    throw ValidationError("layer " + std::to_string(one_based) + " out of range [1, " +
                          std::to_string(layers_.size()) + "]");
  return layers_[one_based - 1];
}

bool EmbeddingStore::operator==(const EmbeddingStore& o) const {
  if (ids_ != o.ids_ || layers_.size() != o.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& a = layers_[l];
    const auto& b = o.layers_[l];
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    // Bitwise, so the comparison is exact even for -0.0.
    if (a.size() && std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())) != 0)
      return false;
  }
  return true;
}

void write_embeddings(std::ostream& out, const EmbeddingStore& store) {
  check_shapes(store.ids(), store.layers());
  std::string buf(kMagic, 4);
  put_u32(buf, kEmbeddingVersion);
  put_u32(buf, static_cast<std::uint32_t>(store.n_layers()));
  put_u32(buf, static_cast<std::uint32_t>(store.n_rows()));
  put_u32(buf, static_cast<std::uint32_t>(store.dim()));
  for (const auto& id : store.ids()) {
    put_u16(buf, static_cast<std::uint16_t>(id.size()));
    buf += id;
  }
  buf.reserve(buf.size() + 4 * store.n_layers() * store.n_rows() * store.dim());
  for (const auto& m : store.layers())
    for (Eigen::Index i = 0; i < m.size(); ++i) put_u32(buf, std::bit_cast<std::uint32_t>(m.data()[i]));
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed writing embedding store");
}

void write_embeddings(const EmbeddingStore& store, const std::filesystem::path& path) {
  check_shapes(store.ids(), store.layers());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_embeddings(out, store);
}

EmbeddingStore read_embeddings(std::istream& in) {
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ByteReader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("not an embedding file: bad magic");
  r.bytes(4, "magic");
  const auto version = r.u32("version");
  if (version != kEmbeddingVersion) throw FormatError("unsupported embedding file version " + std::to_string(version));
  const std::size_t n_layers = r.u32("header");
  const std::size_t n_rows = r.u32("header");
  const std::size_t dim = r.u32("header");
  if (n_layers == 0 || dim == 0) throw FormatError("embedding file declares zero layers or zero width");

  std::vector<std::string> ids;
  ids.reserve(n_rows);
  for (std::size_t i = 0; i < n_rows; ++i) {
    const auto len = r.u16("id length");
    ids.push_back(r.bytes(len, "id"));
  }

  const std::size_t payload = 4 * n_layers * n_rows * dim;
  if (r.remaining() != payload)
    throw FormatError("embedding payload is " + std::to_string(r.remaining()) + " bytes, header declares " +
                      std::to_string(payload));

  std::vector<EmbeddingStore::LayerMatrix> layers;
  layers.reserve(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    EmbeddingStore::LayerMatrix m(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const float v = r.f32();
      if (!std::isfinite(v))
        throw ValidationError("non-finite value in layer " + std::to_string(l + 1) + ", row " +
                              std::to_string(static_cast<std::size_t>(i) / dim));
      m.data()[i] = v;
    }
    layers.push_back(std::move(m));
  }
  return EmbeddingStore(std::move(ids), std::move(layers));
}

EmbeddingStore read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embedding file '" + path.string() + "'");
  return read_embeddings(in);
}

std::vector<std::size_t> align(const EmbeddingStore& store, std::span<const std::string> ids) {
  std::unordered_map<std::string_view, std::size_t> rows;
  rows.reserve(store.n_rows());
  for (std::size_t i = 0; i < store.n_rows(); ++i) rows.emplace(store.ids()[i], i);

  std::vector<std::size_t> map;
  map.reserve(ids.size());
  std::vector<std::string> missing;
  for (const auto& id : ids) {
    auto it = rows.find(id);
    if (it == rows.end())
      missing.push_back(id);
    else
      map.push_back(it->second);
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 20) list += ", ... (" + std::to_string(missing.size()) + " total)";
    throw ValidationError("embedding store lacks rows for: " + list);
  }
  return map;
}

}  // namespace probekit
