#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace probekit {

/// Per-layer [CLS] vectors for a list of utterance ids.
///
/// On disk ("LPEM", version 1, all integers little-endian):
///   magic[4] version:u32 n_layers:u32 n_rows:u32 dim:u32
///   n_rows x (len:u16, UTF-8 bytes)
///   n_layers x n_rows x dim f32, layer-major, row-major within a layer
class EmbeddingStore {
 public:
  using LayerMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  EmbeddingStore() = default;
  /// Validates shapes and id uniqueness.
  EmbeddingStore(std::vector<std::string> ids, std::vector<LayerMatrix> layers);

  std::size_t n_layers() const { return layers_.size(); }
  std::size_t n_rows() const { return ids_.size(); }
  std::size_t dim() const { return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().cols()); }
  const std::vector<std::string>& ids() const { return ids_; }

  /// Layers are numbered from 1, matching encoder layer indices.
  const LayerMatrix& layer(std::size_t one_based) const;
  const std::vector<LayerMatrix>& layers() const { return layers_; }

  bool operator==(const EmbeddingStore& o) const;

 private:
  std::vector<std::string> ids_;
  std::vector<LayerMatrix> layers_;
};

inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 20;

void write_embeddings(std::ostream& out, const EmbeddingStore& store);
void write_embeddings(const EmbeddingStore& store, const std::filesystem::path& path);

EmbeddingStore read_embeddings(std::istream& in);
EmbeddingStore read_embeddings(const std::filesystem::path& path);

/// Row of each requested id in the store. Throws ValidationError listing
/// every id that is absent.
std::vector<std::size_t> align(const EmbeddingStore& store, std::span<const std::string> ids);

}  // namespace probekit
