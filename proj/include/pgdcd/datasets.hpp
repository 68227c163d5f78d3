#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pgdcd/models.hpp"

namespace pgdcd {

struct LabeledDataset {
  std::string name;
  std::vector<ImageVec> images;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;
  double domain_lo = 0.0;
  double domain_hi = 1.0;

  std::size_t size() const { return images.size(); }
  std::size_t dim() const { return images.empty() ? 0 : images.front().dim(); }

  /// Checks equal lengths, consistent dims and labels < num_classes.
  /// Throws std::invalid_argument.
  void validate() const;
};

/// CSV: one row per sample, label first, then features in [0, 1].
/// Written with shortest round-trip decimal floats.
void write_csv(const LabeledDataset& data, const std::filesystem::path& path);
/// `num_classes` = 0 infers max(label) + 1.
LabeledDataset read_csv(const std::filesystem::path& path, std::size_t num_classes = 0);

/// IDX pair (unsigned-byte images, magic 0x00000803; labels, magic
/// 0x00000801). Pixels are scaled by 1/255 into [0, 1]; trailing image
/// dimensions are flattened.
LabeledDataset read_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        std::size_t num_classes = 0);
/// Quantizes features to bytes (round(255 x)); the inverse of read_idx for
/// byte-valued inputs.
void write_idx(const LabeledDataset& data, const std::filesystem::path& images,
               const std::filesystem::path& labels);

enum class SyntheticKind { Blobs, Rings };

SyntheticKind parse_synthetic_kind(const std::string& name);

struct SyntheticParams {
  SyntheticKind kind = SyntheticKind::Blobs;
  std::size_t n = 500;
  std::size_t dim = 64;
  std::size_t classes = 4;
  std::uint64_t seed = 0;
  /// Per-coordinate noise standard deviation (blobs) or radial noise (rings).
  double noise = 0.1;
};

/// Labels cycle 0, 1, ..., classes-1 so class counts differ by at most one.
/// Blobs: class means uniform in [0.2, 0.8]^dim plus Gaussian noise.
/// Rings: concentric circles in the first two coordinates, noise elsewhere.
/// Features are clamped into [0, 1].
LabeledDataset generate_synthetic_dataset(const SyntheticParams& params);

}  // namespace pgdcd
