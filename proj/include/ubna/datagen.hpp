#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ubna/config.hpp"
#include "ubna/nncore.hpp"

namespace ubna {

/// Appearance-only transform between domains: x' = clamp(M(a*x + b) + noise).
struct DomainShift {
  Eigen::Vector3d scale = Eigen::Vector3d::Ones();
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
  Eigen::Matrix3d mixing = Eigen::Matrix3d::Identity();
  double noise_stddev = 0.0;

  bool is_identity() const;
};

struct DatasetSpec {
  int num_classes = 0;
  std::vector<Eigen::Vector3d> class_colors;  // c_s per class, RGB in [0,1]
  double color_stddev = 0.0;
  int rects_per_class = 2;  // rectangles drawn for each non-base class
  int size = 0;             // number of images
  Index height = 32, width = 32;
  std::uint64_t seed = 0;
  bool temporally_ordered = false;

  void validate() const;
};

struct Sample {
  FeatureBatch image;  // B=1
  LabelMap labels;
};

/// Deterministic synthetic domain: class-colored random rectangles over a
/// base class, with an optional appearance shift applied on top. Identical
/// (spec, seed, index) always yields a bit-identical sample.
class DomainDataset {
public:
  DomainDataset() = default;
  DomainDataset(DatasetSpec spec, DomainShift shift = {});

  int size() const { return order_.empty() ? spec_.size : static_cast<int>(order_.size()); }
  bool temporally_ordered() const { return spec_.temporally_ordered; }
  const DatasetSpec& spec() const { return spec_; }
  const DomainShift& shift() const { return shift_; }

  Sample generate(int index) const;

  /// View of the same generator with indices remapped; used to replay one
  /// protocol's batch order through another.
  DomainDataset reordered(std::vector<int> order, bool mark_ordered) const;

  /// Stable text form of the generator parameters, for provenance hashing.
  std::string canonical_description() const;

private:
  DatasetSpec spec_;
  DomainShift shift_;
  std::vector<int> order_;  // empty = identity
};

FeatureBatch apply_shift(const FeatureBatch& image, const DomainShift& shift,
                         std::uint64_t seed);

/// Stack the given samples into one (B,H,W,C) batch plus labels.
std::pair<FeatureBatch, LabelMap> assemble_batch(const DomainDataset& data,
                                                 const std::vector<int>& indices);

/// Binary P6 portable pixmap of one image in the batch, for inspection.
void write_ppm(const FeatureBatch& image, Index batch_index, const std::string& path);

/// Build a dataset from a config file: base keys in [dataset], per-domain
/// overrides plus size/seed/shift in [section]. See docs/dataset_config.md.
DomainDataset dataset_from_config(const KeyValueConfig& cfg, const std::string& section);

}  // namespace ubna
