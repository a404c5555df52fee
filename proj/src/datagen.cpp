#include "ubna/datagen.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "ubna/util.hpp"

namespace ubna {

bool DomainShift::is_identity() const {
  return scale == Eigen::Vector3d::Ones() && offset == Eigen::Vector3d::Zero() &&
         mixing == Eigen::Matrix3d::Identity() && noise_stddev == 0.0;
}

void DatasetSpec::validate() const {
  if (num_classes < 2) throw InvalidInput("DatasetSpec: need >= 2 classes");
  if (static_cast<int>(class_colors.size()) != num_classes)
    throw InvalidInput("DatasetSpec: one color per class required");
  if (color_stddev < 0.0) throw InvalidInput("DatasetSpec: color_stddev must be >= 0");
  if (rects_per_class < 1) throw InvalidInput("DatasetSpec: rects_per_class must be >= 1");
  if (height < 2 || width < 2) throw InvalidInput("DatasetSpec: images must be >= 2x2");
  if (size < 0) throw InvalidInput("DatasetSpec: size must be >= 0");
}

DomainDataset::DomainDataset(DatasetSpec spec, DomainShift shift)
    : spec_(std::move(spec)), shift_(shift) {
  spec_.validate();
}

namespace {

// Per-image seed salts; layout and color streams are separate so a shifted
// dataset pairs pixel-exactly with its unshifted counterpart.
constexpr std::uint64_t kLayoutSalt = 0;
constexpr std::uint64_t kColorSalt = 1;
constexpr std::uint64_t kNoiseSalt = 2;

}  // namespace

Sample DomainDataset::generate(int index) const {
  if (index < 0 || index >= size()) throw InvalidInput("DomainDataset: index out of range");
  const int base_index = order_.empty() ? index : order_[index];
  const Index h = spec_.height, w = spec_.width;

  Sample s;
  s.labels = LabelMap(1, h, w, spec_.num_classes);

  // Layout: random axis-aligned rectangles per class over base class 0.
  std::mt19937_64 layout_rng(mix_seed(spec_.seed, 3ULL * base_index + kLayoutSalt));
  const Index min_side = std::max<Index>(2, h / 6);
  const Index max_side = std::max<Index>(min_side + 1, h / 2);
  std::uniform_int_distribution<Index> side(min_side, max_side);
  for (int cls = 1; cls < spec_.num_classes; ++cls) {
    for (int r = 0; r < spec_.rects_per_class; ++r) {
      const Index rh = side(layout_rng);
      const Index rw = side(layout_rng);
      std::uniform_int_distribution<Index> top_dist(0, h - 1), left_dist(0, w - 1);
      const Index top = top_dist(layout_rng);
      const Index left = left_dist(layout_rng);
      for (Index y = top; y < std::min(h, top + rh); ++y)
        for (Index x = left; x < std::min(w, left + rw); ++x)
          s.labels(0, y, x) = cls;
    }
  }

  // Colors: class-conditional Gaussian per pixel and channel, clamped to [0,1].
  s.image = FeatureBatch(1, h, w, 3);
  std::mt19937_64 color_rng(mix_seed(spec_.seed, 3ULL * base_index + kColorSalt));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      const Eigen::Vector3d& c = spec_.class_colors[s.labels(0, y, x)];
      for (Index ch = 0; ch < 3; ++ch) {
        double v = c(ch);
        if (spec_.color_stddev > 0.0) v += spec_.color_stddev * noise(color_rng);
        s.image(0, y, x, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }

  if (!shift_.is_identity())
    s.image = apply_shift(s.image, shift_, mix_seed(spec_.seed, 3ULL * base_index + kNoiseSalt));
  return s;
}

DomainDataset DomainDataset::reordered(std::vector<int> order, bool mark_ordered) const {
  for (int i : order)
    if (i < 0 || i >= spec_.size) throw InvalidInput("reordered: index out of range");
  DomainDataset view = *this;
  view.order_ = std::move(order);
  view.spec_.temporally_ordered = mark_ordered;
  return view;
}

std::string DomainDataset::canonical_description() const {
  std::ostringstream out;
  out << "classes=" << spec_.num_classes << ";colors=";
  for (const auto& c : spec_.class_colors)
    out << format_double(c(0)) << "," << format_double(c(1)) << "," << format_double(c(2))
        << ";";
  out << "stddev=" << format_double(spec_.color_stddev)
      << ";rects=" << spec_.rects_per_class << ";size=" << spec_.size << ";h=" << spec_.height
      << ";w=" << spec_.width << ";seed=" << spec_.seed
      << ";ordered=" << (spec_.temporally_ordered ? 1 : 0);
  out << ";shift_scale=" << format_double(shift_.scale(0)) << ","
      << format_double(shift_.scale(1)) << "," << format_double(shift_.scale(2));
  out << ";shift_offset=" << format_double(shift_.offset(0)) << ","
      << format_double(shift_.offset(1)) << "," << format_double(shift_.offset(2));
  out << ";shift_mix=";
  for (Index r = 0; r < 3; ++r)
    for (Index c = 0; c < 3; ++c) out << format_double(shift_.mixing(r, c)) << ",";
  out << ";shift_noise=" << format_double(shift_.noise_stddev);
  if (!order_.empty()) {
    out << ";order=";
    for (int i : order_) out << i << ",";
  }
  return out.str();
}

FeatureBatch apply_shift(const FeatureBatch& image, const DomainShift& shift,
                         std::uint64_t seed) {
  if (image.channels() != 3) throw InvalidInput("apply_shift: 3-channel images only");
  if (shift.is_identity()) return image;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  FeatureBatch out(image.batch(), image.height(), image.width(), 3);
  const Index rows = image.positions();
  for (Index r = 0; r < rows; ++r) {
    Eigen::Vector3d v = image.matrix().row(r).transpose().cast<double>();
    v = shift.mixing * (shift.scale.cwiseProduct(v) + shift.offset);
    if (shift.noise_stddev > 0.0)
      for (Index ch = 0; ch < 3; ++ch) v(ch) += shift.noise_stddev * noise(rng);
    for (Index ch = 0; ch < 3; ++ch)
      out.matrix()(r, ch) = static_cast<float>(std::clamp(v(ch), 0.0, 1.0));
  }
  return out;
}

std::pair<FeatureBatch, LabelMap> assemble_batch(const DomainDataset& data,
                                                 const std::vector<int>& indices) {
  if (indices.empty()) throw InvalidInput("assemble_batch: empty index list");
  Sample first = data.generate(indices[0]);
  const Index h = first.image.height(), w = first.image.width(), c = first.image.channels();
  const Index n = static_cast<Index>(indices.size());

  FeatureBatch images(n, h, w, c);
  LabelMap labels(n, h, w, first.labels.num_classes);
  const Index stride = h * w;
  for (Index b = 0; b < n; ++b) {
    Sample s = b == 0 ? std::move(first) : data.generate(indices[static_cast<std::size_t>(b)]);
    images.matrix().middleRows(b * stride, stride) = s.image.matrix();
    labels.ids.segment(b * stride, stride) = s.labels.ids;
  }
  return {std::move(images), std::move(labels)};
}

void write_ppm(const FeatureBatch& image, Index batch_index, const std::string& path) {
  if (image.channels() != 3) throw InvalidInput("write_ppm: 3-channel images only");
  if (batch_index < 0 || batch_index >= image.batch())
    throw InvalidInput("write_ppm: batch index out of range");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("write_ppm: cannot open " + path);
  out << "P6\n" << image.width() << " " << image.height() << "\n255\n";
  for (Index y = 0; y < image.height(); ++y) {
    for (Index x = 0; x < image.width(); ++x) {
      for (Index ch = 0; ch < 3; ++ch) {
        const float v = std::clamp(image(batch_index, y, x, ch), 0.0f, 1.0f);
        out.put(static_cast<char>(static_cast<int>(v * 255.0f + 0.5f)));
      }
    }
  }
}

namespace {

Eigen::Vector3d parse_triple(const std::string& text, const std::string& what) {
  const std::vector<std::string> parts = split(text, ',');
  if (parts.size() != 3) throw InvalidInput(what + ": expected three comma-separated values");
  return {parse_double(parts[0]), parse_double(parts[1]), parse_double(parts[2])};
}

std::string lookup(const KeyValueConfig& cfg, const std::string& section,
                   const std::string& key, const std::string& fallback) {
  if (auto v = cfg.get(section, key)) return *v;
  if (auto v = cfg.get("dataset", key)) return *v;
  return fallback;
}

}  // namespace

DomainDataset dataset_from_config(const KeyValueConfig& cfg, const std::string& section) {
  if (!cfg.has_section(section))
    throw InvalidInput("config: missing dataset section [" + section + "]");

  DatasetSpec spec;
  spec.num_classes = static_cast<int>(parse_long(lookup(cfg, section, "classes", "")));
  const std::string colors = lookup(cfg, section, "colors", "");
  for (const std::string& part : split(colors, ';')) {
    if (trim(part).empty()) continue;
    spec.class_colors.push_back(parse_triple(part, "colors"));
  }
  spec.color_stddev = parse_double(lookup(cfg, section, "color_stddev", "0"));
  spec.rects_per_class = static_cast<int>(parse_long(lookup(cfg, section, "rects_per_class", "2")));
  spec.size = static_cast<int>(parse_long(lookup(cfg, section, "size", "0")));
  spec.height = parse_long(lookup(cfg, section, "height", "32"));
  spec.width = parse_long(lookup(cfg, section, "width", "32"));
  spec.seed = static_cast<std::uint64_t>(parse_long(lookup(cfg, section, "seed", "0")));
  spec.temporally_ordered = lookup(cfg, section, "ordered", "false") == "true";

  DomainShift shift;
  if (auto v = cfg.get(section, "shift_scale")) shift.scale = parse_triple(*v, "shift_scale");
  if (auto v = cfg.get(section, "shift_offset")) shift.offset = parse_triple(*v, "shift_offset");
  if (auto v = cfg.get(section, "shift_noise")) shift.noise_stddev = parse_double(*v);
  if (auto v = cfg.get(section, "shift_mix")) {
    const std::vector<std::string> parts = split(*v, ',');
    if (parts.size() != 9) throw InvalidInput("shift_mix: expected nine values");
    for (Index r = 0; r < 3; ++r)
      for (Index c = 0; c < 3; ++c)
        shift.mixing(r, c) = parse_double(parts[static_cast<std::size_t>(r * 3 + c)]);
  }
  return DomainDataset(std::move(spec), shift);
}

}  // namespace ubna
