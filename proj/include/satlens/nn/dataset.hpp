#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "satlens/error.hpp"
#include "satlens/nn/layers.hpp"
#include "satlens/rng.hpp"
#include "satlens/tensor.hpp"

namespace satlens::nn {

/// Labeled dataset with a disjoint train/validation split.
struct Dataset {
  Tensor<float> train_x;
  std::vector<int> train_y;
  Tensor<float> val_x;
  std::vector<int> val_y;
  std::size_t classes = 0;

  DataShape shape() const {
    return DataShape{train_x.c, train_x.h, train_x.w};
  }

  void validate() const {
    require(classes >= 2, ErrorKind::DomainError, "dataset needs at least 2 classes");
    for (int y : train_y)
      require(y >= 0 && static_cast<std::size_t>(y) < classes, ErrorKind::DomainError,
              "train label out of range");
    for (int y : val_y)
      require(y >= 0 && static_cast<std::size_t>(y) < classes, ErrorKind::DomainError,
              "validation label out of range");
  }
};

/// Copies the selected samples into a batch tensor.
inline Tensor<float> gather_batch(const Tensor<float>& x, const std::vector<std::size_t>& indices,
                                  std::size_t begin, std::size_t end) {
  const std::size_t count = end - begin;
  Tensor<float> out(count, x.c, x.h, x.w);
  const std::size_t stride = x.per_sample();
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t src = indices[begin + i];
    std::copy_n(&x.data[src * stride], stride, &out.data[i * stride]);
  }
  return out;
}

inline Tensor<float> slice_batch(const Tensor<float>& x, std::size_t begin, std::size_t end) {
  const std::size_t count = end - begin;
  Tensor<float> out(count, x.c, x.h, x.w);
  const std::size_t stride = x.per_sample();
  std::copy_n(&x.data[begin * stride], count * stride, &out.data[0]);
  return out;
}

enum class SynthKind { blobs, rings, glyphs };

inline const char* to_string(SynthKind k) {
  switch (k) {
    case SynthKind::blobs: return "blobs";
    case SynthKind::rings: return "rings";
    case SynthKind::glyphs: return "glyph-images";
  }
  return "unknown";
}

inline SynthKind synth_kind_from_string(const std::string& s) {
  if (s == "blobs") return SynthKind::blobs;
  if (s == "rings") return SynthKind::rings;
  if (s == "glyph-images" || s == "glyphs") return SynthKind::glyphs;
  fail(ErrorKind::ConfigError, "unknown synthetic dataset kind '" + s + "'");
}

namespace detail {

// Sample i goes to validation when the even-spread rule advances; the rule
// depends only on the index, so splits agree sample-for-sample across
// resolutions.
inline bool is_validation_index(std::size_t i, std::size_t samples, std::size_t val_total) {
  return ((i + 1) * val_total) / samples > (i * val_total) / samples;
}

// Continuous glyph intensity at (u, v) in [0,1]^2. Six shape archetypes plus
// a class-keyed fine stripe texture that only resolves at higher renders.
inline double glyph_field(int cls, double u, double v, double cx, double cy, double scale,
                          double phase) {
  const double radius = 0.30 * scale;
  const double du = u - cx;
  const double dv = v - cy;
  const int shape = cls % 6;
  const double grow = 1.0 + 0.12 * static_cast<double>(cls / 6);
  const double r = radius * grow;

  bool inside = false;
  switch (shape) {
    case 0:  // disk
      inside = du * du + dv * dv <= r * r;
      break;
    case 1: {  // plus
      const double bar = 0.35 * r;
      inside = (std::fabs(du) <= bar && std::fabs(dv) <= r) ||
               (std::fabs(dv) <= bar && std::fabs(du) <= r);
      break;
    }
    case 2: {  // X
      const double bar = 0.35 * r;
      const double d1 = std::fabs(du - dv) / std::numbers::sqrt2;
      const double d2 = std::fabs(du + dv) / std::numbers::sqrt2;
      inside = (d1 <= bar || d2 <= bar) && std::max(std::fabs(du), std::fabs(dv)) <= r;
      break;
    }
    case 3: {  // square ring
      const double m = std::max(std::fabs(du), std::fabs(dv));
      inside = m >= 0.55 * r && m <= r;
      break;
    }
    case 4: {  // two horizontal bars
      const double bar = 0.22 * r;
      inside = std::fabs(du) <= r &&
               (std::fabs(dv - 0.5 * r) <= bar || std::fabs(dv + 0.5 * r) <= bar);
      break;
    }
    default: {  // four dots
      const double dot = 0.30 * r;
      const double off = 0.52 * r;
      inside = false;
      for (int sy = -1; sy <= 1; sy += 2)
        for (int sx = -1; sx <= 1; sx += 2) {
          const double ddu = du - sx * off;
          const double ddv = dv - sy * off;
          if (ddu * ddu + ddv * ddv <= dot * dot) inside = true;
        }
      break;
    }
  }
  if (!inside) return 0.0;

  // Class-keyed stripe texture, period ~1/6 of the image side.
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(cls % 6) / 6.0 + 0.4;
  const double carrier = u * std::cos(angle) + v * std::sin(angle);
  const double tex = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * 6.0 * carrier + phase);
  return 0.55 + 0.45 * tex;
}

}  // namespace detail

/// Deterministic synthetic datasets.
///
/// blobs: well-separated Gaussian clusters in `resolution` dimensions (flat
/// vectors). rings: concentric 2-d annuli, not linearly separable.
/// glyph-images: grayscale class-dependent patterns rendered at `resolution`
/// pixels per side; the same seed re-rendered at a different resolution
/// keeps labels and per-sample geometry, so resolution sweeps compare like
/// for like.
inline Dataset synth_dataset(SynthKind kind, std::size_t classes, std::size_t samples,
                             std::size_t resolution, std::uint64_t seed,
                             double val_fraction = 0.2) {
  require(classes >= 2, ErrorKind::DomainError, "synth_dataset needs at least 2 classes");
  require(samples >= 2 * classes, ErrorKind::DomainError,
          "synth_dataset needs at least two samples per class");
  require(resolution >= 1, ErrorKind::DomainError, "resolution must be at least 1");
  require(val_fraction > 0.0 && val_fraction < 1.0, ErrorKind::DomainError,
          "validation fraction must lie in (0, 1)");

  const std::size_t val_total =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(samples * val_fraction)));

  std::size_t c = 0, h = 1, w = 1;
  switch (kind) {
    case SynthKind::blobs:
      c = std::max<std::size_t>(2, resolution);
      break;
    case SynthKind::rings:
      c = 2;
      break;
    case SynthKind::glyphs:
      c = 1;
      h = resolution;
      w = resolution;
      break;
  }

  const std::size_t val_count = [&] {
    std::size_t n = 0;
    for (std::size_t i = 0; i < samples; ++i)
      if (detail::is_validation_index(i, samples, val_total)) ++n;
    return n;
  }();
  Dataset ds;
  ds.classes = classes;
  ds.train_x = Tensor<float>(samples - val_count, c, h, w);
  ds.val_x = Tensor<float>(val_count, c, h, w);

  const CounterRng root(seed);
  std::size_t train_at = 0, val_at = 0;
  std::vector<float> sample(c * h * w);
  for (std::size_t i = 0; i < samples; ++i) {
    const int cls = static_cast<int>(i % classes);
    CounterRng rng = root.split(i);

    switch (kind) {
      case SynthKind::blobs: {
        const double angle = 2.0 * std::numbers::pi * cls / static_cast<double>(classes);
        for (std::size_t d = 0; d < c; ++d) {
          double mean = 0.0;
          if (d == 0) mean = 6.0 * std::cos(angle);
          if (d == 1) mean = 6.0 * std::sin(angle);
          sample[d] = static_cast<float>(mean + rng.next_normal());
        }
        break;
      }
      case SynthKind::rings: {
        const double radius = 1.0 + 2.0 * cls + 0.25 * rng.next_normal();
        const double angle = rng.next_uniform(0.0, 2.0 * std::numbers::pi);
        sample[0] = static_cast<float>(radius * std::cos(angle));
        sample[1] = static_cast<float>(radius * std::sin(angle));
        break;
      }
      case SynthKind::glyphs: {
        const double cx = 0.5 + rng.next_uniform(-0.08, 0.08);
        const double cy = 0.5 + rng.next_uniform(-0.08, 0.08);
        const double scale = rng.next_uniform(0.85, 1.1);
        const double phase = rng.next_uniform(0.0, 2.0 * std::numbers::pi);
        const double res = static_cast<double>(resolution);
        for (std::size_t py = 0; py < h; ++py) {
          for (std::size_t px = 0; px < w; ++px) {
            double acc = 0.0;
            for (int sy = 0; sy < 3; ++sy)
              for (int sx = 0; sx < 3; ++sx) {
                const double u = (static_cast<double>(px) + (sx + 0.5) / 3.0) / res;
                const double v = (static_cast<double>(py) + (sy + 0.5) / 3.0) / res;
                acc += detail::glyph_field(cls, u, v, cx, cy, scale, phase);
              }
            double value = acc / 9.0 + 0.06 * rng.next_normal();
            sample[py * w + px] = static_cast<float>(std::clamp(value, 0.0, 1.0));
          }
        }
        break;
      }
    }

    if (detail::is_validation_index(i, samples, val_total)) {
      std::copy(sample.begin(), sample.end(), &ds.val_x.data[val_at * ds.val_x.per_sample()]);
      ds.val_y.push_back(cls);
      ++val_at;
    } else {
      std::copy(sample.begin(), sample.end(),
                &ds.train_x.data[train_at * ds.train_x.per_sample()]);
      ds.train_y.push_back(cls);
      ++train_at;
    }
  }
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// IDX binary format (big-endian): magic 0x00000803 for image files with
// dimensions (count, rows, cols), 0x00000801 for label files with (count).
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  require(static_cast<bool>(in), ErrorKind::TruncatedFile, "unexpected end of file in " + path);
  return (std::uint32_t(bytes[0]) << 24) | (std::uint32_t(bytes[1]) << 16) |
         (std::uint32_t(bytes[2]) << 8) | std::uint32_t(bytes[3]);
}

inline void write_be_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v >> 24),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

}  // namespace detail

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Loads an IDX image/label pair into a Dataset. Pixels are normalized to
/// [0, 1]; the last `val_fraction` of samples becomes the validation split.
inline Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path,
                                double val_fraction = 0.2) {
  std::ifstream img(images_path, std::ios::binary);
  require(static_cast<bool>(img), ErrorKind::DatasetNotFound,
          "cannot open image file " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  require(static_cast<bool>(lab), ErrorKind::DatasetNotFound,
          "cannot open label file " + labels_path);

  const std::uint32_t img_magic = detail::read_be_u32(img, images_path);
  require(img_magic == kIdxImageMagic, ErrorKind::BadMagic,
          "bad image magic in " + images_path);
  const std::uint32_t count = detail::read_be_u32(img, images_path);
  const std::uint32_t rows = detail::read_be_u32(img, images_path);
  const std::uint32_t cols = detail::read_be_u32(img, images_path);

  const std::uint32_t lab_magic = detail::read_be_u32(lab, labels_path);
  require(lab_magic == kIdxLabelMagic, ErrorKind::BadMagic,
          "bad label magic in " + labels_path);
  const std::uint32_t lab_count = detail::read_be_u32(lab, labels_path);
  require(lab_count == count, ErrorKind::CountMismatch,
          "image count " + std::to_string(count) + " does not match label count " +
              std::to_string(lab_count));
  require(count >= 2, ErrorKind::CountMismatch, "dataset needs at least 2 samples");

  std::vector<unsigned char> pixels(static_cast<std::size_t>(count) * rows * cols);
  img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  require(static_cast<std::size_t>(img.gcount()) == pixels.size(), ErrorKind::TruncatedFile,
          "image payload truncated in " + images_path);
  std::vector<unsigned char> labels(count);
  lab.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
  require(static_cast<std::size_t>(lab.gcount()) == labels.size(), ErrorKind::TruncatedFile,
          "label payload truncated in " + labels_path);

  int max_label = 0;
  for (unsigned char l : labels) max_label = std::max(max_label, static_cast<int>(l));
  const std::size_t classes = static_cast<std::size_t>(max_label) + 1;

  const std::size_t val_count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(static_cast<double>(count) * val_fraction)));
  const std::size_t train_count = count - val_count;
  require(train_count >= 1, ErrorKind::CountMismatch, "validation split leaves no training data");

  Dataset ds;
  ds.classes = std::max<std::size_t>(2, classes);
  ds.train_x = Tensor<float>(train_count, 1, rows, cols);
  ds.val_x = Tensor<float>(val_count, 1, rows, cols);
  const std::size_t stride = static_cast<std::size_t>(rows) * cols;
  for (std::size_t i = 0; i < count; ++i) {
    float* dst = i < train_count ? &ds.train_x.data[i * stride]
                                 : &ds.val_x.data[(i - train_count) * stride];
    for (std::size_t p = 0; p < stride; ++p)
      dst[p] = static_cast<float>(pixels[i * stride + p]) / 255.0f;
    if (i < train_count)
      ds.train_y.push_back(static_cast<int>(labels[i]));
    else
      ds.val_y.push_back(static_cast<int>(labels[i]));
  }
  ds.validate();
  return ds;
}

/// Writes images (values clamped to [0,1], quantized to bytes) in IDX format.
inline void write_idx_images(const std::string& path, const Tensor<float>& images) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::DatasetNotFound, "cannot create " + path);
  detail::write_be_u32(out, kIdxImageMagic);
  detail::write_be_u32(out, static_cast<std::uint32_t>(images.n));
  detail::write_be_u32(out, static_cast<std::uint32_t>(images.h));
  detail::write_be_u32(out, static_cast<std::uint32_t>(images.w));
  for (std::size_t ni = 0; ni < images.n; ++ni)
    for (std::size_t hi = 0; hi < images.h; ++hi)
      for (std::size_t wi = 0; wi < images.w; ++wi) {
        const float v = std::clamp(images.at(ni, 0, hi, wi), 0.0f, 1.0f);
        const unsigned char byte = static_cast<unsigned char>(std::lround(v * 255.0f));
        out.write(reinterpret_cast<const char*>(&byte), 1);
      }
}

inline void write_idx_labels(const std::string& path, const std::vector<int>& labels) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::DatasetNotFound, "cannot create " + path);
  detail::write_be_u32(out, kIdxLabelMagic);
  detail::write_be_u32(out, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) {
    const unsigned char byte = static_cast<unsigned char>(l);
    out.write(reinterpret_cast<const char*>(&byte), 1);
  }
}

}  // namespace satlens::nn
