#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sdelab/score.hpp"

namespace sdelab {

struct Pixel {
  int row = 0;
  int col = 0;
  bool operator==(const Pixel&) const = default;
};

// Real-valued grid stored row-major; doubles as a state vector of size h*w.
struct LatentImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  LatentImage() = default;
  LatentImage(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), values(h * w, fill) {}
  LatentImage(std::size_t h, std::size_t w, std::vector<double> v);

  [[nodiscard]] bool contains(Pixel p) const noexcept {
    return p.row >= 0 && p.col >= 0 && static_cast<std::size_t>(p.row) < height &&
           static_cast<std::size_t>(p.col) < width;
  }
  [[nodiscard]] std::size_t index(Pixel p) const noexcept {
    return static_cast<std::size_t>(p.row) * width + static_cast<std::size_t>(p.col);
  }
  double& at(Pixel p) { return values[index(p)]; }
  [[nodiscard]] double at(Pixel p) const { return values[index(p)]; }
  bool operator==(const LatentImage&) const = default;
};

// 1 marks pixels that may change (edited or synthesized); 0 marks pixels
// pinned to the observation.
struct BinaryMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> values;

  BinaryMask() = default;
  BinaryMask(std::size_t h, std::size_t w, std::uint8_t fill = 0)
      : height(h), width(w), values(h * w, fill) {}
  // Nonzero entries of `image` become 1.
  static BinaryMask from_image(const LatentImage& image);
  [[nodiscard]] bool matches(const LatentImage& image) const noexcept {
    return height == image.height && width == image.width;
  }
};

// Plain-text grid: first line "H W", then H rows of W values.
LatentImage read_grid(const std::filesystem::path& path);
void write_grid(const LatentImage& image, const std::filesystem::path& path);
std::string format_grid(const LatentImage& image);
LatentImage parse_grid(const std::string& text);

// Shortest decimal that round-trips the double.
std::string format_double(double v);

// ---------------------------------------------------------------------------
// Bump testbed: one Gaussian bump per image, centers on an interior lattice.

struct BumpParams {
  std::size_t size = 16;
  double scale = 1.5;
  double peak = 1.0;
  int lattice_lo = 3;   // first center row/column
  int lattice_hi = 12;  // last center row/column (inclusive)
};

struct BumpDataset {
  BumpParams params;
  std::vector<LatentImage> images;
  std::vector<Pixel> centers;
  std::vector<Label> labels;  // 0 = left (center column < size / 2), 1 = right

  [[nodiscard]] std::shared_ptr<const EmpiricalDataset> as_dataset() const;
  // Index of the image whose bump sits at `center`, or npos.
  [[nodiscard]] std::size_t find(Pixel center) const noexcept;
};

inline constexpr Label kLeft{0};
inline constexpr Label kRight{1};

LatentImage bump_image(const BumpParams& params, Pixel center);
BumpDataset generate_bump_dataset(const BumpParams& params = {});
// Writes one grid file per image (bump_RR_CC.txt) plus manifest.csv with
// lines "name,label".
void write_bump_dataset(const BumpDataset& dataset, const std::filesystem::path& dir);
// Reads a directory written by write_bump_dataset (or any manifest + grids).
std::shared_ptr<const EmpiricalDataset> read_dataset(const std::filesystem::path& dir);

}  // namespace sdelab
