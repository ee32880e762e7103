#include "sdelab/image.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sdelab/error.hpp"

namespace sdelab {

LatentImage::LatentImage(std::size_t h, std::size_t w, std::vector<double> v)
    : height(h), width(w), values(std::move(v)) {
  if (values.size() != h * w) throw FormatError("image values do not match H x W");
}

BinaryMask BinaryMask::from_image(const LatentImage& image) {
  BinaryMask mask(image.height, image.width);
  for (std::size_t i = 0; i < image.values.size(); ++i) mask.values[i] = image.values[i] != 0.0;
  return mask;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string format_grid(const LatentImage& image) {
  std::string out = std::to_string(image.height) + ' ' + std::to_string(image.width) + '\n';
  for (std::size_t r = 0; r < image.height; ++r) {
    for (std::size_t c = 0; c < image.width; ++c) {
      if (c) out += ' ';
      out += format_double(image.values[r * image.width + c]);
    }
    out += '\n';
  }
  return out;
}

LatentImage parse_grid(const std::string& text) {
  std::istringstream is(text);
  long long h = 0, w = 0;
  if (!(is >> h >> w) || h <= 0 || w <= 0) throw FormatError("grid: bad 'H W' header");
  LatentImage image(static_cast<std::size_t>(h), static_cast<std::size_t>(w));
  std::string token;
  for (double& v : image.values) {
    if (!(is >> token)) throw FormatError("grid: fewer values than H x W");
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(v))
      throw FormatError("grid: bad value '" + token + "'");
  }
  if (is >> token) throw FormatError("grid: more values than H x W");
  return image;
}

LatentImage read_grid(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_grid(ss.str());
}

void write_grid(const LatentImage& image, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os << format_grid(image);
}

// ---------------------------------------------------------------------------

LatentImage bump_image(const BumpParams& params, Pixel center) {
  LatentImage image(params.size, params.size);
  const double inv = 1.0 / (2.0 * params.scale * params.scale);
  for (std::size_t r = 0; r < params.size; ++r) {
    for (std::size_t c = 0; c < params.size; ++c) {
      const double dr = static_cast<double>(r) - center.row;
      const double dc = static_cast<double>(c) - center.col;
      image.values[r * params.size + c] = params.peak * std::exp(-(dr * dr + dc * dc) * inv);
    }
  }
  return image;
}

BumpDataset generate_bump_dataset(const BumpParams& params) {
  if (params.size == 0 || params.lattice_lo < 0 || params.lattice_hi < params.lattice_lo ||
      static_cast<std::size_t>(params.lattice_hi) >= params.size)
    throw DomainError("bump testbed: lattice must lie inside the image");
  if (!(params.scale > 0.0)) throw DomainError("bump testbed: scale must be positive");
  BumpDataset ds;
  ds.params = params;
  const int half = static_cast<int>(params.size / 2);
  for (int r = params.lattice_lo; r <= params.lattice_hi; ++r) {
    for (int c = params.lattice_lo; c <= params.lattice_hi; ++c) {
      ds.centers.push_back({r, c});
      ds.images.push_back(bump_image(params, {r, c}));
      ds.labels.push_back(c < half ? kLeft : kRight);
    }
  }
  return ds;
}

std::shared_ptr<const EmpiricalDataset> BumpDataset::as_dataset() const {
  const std::size_t d = params.size * params.size;
  std::vector<double> flat;
  flat.reserve(images.size() * d);
  for (const auto& im : images) flat.insert(flat.end(), im.values.begin(), im.values.end());
  return std::make_shared<const EmpiricalDataset>(d, std::move(flat), labels);
}

std::size_t BumpDataset::find(Pixel center) const noexcept {
  for (std::size_t i = 0; i < centers.size(); ++i)
    if (centers[i] == center) return i;
  return static_cast<std::size_t>(-1);
}

namespace {

std::string two_digits(int v) {
  std::string s = std::to_string(v);
  return s.size() < 2 ? "0" + s : s;
}

}  // namespace

void write_bump_dataset(const BumpDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw FormatError("cannot write manifest in " + dir.string());
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    const auto& c = dataset.centers[i];
    const std::string name = "bump_" + two_digits(c.row) + "_" + two_digits(c.col) + ".txt";
    write_grid(dataset.images[i], dir / name);
    manifest << name << ',' << dataset.labels[i].value << '\n';
  }
}

std::shared_ptr<const EmpiricalDataset> read_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.csv");
  if (!manifest) throw FormatError("no manifest.csv in " + dir.string());
  std::vector<double> flat;
  std::vector<Label> labels;
  std::size_t dim = 0;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw FormatError("manifest line without label: " + line);
    int label = 0;
    const char* first = line.data() + comma + 1;
    const char* last = line.data() + line.size();
    const auto [ptr, ec] = std::from_chars(first, last, label);
    if (ec != std::errc{} || ptr != last) throw FormatError("bad label in manifest: " + line);
    const auto image = read_grid(dir / line.substr(0, comma));
    if (dim == 0) dim = image.values.size();
    if (image.values.size() != dim) throw FormatError("dataset images differ in size");
    flat.insert(flat.end(), image.values.begin(), image.values.end());
    labels.push_back({label});
  }
  if (dim == 0) throw FormatError("empty dataset in " + dir.string());
  return std::make_shared<const EmpiricalDataset>(dim, std::move(flat), std::move(labels));
}

}  // namespace sdelab
