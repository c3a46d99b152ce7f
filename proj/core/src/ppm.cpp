#include "t2f/ppm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "t2f/error.hpp"

namespace t2f {
namespace {

void check_image_shape(const TensorD& image) {
  if (image.ndim() != 3 || image.dim(0) != 3)
    throw ContractError("expected a [3, h, w] image, got " +
                        shape_str(image.shape()));
}

unsigned char to_byte(double v) {
  double c = (std::clamp(v, -1.0, 1.0) + 1.0) * 0.5;
  return static_cast<unsigned char>(std::lround(c * 255.0));
}

// Reads one whitespace-delimited token, skipping '#' comment lines.
std::string next_token(std::istream& in) {
  std::string t;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!t.empty()) return t;
      continue;
    }
    t += static_cast<char>(c);
  }
  return t;
}

}  // namespace

void write_ppm(const TensorD& image, std::ostream& out) {
  check_image_shape(image);
  const std::size_t h = image.dim(1), w = image.dim(2);
  out << "P6\n" << w << ' ' << h << "\n255\n";
  std::vector<unsigned char> row(w * 3);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        row[x * 3 + c] = to_byte(image.at((c * h + y) * w + x));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
}

void write_ppm_path(const TensorD& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  write_ppm(image, out);
  if (!out) throw IoError("write failed: " + path);
}

TensorD read_ppm(std::istream& in) {
  if (next_token(in) != "P6") throw ParseError("not a binary P6 file", 1);
  std::size_t w, h, maxval;
  try {
    w = std::stoul(next_token(in));
    h = std::stoul(next_token(in));
    maxval = std::stoul(next_token(in));
  } catch (const std::exception&) {
    throw ParseError("malformed P6 header", 1);
  }
  if (maxval != 255) throw ParseError("only maxval 255 is supported", 1);
  std::vector<unsigned char> bytes(w * h * 3);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size())
    throw ParseError("truncated pixel data", 1);
  TensorD img = TensorD::zeros({3, h, w});
  auto d = img.mutable_data();
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        d[(c * h + y) * w + x] =
            bytes[(y * w + x) * 3 + c] / 255.0 * 2.0 - 1.0;
  return img;
}

TensorD read_ppm_path(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  return read_ppm(in);
}

TensorD tile_grid(const std::vector<TensorD>& images, std::size_t cols) {
  if (images.empty() || cols == 0)
    throw ContractError("tile_grid needs at least one image and one column");
  for (const TensorD& im : images) {
    check_image_shape(im);
    if (im.shape() != images[0].shape())
      throw ContractError("tile_grid images must share one shape");
  }
  const std::size_t h = images[0].dim(1), w = images[0].dim(2);
  const std::size_t rows = (images.size() + cols - 1) / cols;
  const std::size_t gh = rows * h + (rows - 1);
  const std::size_t gw = cols * w + (cols - 1);
  TensorD grid = TensorD::full({3, gh, gw}, -1.0);
  auto g = grid.mutable_data();
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::size_t r0 = (i / cols) * (h + 1), c0 = (i % cols) * (w + 1);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          g[(c * gh + r0 + y) * gw + c0 + x] =
              images[i].at((c * h + y) * w + x);
  }
  return grid;
}

TensorD resize_nearest(const TensorD& image, std::size_t size) {
  check_image_shape(image);
  const std::size_t h = image.dim(1), w = image.dim(2);
  if (h == size && w == size) return image;
  TensorD out = TensorD::zeros({3, size, size});
  auto d = out.mutable_data();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) {
        std::size_t sy = std::min(h - 1, y * h / size);
        std::size_t sx = std::min(w - 1, x * w / size);
        d[(c * size + y) * size + x] = image.at((c * h + sy) * w + sx);
      }
  return out;
}

}  // namespace t2f
