#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "t2f/tensor.hpp"

namespace t2f {

// Binary P6 with 8-bit channels. Images are [3, h, w] tensors in [-1, 1];
// quantization to bytes happens only here, at the file boundary.
void write_ppm(const TensorD& image, std::ostream& out);
void write_ppm_path(const TensorD& image, const std::string& path);

TensorD read_ppm(std::istream& in);
TensorD read_ppm_path(const std::string& path);

// Tiles equally sized [3, h, w] images row-major into one [3, H, W] image
// with a 1-pixel separator, for contact-sheet style sample grids.
TensorD tile_grid(const std::vector<TensorD>& images, std::size_t cols);

// Nearest-neighbor resize of a [3, h, w] image to [3, size, size].
TensorD resize_nearest(const TensorD& image, std::size_t size);

}  // namespace t2f
