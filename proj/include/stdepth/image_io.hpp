#pragma once

#include <string>

#include "stdepth/tensor.hpp"

namespace stdepth {

// Binary PNM codecs. Images are [C,H,W] tensors with values in [0,1]:
// PPM (P6, 8-bit RGB) loads as [3,H,W], PGM (P5) as [1,H,W], divided by the
// file's maxval. 16-bit PGM samples are big-endian per the format. Saves are
// atomic (temp + rename) and quantize with round-to-nearest, so a tensor
// that came from an 8-bit file round-trips exactly.
Tensor load_image(const std::string& path);
void save_ppm(const std::string& path, const Tensor& img);  // [3,H,W] -> 8-bit P6
void save_pgm(const std::string& path, const Tensor& img);  // [1,H,W] -> 8-bit P5

// Disparity maps use 16-bit PGM with a fixed-point scale: raw = round(d*256),
// so e.g. disparity 4.0 is stored as 1024. Decoding divides by 256 (exact).
void save_disparity(const std::string& path, const Tensor& disp);  // [1,H,W]
Tensor load_disparity(const std::string& path);                    // [1,H,W]

}  // namespace stdepth
