#pragma once

#include <string>
#include <string_view>

#include "des/core/tensor.hpp"

namespace des::data {

/// Binary P6 PPM with maxval 255, as a 3 x H x W tensor in [0, 1].
/// Malformed input throws ParseError carrying the byte offset.
Tensor parse_ppm(std::string_view bytes);
Tensor read_ppm(const std::string& path);

/// Values are clamped to [0, 1] and rounded to 8 bits.
std::string encode_ppm(const Tensor& image);
void write_ppm(const Tensor& image, const std::string& path);

/// Binary P5 PGM of an H x W or 1 x H x W tensor in [0, 1].
std::string encode_pgm(const Tensor& gray);
void write_pgm(const Tensor& gray, const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace des::data
