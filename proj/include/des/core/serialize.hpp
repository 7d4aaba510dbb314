#pragma once

#include <iosfwd>
#include <string>

#include "des/core/tensor.hpp"

namespace des {

// Binary record: 8-byte magic "DESTNSR1", u32 rank, rank x u32 extents, then
// the payload as little-endian IEEE-754 doubles. All integers little-endian.
inline constexpr char kTensorMagic[8] = {'D', 'E', 'S', 'T', 'N', 'S', 'R', '1'};

std::size_t serialized_size(const Tensor& t);
void write_tensor(std::ostream& os, const Tensor& t);
/// Throws ParseError (with the stream offset) on a bad magic, rank, or short read.
Tensor read_tensor(std::istream& is);

void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

}  // namespace des
