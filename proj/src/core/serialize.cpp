#include "des/core/serialize.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "des/core/error.hpp"

namespace des {

namespace {

constexpr std::uint32_t kMaxRank = 8;

void put_u32(std::ostream& os, std::uint32_t v) {
    std::array<char, 4> b{};
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    os.write(b.data(), 4);
}

void put_f64(std::ostream& os, double d) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    std::array<char, 8> b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
    os.write(b.data(), 8);
}

std::size_t offset_of(std::istream& is) {
    auto pos = is.tellg();
    return pos < 0 ? 0 : static_cast<std::size_t>(pos);
}

void read_exact(std::istream& is, char* dst, std::size_t n, const char* what) {
    const std::size_t at = offset_of(is);
    if (!is.read(dst, static_cast<std::streamsize>(n))) {
        throw ParseError(std::string("tensor record truncated while reading ") + what, at);
    }
}

std::uint32_t get_u32(std::istream& is, const char* what) {
    std::array<unsigned char, 4> b{};
    read_exact(is, reinterpret_cast<char*>(b.data()), 4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

std::size_t serialized_size(const Tensor& t) { return 8 + 4 + 4 * t.rank() + 8 * t.size(); }

void write_tensor(std::ostream& os, const Tensor& t) {
    os.write(kTensorMagic, 8);
    put_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) put_u32(os, static_cast<std::uint32_t>(e));
    for (double v : t.data()) put_f64(os, v);
}

Tensor read_tensor(std::istream& is) {
    const std::size_t start = offset_of(is);
    char magic[8];
    read_exact(is, magic, 8, "magic");
    if (std::memcmp(magic, kTensorMagic, 8) != 0) throw ParseError("bad tensor magic (expected DESTNSR1)", start);
    const std::uint32_t rank = get_u32(is, "rank");
    if (rank == 0 || rank > kMaxRank) throw ParseError("unsupported tensor rank " + std::to_string(rank), start + 8);
    Shape shape(rank);
    for (auto& e : shape) {
        e = get_u32(is, "extent");
        if (e == 0) throw ParseError("zero tensor extent", offset_of(is) - 4);
    }
    const std::size_t n = shape_numel(shape);
    std::vector<unsigned char> bytes(n * 8);
    read_exact(is, reinterpret_cast<char*>(bytes.data()), bytes.size(), "payload");
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(bytes[i * 8 + k]) << (8 * k);
        data[i] = std::bit_cast<double>(bits);
    }
    return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::string& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    write_tensor(os, t);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read_tensor(is);
}

}  // namespace des
