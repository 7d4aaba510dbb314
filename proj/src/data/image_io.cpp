#include "des/data/image_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "des/core/error.hpp"

namespace des::data {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

class HeaderReader {
public:
    explicit HeaderReader(std::string_view b) : b_(b) {}

    void skip_space_and_comments() {
        while (pos_ < b_.size()) {
            if (is_space(b_[pos_])) {
                ++pos_;
            } else if (b_[pos_] == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::size_t number(const char* what) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        std::size_t value = 0;
        auto [ptr, ec] = std::from_chars(b_.data() + pos_, b_.data() + b_.size(), value);
        if (ec != std::errc() || ptr == b_.data() + start) {
            throw ParseError(std::string("PPM: expected ") + what + " at byte " + std::to_string(start), start);
        }
        pos_ = static_cast<std::size_t>(ptr - b_.data());
        last_start_ = start;
        if (pos_ < b_.size() && !is_space(b_[pos_]) && b_[pos_] != '#') {
            throw ParseError(std::string("PPM: malformed ") + what + " at byte " + std::to_string(start), start);
        }
        return value;
    }

    std::size_t pos() const { return pos_; }
    std::size_t last_start() const { return last_start_; }
    void advance(std::size_t n) { pos_ += n; }

private:
    std::string_view b_;
    std::size_t pos_ = 0;
    std::size_t last_start_ = 0;
};

std::uint8_t quantize(double v) {
    const double c = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

}  // namespace

Tensor parse_ppm(std::string_view b) {
    if (b.size() < 2 || b[0] != 'P') throw ParseError("PPM: missing 'P6' magic at byte 0", 0);
    if (b[1] == '3') throw ParseError("PPM: ASCII variant P3 is not supported, only binary P6", 0);
    if (b[1] != '6') throw ParseError("PPM: unsupported format 'P" + std::string(1, b[1]) + "', expected P6", 1);
    if (b.size() > 2 && !is_space(b[2]) && b[2] != '#') throw ParseError("PPM: malformed magic", 2);
    HeaderReader r(b);
    r.advance(2);
    const std::size_t width = r.number("width");
    const std::size_t width_at = r.last_start();
    const std::size_t height = r.number("height");
    const std::size_t maxval = r.number("maxval");
    const std::size_t maxval_at = r.last_start();
    if (width == 0 || height == 0) throw ParseError("PPM: zero image extent", width_at);
    if (width > 16384 || height > 16384) throw ParseError("PPM: image extent too large", width_at);
    if (maxval != 255) throw ParseError("PPM: maxval " + std::to_string(maxval) + " unsupported, need 255", maxval_at);
    if (r.pos() >= b.size() || !is_space(b[r.pos()])) {
        throw ParseError("PPM: expected one whitespace byte before pixel data", r.pos());
    }
    const std::size_t data = r.pos() + 1;
    const std::size_t need = width * height * 3;
    if (b.size() - data < need) {
        throw ParseError("PPM: truncated pixel data (" + std::to_string(b.size() - data) + " of " +
                             std::to_string(need) + " bytes)",
                         b.size());
    }
    Tensor img({3, height, width});
    const std::size_t hw = width * height;
    for (std::size_t p = 0; p < hw; ++p) {
        for (std::size_t c = 0; c < 3; ++c) {
            img[c * hw + p] = static_cast<unsigned char>(b[data + p * 3 + c]) / 255.0;
        }
    }
    return img;
}

Tensor read_ppm(const std::string& path) { return parse_ppm(read_file(path)); }

std::string encode_ppm(const Tensor& img) {
    if (img.rank() != 3 || img.dim(0) != 3) throw InvalidInput("PPM: expected a 3 x H x W image, got " + shape_str(img.shape()));
    const std::size_t H = img.dim(1), W = img.dim(2), hw = H * W;
    std::string out = "P6\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
    const std::size_t header = out.size();
    out.resize(header + hw * 3);
    for (std::size_t p = 0; p < hw; ++p) {
        for (std::size_t c = 0; c < 3; ++c) out[header + p * 3 + c] = static_cast<char>(quantize(img[c * hw + p]));
    }
    return out;
}

void write_ppm(const Tensor& img, const std::string& path) { write_file(path, encode_ppm(img)); }

std::string encode_pgm(const Tensor& gray) {
    std::size_t H = 0, W = 0;
    if (gray.rank() == 2) {
        H = gray.dim(0);
        W = gray.dim(1);
    } else if (gray.rank() == 3 && gray.dim(0) == 1) {
        H = gray.dim(1);
        W = gray.dim(2);
    } else {
        throw InvalidInput("PGM: expected H x W or 1 x H x W, got " + shape_str(gray.shape()));
    }
    std::string out = "P5\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
    const std::size_t header = out.size();
    out.resize(header + H * W);
    for (std::size_t i = 0; i < H * W; ++i) out[header + i] = static_cast<char>(quantize(gray[i]));
    return out;
}

void write_pgm(const Tensor& gray, const std::string& path) { write_file(path, encode_pgm(gray)); }

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InvalidInput("failed writing " + path);
}

}  // namespace des::data
