#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "ledvlc/error.hpp"

namespace ledvlc {

/// Received image r(x, y): row-major intensities, nominally in [0, 1].
class Frame {
public:
    Frame() = default;
    Frame(int width, int height, double fill = 0.0) : width_(width), height_(height) {
        if (width <= 0 || height <= 0) fail(ErrorKind::InvalidParams, "frame dimensions must be positive");
        data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return data_.empty(); }

    double& at(int x, int y) { return data_[index(x, y)]; }
    double at(int x, int y) const { return data_[index(x, y)]; }
    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    friend bool operator==(const Frame&, const Frame&) = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

// PGM (P5) serialization. Intensity maps linearly from [0,1] onto
// [0, maxval]; 16-bit samples are big-endian.

inline std::string encode_pgm(const Frame& frame, int bits = 16) {
    if (bits != 8 && bits != 16) fail(ErrorKind::InvalidParams, "PGM depth must be 8 or 16 bits");
    const int maxval = bits == 8 ? 255 : 65535;
    std::ostringstream header;
    header << "P5\n" << frame.width() << ' ' << frame.height() << '\n' << maxval << '\n';
    std::string out = header.str();
    const std::size_t bytes = bits / 8;
    out.reserve(out.size() + frame.data().size() * bytes);
    for (double v : frame.data()) {
        const auto q = static_cast<std::uint32_t>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
        if (bits == 16) out.push_back(static_cast<char>((q >> 8) & 0xff));
        out.push_back(static_cast<char>(q & 0xff));
    }
    return out;
}

inline Frame decode_pgm(const std::string& bytes) {
    std::size_t pos = 0;
    auto skip_space_and_comments = [&] {
        while (pos < bytes.size()) {
            const char c = bytes[pos];
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&](const char* what) {
        skip_space_and_comments();
        long value = 0;
        std::size_t digits = 0;
        while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
            value = value * 10 + (bytes[pos] - '0');
            if (value > 1'000'000) fail(ErrorKind::Parse, std::string("PGM: ") + what + " too large");
            ++pos;
            ++digits;
        }
        if (digits == 0) fail(ErrorKind::Parse, std::string("PGM: missing ") + what);
        return static_cast<int>(value);
    };

    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') fail(ErrorKind::Parse, "PGM: expected P5 magic");
    pos = 2;
    const int width = read_int("width");
    const int height = read_int("height");
    const int maxval = read_int("maxval");
    if (width <= 0 || height <= 0) fail(ErrorKind::Parse, "PGM: non-positive dimensions");
    if (maxval <= 0 || maxval > 65535) fail(ErrorKind::Parse, "PGM: maxval out of range");
    if (pos >= bytes.size()) fail(ErrorKind::Parse, "PGM: truncated header");
    ++pos;  // single whitespace before raster

    const std::size_t sample_bytes = maxval < 256 ? 1 : 2;
    const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (bytes.size() - pos < count * sample_bytes) fail(ErrorKind::Parse, "PGM: truncated raster");

    Frame frame(width, height);
    auto& data = frame.data();
    for (std::size_t i = 0; i < count; ++i) {
        unsigned v = static_cast<unsigned char>(bytes[pos + i * sample_bytes]);
        if (sample_bytes == 2) v = (v << 8) | static_cast<unsigned char>(bytes[pos + i * sample_bytes + 1]);
        data[i] = std::min(1.0, static_cast<double>(v) / maxval);
    }
    return frame;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Frame read_pgm(const std::string& path) { return decode_pgm(read_file(path)); }

}  // namespace ledvlc
