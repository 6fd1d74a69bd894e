#include "stdepth/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "stdepth/io_util.hpp"

namespace stdepth {

namespace {

struct PnmHeader {
    char kind = 0;  // '5' or '6'
    int64_t width = 0, height = 0, maxval = 0;
    size_t data_pos = 0;
};

// Header grammar: magic, then whitespace-separated width/height/maxval with
// '#' comments running to end of line, then exactly one whitespace byte
// before the raster.
PnmHeader parse_header(const std::string& buf, const std::string& path) {
    SD_FAIL_IF(buf.size() < 2 || buf[0] != 'P' || (buf[1] != '5' && buf[1] != '6'),
               path << ": not a binary PGM/PPM file (expected P5 or P6 magic)");
    PnmHeader h;
    h.kind = buf[1];
    size_t pos = 2;
    int64_t fields[3];
    for (int64_t& field : fields) {
        while (pos < buf.size()) {
            const char c = buf[pos];
            if (c == '#') {
                while (pos < buf.size() && buf[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos;
            } else {
                break;
            }
        }
        SD_FAIL_IF(pos >= buf.size() || !std::isdigit(static_cast<unsigned char>(buf[pos])),
                   path << ": malformed header (expected integer)");
        int64_t v = 0;
        while (pos < buf.size() && std::isdigit(static_cast<unsigned char>(buf[pos]))) {
            v = v * 10 + (buf[pos] - '0');
            SD_FAIL_IF(v > 1'000'000'000, path << ": header value out of range");
            ++pos;
        }
        field = v;
    }
    SD_FAIL_IF(pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[pos])),
               path << ": malformed header (missing separator before raster)");
    ++pos;
    h.width = fields[0];
    h.height = fields[1];
    h.maxval = fields[2];
    h.data_pos = pos;
    SD_FAIL_IF(h.width < 1 || h.height < 1, path << ": bad dimensions " << h.width << "x"
                                                 << h.height);
    SD_FAIL_IF(h.maxval < 1 || h.maxval > 65535,
               path << ": unsupported maxval " << h.maxval << " (must be 1..65535)");
    return h;
}

uint16_t sample_at(const std::string& buf, size_t base, int64_t i, bool two_byte) {
    if (two_byte) {
        const auto hi = static_cast<uint8_t>(buf[base + 2 * static_cast<size_t>(i)]);
        const auto lo = static_cast<uint8_t>(buf[base + 2 * static_cast<size_t>(i) + 1]);
        return static_cast<uint16_t>((hi << 8) | lo);  // network order per the format
    }
    return static_cast<uint8_t>(buf[base + static_cast<size_t>(i)]);
}

std::string header_text(char kind, int64_t w, int64_t h, int64_t maxval) {
    std::ostringstream oss;
    oss << 'P' << kind << '\n' << w << ' ' << h << '\n' << maxval << '\n';
    return oss.str();
}

uint16_t quantize(float v, int64_t maxval) {
    const float clamped = std::min(std::max(v, 0.0f), 1.0f);
    return static_cast<uint16_t>(std::lround(clamped * static_cast<float>(maxval)));
}

}  // namespace

Tensor load_image(const std::string& path) {
    const std::string buf = read_file(path);
    const PnmHeader h = parse_header(buf, path);
    const int64_t channels = h.kind == '6' ? 3 : 1;
    const bool two_byte = h.maxval > 255;
    const int64_t samples = h.width * h.height * channels;
    const size_t need = static_cast<size_t>(samples) * (two_byte ? 2 : 1);
    SD_FAIL_IF(buf.size() - h.data_pos < need,
               path << ": raster truncated (" << buf.size() - h.data_pos << " bytes, need "
                    << need << ")");

    Tensor img({channels, h.height, h.width});
    float* out = img.data();
    const auto scale = 1.0f / static_cast<float>(h.maxval);
    // File raster is interleaved row-major; tensor is planar.
    for (int64_t y = 0; y < h.height; ++y) {
        for (int64_t x = 0; x < h.width; ++x) {
            const int64_t px = y * h.width + x;
            for (int64_t c = 0; c < channels; ++c) {
                const uint16_t raw = sample_at(buf, h.data_pos, px * channels + c, two_byte);
                out[(c * h.height + y) * h.width + x] = static_cast<float>(raw) * scale;
            }
        }
    }
    return img;
}

void save_ppm(const std::string& path, const Tensor& img) {
    SD_REQUIRE(img.rank() == 3 && img.dim(0) == 3,
               "save_ppm: expected [3,H,W], got " << shape_str(img.shape()));
    const int64_t H = img.dim(1), W = img.dim(2);
    std::string buf = header_text('6', W, H, 255);
    buf.reserve(buf.size() + static_cast<size_t>(3 * H * W));
    const float* p = img.data();
    for (int64_t y = 0; y < H; ++y) {
        for (int64_t x = 0; x < W; ++x) {
            for (int64_t c = 0; c < 3; ++c) {
                buf.push_back(static_cast<char>(quantize(p[(c * H + y) * W + x], 255)));
            }
        }
    }
    atomic_write_file(path, buf);
}

void save_pgm(const std::string& path, const Tensor& img) {
    SD_REQUIRE(img.rank() == 3 && img.dim(0) == 1,
               "save_pgm: expected [1,H,W], got " << shape_str(img.shape()));
    const int64_t H = img.dim(1), W = img.dim(2);
    std::string buf = header_text('5', W, H, 255);
    const float* p = img.data();
    for (int64_t i = 0; i < H * W; ++i) buf.push_back(static_cast<char>(quantize(p[i], 255)));
    atomic_write_file(path, buf);
}

void save_disparity(const std::string& path, const Tensor& disp) {
    SD_REQUIRE(disp.rank() == 3 && disp.dim(0) == 1,
               "save_disparity: expected [1,H,W], got " << shape_str(disp.shape()));
    const int64_t H = disp.dim(1), W = disp.dim(2);
    std::string buf = header_text('5', W, H, 65535);
    const float* p = disp.data();
    for (int64_t i = 0; i < H * W; ++i) {
        const float v = p[i];
        SD_REQUIRE(v >= 0, "save_disparity: negative disparity " << v << " at index " << i);
        const auto raw = static_cast<int64_t>(std::lround(v * 256.0f));
        SD_REQUIRE(raw <= 65535, "save_disparity: disparity " << v
                                                              << " overflows the 16-bit range");
        buf.push_back(static_cast<char>((raw >> 8) & 0xff));
        buf.push_back(static_cast<char>(raw & 0xff));
    }
    atomic_write_file(path, buf);
}

Tensor load_disparity(const std::string& path) {
    const std::string buf = read_file(path);
    const PnmHeader h = parse_header(buf, path);
    SD_FAIL_IF(h.kind != '5' || h.maxval <= 255,
               path << ": disparity maps are 16-bit PGM (P5, maxval > 255)");
    const int64_t n = h.width * h.height;
    SD_FAIL_IF(buf.size() - h.data_pos < static_cast<size_t>(2 * n),
               path << ": raster truncated");
    Tensor disp({1, h.height, h.width});
    float* out = disp.data();
    for (int64_t i = 0; i < n; ++i) {
        out[i] = static_cast<float>(sample_at(buf, h.data_pos, i, true)) / 256.0f;
    }
    return disp;
}

}  // namespace stdepth
