#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "stdepth/image_io.hpp"
#include "stdepth/io_util.hpp"
#include "stdepth/rng.hpp"

using namespace stdepth;

namespace {

std::string tmp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "stdepth_image_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

}  // namespace

TEST_SUITE_BEGIN("image_io");

TEST_CASE("ppm bytes for a two-pixel image") {
    // Pixels: pure red then mid gray. 0.5 quantizes to round(127.5) = 128.
    // Planar [3,1,2] layout: channel plane stride is 2.
    Tensor img({3, 1, 2});
    img.at(0) = 1.0f;  // R of pixel 0
    img.at(1) = 0.5f;  // R of pixel 1
    img.at(3) = 0.5f;  // G of pixel 1
    img.at(5) = 0.5f;  // B of pixel 1
    const std::string path = tmp_path("two_pixel.ppm");
    save_ppm(path, img);

    const std::string bytes = read_file(path);
    const std::string header = "P6\n2 1\n255\n";
    REQUIRE(bytes.size() == header.size() + 6);
    CHECK(bytes.substr(0, header.size()) == header);
    const auto* px = reinterpret_cast<const unsigned char*>(bytes.data() + header.size());
    CHECK(px[0] == 255);  // R
    CHECK(px[1] == 0);    // G
    CHECK(px[2] == 0);    // B
    CHECK(px[3] == 128);
    CHECK(px[4] == 128);
    CHECK(px[5] == 128);
}

TEST_CASE("ppm roundtrip: one quantization, then bitwise stable") {
    Rng rng(3);
    Tensor img({3, 5, 7});
    for (auto& v : img.values()) v = static_cast<float>(rng.uniform());
    const std::string p1 = tmp_path("roundtrip1.ppm");
    const std::string p2 = tmp_path("roundtrip2.ppm");
    save_ppm(p1, img);
    Tensor once = load_image(p1);
    REQUIRE(once.shape() == img.shape());
    // First pass may only move values by the half-step quantization error.
    for (int64_t i = 0; i < img.numel(); ++i) {
        CHECK(std::abs(once.at(i) - img.at(i)) <= 0.5f / 255.0f + 1e-6f);
    }
    // A value that has been through the 8-bit grid is now a fixed point.
    save_ppm(p2, once);
    CHECK(read_file(p1) == read_file(p2));
    Tensor twice = load_image(p2);
    for (int64_t i = 0; i < img.numel(); ++i) CHECK(twice.at(i) == once.at(i));
}

TEST_CASE("pgm roundtrip: one quantization, then bitwise stable") {
    Rng rng(4);
    Tensor img({1, 6, 4});
    for (auto& v : img.values()) v = static_cast<float>(rng.uniform());
    const std::string p1 = tmp_path("roundtrip1.pgm");
    const std::string p2 = tmp_path("roundtrip2.pgm");
    save_pgm(p1, img);
    Tensor once = load_image(p1);
    REQUIRE(once.shape() == img.shape());
    for (int64_t i = 0; i < img.numel(); ++i) {
        CHECK(std::abs(once.at(i) - img.at(i)) <= 0.5f / 255.0f + 1e-6f);
    }
    save_pgm(p2, once);
    CHECK(read_file(p1) == read_file(p2));
    Tensor twice = load_image(p2);
    for (int64_t i = 0; i < img.numel(); ++i) CHECK(twice.at(i) == once.at(i));
}

TEST_CASE("quantization clamps out-of-range values") {
    Tensor img({1, 1, 3});
    img.at(0) = -0.25f;
    img.at(1) = 1.75f;
    img.at(2) = 0.0f;
    const std::string path = tmp_path("clamp.pgm");
    save_pgm(path, img);
    const std::string bytes = read_file(path);
    const auto* px = reinterpret_cast<const unsigned char*>(bytes.data() + bytes.size() - 3);
    CHECK(px[0] == 0);
    CHECK(px[1] == 255);
    CHECK(px[2] == 0);
}

TEST_CASE("disparity encoding is fixed point raw = round(256*d), big-endian 16-bit") {
    Tensor disp({1, 1, 3});
    disp.at(0) = 4.0f;       // raw 1024 = 0x0400
    disp.at(1) = 0.5f;       // raw 128
    disp.at(2) = 2.25f;      // raw 576 = 0x0240
    const std::string path = tmp_path("disp.pgm");
    save_disparity(path, disp);

    const std::string bytes = read_file(path);
    const std::string header = "P5\n3 1\n65535\n";
    REQUIRE(bytes.size() == header.size() + 6);
    CHECK(bytes.substr(0, header.size()) == header);
    const auto* px = reinterpret_cast<const unsigned char*>(bytes.data() + header.size());
    CHECK((px[0] << 8 | px[1]) == 1024);
    CHECK((px[2] << 8 | px[3]) == 128);
    CHECK((px[4] << 8 | px[5]) == 576);
}

TEST_CASE("disparity roundtrip is exact on the 1/256 grid") {
    Rng rng(5);
    Tensor disp({1, 4, 9});
    for (auto& v : disp.values()) {
        // Multiples of 1/256 survive the fixed-point encoding exactly.
        v = static_cast<float>(static_cast<int>(rng.uniform(0, 3000))) / 256.0f;
    }
    const std::string path = tmp_path("disp_rt.pgm");
    save_disparity(path, disp);
    Tensor back = load_disparity(path);
    REQUIRE(back.shape() == disp.shape());
    for (int64_t i = 0; i < disp.numel(); ++i) CHECK(back.at(i) == disp.at(i));
}

TEST_CASE("nearby off-grid disparities round to the same stored value") {
    Tensor disp({1, 1, 1});
    disp.at(0) = 1.0f / 512.0f;  // raw 0.5 rounds away from zero -> 1
    const std::string path = tmp_path("disp_round.pgm");
    save_disparity(path, disp);
    CHECK(load_disparity(path).at(0) == 1.0f / 256.0f);
}

TEST_CASE("loader accepts header comments and single-line headers") {
    const std::string path = tmp_path("comments.pgm");
    std::string bytes = "P5 # format\n# a comment line\n2 1 # dims\n255\n";
    bytes.push_back(static_cast<char>(7));
    bytes.push_back(static_cast<char>(250));
    atomic_write_file(path, bytes);
    Tensor img = load_image(path);
    REQUIRE(img.shape() == Shape{1, 1, 2});
    CHECK(img.at(0) == doctest::Approx(7.0 / 255.0));
    CHECK(img.at(1) == doctest::Approx(250.0 / 255.0));
}

TEST_CASE("16-bit pgm loads with the file maxval as the divisor") {
    const std::string path = tmp_path("wide.pgm");
    std::string bytes = "P5\n1 1\n65535\n";
    bytes.push_back(static_cast<char>(0x12));
    bytes.push_back(static_cast<char>(0x34));
    atomic_write_file(path, bytes);
    Tensor img = load_image(path);
    CHECK(img.at(0) == doctest::Approx(static_cast<float>(0x1234) / 65535.0f));
}

TEST_CASE("malformed files are rejected") {
    const std::string path = tmp_path("bad.pnm");
    SUBCASE("wrong magic") {
        atomic_write_file(path, "P3\n1 1\n255\n0 0 0\n");
        CHECK_THROWS_AS(load_image(path), std::runtime_error);
    }
    SUBCASE("truncated pixel data") {
        std::string bytes = "P6\n2 2\n255\n";
        bytes.append(5, '\0');  // needs 12 bytes
        atomic_write_file(path, bytes);
        CHECK_THROWS_AS(load_image(path), std::runtime_error);
    }
    SUBCASE("zero dimensions") {
        atomic_write_file(path, "P5\n0 1\n255\n");
        CHECK_THROWS_AS(load_image(path), std::runtime_error);
    }
    SUBCASE("unsupported maxval") {
        atomic_write_file(path, "P5\n1 1\n70000\n\0\0");
        CHECK_THROWS_AS(load_image(path), std::runtime_error);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_image(tmp_path("nope.pgm")), std::runtime_error);
    }
}

TEST_CASE("load_disparity rejects 8-bit and color files") {
    Tensor gray({1, 2, 2});
    const std::string p8 = tmp_path("narrow.pgm");
    save_pgm(p8, gray);  // 8-bit, not a disparity encoding
    CHECK_THROWS_AS(load_disparity(p8), std::runtime_error);

    Tensor rgb({3, 2, 2});
    const std::string pc = tmp_path("color.ppm");
    save_ppm(pc, rgb);
    CHECK_THROWS_AS(load_disparity(pc), std::runtime_error);
}

TEST_CASE("save validates channel count") {
    Tensor gray({1, 2, 2});
    Tensor rgb({3, 2, 2});
    CHECK_THROWS_AS(save_ppm(tmp_path("x.ppm"), gray), std::invalid_argument);
    CHECK_THROWS_AS(save_pgm(tmp_path("x.pgm"), rgb), std::invalid_argument);
    CHECK_THROWS_AS(save_disparity(tmp_path("x.pgm"), rgb), std::invalid_argument);
}

TEST_SUITE_END();
