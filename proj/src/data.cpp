#include "stdepth/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>

#include <json.hpp>

#include "stdepth/image_io.hpp"
#include "stdepth/io_util.hpp"

namespace stdepth {

namespace {

using nlohmann::json;

// Binomial [1,4,6,4,1]/16 applied along one axis with edge clamping.
void blur_axis(std::vector<float>& plane, int64_t H, int64_t W, bool horizontal) {
    static constexpr float k[5] = {1.f / 16, 4.f / 16, 6.f / 16, 4.f / 16, 1.f / 16};
    std::vector<float> out(plane.size());
    for (int64_t y = 0; y < H; ++y) {
        for (int64_t x = 0; x < W; ++x) {
            float acc = 0;
            for (int t = -2; t <= 2; ++t) {
                int64_t yy = y, xx = x;
                if (horizontal) {
                    xx = std::clamp<int64_t>(x + t, 0, W - 1);
                } else {
                    yy = std::clamp<int64_t>(y + t, 0, H - 1);
                }
                acc += k[t + 2] * plane[static_cast<size_t>(yy * W + xx)];
            }
            out[static_cast<size_t>(y * W + x)] = acc;
        }
    }
    plane = std::move(out);
}

// Smooth texture in [0.05, 0.95]: blurred uniform noise, then a per-channel
// contrast stretch so the blur does not wash out the image gradients that
// carry the photometric training signal.
Tensor make_texture(int64_t H, int64_t W, int blur_passes, Rng& rng) {
    Tensor tex({3, H, W});
    for (int64_t c = 0; c < 3; ++c) {
        std::vector<float> plane(static_cast<size_t>(H * W));
        for (float& v : plane) v = static_cast<float>(rng.uniform());
        for (int pass = 0; pass < blur_passes; ++pass) {
            blur_axis(plane, H, W, true);
            blur_axis(plane, H, W, false);
        }
        const auto [lo_it, hi_it] = std::minmax_element(plane.begin(), plane.end());
        const float lo = *lo_it, hi = *hi_it;
        float* dst = tex.data() + c * H * W;
        if (hi - lo < 1e-12f) {
            std::fill(dst, dst + H * W, 0.5f);
        } else {
            const float gain = 0.9f / (hi - lo);
            for (int64_t i = 0; i < H * W; ++i) dst[i] = 0.05f + (plane[static_cast<size_t>(i)] - lo) * gain;
        }
    }
    return tex;
}

void check_disparity_value(double d, const GenParams& p, const char* what) {
    SD_REQUIRE(d >= 0, what << " disparity " << d << " is negative");
    SD_REQUIRE(d < p.d_max, what << " disparity " << d << " reaches d_max " << p.d_max);
    SD_REQUIRE(d < static_cast<double>(p.width), what << " disparity " << d
                                                      << " exceeds the image width " << p.width);
}

Tensor make_gt(const GenParams& p, const DisparityKind& kind, Rng& rng) {
    const int64_t H = p.height, W = p.width;
    Tensor gt({1, H, W});
    float* d = gt.data();
    switch (kind.type) {
        case DisparityKind::Type::constant: {
            check_disparity_value(kind.a, p, "constant");
            std::fill(d, d + H * W, static_cast<float>(kind.a));
            break;
        }
        case DisparityKind::Type::ramp: {
            check_disparity_value(kind.a, p, "ramp low");
            check_disparity_value(kind.b, p, "ramp high");
            for (int64_t y = 0; y < H; ++y) {
                const double t = H > 1 ? static_cast<double>(y) / (H - 1) : 0.0;
                const auto v = static_cast<float>(kind.a + (kind.b - kind.a) * t);
                std::fill(d + y * W, d + (y + 1) * W, v);
            }
            break;
        }
        case DisparityKind::Type::boxes: {
            const double bg = 0.25 * p.d_max;
            check_disparity_value(bg, p, "background");
            std::fill(d, d + H * W, static_cast<float>(bg));
            for (int box = 0; box < 3; ++box) {
                const int64_t bw = W / 6 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(W / 6 + 1)));
                const int64_t bh = H / 6 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(H / 6 + 1)));
                const int64_t x0 = static_cast<int64_t>(rng.below(static_cast<uint64_t>(W - bw + 1)));
                const int64_t y0 = static_cast<int64_t>(rng.below(static_cast<uint64_t>(H - bh + 1)));
                const double v = rng.uniform(0.3 * p.d_max, 0.9 * p.d_max);
                check_disparity_value(v, p, "box");
                for (int64_t y = y0; y < y0 + bh; ++y) {
                    std::fill(d + y * W + x0, d + y * W + x0 + bw, static_cast<float>(v));
                }
            }
            break;
        }
    }
    return gt;
}

}  // namespace

DisparityKind DisparityKind::parse(const std::string& text) {
    std::vector<std::string> parts;
    size_t start = 0;
    while (true) {
        const size_t colon = text.find(':', start);
        parts.push_back(text.substr(start, colon - start));
        if (colon == std::string::npos) break;
        start = colon + 1;
    }
    auto to_num = [&](const std::string& s) {
        try {
            size_t used = 0;
            const double v = std::stod(s, &used);
            SD_REQUIRE(used == s.size(), "trailing characters");
            return v;
        } catch (const std::exception&) {
            throw std::invalid_argument("bad disparity kind \"" + text +
                                        "\": \"" + s + "\" is not a number");
        }
    };
    DisparityKind k;
    if (parts[0] == "constant" && parts.size() == 2) {
        k.type = Type::constant;
        k.a = to_num(parts[1]);
    } else if (parts[0] == "ramp" && parts.size() == 3) {
        k.type = Type::ramp;
        k.a = to_num(parts[1]);
        k.b = to_num(parts[2]);
    } else if (parts[0] == "boxes" && parts.size() == 1) {
        k.type = Type::boxes;
    } else {
        SD_REQUIRE(false, "bad disparity kind \"" << text
                                                  << "\" (want constant:<d>, ramp:<lo>:<hi>, "
                                                     "or boxes)");
    }
    return k;
}

std::string DisparityKind::str() const {
    std::ostringstream oss;
    switch (type) {
        case Type::constant:
            oss << "constant:" << a;
            break;
        case Type::ramp:
            oss << "ramp:" << a << ":" << b;
            break;
        case Type::boxes:
            oss << "boxes";
            break;
    }
    return oss.str();
}

StereoSample generate_sample(const GenParams& p, const DisparityKind& kind, uint64_t seed,
                             const std::string& id) {
    SD_REQUIRE(p.width % 32 == 0 && p.height % 32 == 0,
               "generate_sample: size " << p.width << "x" << p.height
                                        << " must be divisible by 32");
    SD_REQUIRE(p.sign == 1 || p.sign == -1, "generate_sample: sign must be +1 or -1");
    SD_REQUIRE(p.d_max > 0 && p.d_max < static_cast<double>(p.width),
               "generate_sample: d_max " << p.d_max << " must be in (0, width)");
    SD_REQUIRE(p.blur_passes >= 0, "generate_sample: negative blur_passes");

    Rng tex_rng = Rng::derive(seed, 1);
    Rng field_rng = Rng::derive(seed, 2);

    StereoSample s;
    s.id = id;
    s.sign = p.sign;
    s.right = make_texture(p.height, p.width, p.blur_passes, tex_rng);
    Tensor gt = make_gt(p, kind, field_rng);

    // Left view: sample the right texture at i + sign*D, clamped linear
    // interpolation. Kept as a straightforward per-pixel loop independent of
    // the differentiable warp so the two implementations cross-check.
    const int64_t H = p.height, W = p.width;
    s.left = Tensor({3, H, W});
    const float* gd = gt.data();
    for (int64_t c = 0; c < 3; ++c) {
        const float* src = s.right.data() + c * H * W;
        float* dst = s.left.data() + c * H * W;
        for (int64_t y = 0; y < H; ++y) {
            for (int64_t x = 0; x < W; ++x) {
                double pos = static_cast<double>(x) +
                             p.sign * static_cast<double>(gd[y * W + x]);
                pos = std::clamp(pos, 0.0, static_cast<double>(W - 1));
                const auto x0 = static_cast<int64_t>(pos);
                const int64_t x1 = std::min<int64_t>(x0 + 1, W - 1);
                const auto f = static_cast<float>(pos - static_cast<double>(x0));
                const float v0 = src[y * W + x0], v1 = src[y * W + x1];
                dst[y * W + x] = (1.0f - f) * v0 + f * v1;
            }
        }
    }
    s.gt_disparity = std::move(gt);
    return s;
}

namespace {

std::filesystem::path sample_path(const std::string& root, const std::string& id,
                                  const char* suffix) {
    return std::filesystem::path(root) / (id + suffix);
}

}  // namespace

DatasetManifest generate_dataset(const std::string& root, const GenParams& p,
                                 const std::vector<DisparityKind>& kinds, int count,
                                 uint64_t seed, const std::string& split) {
    SD_REQUIRE(!kinds.empty(), "generate_dataset: need at least one disparity kind");
    SD_REQUIRE(count >= 1, "generate_dataset: count must be positive, got " << count);
    std::filesystem::create_directories(root);

    DatasetManifest m;
    m.root = root;
    m.split = split;
    m.seed = seed;
    m.width = p.width;
    m.height = p.height;
    m.d_max = p.d_max;
    m.sign = p.sign;
    m.blur_passes = p.blur_passes;

    for (int i = 0; i < count; ++i) {
        const DisparityKind& kind = kinds[static_cast<size_t>(i) % kinds.size()];
        std::ostringstream id;
        id << "s" << std::setw(4) << std::setfill('0') << i;
        StereoSample s =
            generate_sample(p, kind, Rng::derive_seed(seed, static_cast<uint64_t>(i)), id.str());
        save_ppm(sample_path(root, s.id, "_L.ppm").string(), s.left);
        save_ppm(sample_path(root, s.id, "_R.ppm").string(), s.right);
        save_disparity(sample_path(root, s.id, "_D.pgm").string(), *s.gt_disparity);
        m.ids.push_back(s.id);
        m.kinds.push_back(kind.str());
    }

    json j;
    j["ids"] = m.ids;
    j["kinds"] = m.kinds;
    j["split"] = m.split;
    j["seed"] = m.seed;
    j["width"] = m.width;
    j["height"] = m.height;
    j["d_max"] = m.d_max;
    j["disp_sign"] = m.sign;
    j["blur_passes"] = m.blur_passes;
    atomic_write_file((std::filesystem::path(root) / "manifest.json").string(),
                      j.dump(2) + "\n");
    return m;
}

DatasetManifest load_manifest(const std::string& root) {
    const auto path = (std::filesystem::path(root) / "manifest.json").string();
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        SD_FAIL_IF(true, path << ": invalid JSON: " << e.what());
    }
    DatasetManifest m;
    try {
        m.root = root;
        m.ids = j.at("ids").get<std::vector<std::string>>();
        m.kinds = j.at("kinds").get<std::vector<std::string>>();
        m.split = j.at("split").get<std::string>();
        m.seed = j.at("seed").get<uint64_t>();
        m.width = j.at("width").get<int64_t>();
        m.height = j.at("height").get<int64_t>();
        m.d_max = j.at("d_max").get<double>();
        m.sign = j.at("disp_sign").get<int>();
        m.blur_passes = j.value("blur_passes", 3);
    } catch (const json::exception& e) {
        SD_FAIL_IF(true, path << ": missing or mistyped key: " << e.what());
    }
    SD_FAIL_IF(m.ids.size() != m.kinds.size(),
               path << ": ids and kinds arrays differ in length");
    SD_FAIL_IF(m.sign != 1 && m.sign != -1, path << ": disp_sign must be +1 or -1");
    return m;
}

StereoSample load_sample(const DatasetManifest& m, size_t index) {
    SD_REQUIRE(index < m.ids.size(), "load_sample: index " << index << " out of range (have "
                                                           << m.ids.size() << " samples)");
    const std::string& id = m.ids[index];
    StereoSample s;
    s.id = id;
    s.sign = m.sign;
    s.left = load_image(sample_path(m.root, id, "_L.ppm").string());
    s.right = load_image(sample_path(m.root, id, "_R.ppm").string());
    SD_FAIL_IF(s.left.rank() != 3 || s.left.dim(0) != 3,
               id << ": left view is not an RGB image");
    SD_FAIL_IF(!s.left.same_shape(s.right), id << ": view shapes differ");
    const auto dpath = sample_path(m.root, id, "_D.pgm");
    if (std::filesystem::exists(dpath)) {
        s.gt_disparity = load_disparity(dpath.string());
        SD_FAIL_IF(s.gt_disparity->dim(1) != s.left.dim(1) ||
                       s.gt_disparity->dim(2) != s.left.dim(2),
                   id << ": disparity size does not match the images");
    }
    return s;
}

Tensor stack_batch(const std::vector<Tensor>& items) {
    SD_REQUIRE(!items.empty(), "stack_batch: empty batch");
    const Shape& s = items[0].shape();
    Shape out_shape;
    out_shape.push_back(static_cast<int64_t>(items.size()));
    out_shape.insert(out_shape.end(), s.begin(), s.end());
    Tensor out(out_shape);
    const int64_t n = items[0].numel();
    for (size_t b = 0; b < items.size(); ++b) {
        SD_REQUIRE(items[b].same_shape(items[0]),
                   "stack_batch: item " << b << " has shape " << shape_str(items[b].shape())
                                        << ", expected " << shape_str(s));
        std::copy_n(items[b].data(), n, out.data() + static_cast<int64_t>(b) * n);
    }
    return out;
}

Tensor squeeze_batch(const Tensor& t) {
    SD_REQUIRE(t.rank() == 4 && t.dim(0) == 1,
               "squeeze_batch: expected [1,C,H,W], got " << shape_str(t.shape()));
    return Tensor({t.dim(1), t.dim(2), t.dim(3)}, t.values());
}

Tensor resize_bilinear(const Tensor& img, int64_t out_w, int64_t out_h) {
    SD_REQUIRE(img.rank() == 3, "resize_bilinear: expected [C,H,W], got "
                                    << shape_str(img.shape()));
    SD_REQUIRE(out_w >= 1 && out_h >= 1, "resize_bilinear: target " << out_w << "x" << out_h
                                                                    << " must be >= 1x1");
    const int64_t C = img.dim(0), H = img.dim(1), W = img.dim(2);
    if (out_w == W && out_h == H) return Tensor(img.shape(), img.values());

    Tensor out({C, out_h, out_w});
    const double sy = static_cast<double>(H) / static_cast<double>(out_h);
    const double sx = static_cast<double>(W) / static_cast<double>(out_w);
    for (int64_t c = 0; c < C; ++c) {
        const float* src = img.data() + c * H * W;
        float* dst = out.data() + c * out_h * out_w;
        for (int64_t y = 0; y < out_h; ++y) {
            const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(H - 1));
            const auto y0 = static_cast<int64_t>(fy);
            const int64_t y1 = std::min<int64_t>(y0 + 1, H - 1);
            const auto wy = static_cast<float>(fy - static_cast<double>(y0));
            for (int64_t x = 0; x < out_w; ++x) {
                const double fx =
                    std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(W - 1));
                const auto x0 = static_cast<int64_t>(fx);
                const int64_t x1 = std::min<int64_t>(x0 + 1, W - 1);
                const auto wx = static_cast<float>(fx - static_cast<double>(x0));
                const float top = (1.0f - wx) * src[y0 * W + x0] + wx * src[y0 * W + x1];
                const float bot = (1.0f - wx) * src[y1 * W + x0] + wx * src[y1 * W + x1];
                dst[y * out_w + x] = (1.0f - wy) * top + wy * bot;
            }
        }
    }
    return out;
}

}  // namespace stdepth
