#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stdepth/rng.hpp"
#include "stdepth/tensor.hpp"

namespace stdepth {

// One rectified pair with generator ground truth. Images are [3,H,W] in
// [0,1]; disparity is [1,H,W] in pixels on the LEFT image grid. sign is the
// warp convention: the left view equals the right view sampled at column
// i + sign*D.
struct StereoSample {
    std::string id;
    Tensor left;
    Tensor right;
    std::optional<Tensor> gt_disparity;
    int sign = +1;
};

// Ground-truth disparity field families for synthesis. Text forms:
// "constant:<d>", "ramp:<lo>:<hi>" (varies top row -> bottom row), "boxes"
// (fronto-parallel rectangles over a background plane).
struct DisparityKind {
    enum class Type { constant, ramp, boxes };
    Type type = Type::constant;
    double a = 0;  // constant value, or ramp low end
    double b = 0;  // ramp high end

    static DisparityKind parse(const std::string& text);
    std::string str() const;
};

struct GenParams {
    int64_t width = 192;
    int64_t height = 96;
    double d_max = 12.0;
    int sign = +1;
    int blur_passes = 3;  // texture correlation length rises with each pass
};

// Deterministic synthesis: a blurred-noise right texture, a ground-truth
// field from `kind`, and the left view sampled from the right texture at
// i + sign*D with clamped linear interpolation — so photometric consistency
// between the views holds by construction.
StereoSample generate_sample(const GenParams& p, const DisparityKind& kind, uint64_t seed,
                             const std::string& id);

struct DatasetManifest {
    std::string root;  // directory holding the files; not serialized
    std::vector<std::string> ids;
    std::vector<std::string> kinds;  // per-id generator field, text form
    std::string split = "train";
    uint64_t seed = 0;
    int64_t width = 0;
    int64_t height = 0;
    double d_max = 12.0;
    int sign = +1;
    int blur_passes = 3;

    size_t size() const { return ids.size(); }
};

// Writes <id>_L.ppm / <id>_R.ppm / <id>_D.pgm triples (atomically) plus
// manifest.json. Sample i uses kinds[i % kinds.size()] and an RNG stream
// derived from (seed, i), so any prefix of a larger dataset is reproducible.
DatasetManifest generate_dataset(const std::string& root, const GenParams& p,
                                 const std::vector<DisparityKind>& kinds, int count,
                                 uint64_t seed, const std::string& split = "train");

DatasetManifest load_manifest(const std::string& root);

// Loads one triple from disk (8-bit images, 16-bit disparity). Throws on
// missing or malformed files.
StereoSample load_sample(const DatasetManifest& m, size_t index);

// Stacks same-shape [C,H,W] tensors into [B,C,H,W] (fresh storage, no tape).
Tensor stack_batch(const std::vector<Tensor>& items);

// Drops a leading batch dimension of size 1: [1,C,H,W] -> [C,H,W].
Tensor squeeze_batch(const Tensor& t);

// Separable bilinear resampling with edge clamping and the half-pixel
// (align-corners-false) mapping src = (dst+0.5)*in/out - 0.5. Accepts
// [C,H,W]. Not recorded on the tape (data preparation, not a layer).
Tensor resize_bilinear(const Tensor& img, int64_t out_w, int64_t out_h);

}  // namespace stdepth
