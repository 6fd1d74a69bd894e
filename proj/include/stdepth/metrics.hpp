#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stdepth/data.hpp"
#include "stdepth/net.hpp"

namespace stdepth {

// Luminance plane (0.299 R + 0.587 G + 0.114 B) from [3,H,W]; a [1,H,W]
// input passes through unchanged.
Tensor luminance(const Tensor& img);

// Mean structural similarity between two images in [0,1]: 11x11 Gaussian
// window (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1, evaluated at
// fully-supported window positions only. RGB inputs are converted to
// luminance first. Symmetric, and 1 exactly for identical images.
double ssim(const Tensor& a, const Tensor& b);

// Classical winner-take-all stereo: per left-image pixel, the integer
// d in [0, max_disp] minimizing window SAD between the left patch and the
// right patch shifted by sign*d (replicated borders, luminance). Ties pick
// the smallest d.
DisparityMap block_match(const StereoSample& s, int max_disp, int window);

struct SampleScore {
    std::string id;
    double ssi = 0;  // clipped mean of the per-view scores below
    double ssim_left = 0;
    std::optional<double> ssim_right;   // siamese-style methods only
    std::optional<double> disp_err_px;  // mean |D - D_gt|, interior columns
    std::optional<std::string> error;   // set when the sample was skipped
};

struct EvalReport {
    std::string method;
    int n = 0;  // scored samples
    int skipped = 0;
    double mean_ssim = 0;  // of per-sample SSI, clipped to [0,1]
    double std_ssim = 0;   // population standard deviation
    std::optional<double> mean_abs_disp_err_px;
    std::optional<double> runtime_ms_per_image;  // only when timing was requested
    std::vector<SampleScore> per_sample;         // ordered by id

    std::string to_json() const;
};

// A method under evaluation: maps a sample to its left-grid disparity map
// and, for two-stream methods, the right-grid map.
using DisparityPredictor =
    std::function<std::pair<DisparityMap, std::optional<DisparityMap>>(const StereoSample&)>;

// Shared protocol: reconstruct each view its method predicted a map for
// (left from right, and vice versa), score SSIM per view, average into one
// SSI per sample, and compare against ground truth disparity where present.
// Per-sample load/predict failures are recorded and skipped; scoring nothing
// at all is an error. Timing is off by default so reports are bit-stable.
EvalReport evaluate(const DatasetManifest& data, const std::string& method,
                    const DisparityPredictor& predict, bool timing = false);

// The trained network (basic: left view only; siamese: both views).
EvalReport evaluate_model(NetworkParams& params, Arch arch, const DatasetManifest& data,
                          bool timing = false);

// Block-matching baseline (left view only).
EvalReport evaluate_block_match(const DatasetManifest& data, int max_disp, int window,
                                bool timing = false);

// Upper-bound reference: the generator's own disparity fields as predictions.
EvalReport evaluate_gt_oracle(const DatasetManifest& data);

}  // namespace stdepth
