#include "stdepth/metrics.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "stdepth/warp.hpp"

namespace stdepth {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1*L)^2 with L = 1
constexpr double kC2 = 0.03 * 0.03;

// Normalized 2-D Gaussian window.
std::array<double, kWindow * kWindow> gaussian_window() {
    std::array<double, kWindow> g;
    double sum = 0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - (kWindow - 1) / 2.0;
        g[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        sum += g[static_cast<size_t>(i)];
    }
    for (double& v : g) v /= sum;
    std::array<double, kWindow * kWindow> w;
    for (int y = 0; y < kWindow; ++y) {
        for (int x = 0; x < kWindow; ++x) {
            w[static_cast<size_t>(y * kWindow + x)] =
                g[static_cast<size_t>(y)] * g[static_cast<size_t>(x)];
        }
    }
    return w;
}

double clip01(double v) { return std::min(1.0, std::max(0.0, v)); }

}  // namespace

Tensor luminance(const Tensor& img) {
    SD_REQUIRE(img.rank() == 3 && (img.dim(0) == 1 || img.dim(0) == 3),
               "luminance: expected [1,H,W] or [3,H,W], got " << shape_str(img.shape()));
    if (img.dim(0) == 1) return img;
    const int64_t H = img.dim(1), W = img.dim(2);
    Tensor out({1, H, W});
    const float* r = img.data();
    const float* g = r + H * W;
    const float* b = g + H * W;
    float* y = out.data();
    for (int64_t i = 0; i < H * W; ++i) {
        y[i] = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
    }
    return out;
}

double ssim(const Tensor& a, const Tensor& b) {
    SD_REQUIRE(a.same_shape(b), "ssim: shape mismatch " << shape_str(a.shape()) << " vs "
                                                        << shape_str(b.shape()));
    const Tensor la = luminance(a);
    const Tensor lb = luminance(b);
    const int64_t H = la.dim(1), W = la.dim(2);
    SD_REQUIRE(H >= kWindow && W >= kWindow, "ssim: image " << W << "x" << H
                                                            << " is smaller than the " << kWindow
                                                            << "x" << kWindow << " window");
    static const auto win = gaussian_window();
    const float* pa = la.data();
    const float* pb = lb.data();

    double total = 0;
    int64_t count = 0;
    for (int64_t y = 0; y + kWindow <= H; ++y) {
        for (int64_t x = 0; x + kWindow <= W; ++x) {
            double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
            for (int wy = 0; wy < kWindow; ++wy) {
                const float* ra = pa + (y + wy) * W + x;
                const float* rb = pb + (y + wy) * W + x;
                const double* wrow = win.data() + wy * kWindow;
                for (int wx = 0; wx < kWindow; ++wx) {
                    const double va = ra[wx], vb = rb[wx], w = wrow[wx];
                    ma += w * va;
                    mb += w * vb;
                    maa += w * va * va;
                    mbb += w * vb * vb;
                    mab += w * (va * vb);  // grouped so swapping a/b is bit-exact
                }
            }
            const double var_a = maa - ma * ma;
            const double var_b = mbb - mb * mb;
            const double cov = mab - ma * mb;
            const double num = (2 * ma * mb + kC1) * (2 * cov + kC2);
            const double den = (ma * ma + mb * mb + kC1) * (var_a + var_b + kC2);
            total += num / den;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

DisparityMap block_match(const StereoSample& s, int max_disp, int window) {
    SD_REQUIRE(window >= 1 && window % 2 == 1, "block_match: window must be odd, got " << window);
    const int64_t H = s.left.dim(1), W = s.left.dim(2);
    SD_REQUIRE(max_disp >= 0 && max_disp < W,
               "block_match: max_disp " << max_disp << " must be in [0, width)");
    const Tensor ll = luminance(s.left);
    const Tensor lr = luminance(s.right);
    const float* L = ll.data();
    const float* R = lr.data();
    const int r = window / 2;

    DisparityMap out;
    out.values = Tensor({1, 1, H, W});
    out.sign = s.sign;
    float* d_out = out.values.data();

    auto at = [&](const float* img, int64_t y, int64_t x) {
        y = std::clamp<int64_t>(y, 0, H - 1);
        x = std::clamp<int64_t>(x, 0, W - 1);
        return static_cast<double>(img[y * W + x]);
    };

    for (int64_t y = 0; y < H; ++y) {
        for (int64_t x = 0; x < W; ++x) {
            double best = std::numeric_limits<double>::infinity();
            int best_d = 0;
            for (int d = 0; d <= max_disp; ++d) {
                double sad = 0;
                for (int dy = -r; dy <= r; ++dy) {
                    for (int dx = -r; dx <= r; ++dx) {
                        const double lv = at(L, y + dy, x + dx);
                        const double rv = at(R, y + dy, x + s.sign * d + dx);
                        sad += std::abs(lv - rv);
                    }
                }
                if (sad < best) {  // strict: ties keep the smaller d
                    best = sad;
                    best_d = d;
                }
            }
            d_out[y * W + x] = static_cast<float>(best_d);
        }
    }
    return out;
}

namespace {

double score_view(const Tensor& target3, const Tensor& source3, const DisparityMap& d) {
    const Tensor source4 = stack_batch({source3});
    const Tensor recon = warp_horizontal(source4, d.values, d.sign);
    return ssim(target3, squeeze_batch(recon));
}

std::optional<double> disparity_error(const DisparityMap& d, const Tensor& gt, double d_max) {
    const int64_t H = gt.dim(1), W = gt.dim(2);
    const auto [first, last] = interior_columns(d.sign, d_max, W);
    const float* pred = d.values.data();
    const float* ref = gt.data();
    double total = 0;
    int64_t count = 0;
    for (int64_t y = 0; y < H; ++y) {
        for (int64_t x = first; x <= last; ++x) {
            total += std::abs(static_cast<double>(pred[y * W + x]) - ref[y * W + x]);
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    return total / static_cast<double>(count);
}

}  // namespace

EvalReport evaluate(const DatasetManifest& data, const std::string& method,
                    const DisparityPredictor& predict, bool timing) {
    SD_FAIL_IF(data.ids.empty(), "evaluate: dataset " << data.root << " is empty");
    EvalReport report;
    report.method = method;

    double ssi_sum = 0, ssi_sq_sum = 0, err_sum = 0, predict_ms = 0;
    int err_count = 0;

    for (size_t i = 0; i < data.ids.size(); ++i) {
        SampleScore score;
        score.id = data.ids[i];
        try {
            const StereoSample s = load_sample(data, i);

            const auto t0 = std::chrono::steady_clock::now();
            const auto [d_left, d_right] = predict(s);
            const auto t1 = std::chrono::steady_clock::now();
            predict_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();

            score.ssim_left = score_view(s.left, s.right, d_left);
            double ssi = score.ssim_left;
            if (d_right.has_value()) {
                score.ssim_right = score_view(s.right, s.left, *d_right);
                ssi = 0.5 * (ssi + *score.ssim_right);
            }
            score.ssi = clip01(ssi);
            if (s.gt_disparity.has_value()) {
                score.disp_err_px = disparity_error(d_left, *s.gt_disparity, data.d_max);
            }
        } catch (const std::exception& e) {
            score.error = e.what();
            report.skipped += 1;
            report.per_sample.push_back(std::move(score));
            continue;
        }
        ssi_sum += score.ssi;
        ssi_sq_sum += score.ssi * score.ssi;
        if (score.disp_err_px.has_value()) {
            err_sum += *score.disp_err_px;
            err_count += 1;
        }
        report.n += 1;
        report.per_sample.push_back(std::move(score));
    }

    SD_FAIL_IF(report.n == 0, "evaluate: no sample in " << data.root << " could be scored ("
                                                        << report.skipped << " skipped)");
    report.mean_ssim = ssi_sum / report.n;
    report.std_ssim = std::sqrt(std::max(0.0, ssi_sq_sum / report.n -
                                                  report.mean_ssim * report.mean_ssim));
    if (err_count > 0) report.mean_abs_disp_err_px = err_sum / err_count;
    if (timing) report.runtime_ms_per_image = predict_ms / report.n;

    std::sort(report.per_sample.begin(), report.per_sample.end(),
              [](const SampleScore& a, const SampleScore& b) { return a.id < b.id; });
    return report;
}

EvalReport evaluate_model(NetworkParams& params, Arch arch, const DatasetManifest& data,
                          bool timing) {
    const std::string method = arch_name(arch);
    return evaluate(
        data, method,
        [&](const StereoSample& s) {
            DisparityMap d_left =
                forward_basic(params, stack_batch({s.left}), BNMode::infer, s.sign);
            std::optional<DisparityMap> d_right;
            if (arch == Arch::siamese) {
                d_right = forward_basic(params, stack_batch({s.right}), BNMode::infer, -s.sign);
            }
            return std::make_pair(std::move(d_left), std::move(d_right));
        },
        timing);
}

EvalReport evaluate_block_match(const DatasetManifest& data, int max_disp, int window,
                                bool timing) {
    return evaluate(
        data, "block-match",
        [&](const StereoSample& s) {
            return std::make_pair(block_match(s, max_disp, window),
                                  std::optional<DisparityMap>());
        },
        timing);
}

EvalReport evaluate_gt_oracle(const DatasetManifest& data) {
    return evaluate(data, "gt-oracle", [](const StereoSample& s) {
        SD_FAIL_IF(!s.gt_disparity.has_value(),
                   s.id << ": no ground-truth disparity for the oracle");
        DisparityMap d;
        d.values = stack_batch({*s.gt_disparity});
        d.sign = s.sign;
        return std::make_pair(std::move(d), std::optional<DisparityMap>());
    });
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["method"] = method;
    j["n"] = n;
    j["skipped"] = skipped;
    j["mean_ssim"] = mean_ssim;
    j["std_ssim"] = std_ssim;
    j["mean_abs_disp_err_px"] =
        mean_abs_disp_err_px.has_value() ? nlohmann::json(*mean_abs_disp_err_px)
                                         : nlohmann::json(nullptr);
    j["runtime_ms_per_image"] = runtime_ms_per_image.has_value()
                                    ? nlohmann::json(*runtime_ms_per_image)
                                    : nlohmann::json(nullptr);
    auto arr = nlohmann::json::array();
    for (const SampleScore& s : per_sample) {
        nlohmann::json e;
        e["id"] = s.id;
        if (s.error.has_value()) {
            e["error"] = *s.error;
        } else {
            e["ssi"] = s.ssi;
            e["ssim_left"] = s.ssim_left;
            if (s.ssim_right.has_value()) e["ssim_right"] = *s.ssim_right;
            if (s.disp_err_px.has_value()) e["disp_err_px"] = *s.disp_err_px;
        }
        arr.push_back(std::move(e));
    }
    j["per_sample"] = std::move(arr);
    return j.dump(2) + "\n";
}

}  // namespace stdepth
