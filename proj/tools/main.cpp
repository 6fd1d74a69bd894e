#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stdepth/checkpoint.hpp"
#include "stdepth/data.hpp"
#include "stdepth/image_io.hpp"
#include "stdepth/io_util.hpp"
#include "stdepth/metrics.hpp"
#include "stdepth/train.hpp"
#include "stdepth/warp.hpp"

namespace {

using stdepth::Arch;

// Thrown during flag/config validation: exit code 2. Anything thrown after
// validation is a runtime failure: exit code 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flags override config-file values override defaults: after CLI11 has
// parsed, a JSON config fills in exactly those options the command line left
// untouched.
class ConfigOverlay {
public:
    void load(const std::string& path) {
        try {
            j_ = nlohmann::json::parse(stdepth::read_file(path));
        } catch (const std::exception& e) {
            throw UsageError("config " + path + ": " + e.what());
        }
        if (!j_.is_object()) throw UsageError("config " + path + ": expected a JSON object");
        loaded_ = true;
        path_ = path;
    }

    template <typename T>
    void apply(const CLI::Option* opt, const char* key, T& var) const {
        if (!loaded_ || opt->count() > 0) return;
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            var = it->get<T>();
        } catch (const nlohmann::json::exception&) {
            throw UsageError("config " + path_ + ": key \"" + key + "\" has the wrong type");
        }
    }

private:
    nlohmann::json j_;
    bool loaded_ = false;
    std::string path_;
};

Arch parse_arch(const std::string& name) {
    if (name == "basic") return Arch::basic;
    if (name == "siamese") return Arch::siamese;
    throw UsageError("--arch must be \"basic\" or \"siamese\", got \"" + name + "\"");
}

void check_sign(int sign, bool zero_ok = false) {
    if (sign == 0 && zero_ok) return;
    if (sign != 1 && sign != -1) throw UsageError("--disp-sign must be +1 or -1");
}

// --- gen-data ---------------------------------------------------------------

struct GenArgs {
    std::string out, config, split = "train";
    int count = 8;
    int64_t width = 192, height = 96;
    double d_max = 12.0;
    int sign = +1;
    int blur_passes = 3;
    uint64_t seed = 1;
    std::vector<std::string> kinds;

    CLI::Option *o_count{}, *o_width{}, *o_height{}, *o_dmax{}, *o_sign{}, *o_blur{}, *o_seed{},
        *o_kinds{}, *o_split{};
};

int run_gen(GenArgs& a) {
    ConfigOverlay cfg;
    if (!a.config.empty()) cfg.load(a.config);
    cfg.apply(a.o_count, "count", a.count);
    cfg.apply(a.o_width, "width", a.width);
    cfg.apply(a.o_height, "height", a.height);
    cfg.apply(a.o_dmax, "d-max", a.d_max);
    cfg.apply(a.o_sign, "disp-sign", a.sign);
    cfg.apply(a.o_blur, "blur-passes", a.blur_passes);
    cfg.apply(a.o_seed, "seed", a.seed);
    cfg.apply(a.o_kinds, "kind", a.kinds);
    cfg.apply(a.o_split, "split", a.split);

    if (a.kinds.empty()) {
        a.kinds = {"constant:2", "constant:4", "constant:6", "ramp:1:7"};
    }
    check_sign(a.sign);
    if (a.count < 1) throw UsageError("--count must be positive");
    if (a.width % 32 != 0 || a.height % 32 != 0) {
        throw UsageError("--width and --height must be divisible by 32 (five 2x poolings)");
    }
    if (!(a.d_max > 0) || a.d_max >= static_cast<double>(a.width)) {
        throw UsageError("--d-max must be in (0, width)");
    }
    std::vector<stdepth::DisparityKind> kinds;
    for (const std::string& text : a.kinds) {
        stdepth::DisparityKind k;
        try {
            k = stdepth::DisparityKind::parse(text);
        } catch (const std::exception& e) {
            throw UsageError(e.what());
        }
        const auto check = [&](double d, const char* what) {
            if (d < 0 || d >= a.d_max) {
                throw UsageError("--kind " + text + ": " + what + " disparity " +
                                 std::to_string(d) + " outside [0, d_max=" +
                                 std::to_string(a.d_max) + ")");
            }
        };
        if (k.type == stdepth::DisparityKind::Type::constant) check(k.a, "constant");
        if (k.type == stdepth::DisparityKind::Type::ramp) {
            check(k.a, "ramp low");
            check(k.b, "ramp high");
        }
        kinds.push_back(k);
    }

    stdepth::GenParams p;
    p.width = a.width;
    p.height = a.height;
    p.d_max = a.d_max;
    p.sign = a.sign;
    p.blur_passes = a.blur_passes;
    const auto m = stdepth::generate_dataset(a.out, p, kinds, a.count, a.seed, a.split);
    std::cout << "wrote " << m.ids.size() << " samples to " << a.out << "\n";
    return 0;
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
    std::string data, out, config, resume, arch = "siamese";
    double scale = 0.125;
    int epochs = 40;
    int steps = 0;
    int batch = 0;
    double lr = 1e-4;
    double d_max = 0;
    double alpha_l = 0.5, alpha_r = 0.5, alpha_c = 1.0;
    uint64_t seed = 1;
    int sign = 0;
    bool quiet = false;

    CLI::Option *o_arch{}, *o_scale{}, *o_epochs{}, *o_steps{}, *o_batch{}, *o_lr{}, *o_dmax{},
        *o_al{}, *o_ar{}, *o_ac{}, *o_seed{}, *o_sign{}, *o_resume{};
};

int run_train(TrainArgs& a) {
    ConfigOverlay cfg;
    if (!a.config.empty()) cfg.load(a.config);
    cfg.apply(a.o_arch, "arch", a.arch);
    cfg.apply(a.o_scale, "scale", a.scale);
    cfg.apply(a.o_epochs, "epochs", a.epochs);
    cfg.apply(a.o_steps, "steps", a.steps);
    cfg.apply(a.o_batch, "batch", a.batch);
    cfg.apply(a.o_lr, "lr", a.lr);
    cfg.apply(a.o_dmax, "d-max", a.d_max);
    cfg.apply(a.o_al, "alpha-l", a.alpha_l);
    cfg.apply(a.o_ar, "alpha-r", a.alpha_r);
    cfg.apply(a.o_ac, "alpha-c", a.alpha_c);
    cfg.apply(a.o_seed, "seed", a.seed);
    cfg.apply(a.o_sign, "disp-sign", a.sign);
    cfg.apply(a.o_resume, "resume", a.resume);

    stdepth::TrainConfig tc;
    tc.arch = parse_arch(a.arch);
    check_sign(a.sign, /*zero_ok=*/true);
    if (!(a.scale > 0) || a.scale > 1) throw UsageError("--scale must be in (0, 1]");
    if (a.epochs < 1) throw UsageError("--epochs must be positive");
    if (a.steps < 0) throw UsageError("--steps must be non-negative");
    if (a.batch < 0) throw UsageError("--batch must be non-negative");
    if (!(a.lr > 0)) throw UsageError("--lr must be positive");
    if (a.d_max < 0) throw UsageError("--d-max must be non-negative");
    tc.scale = a.scale;
    tc.epochs = a.epochs;
    tc.max_steps = a.steps;
    tc.batch = a.batch;
    tc.base_lr = a.lr;
    tc.d_max = static_cast<float>(a.d_max);
    tc.weights.alpha_l = static_cast<float>(a.alpha_l);
    tc.weights.alpha_r = static_cast<float>(a.alpha_r);
    tc.weights.alpha_c = static_cast<float>(a.alpha_c);
    tc.seed = a.seed;
    tc.dataset_dir = a.data;
    tc.out_dir = a.out;
    tc.resume = a.resume;
    tc.sign = a.sign;

    const auto r = stdepth::run_training(tc, a.quiet ? nullptr : &std::cout);
    std::cout << "trained " << r.steps << " steps (" << r.epochs_done
              << " epochs done); loss " << r.initial_loss << " -> " << r.final_loss
              << "\ncheckpoint: " << r.final_checkpoint << "\nloss log: " << r.loss_log << "\n";
    return 0;
}

// --- infer -------------------------------------------------------------------

struct InferArgs {
    std::string ckpt, image, out, right, recon, config;
};

int run_infer(InferArgs& a) {
    if (!a.recon.empty() && a.right.empty()) {
        throw UsageError("--recon needs --right (the source view to warp)");
    }
    auto ck = stdepth::load_checkpoint(a.ckpt);
    stdepth::Tensor img = stdepth::load_image(a.image);
    SD_FAIL_IF(img.dim(0) != 3, a.image << ": expected an RGB image (PPM)");

    const auto t0 = std::chrono::steady_clock::now();
    stdepth::DisparityMap d = stdepth::forward_basic(
        ck.params, stdepth::stack_batch({img}), stdepth::BNMode::infer, ck.info.sign);
    const auto t1 = std::chrono::steady_clock::now();

    stdepth::save_disparity(a.out, stdepth::squeeze_batch(d.values));
    if (!a.recon.empty()) {
        stdepth::Tensor right = stdepth::load_image(a.right);
        SD_FAIL_IF(!right.same_shape(img), a.right << ": source view shape differs from input");
        stdepth::Tensor rec = stdepth::warp_horizontal(stdepth::stack_batch({right}), d);
        stdepth::save_ppm(a.recon, stdepth::squeeze_batch(rec));
    }
    std::cout << "depth estimation: " << std::fixed << std::setprecision(2)
              << std::chrono::duration<double, std::milli>(t1 - t0).count() << " ms for "
              << img.dim(2) << "x" << img.dim(1) << "\n";
    return 0;
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
    std::string data, ckpt, method = "model", out, config;
    int max_disp = -1;
    int window = 9;
    bool compare = false;
    bool timing = false;
};

int run_eval(EvalArgs& a) {
    if (a.method != "model" && a.method != "block-match" && a.method != "gt-oracle") {
        throw UsageError("--method must be model, block-match, or gt-oracle");
    }
    if ((a.method == "model" || a.compare) && a.ckpt.empty()) {
        throw UsageError("--ckpt is required to evaluate the model");
    }
    if (a.window < 1 || a.window % 2 == 0) throw UsageError("--window must be odd and positive");

    const auto manifest = stdepth::load_manifest(a.data);
    const int max_disp =
        a.max_disp >= 0 ? a.max_disp : static_cast<int>(std::ceil(manifest.d_max));

    auto eval_model = [&]() {
        auto ck = stdepth::load_checkpoint(a.ckpt);
        SD_FAIL_IF(ck.info.sign != manifest.sign,
                   "checkpoint uses sign " << ck.info.sign << " but the dataset uses "
                                           << manifest.sign);
        return stdepth::evaluate_model(ck.params, ck.info.arch, manifest, a.timing);
    };

    std::string json_out;
    if (a.compare) {
        const auto model = eval_model();
        const auto base = stdepth::evaluate_block_match(manifest, max_disp, a.window, a.timing);
        std::ostringstream table;
        table << std::left << std::setw(14) << "method" << std::right << std::setw(10)
              << "mean_ssi" << std::setw(10) << "std_ssi" << "\n";
        for (const auto* r : {&model, &base}) {
            table << std::left << std::setw(14) << r->method << std::right << std::fixed
                  << std::setprecision(4) << std::setw(10) << r->mean_ssim << std::setw(10)
                  << r->std_ssim << "\n";
        }
        std::cout << table.str();
        nlohmann::json combined;
        combined["model"] = nlohmann::json::parse(model.to_json());
        combined["baseline"] = nlohmann::json::parse(base.to_json());
        json_out = combined.dump(2) + "\n";
    } else {
        stdepth::EvalReport report;
        if (a.method == "model") {
            report = eval_model();
        } else if (a.method == "block-match") {
            report = stdepth::evaluate_block_match(manifest, max_disp, a.window, a.timing);
        } else {
            report = stdepth::evaluate_gt_oracle(manifest);
        }
        json_out = report.to_json();
        if (a.out.empty()) std::cout << json_out;
    }
    if (!a.out.empty()) stdepth::atomic_write_file(a.out, json_out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-supervised stereo depth estimation toolkit"};
    app.require_subcommand(1);

    GenArgs g;
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic stereo dataset");
    gen->add_option("--out", g.out, "output directory")->required();
    g.o_count = gen->add_option("--count", g.count, "number of samples");
    g.o_width = gen->add_option("--width", g.width, "image width (multiple of 32)");
    g.o_height = gen->add_option("--height", g.height, "image height (multiple of 32)");
    g.o_dmax = gen->add_option("--d-max", g.d_max, "disparity ceiling in pixels");
    g.o_sign = gen->add_option("--disp-sign", g.sign, "warp convention: +1 or -1");
    g.o_blur = gen->add_option("--blur-passes", g.blur_passes, "texture smoothing passes");
    g.o_seed = gen->add_option("--seed", g.seed, "generator seed");
    g.o_kinds = gen->add_option("--kind", g.kinds,
                                "disparity field (constant:<d> | ramp:<lo>:<hi> | boxes); "
                                "repeatable, cycled across samples");
    g.o_split = gen->add_option("--split", g.split, "manifest split tag");
    gen->add_option("--config", g.config, "JSON config file (flags override it)");

    TrainArgs t;
    auto* train = app.add_subcommand("train", "train a model on a generated dataset");
    train->add_option("--data", t.data, "dataset directory")->required();
    train->add_option("--out", t.out, "output directory for checkpoints and the loss log")
        ->required();
    t.o_arch = train->add_option("--arch", t.arch, "basic | siamese");
    t.o_scale = train->add_option("--scale", t.scale, "channel scale in (0,1]");
    t.o_epochs = train->add_option("--epochs", t.epochs, "epochs to run");
    t.o_steps = train->add_option("--steps", t.steps, "stop after this many total steps (0 = off)");
    t.o_batch = train->add_option("--batch", t.batch, "batch size (0 = arch default 25/16)");
    t.o_lr = train->add_option("--lr", t.lr, "base learning rate (halved every 5 epochs)");
    t.o_dmax = train->add_option("--d-max", t.d_max, "disparity ceiling (0 = 0.3*width)");
    t.o_al = train->add_option("--alpha-l", t.alpha_l, "left reconstruction weight");
    t.o_ar = train->add_option("--alpha-r", t.alpha_r, "right reconstruction weight");
    t.o_ac = train->add_option("--alpha-c", t.alpha_c, "consistency weight");
    t.o_seed = train->add_option("--seed", t.seed, "training seed (init + shuffles)");
    t.o_sign = train->add_option("--disp-sign", t.sign, "+1, -1, or 0 = dataset convention");
    t.o_resume = train->add_option("--resume", t.resume, "checkpoint to continue from");
    train->add_flag("--quiet", t.quiet, "suppress per-step progress lines");
    train->add_option("--config", t.config, "JSON config file (flags override it)");

    InferArgs inf;
    auto* infer = app.add_subcommand("infer", "predict a disparity map for one image");
    infer->add_option("--ckpt", inf.ckpt, "trained checkpoint")->required();
    infer->add_option("--image", inf.image, "input view (PPM)")->required();
    infer->add_option("--out", inf.out, "output 16-bit disparity PGM")->required();
    infer->add_option("--right", inf.right, "counterpart view, for --recon");
    infer->add_option("--recon", inf.recon, "write the reconstructed view here (PPM)");
    infer->add_option("--config", inf.config, "JSON config file (unused keys ignored)");

    EvalArgs e;
    auto* eval = app.add_subcommand("eval", "score a method on a dataset");
    eval->add_option("--data", e.data, "dataset directory")->required();
    eval->add_option("--ckpt", e.ckpt, "trained checkpoint (for --method model)");
    eval->add_option("--method", e.method, "model | block-match | gt-oracle");
    eval->add_option("--max-disp", e.max_disp, "block-match search range (default: d_max)");
    eval->add_option("--window", e.window, "block-match window (odd)");
    eval->add_flag("--compare", e.compare, "model vs block-match side by side");
    eval->add_flag("--timing", e.timing, "include wall-clock runtime in the report");
    eval->add_option("--out", e.out, "write the JSON report here instead of stdout");
    eval->add_option("--config", e.config, "JSON config file (flags override it)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 2;  // bad flags are a usage error
    }

    try {
        if (gen->parsed()) return run_gen(g);
        if (train->parsed()) return run_train(t);
        if (infer->parsed()) return run_infer(inf);
        if (eval->parsed()) return run_eval(e);
    } catch (const UsageError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}
