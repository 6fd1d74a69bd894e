#include "stdepth/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "stdepth/optim.hpp"
#include "stdepth/rng.hpp"

namespace stdepth {

namespace {

struct StepLoss {
    float total = 0;
    float l_l = 0;
    std::optional<float> l_r;
    std::optional<float> l_c;
};

std::string fmt(float v) {
    std::ostringstream oss;
    oss << std::setprecision(9) << v;
    return oss.str();
}

}  // namespace

TrainResult run_training(const TrainConfig& cfg, std::ostream* progress) {
    SD_REQUIRE(cfg.epochs >= 1, "train: epochs must be positive, got " << cfg.epochs);
    SD_REQUIRE(cfg.max_steps >= 0, "train: max_steps must be non-negative");
    SD_REQUIRE(cfg.base_lr > 0, "train: base_lr must be positive, got " << cfg.base_lr);
    SD_REQUIRE(!cfg.dataset_dir.empty(), "train: dataset directory not set");
    SD_REQUIRE(!cfg.out_dir.empty(), "train: output directory not set");

    const DatasetManifest manifest = load_manifest(cfg.dataset_dir);
    const int sign = cfg.sign != 0 ? cfg.sign : manifest.sign;
    SD_REQUIRE(sign == 1 || sign == -1, "train: sign must be +1 or -1, got " << sign);

    // All samples in memory ([3,H,W] pairs); sized for desk-scale datasets.
    std::vector<Tensor> lefts, rights;
    lefts.reserve(manifest.size());
    rights.reserve(manifest.size());
    for (size_t i = 0; i < manifest.size(); ++i) {
        StereoSample s = load_sample(manifest, i);
        lefts.push_back(std::move(s.left));
        rights.push_back(std::move(s.right));
    }
    const auto n_samples = manifest.size();
    const size_t batch = std::min<size_t>(static_cast<size_t>(cfg.effective_batch()), n_samples);
    const size_t steps_per_epoch = std::max<size_t>(1, n_samples / batch);

    std::filesystem::create_directories(cfg.out_dir);
    const auto out = [&](const std::string& name) {
        return (std::filesystem::path(cfg.out_dir) / name).string();
    };

    // Model + optimizer, fresh or resumed.
    NetworkParams params;
    AdamState opt;
    int64_t global_step = 0;
    const bool resuming = !cfg.resume.empty();
    if (resuming) {
        Checkpoint ck = load_checkpoint(cfg.resume);
        SD_FAIL_IF(ck.info.arch != cfg.arch,
                   "train: checkpoint " << cfg.resume << " was trained with --arch "
                                        << arch_name(ck.info.arch) << ", requested "
                                        << arch_name(cfg.arch));
        SD_FAIL_IF(ck.info.sign != sign, "train: checkpoint sign " << ck.info.sign
                                                                   << " != requested " << sign);
        params = std::move(ck.params);
        SD_FAIL_IF(!ck.opt.has_value(),
                   "train: checkpoint " << cfg.resume << " carries no optimizer state");
        opt = std::move(*ck.opt);
        global_step = opt.t;
    } else {
        params = build_network<float>(cfg.scale, cfg.seed, cfg.d_max);
        opt = AdamState::make(params.parameters());
    }
    const auto learnable = params.parameters();

    // The CSV is appended on resume so one file tells the full story.
    std::ofstream log(out("loss.csv"), resuming ? std::ios::app : std::ios::trunc);
    SD_FAIL_IF(!log, "train: cannot open " << out("loss.csv") << " for writing");
    if (!resuming) log << "step,epoch,lr,loss,l_l,l_r,l_c\n";

    TrainResult result;
    result.loss_log = out("loss.csv");

    const auto step_limit = [&] {
        return cfg.max_steps > 0 && global_step >= cfg.max_steps;
    };

    int epoch = static_cast<int>(global_step / static_cast<int64_t>(steps_per_epoch));
    for (; epoch < cfg.epochs && !step_limit(); ++epoch) {
        // Derived per-epoch shuffle: a resumed run replays the same batch
        // sequence an unbroken run would have seen.
        std::vector<size_t> order(n_samples);
        std::iota(order.begin(), order.end(), size_t{0});
        Rng shuffle_rng = Rng::derive(cfg.seed, 0x9000u + static_cast<uint64_t>(epoch));
        for (size_t i = n_samples; i > 1; --i) {
            const size_t j = static_cast<size_t>(shuffle_rng.below(i));
            std::swap(order[i - 1], order[j]);
        }

        const auto epoch_base = static_cast<int64_t>(epoch) * static_cast<int64_t>(steps_per_epoch);
        auto b = static_cast<size_t>(global_step - epoch_base);  // 0 unless resuming mid-epoch
        for (; b < steps_per_epoch && !step_limit(); ++b) {
            std::vector<Tensor> bl, br;
            bl.reserve(batch);
            br.reserve(batch);
            for (size_t k = 0; k < batch; ++k) {
                const size_t idx = order[(b * batch + k) % n_samples];
                bl.push_back(lefts[idx]);
                br.push_back(rights[idx]);
            }
            const Tensor left = stack_batch(bl);
            const Tensor right = stack_batch(br);

            const auto lr = static_cast<float>(lr_at(epoch, cfg.base_lr));
            StepLoss sl;
            {
                Tape tape;
                Tape::Scope scope(tape);
                Tensor total;
                if (cfg.arch == Arch::siamese) {
                    auto [d_l, d_r] = forward_siamese(params, left, right, BNMode::train, sign);
                    const Tensor recon_l = warp_horizontal(right, d_l);
                    const Tensor recon_r = warp_horizontal(left, d_r);
                    SiameseLossParts parts = siamese_loss_parts(left, right, recon_l, recon_r,
                                                                d_l, d_r, cfg.weights);
                    total = parts.total;
                    sl.l_l = parts.left.at(0);
                    sl.l_r = parts.right.at(0);
                    sl.l_c = parts.consistency.at(0);
                } else {
                    DisparityMap d_l = forward_basic(params, left, BNMode::train, sign);
                    const Tensor recon_l = warp_horizontal(right, d_l);
                    total = l1_reconstruction(left, recon_l);
                    sl.l_l = total.at(0);
                }
                sl.total = total.at(0);
                SD_FAIL_IF(!std::isfinite(sl.total),
                           "train: non-finite loss " << sl.total << " at step "
                                                     << global_step + 1 << " (epoch " << epoch
                                                     << ", lr " << lr
                                                     << "); lower the lr or check the data");
                backward(total);
            }
            adam_step(learnable, opt, lr);
            params.zero_grad();
            global_step += 1;

            log << global_step << ',' << epoch << ',' << lr << ',' << fmt(sl.total) << ','
                << fmt(sl.l_l) << ',' << (sl.l_r ? fmt(*sl.l_r) : "") << ','
                << (sl.l_c ? fmt(*sl.l_c) : "") << '\n';
            if (progress != nullptr) {
                *progress << "step " << global_step << " epoch " << epoch << " lr " << lr
                          << " loss " << sl.total << '\n';
            }

            if (result.steps == 0) result.initial_loss = sl.total;
            result.final_loss = sl.total;
            result.steps += 1;
        }
        log.flush();

        if (cfg.save_every_epoch && global_step == epoch_base + static_cast<int64_t>(steps_per_epoch)) {
            std::ostringstream name;
            name << "ckpt_epoch_" << std::setw(3) << std::setfill('0') << epoch + 1 << ".stdl";
            save_checkpoint(out(name.str()), params, {cfg.arch, sign, epoch + 1}, &opt);
        }
    }

    result.epochs_done = static_cast<int>(global_step / static_cast<int64_t>(steps_per_epoch));
    result.final_checkpoint = out("final.stdl");
    save_checkpoint(result.final_checkpoint, params, {cfg.arch, sign, result.epochs_done}, &opt);
    SD_FAIL_IF(result.steps == 0 && !resuming,
               "train: no steps executed (dataset smaller than one batch?)");
    return result;
}

}  // namespace stdepth
