#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "stdepth/checkpoint.hpp"
#include "stdepth/data.hpp"
#include "stdepth/loss.hpp"
#include "stdepth/net.hpp"

namespace stdepth {

struct TrainConfig {
    Arch arch = Arch::siamese;
    double scale = 0.125;
    int epochs = 40;
    int max_steps = 0;  // 0 = run all epochs; otherwise stop after this many steps
    int batch = 0;      // 0 = architecture default (25 basic, 16 siamese)
    double base_lr = 1e-4;
    float d_max = 0;  // 0 = 0.3 * image width
    LossWeights weights;
    uint64_t seed = 1;
    std::string dataset_dir;
    std::string out_dir;         // checkpoints + loss.csv
    std::string resume;          // checkpoint to continue from (optional)
    int sign = 0;                // 0 = take the dataset manifest's convention
    bool save_every_epoch = true;

    int effective_batch() const { return batch > 0 ? batch : (arch == Arch::basic ? 25 : 16); }
};

struct TrainResult {
    double initial_loss = 0;  // first step
    double final_loss = 0;    // last step
    int steps = 0;            // steps executed in this invocation
    int epochs_done = 0;      // total epochs completed (including resumed ones)
    std::string final_checkpoint;
    std::string loss_log;  // CSV path
};

// Runs the full loop: per-epoch shuffles derived from (seed, epoch) so a
// resumed run visits the same batches as an unbroken one; Adam with the
// halve-every-5-epochs schedule; per-step CSV rows (step, epoch, lr, loss,
// l_l, l_r, l_c — the last two empty for the basic architecture); a
// checkpoint (with optimizer state) per epoch plus final.stdl. A non-finite
// loss aborts with a diagnostic. `progress`, when non-null, receives one
// line per step.
TrainResult run_training(const TrainConfig& cfg, std::ostream* progress = nullptr);

}  // namespace stdepth
