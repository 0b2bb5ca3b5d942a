#pragma once
#include <random>
#include <string>
#include <vector>

#include "midgap/model.hpp"

namespace midgap {

std::vector<FrameSequence> synthetic_videos(const Config& cfg, int count, int length,
                                            std::uint64_t seed_salt);
std::vector<FrameSequence> load_dataset(const Config& cfg, bool training);

// Alternating generator / discriminator training on sampled clips. Fully
// deterministic for a fixed config: the sampling stream, augmentation and
// every update are driven by one seeded generator.
class Trainer {
public:
    explicit Trainer(const Config& cfg);

    // Runs cfg.iters iterations; writes checkpoints and a loss trace under
    // out_dir when non-empty. Returns the per-iteration loss reports.
    std::vector<LossReport> run(const std::string& out_dir);

    LossReport train_iteration();

    ModelSet& models() { return models_; }
    Adam& generator_opt() { return opt_g_; }
    Adam& discriminator_opt() { return opt_d_; }
    long iteration() const { return iteration_; }
    std::string rng_state() const;
    Checkpoint checkpoint() const;

private:
    struct Sample {
        ClipTriplet clip;
    };
    Sample draw_sample();

    Config cfg_;
    ModelSet models_;
    std::vector<FrameSequence> train_videos_;
    Adam opt_g_, opt_d_;
    std::mt19937_64 rng_;
    long iteration_ = 0;
};

void write_loss_trace(const std::vector<LossReport>& trace, const std::string& path);

}  // namespace midgap
