#include "midgap/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "midgap/baselines.hpp"

namespace midgap {

std::vector<FrameSequence> synthetic_videos(const Config& cfg, int count, int length,
                                            std::uint64_t seed_salt) {
    std::vector<FrameSequence> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        SceneSpec spec = random_scene(cfg.canvas, cfg.canvas, cfg.frame_channels, cfg.objects_min,
                                      cfg.objects_max, cfg.speed_min, cfg.speed_max,
                                      mix_seed(cfg.data_seed + seed_salt, i), cfg.background);
        out.push_back(generate_clip(spec, length));
    }
    return out;
}

std::vector<FrameSequence> load_dataset(const Config& cfg, bool training) {
    if (cfg.data == "synthetic") {
        if (training) return synthetic_videos(cfg, cfg.train_videos, cfg.video_length, 0);
        return synthetic_videos(cfg, cfg.test_videos, cfg.test_video_length, 0x5eed);
    }
    std::string manifest = cfg.data;
    std::filesystem::path base(manifest);
    std::vector<FrameSequence> out;
    for (const auto& dir : load_manifest(manifest)) {
        std::filesystem::path d(dir);
        if (d.is_relative()) d = base.parent_path() / d;
        out.push_back(load_frame_dir(d.string()));
    }
    if (out.empty()) throw DataError("dataset manifest lists no clips: " + manifest);
    return out;
}

Trainer::Trainer(const Config& cfg)
    : cfg_(cfg),
      models_(build_models(cfg)),
      train_videos_(variant_is_trained(models_.variant) ? load_dataset(cfg, true)
                                                        : std::vector<FrameSequence>{}),
      rng_(cfg.seed) {
    if (!variant_is_trained(models_.variant))
        throw ConfigError("variant " + cfg.variant + " is hand-crafted and not trainable");
    if (train_videos_.empty()) throw DataError("training dataset is empty");
    int window = cfg.p + cfg.m + cfg.f;
    for (const auto& v : train_videos_)
        if (v.length() < window)
            throw DataError("training video shorter than p+m+f window");
    AdamSettings as{cfg.lr, cfg.adam_beta1, cfg.adam_beta2, 1e-8};
    std::vector<Tensor> gp, dp;
    for (auto& [n, t] : models_.generator_params().items) gp.push_back(t);
    for (auto& [n, t] : models_.discriminator_params().items) dp.push_back(t);
    opt_g_ = Adam(std::move(gp), as);
    opt_d_ = Adam(std::move(dp), as);
}

Trainer::Sample Trainer::draw_sample() {
    int video = std::uniform_int_distribution<int>(0, static_cast<int>(train_videos_.size()) - 1)(
        rng_);
    const FrameSequence& v = train_videos_[video];
    int window = cfg_.p + cfg_.m + cfg_.f;
    int start = std::uniform_int_distribution<int>(0, v.length() - window)(rng_);
    ClipTriplet clip = split_clip(v.slice(start, window), cfg_.p, cfg_.m, cfg_.f);
    return {augment(clip, rng_())};
}

LossReport Trainer::train_iteration() {
    const double inv_batch = 1.0 / cfg_.batch;
    const bool forward_only = models_.variant == Variant::ForwardOnly;

    std::vector<Sample> batch;
    for (int b = 0; b < cfg_.batch; ++b) batch.push_back(draw_sample());

    LossReport report;
    std::vector<FrameSequence> fakes;  // detached finals for the D step

    // generator update
    {
        Graph tape;
        Tensor total;
        for (int b = 0; b < cfg_.batch; ++b) {
            const ClipTriplet& clip = batch[b].clip;
            std::optional<FrameSequence> fwd, bwd;
            FrameSequence final_pred;
            if (forward_only) {
                fwd = models_.predictor->predict_forward(clip.preceding, cfg_.m).frames;
                final_pred = *fwd;
                fwd.reset();  // single image term; the final IS the forward prediction
            } else {
                PredictionBundle bundle =
                    bidirectional_predict(*models_.predictor, clip.preceding, clip.following,
                                          cfg_.m);
                switch (models_.variant) {
                    case Variant::BiSA: final_pred = bi_sa(bundle); break;
                    case Variant::BiTW: final_pred = bi_tw(bundle, cfg_.p, cfg_.m); break;
                    case Variant::TAI:
                    case Variant::TWI: {
                        for (int j = 0; j < cfg_.m; ++j) {
                            double w = scaled_time_step(cfg_.p + 1 + j, cfg_.p, cfg_.m);
                            Tensor frame =
                                models_.variant == Variant::TAI
                                    ? tai_blend(*models_.blender,
                                                bundle.forward_frames.frames[j],
                                                bundle.forward_acts[j],
                                                bundle.backward_frames.frames[j],
                                                bundle.backward_acts[j], w)
                                    : twi_blend(*models_.blender,
                                                bundle.forward_frames.frames[j],
                                                bundle.forward_acts[j],
                                                bundle.backward_frames.frames[j],
                                                bundle.backward_acts[j], w);
                            final_pred.frames.push_back(frame);
                        }
                        break;
                    }
                    default: throw ConfigError("unhandled trained variant");
                }
                fwd = bundle.forward_frames;
                bwd = bundle.backward_frames;
            }
            Tensor d_fake =
                models_.disc->forward(clip.preceding, final_pred, clip.following, cfg_.power_iters);
            GeneratorLoss gl = generator_loss(fwd, bwd, final_pred, clip.middle, d_fake,
                                              cfg_.alpha, cfg_.beta);
            total = b == 0 ? gl.total : add(total, gl.total);
            report.l2 += gl.report.l2 * inv_batch;
            report.gdl += gl.report.gdl * inv_batch;
            report.img_forward += gl.report.img_forward * inv_batch;
            report.img_backward += gl.report.img_backward * inv_batch;
            report.img_final += gl.report.img_final * inv_batch;
            report.gan += gl.report.gan * inv_batch;

            if (!cfg_.fresh_fake) {
                FrameSequence detached;
                for (const auto& fr : final_pred.frames)
                    detached.frames.push_back(Tensor::from(fr.shape(), fr.values()));
                fakes.push_back(std::move(detached));
            }
        }
        total = scale(total, inv_batch);
        report.total_g = total.item();
        if (!std::isfinite(report.total_g)) throw TrainingDiverged(iteration_);
        tape.backward(total);
        opt_g_.step();
        opt_g_.zero_grads();
        opt_d_.zero_grads();  // the adversarial term also reaches D's weights
    }

    // discriminator update(s)
    for (int ds = 0; ds < cfg_.d_steps; ++ds) {
        if (cfg_.fresh_fake || ds > 0) {
            fakes.clear();
            NoGradScope off;
            for (int b = 0; b < cfg_.batch; ++b)
                fakes.push_back(predict_middle(models_, batch[b].clip.preceding,
                                               batch[b].clip.following, cfg_.m));
        }
        Graph tape;
        Tensor total;
        for (int b = 0; b < cfg_.batch; ++b) {
            const ClipTriplet& clip = batch[b].clip;
            Tensor d_real =
                models_.disc->forward(clip.preceding, clip.middle, clip.following,
                                      cfg_.power_iters);
            Tensor d_fake =
                models_.disc->forward(clip.preceding, fakes[b], clip.following, cfg_.power_iters);
            Tensor loss = discriminator_loss(d_real, d_fake);
            total = b == 0 ? loss : add(total, loss);
        }
        total = scale(total, inv_batch);
        report.total_d = total.item();
        if (!std::isfinite(report.total_d)) throw TrainingDiverged(iteration_);
        tape.backward(total);
        opt_d_.step();
        opt_d_.zero_grads();
        opt_g_.zero_grads();
    }

    ++iteration_;
    return report;
}

std::string Trainer::rng_state() const {
    std::ostringstream os;
    os << rng_;
    return os.str();
}

Checkpoint Trainer::checkpoint() const {
    return pack_checkpoint(models_, &opt_g_, &opt_d_, iteration_, rng_state());
}

std::vector<LossReport> Trainer::run(const std::string& out_dir) {
    namespace fs = std::filesystem;
    if (!out_dir.empty()) fs::create_directories(out_dir);
    std::vector<LossReport> trace;
    trace.reserve(cfg_.iters);
    for (long i = 0; i < cfg_.iters; ++i) {
        trace.push_back(train_iteration());
        if (!out_dir.empty() && cfg_.checkpoint_every > 0 &&
            iteration_ % cfg_.checkpoint_every == 0)
            save_checkpoint(checkpoint(),
                            (fs::path(out_dir) / ("ckpt_" + std::to_string(iteration_) + ".mgp"))
                                .string());
    }
    if (!out_dir.empty()) {
        save_checkpoint(checkpoint(), (fs::path(out_dir) / "final.mgp").string());
        write_loss_trace(trace, (fs::path(out_dir) / "train_log.csv").string());
    }
    return trace;
}

void write_loss_trace(const std::vector<LossReport>& trace, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path);
    os << "iter,l2,gdl,img_forward,img_backward,img_final,gan,total_g,total_d\n";
    char line[512];
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const LossReport& r = trace[i];
        std::snprintf(line, sizeof(line),
                      "%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", i + 1, r.l2, r.gdl,
                      r.img_forward, r.img_backward, r.img_final, r.gan, r.total_g, r.total_d);
        os << line;
    }
}

}  // namespace midgap
