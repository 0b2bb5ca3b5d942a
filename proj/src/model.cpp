#include "midgap/model.hpp"

#include "midgap/baselines.hpp"

namespace midgap {

PredictorSettings predictor_settings(const Config& cfg) {
    PredictorSettings s;
    s.img_channels = cfg.frame_channels;
    if (cfg.paper_faithful) {
        s.enc_channels = {64, 128, 256};
        s.act_channels = 512;  // concatenated pair feeds the 1024-channel encoder
        s.convs_per_level = 1;
    } else {
        if (cfg.channels_pred.size() != 3)
            throw ConfigError("channels_pred needs exactly three values");
        s.enc_channels = cfg.channels_pred;
        s.act_channels = cfg.act_channels;
        s.convs_per_level = cfg.pred_convs;
    }
    return s;
}

BlenderSettings blender_settings(const Config& cfg) {
    BlenderSettings s;
    PredictorSettings ps = predictor_settings(cfg);
    s.act_channels = ps.act_channels;
    s.skip_mid_channels = ps.enc_channels[1];
    s.skip_deep_channels = ps.enc_channels[2];
    s.time_aware = variant_from_string(cfg.variant) != Variant::TWI;
    if (cfg.paper_faithful) {
        s.enc_a = 256;
        s.enc_b = 512;
        s.head_c = 64;
        s.kernel_size = 51;
        s.convs_per_block = 3;
    } else {
        if (cfg.channels_blend.size() != 3)
            throw ConfigError("channels_blend needs exactly three values");
        s.enc_a = cfg.channels_blend[0];
        s.enc_b = cfg.channels_blend[1];
        s.head_c = cfg.channels_blend[2];
        s.kernel_size = cfg.kernel_size;
        s.convs_per_block = cfg.blend_convs;
    }
    return s;
}

DiscriminatorSettings discriminator_settings(const Config& cfg) {
    DiscriminatorSettings s;
    s.frame_channels = cfg.frame_channels;
    s.total_frames = cfg.p + cfg.m + cfg.f;
    s.height = cfg.canvas;
    s.width = cfg.canvas;
    s.channels = cfg.channels_disc;
    s.lipschitz = cfg.sn_lipschitz;
    return s;
}

ModelSet build_models(const Config& cfg) {
    ModelSet ms;
    ms.cfg = cfg;
    ms.variant = variant_from_string(cfg.variant);
    if (!variant_is_trained(ms.variant)) return ms;
    std::uint64_t seed = cfg.seed;
    ms.predictor.emplace(predictor_settings(cfg), mix_seed(seed, 101));
    if (variant_needs_blender(ms.variant))
        ms.blender.emplace(blender_settings(cfg), mix_seed(seed, 202));
    ms.disc.emplace(discriminator_settings(cfg), mix_seed(seed, 303));
    return ms;
}

ParamMap ModelSet::generator_params() const {
    ParamMap pm;
    if (predictor) predictor->collect(pm, "pred");
    if (blender) blender->collect(pm, "blend");
    return pm;
}

ParamMap ModelSet::discriminator_params() const {
    ParamMap pm;
    if (disc) disc->collect(pm, "disc");
    return pm;
}

FrameSequence predict_middle(const ModelSet& models, const FrameSequence& preceding,
                             const FrameSequence& following, int m_out) {
    const int p = preceding.length();
    switch (models.variant) {
        case Variant::RepeatP:
        case Variant::RepeatF:
        case Variant::SaPF:
        case Variant::TwPF: {
            // hand-crafted forms only need v_p and v_{p+m+1}; build a shell
            // triplet with placeholder middle frames
            ClipTriplet shell;
            shell.preceding = preceding;
            shell.following = following;
            for (int t = 0; t < m_out; ++t)
                shell.middle.frames.push_back(preceding.frames.back());
            switch (models.variant) {
                case Variant::RepeatP: return repeat_p(shell);
                case Variant::RepeatF: return repeat_f(shell);
                case Variant::SaPF: return sa_pf(shell);
                default: return tw_pf(shell);
            }
        }
        case Variant::ForwardOnly: {
            if (!models.predictor) throw ConfigError("variant needs a trained predictor");
            return models.predictor->predict_forward(preceding, m_out).frames;
        }
        default: break;
    }
    if (!models.predictor) throw ConfigError("variant needs a trained predictor");
    PredictionBundle bundle = bidirectional_predict(*models.predictor, preceding, following, m_out);
    switch (models.variant) {
        case Variant::BiSA: return bi_sa(bundle);
        case Variant::BiTW: return bi_tw(bundle, p, m_out);
        case Variant::TAI:
        case Variant::TWI: {
            if (!models.blender) throw ConfigError("variant needs a trained blender");
            FrameSequence out;
            for (int j = 0; j < m_out; ++j) {
                double w = scaled_time_step(p + 1 + j, p, m_out);
                Tensor frame =
                    models.variant == Variant::TAI
                        ? tai_blend(*models.blender, bundle.forward_frames.frames[j],
                                    bundle.forward_acts[j], bundle.backward_frames.frames[j],
                                    bundle.backward_acts[j], w)
                        : twi_blend(*models.blender, bundle.forward_frames.frames[j],
                                    bundle.forward_acts[j], bundle.backward_frames.frames[j],
                                    bundle.backward_acts[j], w);
                out.frames.push_back(frame);
            }
            return out;
        }
        default: throw ConfigError("unhandled variant");
    }
}

// ---------------------------------------------------------------- checkpoints

namespace {

void append_optimizer(Checkpoint& ck, const std::string& prefix, const Adam& opt,
                      const ParamMap& pm) {
    const auto& m = const_cast<Adam&>(opt).moment1();
    const auto& v = const_cast<Adam&>(opt).moment2();
    for (std::size_t i = 0; i < pm.items.size(); ++i) {
        const auto& [name, t] = pm.items[i];
        ck.tensors.emplace_back(prefix + ".m." + name, Tensor::from(t.shape(), m[i]));
        ck.tensors.emplace_back(prefix + ".v." + name, Tensor::from(t.shape(), v[i]));
    }
    ck.tensors.emplace_back(prefix + ".t",
                            Tensor::scalar(static_cast<double>(opt.step_count())));
}

}  // namespace

Checkpoint pack_checkpoint(const ModelSet& models, const Adam* opt_g, const Adam* opt_d,
                           long iteration, const std::string& rng_state) {
    Checkpoint ck;
    ck.config = models.cfg;
    ck.iteration = iteration;
    ck.rng_state = rng_state;
    ParamMap gp = models.generator_params();
    ParamMap dp = models.discriminator_params();
    for (const auto& [name, t] : gp.items) ck.tensors.emplace_back(name, t);
    for (const auto& [name, t] : dp.items) ck.tensors.emplace_back(name, t);
    if (models.disc) {
        auto& sn = const_cast<Discriminator&>(*models.disc).spectral_layers();
        for (std::size_t i = 0; i < sn.size(); ++i)
            ck.tensors.emplace_back(
                "disc.sn_u." + std::to_string(i),
                Tensor::from({static_cast<int>(sn[i].u.size())}, sn[i].u));
    }
    if (opt_g) append_optimizer(ck, "adam_g", *opt_g, gp);
    if (opt_d) append_optimizer(ck, "adam_d", *opt_d, dp);
    return ck;
}

namespace {

struct PendingCopy {
    Tensor dst;
    Tensor src;
};

void stage_params(const Checkpoint& ck, const ParamMap& pm, std::vector<PendingCopy>& plan) {
    for (const auto& [name, t] : pm.items) {
        Tensor src = ck.find(name);
        if (src.shape() != t.shape())
            throw ConfigError("checkpoint tensor " + name + " has shape " +
                              shape_str(src.shape()) + ", model expects " + shape_str(t.shape()));
        plan.push_back({t, src});
    }
}

void check_optimizer_shapes(const Checkpoint& ck, const std::string& prefix, const ParamMap& pm) {
    for (const auto& [name, t] : pm.items) {
        for (const char* part : {".m.", ".v."}) {
            Tensor src = ck.find(prefix + part + name);
            if (src.shape() != t.shape())
                throw ConfigError("checkpoint optimizer state " + prefix + part + name +
                                  " has mismatched shape");
        }
    }
    ck.find(prefix + ".t");
}

}  // namespace

void unpack_checkpoint(const Checkpoint& ck, ModelSet& models, Adam* opt_g, Adam* opt_d) {
    ParamMap gp = models.generator_params();
    ParamMap dp = models.discriminator_params();
    std::vector<PendingCopy> plan;
    stage_params(ck, gp, plan);
    stage_params(ck, dp, plan);
    if (opt_g) check_optimizer_shapes(ck, "adam_g", gp);
    if (opt_d) check_optimizer_shapes(ck, "adam_d", dp);
    // all shapes validated; now apply
    for (auto& c : plan) c.dst.values_mut() = c.src.values();
    if (models.disc) {
        auto& sn = models.disc->spectral_layers();
        for (std::size_t i = 0; i < sn.size(); ++i) {
            std::string name = "disc.sn_u." + std::to_string(i);
            if (ck.has(name)) sn[i].u = ck.find(name).values();
        }
    }
    auto load_opt = [&](const std::string& prefix, Adam& opt, const ParamMap& pm) {
        auto& m = opt.moment1();
        auto& v = opt.moment2();
        for (std::size_t i = 0; i < pm.items.size(); ++i) {
            m[i] = ck.find(prefix + ".m." + pm.items[i].first).values();
            v[i] = ck.find(prefix + ".v." + pm.items[i].first).values();
        }
        opt.set_step_count(static_cast<long>(ck.find(prefix + ".t").item()));
    };
    if (opt_g) load_opt("adam_g", *opt_g, gp);
    if (opt_d) load_opt("adam_d", *opt_d, dp);
}

std::uint64_t param_hash(const ParamMap& pm) {
    std::uint64_t h = 1469598103934665603ULL;
    auto feed = [&h](const void* data, std::size_t n) {
        const unsigned char* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    };
    for (const auto& [name, t] : pm.items) {
        feed(name.data(), name.size());
        feed(t.values().data(), t.values().size() * sizeof(double));
    }
    return h;
}

}  // namespace midgap
