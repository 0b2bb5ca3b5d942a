#pragma once
#include <optional>

#include "midgap/blender.hpp"
#include "midgap/checkpoint.hpp"
#include "midgap/config.hpp"
#include "midgap/objectives.hpp"
#include "midgap/predictor.hpp"

namespace midgap {

// Architecture hyperparameters resolved from a config; the paper_faithful
// flag swaps in the reference channel plan (1024 -> 256 ..., 65 -> 64 -> 51).
PredictorSettings predictor_settings(const Config& cfg);
BlenderSettings blender_settings(const Config& cfg);
DiscriminatorSettings discriminator_settings(const Config& cfg);

struct ModelSet {
    Config cfg;
    Variant variant = Variant::TAI;
    std::optional<Predictor> predictor;
    std::optional<KernelBlender> blender;
    std::optional<Discriminator> disc;

    ParamMap generator_params() const;
    ParamMap discriminator_params() const;
};

ModelSet build_models(const Config& cfg);

// Runs the variant on one context pair, producing m_out middle frames.
// Trained variants must carry weights; hand-crafted ones ignore them.
FrameSequence predict_middle(const ModelSet& models, const FrameSequence& preceding,
                             const FrameSequence& following, int m_out);

// Full training state <-> checkpoint. Loading validates every shape against
// the freshly constructed models before any weight is copied.
Checkpoint pack_checkpoint(const ModelSet& models, const class Adam* opt_g, const Adam* opt_d,
                           long iteration, const std::string& rng_state);
void unpack_checkpoint(const Checkpoint& ck, ModelSet& models, Adam* opt_g, Adam* opt_d);

// FNV-1a over raw parameter bytes, in registry order
std::uint64_t param_hash(const ParamMap& pm);

}  // namespace midgap
