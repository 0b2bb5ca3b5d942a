#pragma once
#include <cstdint>
#include <vector>

#include "midgap/data.hpp"
#include "midgap/layers.hpp"
#include "midgap/tensor.hpp"

namespace midgap {

struct PredictorSettings {
    int img_channels = 1;
    std::vector<int> enc_channels = {16, 32, 64};  // three levels, pooled after each
    int act_channels = 64;   // channels of the exposed deep activation (per direction)
    int convs_per_level = 1;
};

// Multi-resolution activations exposed for the blender: the projected deep
// feature at H/8 plus the raw encoder features at H/4 and H/8.
struct StepActivations {
    Tensor deep;       // act_channels @ H/8
    Tensor skip_mid;   // enc_channels[1] @ H/4
    Tensor skip_deep;  // enc_channels[2] @ H/8
};

struct PredictionResult {
    FrameSequence frames;
    std::vector<StepActivations> activations;
    int warmup_updates = 0;
    int generation_steps = 0;
};

struct PredictionBundle {
    FrameSequence forward_frames;
    FrameSequence backward_frames;
    std::vector<StepActivations> forward_acts;
    std::vector<StepActivations> backward_acts;
    int m() const { return forward_frames.length(); }
};

// Recurrent encoder-LSTM-decoder video predictor. One weight set serves both
// temporal directions; generation feeds each predicted frame back as the next
// input. Frames are produced through a tanh mapped into [0, 1].
class Predictor {
public:
    Predictor() = default;
    Predictor(const PredictorSettings& s, std::uint64_t seed);

    // Consumes the context frames (p-1 warmup state updates), then generates
    // m frames one at a time, capturing per-step activations.
    PredictionResult predict_forward(const FrameSequence& preceding, int m) const;
    // Runs predict_forward on the reversed following sequence and re-reverses
    // outputs and activations into forward time order.
    PredictionResult predict_backward(const FrameSequence& following, int m) const;

    void collect(ParamMap& pm, const std::string& prefix) const;
    const PredictorSettings& settings() const { return settings_; }

private:
    struct EncoderFeatures {
        Tensor level1;  // c1 @ H/2
        Tensor level2;  // c2 @ H/4
        Tensor level3;  // c3 @ H/8
    };
    EncoderFeatures encode(const Tensor& frame) const;
    Tensor decode(const Tensor& hidden, const EncoderFeatures& feats) const;

    PredictorSettings settings_;
    ConvBlock enc1_, enc2_, enc3_;
    Conv2dLayer act_proj_;  // 1x1, c3 -> act_channels
    ConvLSTMCell lstm_;
    Conv2dLayer dec3_, dec2_, dec1_, out_conv_;
    Conv2dLayer out_proj_;  // 1x1 -> img channels
};

PredictionBundle bidirectional_predict(const Predictor& model, const FrameSequence& preceding,
                                       const FrameSequence& following, int m);

}  // namespace midgap
