#pragma once
#include <array>
#include <optional>

#include "midgap/layers.hpp"
#include "midgap/predictor.hpp"
#include "midgap/tensor.hpp"

namespace midgap {

// w_t = (t - p) / (m + 1) for absolute timestep t in [p+1, p+m], 1-indexed
double scaled_time_step(int t, int p, int m);

// Per-pixel separable blending kernels for both source directions. The 2D
// kernel at a pixel is the outer product of its vertical and horizontal
// columns; values are non-negative (ReLU heads).
struct SeparableKernelField {
    Tensor vert_p, horiz_p;  // k x H x W
    Tensor vert_f, horiz_f;
    Tensor time_channel;  // the injected w map; undefined for time-agnostic nets
    int kernel_size = 0;
};

struct BlenderSettings {
    bool time_aware = true;
    int act_channels = 64;     // per-direction deep activation channels
    int skip_mid_channels = 32;
    int skip_deep_channels = 64;
    int enc_a = 64;   // encoder 1 width
    int enc_b = 64;   // encoder 2 / decoder 4 width
    int head_c = 16;  // decoder 1 width and kernel-head hidden width
    int kernel_size = 5;
    int convs_per_block = 2;
};

// Kernel-generating encoder-decoder. The encoder consumes the concatenated
// deep activations of both directions; decoder 2 and decoder 1 take the
// element-wise sum of the upsampled previous output and the matching-
// resolution predictor activations of both directions. The scaled time step
// enters once, as an extra channel appended to the decoder 1 output. Each of
// the four heads emits one 1D kernel per pixel and upsamples to frame
// resolution after its final convolution.
class KernelBlender {
public:
    KernelBlender() = default;
    KernelBlender(const BlenderSettings& s, std::uint64_t seed);

    SeparableKernelField generate_kernels(const StepActivations& e_p, const StepActivations& e_f,
                                          std::optional<double> w) const;

    void collect(ParamMap& pm, const std::string& prefix) const;
    const BlenderSettings& settings() const { return settings_; }
    // (in, out) channel pairs of every conv, block by block, for audits
    std::vector<std::vector<std::pair<int, int>>> channel_plan() const;

private:
    BlenderSettings settings_;
    ConvBlock enc1_, enc2_, dec4_, dec3_, dec2_, dec1_;
    std::array<ConvBlock, 4> heads_;  // vert P, horiz P, vert F, horiz F
};

// One direction's term of the blend: per pixel, the outer-product kernel
// convolved with the replicate-padded patch of the source frame.
Tensor apply_kernels_single(const Tensor& vert, const Tensor& horiz, const Tensor& frame);

// Sum of both directions' terms.
Tensor apply_kernels(const SeparableKernelField& field, const Tensor& frame_p,
                     const Tensor& frame_f);

// Temporally-aware blend: kernels conditioned on activations and w.
Tensor tai_blend(const KernelBlender& net, const Tensor& pred_p, const StepActivations& e_p,
                 const Tensor& pred_f, const StepActivations& e_f, double w);

// Time-agnostic ablation: same pipeline without the time channel.
Tensor interp_blend(const KernelBlender& net, const Tensor& pred_p, const StepActivations& e_p,
                    const Tensor& pred_f, const StepActivations& e_f);

// Time-weighted ablation: time-agnostic kernels, then (1-w) / w weighting of
// the two convolution terms before summation.
Tensor twi_blend(const KernelBlender& net, const Tensor& pred_p, const StepActivations& e_p,
                 const Tensor& pred_f, const StepActivations& e_f, double w);

}  // namespace midgap
