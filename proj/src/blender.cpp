#include "midgap/blender.hpp"

#include <algorithm>
#include <cmath>

namespace midgap {

double scaled_time_step(int t, int p, int m) {
    if (t < p + 1 || t > p + m)
        throw RangeError("scaled time step: t=" + std::to_string(t) + " outside [p+1, p+m]");
    return static_cast<double>(t - p) / static_cast<double>(m + 1);
}

namespace {

std::vector<int> block_widths(int width, int count) { return std::vector<int>(count, width); }

}  // namespace

KernelBlender::KernelBlender(const BlenderSettings& s, std::uint64_t seed) : settings_(s) {
    const int n = s.convs_per_block;
    enc1_ = ConvBlock(2 * s.act_channels, block_widths(s.enc_a, n), Resample::MaxPool,
                      mix_seed(seed, 1));
    enc2_ = ConvBlock(s.enc_a, block_widths(s.enc_b, n), Resample::MaxPool, mix_seed(seed, 2));
    dec4_ = ConvBlock(s.enc_b, block_widths(s.enc_b, n), Resample::Upsample, mix_seed(seed, 3));
    dec3_ = ConvBlock(s.enc_b, block_widths(s.skip_deep_channels, n), Resample::Upsample,
                      mix_seed(seed, 4));
    dec2_ = ConvBlock(s.skip_deep_channels, block_widths(s.skip_mid_channels, n),
                      Resample::Upsample, mix_seed(seed, 5));
    dec1_ = ConvBlock(s.skip_mid_channels, block_widths(s.head_c, n), Resample::Upsample,
                      mix_seed(seed, 6));
    int head_in = s.head_c + (s.time_aware ? 1 : 0);
    for (int i = 0; i < 4; ++i) {
        std::vector<int> chain = block_widths(s.head_c, n);
        chain.back() = s.kernel_size;
        heads_[i] = ConvBlock(head_in, chain, Resample::Upsample, mix_seed(seed, 7 + i));
    }
}

SeparableKernelField KernelBlender::generate_kernels(const StepActivations& e_p,
                                                     const StepActivations& e_f,
                                                     std::optional<double> w) const {
    if (e_p.deep.shape() != e_f.deep.shape())
        throw ShapeError("blender: forward/backward activations misaligned");
    if (settings_.time_aware != w.has_value())
        throw InputError(settings_.time_aware ? "time-aware blender needs a scaled time step"
                                              : "time-agnostic blender takes no time step");

    Tensor x = concat_channels({e_p.deep, e_f.deep});
    Tensor e1 = enc1_.forward(x);
    Tensor e2 = enc2_.forward(e1);
    Tensor d4 = dec4_.forward(e2);
    Tensor d3 = dec3_.forward(d4);  // skip_deep channels @ H/8 after upsample
    Tensor r2 = add(d3, add(e_p.skip_deep, e_f.skip_deep));
    Tensor d2 = dec2_.forward(r2);  // skip_mid channels @ H/4
    Tensor r1 = add(d2, add(e_p.skip_mid, e_f.skip_mid));
    Tensor d1 = dec1_.forward(r1);  // head_c @ H/2

    SeparableKernelField field;
    field.kernel_size = settings_.kernel_size;
    Tensor head_in = d1;
    if (settings_.time_aware) {
        field.time_channel =
            Tensor::param({1, d1.shape()[1], d1.shape()[2]},
                          std::vector<double>(static_cast<long>(d1.shape()[1]) * d1.shape()[2], *w));
        head_in = concat_channels({d1, field.time_channel});
    }
    field.vert_p = heads_[0].forward(head_in);
    field.horiz_p = heads_[1].forward(head_in);
    field.vert_f = heads_[2].forward(head_in);
    field.horiz_f = heads_[3].forward(head_in);
    return field;
}

void KernelBlender::collect(ParamMap& pm, const std::string& prefix) const {
    enc1_.collect(pm, prefix + ".enc1");
    enc2_.collect(pm, prefix + ".enc2");
    dec4_.collect(pm, prefix + ".dec4");
    dec3_.collect(pm, prefix + ".dec3");
    dec2_.collect(pm, prefix + ".dec2");
    dec1_.collect(pm, prefix + ".dec1");
    static const char* head_names[4] = {".head_vp", ".head_hp", ".head_vf", ".head_hf"};
    for (int i = 0; i < 4; ++i) heads_[i].collect(pm, prefix + head_names[i]);
}

std::vector<std::vector<std::pair<int, int>>> KernelBlender::channel_plan() const {
    std::vector<std::vector<std::pair<int, int>>> plan;
    for (const ConvBlock* b : {&enc1_, &enc2_, &dec4_, &dec3_, &dec2_, &dec1_})
        plan.push_back(b->channel_chain());
    for (const auto& h : heads_) plan.push_back(h.channel_chain());
    return plan;
}

// ------------------------------------------------------- kernel application

Tensor apply_kernels_single(const Tensor& vert, const Tensor& horiz, const Tensor& frame) {
    if (vert.shape() != horiz.shape()) throw ShapeError("kernel tensors must share shape");
    const int k = vert.shape()[0];
    const int c = frame.shape()[0], h = frame.shape()[1], w = frame.shape()[2];
    if (vert.shape()[1] != h || vert.shape()[2] != w)
        throw ShapeError("kernel field resolution " + shape_str(vert.shape()) +
                         " does not match frame " + shape_str(frame.shape()));
    const int r = (k - 1) / 2;

    auto clampi = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };

    std::vector<double> out(frame.size(), 0.0);
    {
        const double* kv = vert.values().data();
        const double* kh = horiz.values().data();
        const double* fv = frame.values().data();
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                long pix = static_cast<long>(y) * w + x;
                for (int ch = 0; ch < c; ++ch) {
                    const double* plane = fv + static_cast<long>(ch) * h * w;
                    double acc = 0.0;
                    for (int i = 0; i < k; ++i) {
                        int sy = clampi(y + i - r, h - 1);
                        double kvi = kv[static_cast<long>(i) * h * w + pix];
                        double row = 0.0;
                        for (int j = 0; j < k; ++j) {
                            int sx = clampi(x + j - r, w - 1);
                            row += kh[static_cast<long>(j) * h * w + pix] *
                                   plane[static_cast<long>(sy) * w + sx];
                        }
                        acc += kvi * row;
                    }
                    out[static_cast<long>(ch) * h * w + pix] = acc;
                }
            }
        }
    }
    Tensor result = Tensor::from(frame.shape(), std::move(out));
    Tensor v_t = vert, h_t = horiz, f_t = frame;
    detail::record_op({vert, horiz, frame}, result, [v_t, h_t, f_t, result, k, c, h, w,
                                                     r]() mutable {
        auto clampi = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
        const auto& g = result.grad();
        const double* kv = v_t.values().data();
        const double* kh = h_t.values().data();
        const double* fv = f_t.values().data();
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                long pix = static_cast<long>(y) * w + x;
                for (int ch = 0; ch < c; ++ch) {
                    const double* plane = fv + static_cast<long>(ch) * h * w;
                    double gv = g[static_cast<long>(ch) * h * w + pix];
                    if (gv == 0.0) continue;
                    for (int i = 0; i < k; ++i) {
                        int sy = clampi(y + i - r, h - 1);
                        double kvi = kv[static_cast<long>(i) * h * w + pix];
                        for (int j = 0; j < k; ++j) {
                            int sx = clampi(x + j - r, w - 1);
                            double khj = kh[static_cast<long>(j) * h * w + pix];
                            double pixel = plane[static_cast<long>(sy) * w + sx];
                            if (v_t.requires_grad())
                                v_t.grad_mut()[static_cast<long>(i) * h * w + pix] +=
                                    gv * khj * pixel;
                            if (h_t.requires_grad())
                                h_t.grad_mut()[static_cast<long>(j) * h * w + pix] +=
                                    gv * kvi * pixel;
                            if (f_t.requires_grad())
                                f_t.grad_mut()[(static_cast<long>(ch) * h + sy) * w + sx] +=
                                    gv * kvi * khj;
                        }
                    }
                }
            }
        }
    });
    return result;
}

Tensor apply_kernels(const SeparableKernelField& field, const Tensor& frame_p,
                     const Tensor& frame_f) {
    if (frame_p.shape() != frame_f.shape()) throw ShapeError("source frames must share shape");
    return add(apply_kernels_single(field.vert_p, field.horiz_p, frame_p),
               apply_kernels_single(field.vert_f, field.horiz_f, frame_f));
}

// ------------------------------------------------------- blend entry points

Tensor tai_blend(const KernelBlender& net, const Tensor& pred_p, const StepActivations& e_p,
                 const Tensor& pred_f, const StepActivations& e_f, double w) {
    SeparableKernelField field = net.generate_kernels(e_p, e_f, w);
    return apply_kernels(field, pred_p, pred_f);
}

Tensor interp_blend(const KernelBlender& net, const Tensor& pred_p, const StepActivations& e_p,
                    const Tensor& pred_f, const StepActivations& e_f) {
    SeparableKernelField field = net.generate_kernels(e_p, e_f, std::nullopt);
    return apply_kernels(field, pred_p, pred_f);
}

Tensor twi_blend(const KernelBlender& net, const Tensor& pred_p, const StepActivations& e_p,
                 const Tensor& pred_f, const StepActivations& e_f, double w) {
    SeparableKernelField field = net.generate_kernels(e_p, e_f, std::nullopt);
    Tensor term_p = apply_kernels_single(field.vert_p, field.horiz_p, pred_p);
    Tensor term_f = apply_kernels_single(field.vert_f, field.horiz_f, pred_f);
    return add(scale(term_p, 1.0 - w), scale(term_f, w));
}

}  // namespace midgap
