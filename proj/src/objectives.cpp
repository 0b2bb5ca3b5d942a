#include "midgap/objectives.hpp"

#include <cmath>

namespace midgap {

Tensor l2_loss(const FrameSequence& pred, const FrameSequence& truth) {
    if (pred.length() != truth.length()) throw ShapeError("l2_loss: sequence length mismatch");
    if (pred.length() == 0) throw ShapeError("l2_loss: empty sequences");
    Tensor total;
    for (int t = 0; t < pred.length(); ++t) {
        if (pred.frames[t].shape() != truth.frames[t].shape())
            throw ShapeError("l2_loss: frame shape mismatch at t=" + std::to_string(t));
        Tensor term = sum_sq(sub(pred.frames[t], truth.frames[t]));
        total = t == 0 ? term : add(total, term);
    }
    return total;
}

Tensor gradient_difference(const Tensor& pred, const Tensor& truth) {
    if (pred.shape() != truth.shape()) throw ShapeError("gradient_difference: shape mismatch");
    if (pred.shape().size() != 3) throw ShapeError("gradient_difference: frames must be CxHxW");
    const int c = pred.shape()[0], h = pred.shape()[1], w = pred.shape()[2];

    const double* pv = pred.values().data();
    const double* tv = truth.values().data();
    auto at = [w, h](const double* base, int ch, int y, int x) {
        return base[(static_cast<long>(ch) * h + y) * w + x];
    };
    double loss = 0.0;
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (y >= 1) {
                    double dt = std::abs(at(tv, ch, y, x) - at(tv, ch, y - 1, x));
                    double dp = std::abs(at(pv, ch, y, x) - at(pv, ch, y - 1, x));
                    loss += std::abs(dt - dp);
                }
                if (x >= 1) {
                    double dt = std::abs(at(tv, ch, y, x - 1) - at(tv, ch, y, x));
                    double dp = std::abs(at(pv, ch, y, x - 1) - at(pv, ch, y, x));
                    loss += std::abs(dt - dp);
                }
            }
        }
    }
    Tensor out = Tensor::scalar(loss);
    Tensor p_t = pred, t_t = truth;
    detail::record_op({pred, truth}, out, [p_t, t_t, out, c, h, w]() mutable {
        double g = out.grad()[0];
        const double* pv = p_t.values().data();
        const double* tv = t_t.values().data();
        auto at = [w, h](const double* base, int ch, int y, int x) {
            return base[(static_cast<long>(ch) * h + y) * w + x];
        };
        auto sgn = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
        // contribution of one directed difference pair to each operand:
        // d/dq |  |dt| - |dq|  | = -sgn(|dt| - |dq|) * sgn(dq) on the two pixels
        auto accum = [&](Tensor& dst, bool is_pred, int ch, int ya, int xa, int yb, int xb) {
            if (!dst.requires_grad()) return;
            const double* self = is_pred ? pv : tv;
            const double* other = is_pred ? tv : pv;
            double ds = at(self, ch, ya, xa) - at(self, ch, yb, xb);
            double dother = at(other, ch, ya, xa) - at(other, ch, yb, xb);
            double outer = sgn(std::abs(ds) - std::abs(dother));
            double inner = sgn(ds);
            auto& gr = dst.grad_mut();
            gr[(static_cast<long>(ch) * h + ya) * w + xa] += g * outer * inner;
            gr[(static_cast<long>(ch) * h + yb) * w + xb] -= g * outer * inner;
        };
        for (int ch = 0; ch < c; ++ch) {
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    if (y >= 1) {
                        accum(p_t, true, ch, y, x, y - 1, x);
                        accum(t_t, false, ch, y, x, y - 1, x);
                    }
                    if (x >= 1) {
                        accum(p_t, true, ch, y, x - 1, y, x);
                        accum(t_t, false, ch, y, x - 1, y, x);
                    }
                }
            }
        }
    });
    return out;
}

Tensor gdl_loss(const FrameSequence& pred, const FrameSequence& truth) {
    if (pred.length() != truth.length()) throw ShapeError("gdl_loss: sequence length mismatch");
    if (pred.length() == 0) throw ShapeError("gdl_loss: empty sequences");
    Tensor total;
    for (int t = 0; t < pred.length(); ++t) {
        Tensor term = gradient_difference(pred.frames[t], truth.frames[t]);
        total = t == 0 ? term : add(total, term);
    }
    return total;
}

Tensor image_loss(const FrameSequence& pred, const FrameSequence& truth) {
    return add(l2_loss(pred, truth), gdl_loss(pred, truth));
}

GeneratorLoss generator_loss(const std::optional<FrameSequence>& pred_forward,
                             const std::optional<FrameSequence>& pred_backward,
                             const FrameSequence& pred_final, const FrameSequence& truth,
                             const Tensor& d_out_fake, double alpha, double beta) {
    if (alpha < 0 || beta < 0) throw RangeError("loss weights must be non-negative");
    GeneratorLoss out;

    Tensor l2_final = l2_loss(pred_final, truth);
    Tensor gdl_final = gdl_loss(pred_final, truth);
    Tensor img_final = add(l2_final, gdl_final);
    Tensor img_sum = img_final;
    if (pred_forward) {
        Tensor t = image_loss(*pred_forward, truth);
        out.report.img_forward = t.item();
        img_sum = add(img_sum, t);
    }
    if (pred_backward) {
        Tensor t = image_loss(*pred_backward, truth);
        out.report.img_backward = t.item();
        img_sum = add(img_sum, t);
    }
    out.gan = neg(log(clamp_min(d_out_fake, 1e-8)));
    out.total = add(scale(img_sum, alpha), scale(out.gan, beta));

    out.report.l2 = l2_final.item();
    out.report.gdl = gdl_final.item();
    out.report.img_final = img_final.item();
    out.report.gan = out.gan.item();
    out.report.total_g = out.total.item();
    return out;
}

Tensor discriminator_loss(const Tensor& d_real, const Tensor& d_fake) {
    Tensor one = Tensor::scalar(1.0);
    Tensor term_real = neg(log(clamp_min(d_real, 1e-8)));
    Tensor term_fake = neg(log(clamp_min(sub(one, d_fake), 1e-8)));
    return add(term_real, term_fake);
}

// ---------------------------------------------------------------- discriminator

Discriminator::Discriminator(const DiscriminatorSettings& s, std::uint64_t seed) : settings_(s) {
    int c_in = s.frame_channels * s.total_frames;
    int h = s.height, w = s.width;
    for (std::size_t i = 0; i < s.channels.size(); ++i) {
        int c_out = s.channels[i];
        Tensor raw = xavier_init({c_out, c_in, 3, 3}, c_in * 9, c_out * 9, mix_seed(seed, i));
        sn_.emplace_back(std::move(raw), s.lipschitz);
        biases_.push_back(zero_bias(c_out));
        c_in = c_out;
        h = (h + 1) / 2;
        w = (w + 1) / 2;
    }
    flat_features_ = c_in * h * w;
    Tensor lin = uniform_linear_init({1, flat_features_, 1, 1}, mix_seed(seed, 100));
    sn_.emplace_back(std::move(lin), s.lipschitz);
    biases_.push_back(zero_bias(1));
}

Tensor Discriminator::forward(const FrameSequence& preceding, const FrameSequence& middle,
                              const FrameSequence& following, int power_iters) {
    std::vector<Tensor> stack;
    for (const auto& f : preceding.frames) stack.push_back(f);
    for (const auto& f : middle.frames) stack.push_back(f);
    for (const auto& f : following.frames) stack.push_back(f);
    if (static_cast<int>(stack.size()) != settings_.total_frames)
        throw ShapeError("discriminator expects " + std::to_string(settings_.total_frames) +
                         " stacked frames, got " + std::to_string(stack.size()));
    Tensor x = concat_channels(stack);
    std::size_t n_convs = sn_.size() - 1;
    for (std::size_t i = 0; i < n_convs; ++i) {
        Tensor w_eff = sn_[i].effective(power_iters);
        x = relu(subsample2(conv2d(x, w_eff, biases_[i], 1)));
    }
    Tensor flat = reshape(x, {flat_features_, 1, 1});
    Tensor logit = conv2d(flat, sn_.back().effective(power_iters), biases_.back(), 0);
    return sigmoid(reshape(logit, {1}));
}

void Discriminator::collect(ParamMap& pm, const std::string& prefix) const {
    for (std::size_t i = 0; i < sn_.size(); ++i) {
        std::string name = i + 1 == sn_.size() ? ".linear" : ".conv" + std::to_string(i);
        pm.add(prefix + name + ".w", sn_[i].raw);
        pm.add(prefix + name + ".b", biases_[i]);
    }
}

std::vector<std::vector<double>*> Discriminator::power_iteration_state() {
    std::vector<std::vector<double>*> out;
    for (auto& s : sn_) out.push_back(&s.u);
    return out;
}

}  // namespace midgap
