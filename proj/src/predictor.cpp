#include "midgap/predictor.hpp"

namespace midgap {

namespace {

std::vector<int> repeat_last(int first, int count) {
    return std::vector<int>(count, first);
}

}  // namespace

Predictor::Predictor(const PredictorSettings& s, std::uint64_t seed) : settings_(s) {
    const int c1 = s.enc_channels.at(0), c2 = s.enc_channels.at(1), c3 = s.enc_channels.at(2);
    enc1_ = ConvBlock(s.img_channels, repeat_last(c1, s.convs_per_level), Resample::MaxPool,
                      mix_seed(seed, 1));
    enc2_ = ConvBlock(c1, repeat_last(c2, s.convs_per_level), Resample::MaxPool, mix_seed(seed, 2));
    enc3_ = ConvBlock(c2, repeat_last(c3, s.convs_per_level), Resample::MaxPool, mix_seed(seed, 3));
    act_proj_ = Conv2dLayer(c3, s.act_channels, 1, mix_seed(seed, 4));
    lstm_ = ConvLSTMCell(c3, c3, mix_seed(seed, 5));
    dec3_ = Conv2dLayer(c3, c3, 3, mix_seed(seed, 6));
    dec2_ = Conv2dLayer(c3, c2, 3, mix_seed(seed, 7));
    dec1_ = Conv2dLayer(c2, c1, 3, mix_seed(seed, 8));
    out_conv_ = Conv2dLayer(c1, c1, 3, mix_seed(seed, 9));
    out_proj_ = Conv2dLayer(c1, s.img_channels, 1, mix_seed(seed, 10));
}

Predictor::EncoderFeatures Predictor::encode(const Tensor& frame) const {
    EncoderFeatures f;
    f.level1 = enc1_.forward(frame);
    f.level2 = enc2_.forward(f.level1);
    f.level3 = enc3_.forward(f.level2);
    return f;
}

Tensor Predictor::decode(const Tensor& hidden, const EncoderFeatures& feats) const {
    Tensor d3 = relu(dec3_.forward(hidden));                                  // c3 @ H/8
    Tensor d2 = add(relu(dec2_.forward(bilinear_upsample2(d3))), feats.level2);  // c2 @ H/4
    Tensor d1 = add(relu(dec1_.forward(bilinear_upsample2(d2))), feats.level1);  // c1 @ H/2
    // the head stays linear: a relu here tends to die on mostly-dark targets
    Tensor head = out_conv_.forward(bilinear_upsample2(d1));  // c1 @ H
    Tensor raw = out_proj_.forward(head);
    return scale(add(tanh(raw), Tensor::scalar(1.0)), 0.5);  // map into [0, 1]
}

PredictionResult Predictor::predict_forward(const FrameSequence& preceding, int m) const {
    if (preceding.length() < 1) throw InputError("predictor needs at least one context frame");
    if (m < 1) throw InputError("predictor asked for zero frames");
    const int h = preceding.height(), w = preceding.width();
    if (h % 8 || w % 8) throw ShapeError("predictor requires frame extents divisible by 8");

    PredictionResult result;
    ConvLSTMState state = lstm_.zero_state(h / 8, w / 8);
    for (int t = 0; t + 1 < preceding.length(); ++t) {
        EncoderFeatures feats = encode(preceding.frames[t]);
        state = lstm_.step(feats.level3, state).second;
        ++result.warmup_updates;
    }
    Tensor current = preceding.frames.back();
    for (int j = 0; j < m; ++j) {
        EncoderFeatures feats = encode(current);
        auto [hidden, next_state] = lstm_.step(feats.level3, state);
        state = next_state;
        Tensor frame = decode(hidden, feats);
        result.frames.frames.push_back(frame);
        result.activations.push_back(
            {relu(act_proj_.forward(hidden)), feats.level2, feats.level3});
        current = frame;
        ++result.generation_steps;
    }
    return result;
}

PredictionResult Predictor::predict_backward(const FrameSequence& following, int m) const {
    PredictionResult r = predict_forward(following.reversed(), m);
    PredictionResult out;
    out.frames = r.frames.reversed();
    out.activations.assign(r.activations.rbegin(), r.activations.rend());
    out.warmup_updates = r.warmup_updates;
    out.generation_steps = r.generation_steps;
    return out;
}

void Predictor::collect(ParamMap& pm, const std::string& prefix) const {
    enc1_.collect(pm, prefix + ".enc1");
    enc2_.collect(pm, prefix + ".enc2");
    enc3_.collect(pm, prefix + ".enc3");
    act_proj_.collect(pm, prefix + ".act_proj");
    lstm_.collect(pm, prefix + ".lstm");
    dec3_.collect(pm, prefix + ".dec3");
    dec2_.collect(pm, prefix + ".dec2");
    dec1_.collect(pm, prefix + ".dec1");
    out_conv_.collect(pm, prefix + ".out_conv");
    out_proj_.collect(pm, prefix + ".out_proj");
}

PredictionBundle bidirectional_predict(const Predictor& model, const FrameSequence& preceding,
                                       const FrameSequence& following, int m) {
    if (preceding.length() < 1 || following.length() < 1)
        throw InputError("bidirectional prediction needs context on both sides");
    PredictionResult fwd = model.predict_forward(preceding, m);
    PredictionResult bwd = model.predict_backward(following, m);
    PredictionBundle bundle;
    bundle.forward_frames = std::move(fwd.frames);
    bundle.backward_frames = std::move(bwd.frames);
    bundle.forward_acts = std::move(fwd.activations);
    bundle.backward_acts = std::move(bwd.activations);
    return bundle;
}

}  // namespace midgap
