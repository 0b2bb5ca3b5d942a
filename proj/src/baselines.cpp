#include "midgap/baselines.hpp"

#include "midgap/blender.hpp"

namespace midgap {

FrameSequence repeat_p(const ClipTriplet& clip) {
    FrameSequence out;
    for (int t = 0; t < clip.m(); ++t) out.frames.push_back(clip.preceding.frames.back());
    return out;
}

FrameSequence repeat_f(const ClipTriplet& clip) {
    FrameSequence out;
    for (int t = 0; t < clip.m(); ++t) out.frames.push_back(clip.following.frames.front());
    return out;
}

FrameSequence sa_pf(const ClipTriplet& clip) {
    Tensor mean_frame =
        scale(add(clip.preceding.frames.back(), clip.following.frames.front()), 0.5);
    FrameSequence out;
    for (int t = 0; t < clip.m(); ++t) out.frames.push_back(mean_frame);
    return out;
}

FrameSequence tw_pf(const ClipTriplet& clip) {
    const int p = clip.p(), m = clip.m();
    const Tensor& vp = clip.preceding.frames.back();
    const Tensor& vf = clip.following.frames.front();
    FrameSequence out;
    for (int t = p + 1; t <= p + m; ++t) {
        double w = scaled_time_step(t, p, m);
        out.frames.push_back(add(scale(vp, 1.0 - w), scale(vf, w)));
    }
    return out;
}

FrameSequence bi_sa(const PredictionBundle& bundle) {
    if (bundle.forward_frames.length() != bundle.backward_frames.length())
        throw ShapeError("bi_sa: bundle directions have different lengths");
    FrameSequence out;
    for (int t = 0; t < bundle.m(); ++t)
        out.frames.push_back(
            scale(add(bundle.forward_frames.frames[t], bundle.backward_frames.frames[t]), 0.5));
    return out;
}

FrameSequence bi_tw(const PredictionBundle& bundle, int p, int m) {
    if (bundle.forward_frames.length() != bundle.backward_frames.length())
        throw ShapeError("bi_tw: bundle directions have different lengths");
    if (bundle.m() != m) throw ShapeError("bi_tw: bundle length does not match m");
    FrameSequence out;
    for (int j = 0; j < m; ++j) {
        double w = scaled_time_step(p + 1 + j, p, m);
        out.frames.push_back(add(scale(bundle.forward_frames.frames[j], 1.0 - w),
                                 scale(bundle.backward_frames.frames[j], w)));
    }
    return out;
}

}  // namespace midgap
