#pragma once
#include "midgap/data.hpp"
#include "midgap/predictor.hpp"

namespace midgap {

// Hand-crafted inpainting functions built from the last preceding frame v_p
// and the first following frame v_{p+m+1}. The middle length is taken from
// the triplet.
FrameSequence repeat_p(const ClipTriplet& clip);
FrameSequence repeat_f(const ClipTriplet& clip);
FrameSequence sa_pf(const ClipTriplet& clip);
FrameSequence tw_pf(const ClipTriplet& clip);

// Blends of the bidirectional predictions: simple average and scaled-time
// weighted average. Differentiable when the bundle carries gradients.
FrameSequence bi_sa(const PredictionBundle& bundle);
FrameSequence bi_tw(const PredictionBundle& bundle, int p, int m);

}  // namespace midgap
