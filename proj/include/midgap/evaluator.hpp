#pragma once
#include <string>
#include <vector>

#include "midgap/model.hpp"

namespace midgap {

struct MetricPoint {
    int t = 0;  // absolute timestep, p+1 .. p+m'
    double psnr = 0;
    double ssim = 0;
    long count = 0;
};

struct MetricSeries {
    std::string model;
    std::string dataset;
    std::vector<MetricPoint> points;
    // first evaluated window, for qualitative strips
    FrameSequence sample_truth;
    FrameSequence sample_pred;

    double mean_psnr() const;
    double mean_ssim() const;
};

struct EvalProtocol {
    int p = 3;
    int middle = 5;
    int f = 3;
    int stride = 5;
    int context = 0;  // 0: use all p/f frames; otherwise truncate to this many
    bool exclude_inf_psnr = false;
};

// Number of worker threads for per-clip evaluation; reads MIDGAP_THREADS,
// defaulting to 1.
int eval_threads();

// Runs the variant over every sliding window of every test video, clamps
// predictions to [0,1], and averages PSNR/SSIM per timestep. Weights are
// never mutated.
MetricSeries evaluate(const ModelSet& models, const std::vector<FrameSequence>& test_videos,
                      const EvalProtocol& proto);

struct ContextRow {
    int context;
    double mean_psnr;
    double mean_ssim;
};

// Re-evaluates the same model with 'context' preceding/following frames.
std::vector<ContextRow> context_sweep(const ModelSet& models,
                                      const std::vector<FrameSequence>& test_videos,
                                      EvalProtocol proto, const std::vector<int>& context_counts);

// Per-frame series for each middle-frame count; the scaled time grid follows
// the evaluated count.
std::vector<MetricSeries> middle_sweep(const ModelSet& models,
                                       const std::vector<FrameSequence>& test_videos,
                                       EvalProtocol proto, const std::vector<int>& middle_counts);

}  // namespace midgap
