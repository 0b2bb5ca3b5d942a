#include "midgap/evaluator.hpp"

#include <omp.h>

#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include "midgap/metrics.hpp"

namespace midgap {

double MetricSeries::mean_psnr() const {
    double s = 0;
    for (const auto& p : points) s += p.psnr;
    return points.empty() ? 0 : s / points.size();
}

double MetricSeries::mean_ssim() const {
    double s = 0;
    for (const auto& p : points) s += p.ssim;
    return points.empty() ? 0 : s / points.size();
}

int eval_threads() {
    const char* env = std::getenv("MIDGAP_THREADS");
    if (!env) return 1;
    int n = std::atoi(env);
    return n > 0 ? n : 1;
}

namespace {

struct WindowScores {
    std::vector<double> psnr, ssim;  // per middle timestep
};

WindowScores score_window(const ModelSet& models, const ClipTriplet& window, int context) {
    FrameSequence preceding = window.preceding;
    FrameSequence following = window.following;
    if (context > 0) {
        if (context > window.p() || context > window.f())
            throw RangeError("context " + std::to_string(context) +
                             " exceeds available frames in the window");
        preceding = preceding.slice(window.p() - context, context);  // last `context` frames
        following = following.slice(0, context);                     // first `context` frames
    }
    NoGradScope off;
    FrameSequence pred = predict_middle(models, preceding, following, window.m());
    WindowScores ws;
    for (int j = 0; j < window.m(); ++j) {
        Tensor clamped = clamp01_frame(pred.frames[j]);
        ws.psnr.push_back(psnr(clamped, window.middle.frames[j]));
        ws.ssim.push_back(ssim(clamped, window.middle.frames[j]));
    }
    return ws;
}

}  // namespace

MetricSeries evaluate(const ModelSet& models, const std::vector<FrameSequence>& test_videos,
                      const EvalProtocol& proto) {
    if (proto.middle < 1) throw RangeError("evaluation needs at least one middle frame");
    std::vector<ClipTriplet> windows;
    for (const auto& video : test_videos)
        for (auto& w : make_test_windows(video, proto.p, proto.middle, proto.f, proto.stride))
            windows.push_back(std::move(w));

    std::vector<WindowScores> scores(windows.size());
    int threads = std::min<int>(eval_threads(), static_cast<int>(windows.size()));
    if (threads <= 1) {
        for (std::size_t i = 0; i < windows.size(); ++i)
            scores[i] = score_window(models, windows[i], proto.context);
    } else {
        // static partition; results identical to the sequential order
        std::vector<std::thread> pool;
        std::size_t chunk = (windows.size() + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            std::size_t lo = t * chunk, hi = std::min(windows.size(), lo + chunk);
            pool.emplace_back([&, lo, hi]() {
                omp_set_num_threads(1);  // clip-level parallelism only
                for (std::size_t i = lo; i < hi; ++i)
                    scores[i] = score_window(models, windows[i], proto.context);
            });
        }
        for (auto& th : pool) th.join();
    }

    MetricSeries series;
    series.model = models.cfg.variant;
    series.dataset = models.cfg.data;
    for (int j = 0; j < proto.middle; ++j) {
        MetricPoint pt;
        pt.t = proto.p + 1 + j;
        double psnr_sum = 0, ssim_sum = 0;
        long psnr_n = 0;
        for (const auto& s : scores) {
            if (std::isinf(s.psnr[j])) {
                if (!proto.exclude_inf_psnr) {
                    psnr_sum = std::numeric_limits<double>::infinity();
                    ++psnr_n;
                }
            } else {
                psnr_sum += s.psnr[j];
                ++psnr_n;
            }
            ssim_sum += s.ssim[j];
        }
        pt.psnr = psnr_n ? psnr_sum / psnr_n : 0.0;
        pt.ssim = scores.empty() ? 0.0 : ssim_sum / static_cast<double>(scores.size());
        pt.count = static_cast<long>(scores.size());
        series.points.push_back(pt);
    }
    if (!windows.empty()) {
        series.sample_truth = windows[0].middle;
        NoGradScope off;
        FrameSequence preceding = windows[0].preceding;
        FrameSequence following = windows[0].following;
        if (proto.context > 0) {
            preceding = preceding.slice(windows[0].p() - proto.context, proto.context);
            following = following.slice(0, proto.context);
        }
        FrameSequence pred = predict_middle(models, preceding, following, windows[0].m());
        for (auto& fr : pred.frames) series.sample_pred.frames.push_back(clamp01_frame(fr));
    }
    return series;
}

std::vector<ContextRow> context_sweep(const ModelSet& models,
                                      const std::vector<FrameSequence>& test_videos,
                                      EvalProtocol proto, const std::vector<int>& context_counts) {
    std::vector<ContextRow> rows;
    for (int c : context_counts) {
        if (c > proto.p || c > proto.f)
            throw RangeError("context " + std::to_string(c) + " exceeds window p/f");
        EvalProtocol pr = proto;
        pr.context = c;
        MetricSeries s = evaluate(models, test_videos, pr);
        rows.push_back({c, s.mean_psnr(), s.mean_ssim()});
    }
    return rows;
}

std::vector<MetricSeries> middle_sweep(const ModelSet& models,
                                       const std::vector<FrameSequence>& test_videos,
                                       EvalProtocol proto, const std::vector<int>& middle_counts) {
    std::vector<MetricSeries> out;
    for (int m : middle_counts) {
        EvalProtocol pr = proto;
        pr.middle = m;
        pr.stride = proto.stride;
        out.push_back(evaluate(models, test_videos, pr));
        out.back().model += "_m" + std::to_string(m);
    }
    return out;
}

}  // namespace midgap
