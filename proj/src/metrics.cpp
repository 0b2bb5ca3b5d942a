#include "midgap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace midgap {

double psnr(const Tensor& pred, const Tensor& truth) {
    if (pred.shape() != truth.shape()) throw ShapeError("psnr: shape mismatch");
    const auto& a = pred.values();
    const auto& b = truth.values();
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

namespace {

std::vector<double> gaussian_window(int n, double sigma) {
    std::vector<double> w(n);
    double c = (n - 1) / 2.0;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        w[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
        total += w[i];
    }
    for (double& v : w) v /= total;
    return w;
}

double ssim_plane(const double* a, const double* b, int h, int w) {
    int win = 11;
    if (std::min(h, w) < win) {
        win = std::min(h, w);
        if (win % 2 == 0) --win;
    }
    if (win < 1) throw ShapeError("ssim: empty frame");
    const std::vector<double> g1 = gaussian_window(win, 1.5);
    // separable 2D window weights
    const double c1 = 0.01 * 0.01;  // (K1 L)^2
    const double c2 = 0.03 * 0.03;  // (K2 L)^2
    double total = 0.0;
    long count = 0;
    for (int y = 0; y + win <= h; ++y) {
        for (int x = 0; x + win <= w; ++x) {
            double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
            for (int i = 0; i < win; ++i) {
                for (int j = 0; j < win; ++j) {
                    double wt = g1[i] * g1[j];
                    double va = a[static_cast<long>(y + i) * w + (x + j)];
                    double vb = b[static_cast<long>(y + i) * w + (x + j)];
                    mu_a += wt * va;
                    mu_b += wt * vb;
                    aa += wt * va * va;
                    bb += wt * vb * vb;
                    ab += wt * va * vb;
                }
            }
            double var_a = aa - mu_a * mu_a;
            double var_b = bb - mu_b * mu_b;
            double cov = ab - mu_a * mu_b;
            double s = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                       ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            total += s;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

}  // namespace

double ssim(const Tensor& pred, const Tensor& truth) {
    if (pred.shape() != truth.shape()) throw ShapeError("ssim: shape mismatch");
    const int c = pred.shape()[0], h = pred.shape()[1], w = pred.shape()[2];
    double total = 0.0;
    for (int ch = 0; ch < c; ++ch)
        total += ssim_plane(pred.values().data() + static_cast<long>(ch) * h * w,
                            truth.values().data() + static_cast<long>(ch) * h * w, h, w);
    return total / c;
}

Tensor clamp01_frame(const Tensor& frame) {
    std::vector<double> v = frame.values();
    for (double& x : v) x = std::clamp(x, 0.0, 1.0);
    return Tensor::from(frame.shape(), std::move(v));
}

}  // namespace midgap
