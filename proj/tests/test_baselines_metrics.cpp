#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "midgap/baselines.hpp"
#include "midgap/blender.hpp"
#include "midgap/metrics.hpp"

using namespace midgap;

namespace {

Tensor random_frame(Shape shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    long n = numel(shape);
    std::vector<double> v(n);
    for (long i = 0; i < n; ++i) v[i] = dist(rng);
    return Tensor::from(std::move(shape), std::move(v));
}

ClipTriplet random_clip(int p, int m, int f, std::uint64_t seed, Shape shape = {1, 4, 4}) {
    ClipTriplet clip;
    int t = 0;
    for (int i = 0; i < p; ++i) clip.preceding.frames.push_back(random_frame(shape, seed + t++));
    for (int i = 0; i < m; ++i) clip.middle.frames.push_back(random_frame(shape, seed + t++));
    for (int i = 0; i < f; ++i) clip.following.frames.push_back(random_frame(shape, seed + t++));
    return clip;
}

PredictionBundle scalar_bundle(std::vector<double> fwd, std::vector<double> bwd) {
    PredictionBundle b;
    for (double v : fwd) b.forward_frames.frames.push_back(Tensor::full({1, 1, 1}, v));
    for (double v : bwd) b.backward_frames.frames.push_back(Tensor::full({1, 1, 1}, v));
    return b;
}

// independent windowed-formula SSIM with uniform handling written from the
// metric definition: gaussian weights, valid windows, standard constants
double ssim_oracle(const Tensor& a, const Tensor& b) {
    int c = a.shape()[0], h = a.shape()[1], w = a.shape()[2];
    int win = std::min({11, h, w});
    if (win % 2 == 0) --win;
    std::vector<double> g(win);
    double centre = (win - 1) / 2.0, norm = 0;
    for (int i = 0; i < win; ++i) {
        g[i] = std::exp(-(i - centre) * (i - centre) / (2 * 1.5 * 1.5));
        norm += g[i];
    }
    for (double& v : g) v /= norm;
    double c1 = 0.0001, c2 = 0.0009;
    double accum = 0;
    for (int ch = 0; ch < c; ++ch) {
        double total = 0;
        long count = 0;
        for (int y = 0; y + win <= h; ++y)
            for (int x = 0; x + win <= w; ++x) {
                double ma = 0, mb = 0, va = 0, vb = 0, cov = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        double wt = g[i] * g[j];
                        double pa = a.values()[(static_cast<long>(ch) * h + y + i) * w + x + j];
                        double pb = b.values()[(static_cast<long>(ch) * h + y + i) * w + x + j];
                        ma += wt * pa;
                        mb += wt * pb;
                        va += wt * pa * pa;
                        vb += wt * pb * pb;
                        cov += wt * pa * pb;
                    }
                va -= ma * ma;
                vb -= mb * mb;
                cov -= ma * mb;
                total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                         ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++count;
            }
        accum += total / count;
    }
    return accum / c;
}

}  // namespace

TEST_CASE("repeat baselines copy the boundary frames") {
    ClipTriplet clip = random_clip(3, 3, 3, 1);
    FrameSequence rp = repeat_p(clip);
    REQUIRE(rp.length() == 3);
    for (int t = 0; t < 3; ++t)
        CHECK(rp.frames[t].values() == clip.preceding.frames.back().values());
    FrameSequence rf = repeat_f(clip);
    for (int t = 0; t < 3; ++t)
        CHECK(rf.frames[t].values() == clip.following.frames.front().values());
}

TEST_CASE("repeat_p and repeat_f agree exactly when v_p equals v_f") {
    ClipTriplet clip = random_clip(2, 3, 2, 2);
    clip.following.frames[0] = clip.preceding.frames.back();
    FrameSequence rp = repeat_p(clip), rf = repeat_f(clip);
    for (int t = 0; t < 3; ++t) CHECK(rp.frames[t].values() == rf.frames[t].values());
}

TEST_CASE("sa baseline averages the boundary frames") {
    ClipTriplet clip = random_clip(2, 4, 2, 3);
    std::fill(clip.preceding.frames.back().values_mut().begin(),
              clip.preceding.frames.back().values_mut().end(), 0.0);
    std::fill(clip.following.frames.front().values_mut().begin(),
              clip.following.frames.front().values_mut().end(), 1.0);
    FrameSequence sa = sa_pf(clip);
    REQUIRE(sa.length() == 4);
    for (int t = 0; t < 4; ++t)
        for (double v : sa.frames[t].values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
    // equal boundary frames reduce sa to repeat_p
    clip.following.frames[0] = clip.preceding.frames.back();
    FrameSequence sa2 = sa_pf(clip);
    FrameSequence rp = repeat_p(clip);
    for (int t = 0; t < 4; ++t)
        for (long i = 0; i < sa2.frames[t].size(); ++i)
            CHECK(sa2.frames[t].values()[i] == doctest::Approx(rp.frames[t].values()[i]));
}

TEST_CASE("tw baseline interpolates with the scaled time steps") {
    ClipTriplet clip = random_clip(1, 3, 1, 4, {1, 1, 1});
    clip.preceding.frames.back().values_mut()[0] = 0.0;
    clip.following.frames.front().values_mut()[0] = 1.0;
    FrameSequence tw = tw_pf(clip);
    REQUIRE(tw.length() == 3);
    CHECK(tw.frames[0].values()[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(tw.frames[1].values()[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(tw.frames[2].values()[0] == doctest::Approx(0.75).epsilon(1e-15));

    // constant boundaries give a constant output
    ClipTriplet flat = random_clip(1, 3, 1, 5);
    flat.following.frames[0] = flat.preceding.frames.back();
    FrameSequence twf = tw_pf(flat);
    for (int t = 0; t < 3; ++t)
        CHECK(twf.frames[t].values() == flat.preceding.frames.back().values());
}

TEST_CASE("tw equals sa exactly at the midpoint step") {
    // odd m has a true middle step with w = 0.5
    ClipTriplet clip = random_clip(2, 5, 2, 6);
    FrameSequence tw = tw_pf(clip);
    FrameSequence sa = sa_pf(clip);
    for (long i = 0; i < tw.frames[2].size(); ++i)
        CHECK(tw.frames[2].values()[i] == doctest::Approx(sa.frames[2].values()[i]).epsilon(1e-15));
}

TEST_CASE("bi_sa and bi_tw scalar cases") {
    PredictionBundle b = scalar_bundle({0.2, 0.2, 0.2}, {0.6, 0.6, 0.6});
    FrameSequence sa = bi_sa(b);
    for (int t = 0; t < 3; ++t) CHECK(sa.frames[t].values()[0] == doctest::Approx(0.4));
    // p=3, m=3: w = 1/4, 2/4, 3/4
    FrameSequence tw = bi_tw(b, 3, 3);
    CHECK(tw.frames[0].values()[0] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(tw.frames[1].values()[0] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(tw.frames[2].values()[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("bi_tw at the midpoint equals bi_sa bitwise") {
    PredictionBundle b;
    for (int t = 0; t < 5; ++t) {
        b.forward_frames.frames.push_back(random_frame({1, 3, 3}, 700 + t));
        b.backward_frames.frames.push_back(random_frame({1, 3, 3}, 800 + t));
    }
    FrameSequence tw = bi_tw(b, 4, 5);  // middle index 2 has w = 3/6 = 0.5
    FrameSequence sa = bi_sa(b);
    CHECK(tw.frames[2].values() == sa.frames[2].values());
}

TEST_CASE("handcrafted baselines verify against one-line formulas bitwise") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        ClipTriplet clip = random_clip(3, 4, 3, 1000 + 31 * seed);
        const auto& vp = clip.preceding.frames.back().values();
        const auto& vf = clip.following.frames.front().values();
        FrameSequence rp = repeat_p(clip), rf = repeat_f(clip), sa = sa_pf(clip),
                      tw = tw_pf(clip);
        for (int t = 0; t < 4; ++t) {
            double w = (t + 1) / 5.0;
            for (std::size_t i = 0; i < vp.size(); ++i) {
                CHECK(rp.frames[t].values()[i] == vp[i]);
                CHECK(rf.frames[t].values()[i] == vf[i]);
                CHECK(sa.frames[t].values()[i] == (vp[i] + vf[i]) / 2.0);
                CHECK(tw.frames[t].values()[i] == (1.0 - w) * vp[i] + w * vf[i]);
            }
        }
    }
}

TEST_CASE("psnr formula, sentinel and monotonicity") {
    Tensor a = Tensor::zeros({1, 10, 10});
    Tensor b = Tensor::full({1, 10, 10}, 0.1);  // MSE = 0.01
    CHECK(psnr(b, a) == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(std::isinf(psnr(a, a)));

    Tensor c = Tensor::full({1, 10, 10}, 0.2);  // larger MSE, lower PSNR
    CHECK(psnr(c, a) < psnr(b, a));

    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Tensor x = random_frame({1, 6, 6}, 900 + seed);
        Tensor y = random_frame({1, 6, 6}, 950 + seed);
        double mse = 0;
        for (long i = 0; i < x.size(); ++i) {
            double d = x.values()[i] - y.values()[i];
            mse += d * d;
        }
        mse /= x.size();
        CHECK(psnr(x, y) == doctest::Approx(10 * std::log10(1 / mse)).epsilon(1e-10));
    }
}

TEST_CASE("ssim is one on identical frames") {
    Tensor x = random_frame({1, 16, 16}, 11);
    CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ssim is negative for inverted structure") {
    // zero-mean checkerboard contrast pattern around 0.5
    std::vector<double> v(16 * 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) v[y * 16 + x] = ((x + y) & 1) ? 0.9 : 0.1;
    Tensor a = Tensor::from({1, 16, 16}, v);
    for (double& p : v) p = 1.0 - p;
    Tensor b = Tensor::from({1, 16, 16}, std::move(v));
    CHECK(ssim(a, b) < 0.0);
}

TEST_CASE("ssim matches the independent windowed oracle") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        Tensor x = random_frame({1, 14, 13}, 500 + seed);
        Tensor y = random_frame({1, 14, 13}, 600 + seed);
        CHECK(ssim(x, y) == doctest::Approx(ssim_oracle(x, y)).epsilon(1e-10));
    }
    // color: per-channel mean
    Tensor xc = random_frame({3, 12, 12}, 70);
    Tensor yc = random_frame({3, 12, 12}, 71);
    CHECK(ssim(xc, yc) == doctest::Approx(ssim_oracle(xc, yc)).epsilon(1e-10));
}

TEST_CASE("small frames fall back to the largest odd window") {
    Tensor x = random_frame({1, 7, 9}, 80);
    Tensor y = random_frame({1, 7, 9}, 81);
    CHECK(std::isfinite(ssim(x, y)));
    CHECK(ssim(x, y) == doctest::Approx(ssim_oracle(x, y)).epsilon(1e-10));
    CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("static clip: tw, sa and repeat_p coincide and are perfect") {
    ClipTriplet clip = random_clip(3, 3, 3, 90);
    Tensor still = random_frame({1, 4, 4}, 91);
    for (auto& f : clip.preceding.frames) f = still;
    for (auto& f : clip.middle.frames) f = still;
    for (auto& f : clip.following.frames) f = still;
    FrameSequence rp = repeat_p(clip), sa = sa_pf(clip), tw = tw_pf(clip);
    for (int t = 0; t < 3; ++t) {
        CHECK(rp.frames[t].values() == still.values());
        CHECK(sa.frames[t].values() == still.values());
        CHECK(tw.frames[t].values() == still.values());
        CHECK(std::isinf(psnr(rp.frames[t], clip.middle.frames[t])));
        CHECK(ssim(rp.frames[t], clip.middle.frames[t]) == doctest::Approx(1.0));
    }
}

TEST_CASE("metric clamp passes through in-range frames") {
    Tensor x = Tensor::from({1, 2, 2}, {-0.5, 0.3, 1.7, 1.0});
    Tensor c = clamp01_frame(x);
    CHECK(c.values() == std::vector<double>{0.0, 0.3, 1.0, 1.0});
}
