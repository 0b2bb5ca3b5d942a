#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "midgap/gradcheck.hpp"
#include "midgap/layers.hpp"

using namespace midgap;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    long n = numel(shape);
    std::vector<double> v(n);
    for (long i = 0; i < n; ++i) v[i] = dist(rng);
    return Tensor::from(std::move(shape), std::move(v));
}

// dense symmetric Jacobi eigensolver on A^T A; returns the largest singular
// value of A (independent oracle for the power iteration)
double svd_max_oracle(const std::vector<double>& a, int rows, int cols) {
    std::vector<double> m(static_cast<long>(cols) * cols, 0.0);
    for (int i = 0; i < cols; ++i)
        for (int j = 0; j < cols; ++j) {
            double s = 0;
            for (int r = 0; r < rows; ++r)
                s += a[static_cast<long>(r) * cols + i] * a[static_cast<long>(r) * cols + j];
            m[static_cast<long>(i) * cols + j] = s;
        }
    auto at = [&](int i, int j) -> double& { return m[static_cast<long>(i) * cols + j]; };
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (int i = 0; i < cols; ++i)
            for (int j = i + 1; j < cols; ++j) off += at(i, j) * at(i, j);
        if (off < 1e-24) break;
        for (int p = 0; p < cols; ++p)
            for (int q = p + 1; q < cols; ++q) {
                if (std::abs(at(p, q)) < 1e-300) continue;
                double theta = 0.5 * std::atan2(2 * at(p, q), at(q, q) - at(p, p));
                double c = std::cos(theta), s = std::sin(theta);
                for (int k = 0; k < cols; ++k) {
                    double kp = at(k, p), kq = at(k, q);
                    at(k, p) = c * kp - s * kq;
                    at(k, q) = s * kp + c * kq;
                }
                for (int k = 0; k < cols; ++k) {
                    double pk = at(p, k), qk = at(q, k);
                    at(p, k) = c * pk - s * qk;
                    at(q, k) = s * pk + c * qk;
                }
            }
    }
    double best = 0;
    for (int i = 0; i < cols; ++i) best = std::max(best, at(i, i));
    return std::sqrt(std::max(0.0, best));
}

}  // namespace

TEST_CASE("conv block reproduces the encoder-1 shape contract") {
    // 1024 -> 256 -> 256 -> 256 with trailing max pooling
    ConvBlock block(1024, {256, 256, 256}, Resample::MaxPool, 1);
    Tensor in = Tensor::full({1024, 8, 8}, 0.01);
    Tensor out = block.forward(in);
    CHECK(out.shape() == Shape{256, 4, 4});
    auto chain = block.channel_chain();
    REQUIRE(chain.size() == 3);
    CHECK(chain[0] == std::pair<int, int>{1024, 256});
    CHECK(chain[1] == std::pair<int, int>{256, 256});
    CHECK(chain[2] == std::pair<int, int>{256, 256});
}

TEST_CASE("decoder-shaped block doubles the spatial size") {
    ConvBlock block(512, {512, 512, 512}, Resample::Upsample, 2);
    Tensor in = Tensor::full({512, 4, 4}, 0.01);
    Tensor out = block.forward(in);
    CHECK(out.shape() == Shape{512, 8, 8});
}

TEST_CASE("all-zero block weights give zero output") {
    ConvBlock block(2, {3, 3}, Resample::None, 3);
    for (auto& conv : block.convs) {
        std::fill(conv.weight.values_mut().begin(), conv.weight.values_mut().end(), 0.0);
        std::fill(conv.bias.values_mut().begin(), conv.bias.values_mut().end(), 0.0);
    }
    Tensor out = block.forward(random_tensor({2, 6, 6}, 4));
    for (double v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("convlstm zero everything stays zero") {
    ConvLSTMCell cell(2, 3, 5);
    std::fill(cell.weight.values_mut().begin(), cell.weight.values_mut().end(), 0.0);
    ConvLSTMState st = cell.zero_state(4, 4);
    auto [h, next] = cell.step(Tensor::zeros({2, 4, 4}), st);
    for (double v : h.values()) CHECK(v == 0.0);
    for (double v : next.cell.values()) CHECK(v == 0.0);
}

TEST_CASE("convlstm state settles on constant input") {
    // distance between consecutive states is non-increasing after burn-in
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        ConvLSTMCell cell(2, 3, 100 + seed);
        Tensor input = random_tensor({2, 4, 4}, 200 + seed, 0.0, 1.0);
        ConvLSTMState st = cell.zero_state(4, 4);
        std::vector<double> prev_h, prev_c;
        double prev_dist = -1;
        for (int t = 0; t < 40; ++t) {
            auto [h, next] = cell.step(input, st);
            if (!prev_h.empty()) {
                double d = 0;
                for (std::size_t i = 0; i < prev_h.size(); ++i) {
                    double dh = h.values()[i] - prev_h[i];
                    double dc = next.cell.values()[i] - prev_c[i];
                    d += dh * dh + dc * dc;
                }
                d = std::sqrt(d);
                if (t > 10 && prev_dist >= 0)
                    CHECK(d <= prev_dist * (1 + 1e-9) + 1e-12);
                prev_dist = d;
            }
            prev_h = h.values();
            prev_c = next.cell.values();
            st = next;
        }
    }
}

TEST_CASE("convlstm gradient through three unrolled steps") {
    auto build = [](const std::vector<Tensor>& in) {
        ConvLSTMCell cell;
        cell.weight = in[0];
        cell.bias = in[1];
        cell.in_channels = 2;
        cell.hidden_channels = 2;
        ConvLSTMState st{Tensor::zeros({2, 3, 3}), Tensor::zeros({2, 3, 3})};
        Tensor loss;
        for (int t = 0; t < 3; ++t) {
            auto [h, next] = cell.step(in[2], st);
            st = next;
            loss = t == 0 ? sum_sq(h) : add(loss, sum_sq(h));
        }
        return loss;
    };
    double err = grad_check(build,
                            {random_tensor({8, 4, 3, 3}, 61, -0.3, 0.3),
                             random_tensor({8}, 62, -0.3, 0.3), random_tensor({2, 3, 3}, 63)},
                            1e-5);
    CHECK(err < 1e-4);
}

TEST_CASE("convlstm spatial mismatch throws") {
    ConvLSTMCell cell(2, 3, 7);
    ConvLSTMState st = cell.zero_state(4, 4);
    CHECK_THROWS_AS(cell.step(Tensor::zeros({2, 6, 6}), st), ShapeError);
}

TEST_CASE("max pool basics") {
    Tensor t = Tensor::from({1, 2, 2}, {1, 2, 3, 4});
    CHECK(max_pool2(t).values() == std::vector<double>{4});
    Tensor c = Tensor::full({2, 4, 4}, 0.7);
    Tensor pooled = max_pool2(c);
    CHECK(pooled.shape() == Shape{2, 2, 2});
    for (double v : pooled.values()) CHECK(v == 0.7);
    CHECK_THROWS_AS(max_pool2(Tensor::zeros({1, 3, 4})), ShapeError);
}

TEST_CASE("max pool matches loop oracle on random 4x4") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Tensor t = random_tensor({2, 4, 4}, 700 + seed);
        Tensor p = max_pool2(t);
        for (int ch = 0; ch < 2; ++ch)
            for (int oy = 0; oy < 2; ++oy)
                for (int ox = 0; ox < 2; ++ox) {
                    double expect = -1e300;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx)
                            expect = std::max(
                                expect, t.values()[(ch * 4 + 2 * oy + dy) * 4 + 2 * ox + dx]);
                    CHECK(p.values()[(ch * 2 + oy) * 2 + ox] == expect);
                }
    }
}

TEST_CASE("max pool ties route gradient to the first element in row-major order") {
    Tensor t = Tensor::param({1, 2, 2}, std::vector<double>{0.5, 0.5, 0.5, 0.5});
    Graph g;
    Tensor loss = sum(max_pool2(t));
    g.backward(loss);
    CHECK(t.grad() == std::vector<double>{1, 0, 0, 0});
}

TEST_CASE("bilinear upsample basics") {
    Tensor c = Tensor::full({2, 3, 3}, 0.4);
    Tensor up = bilinear_upsample2(c);
    CHECK(up.shape() == Shape{2, 6, 6});
    for (double v : up.values()) CHECK(v == doctest::Approx(0.4).epsilon(1e-15));

    Tensor single = Tensor::from({1, 1, 1}, {0.9});
    Tensor up1 = bilinear_upsample2(single);
    CHECK(up1.shape() == Shape{1, 2, 2});
    for (double v : up1.values()) CHECK(v == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("bilinear upsample matches the closed-form weight oracle") {
    // factor-2, align-corners-false: even output d=2j samples j-0.25,
    // odd d=2j+1 samples j+0.25, clamped at the edges
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        Tensor t = random_tensor({1, 3, 3}, 800 + seed);
        Tensor up = bilinear_upsample2(t);
        auto sample = [&](double sy, double sx) {
            int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
            double fy = sy - y0, fx = sx - x0;
            auto clamp = [](int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); };
            auto at = [&](int y, int x) { return t.values()[clamp(y, 3) * 3 + clamp(x, 3)]; };
            return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
                   fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
        };
        for (int oy = 0; oy < 6; ++oy)
            for (int ox = 0; ox < 6; ++ox) {
                double expect = sample(oy / 2.0 - 0.25, ox / 2.0 - 0.25);
                CHECK(up.values()[oy * 6 + ox] == doctest::Approx(expect).epsilon(1e-12));
            }
    }
}

TEST_CASE("spectral normalize: scaled identity") {
    // raw = 5I has sigma 5; lipschitz 3 gives effective 3I
    SpectralNorm sn(Tensor::param({2, 2}, std::vector<double>{5, 0, 0, 5}), 3.0);
    Tensor eff = sn.effective(30);
    CHECK(eff.values()[0] == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(eff.values()[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(eff.values()[2] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(eff.values()[3] == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("spectral normalize: unit-norm matrix is fixed by lipschitz 1") {
    // rotation * diag(1, 0.4): sigma = 1
    double c = std::cos(0.6), s = std::sin(0.6);
    std::vector<double> m = {c * 1.0, -s * 0.4, s * 1.0, c * 0.4};
    SpectralNorm sn(Tensor::param({2, 2}, m), 1.0);
    Tensor eff = sn.effective(60);
    for (int i = 0; i < 4; ++i) CHECK(eff.values()[i] == doctest::Approx(m[i]).epsilon(1e-6));
}

TEST_CASE("spectral normalize random 8x8 against the Jacobi oracle") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        Tensor raw = random_tensor({8, 8}, 900 + seed);
        SpectralNorm sn(raw, 3.0);
        Tensor eff = sn.effective(50);
        double sigma = svd_max_oracle(eff.values(), 8, 8);
        CHECK(sigma > 3.0 * (1 - 1e-3));
        CHECK(sigma < 3.0 * (1 + 1e-3));
    }
}

TEST_CASE("spectral normalize is scale invariant") {
    Tensor raw = random_tensor({6, 6}, 42);
    std::vector<double> scaled = raw.values();
    for (double& v : scaled) v *= 7.5;
    SpectralNorm a(Tensor::from(raw.shape(), raw.values()), 3.0);
    SpectralNorm b(Tensor::from(raw.shape(), std::move(scaled)), 3.0);
    Tensor ea = a.effective(50);
    Tensor eb = b.effective(50);
    for (long i = 0; i < ea.size(); ++i)
        CHECK(ea.values()[i] == doctest::Approx(eb.values()[i]).epsilon(1e-9));
}

TEST_CASE("spectral normalize zero weight returns zero") {
    SpectralNorm sn(Tensor::param({3, 3}, std::vector<double>(9, 0.0)), 3.0);
    Tensor eff = sn.effective(10);
    for (double v : eff.values()) CHECK(v == 0.0);
}

TEST_CASE("initializers are seed deterministic") {
    Tensor a = xavier_init({4, 3, 3, 3}, 27, 36, 123);
    Tensor b = xavier_init({4, 3, 3, 3}, 27, 36, 123);
    CHECK(a.values() == b.values());
    Tensor c = uniform_linear_init({10, 10}, 9);
    Tensor d = uniform_linear_init({10, 10}, 9);
    CHECK(c.values() == d.values());
    CHECK(uniform_linear_init({4}, 9).values() != uniform_linear_init({4}, 10).values());
}

TEST_CASE("xavier sample variance matches 2/(fan_in+fan_out)") {
    int fan_in = 48, fan_out = 32;
    Tensor t = xavier_init({100000}, fan_in, fan_out, 55);
    double mean = 0;
    for (double v : t.values()) mean += v;
    mean /= t.size();
    double var = 0;
    for (double v : t.values()) var += (v - mean) * (v - mean);
    var /= t.size();
    double expect = 2.0 / (fan_in + fan_out);
    CHECK(std::abs(var - expect) / expect < 0.05);
}

TEST_CASE("linear init variance is 1e-4 and biases are zero") {
    Tensor t = uniform_linear_init({100000}, 77);
    double mean = 0;
    for (double v : t.values()) mean += v;
    mean /= t.size();
    double var = 0;
    for (double v : t.values()) var += (v - mean) * (v - mean);
    var /= t.size();
    CHECK(std::abs(var - 1e-4) / 1e-4 < 0.05);
    Tensor bias = zero_bias(16);
    for (double v : bias.values()) CHECK(v == 0.0);
}

TEST_CASE("adam first step moves by about -lr * sign(grad)") {
    Tensor w = Tensor::param({3}, {1.0, -2.0, 0.5});
    std::vector<double> before = w.values();
    Adam opt({w}, {0.01, 0.5, 0.999, 1e-8});
    w.grad_mut() = {0.3, -0.7, 1.9};
    opt.step();
    for (int i = 0; i < 3; ++i) {
        double delta = w.values()[i] - before[i];
        double expect = -0.01 * (w.grad()[i] > 0 ? 1.0 : -1.0);
        CHECK(delta == doctest::Approx(expect).epsilon(1e-5));
    }
}

TEST_CASE("adam with zero gradients never moves") {
    Tensor w = Tensor::param({4}, {1, 2, 3, 4});
    std::vector<double> before = w.values();
    Adam opt({w}, {});
    for (int i = 0; i < 50; ++i) opt.step();
    CHECK(w.values() == before);
}

TEST_CASE("adam descends w^2 from 1 to below 0.5 in 100 steps") {
    Tensor w = Tensor::param({1}, {1.0});
    Adam opt({w}, {0.1, 0.5, 0.999, 1e-8});
    for (int i = 0; i < 100; ++i) {
        w.zero_grad();
        w.grad_mut()[0] = 2.0 * w.values()[0];
        opt.step();
    }
    CHECK(std::abs(w.values()[0]) < 0.5);
}

TEST_CASE("adam rejects non-finite gradients without stepping") {
    Tensor w = Tensor::param({2}, {1.0, 2.0});
    Adam opt({w}, {});
    w.grad_mut() = {0.1, std::nan("")};
    CHECK_THROWS_AS(opt.step(), OptimizerError);
    CHECK(w.values() == std::vector<double>{1.0, 2.0});
    CHECK(opt.step_count() == 0);
}

TEST_CASE("adam is bit deterministic") {
    auto run = []() {
        Tensor w = Tensor::param({3}, {0.3, -0.4, 0.9});
        Adam opt({w}, {0.05, 0.5, 0.999, 1e-8});
        for (int i = 0; i < 20; ++i) {
            w.zero_grad();
            for (int j = 0; j < 3; ++j) w.grad_mut()[j] = std::sin(i + j) * w.values()[j];
            opt.step();
        }
        return w.values();
    };
    CHECK(run() == run());
}

TEST_CASE("conv block layers pass grad check") {
    auto build = [](const std::vector<Tensor>& in) {
        ConvBlock block(2, {3}, Resample::MaxPool, 17);
        block.convs[0].weight = in[1];
        block.convs[0].bias = in[2];
        return sum_sq(block.forward(in[0]));
    };
    double err = grad_check(build,
                            {random_tensor({2, 4, 4}, 71), random_tensor({3, 2, 3, 3}, 72),
                             random_tensor({3}, 73)},
                            1e-5);
    CHECK(err < 1e-4);
}
