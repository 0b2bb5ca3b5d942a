#include "midgap/gradsuite.hpp"

#include <cmath>
#include <random>

#include "midgap/blender.hpp"
#include "midgap/gradcheck.hpp"
#include "midgap/layers.hpp"
#include "midgap/objectives.hpp"
#include "midgap/predictor.hpp"

namespace midgap {

namespace {

constexpr double kEps = 1e-5;

// uniform values with |x| >= margin, keeping finite differences away from
// the kinks of relu / abs / max
Tensor rough_tensor(Shape shape, std::uint64_t seed, double margin = 0.05) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(margin, 1.0);
    long n = numel(shape);
    std::vector<double> v(n);
    for (long i = 0; i < n; ++i) v[i] = dist(rng) * ((rng() & 1) ? 1.0 : -1.0);
    return Tensor::from(std::move(shape), std::move(v));
}

Tensor positive_tensor(Shape shape, std::uint64_t seed, double lo = 0.3, double hi = 2.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    long n = numel(shape);
    std::vector<double> v(n);
    for (long i = 0; i < n; ++i) v[i] = dist(rng);
    return Tensor::from(std::move(shape), std::move(v));
}

// all pairwise-distinct values so pooling argmaxes are stable under eps
Tensor separated_tensor(Shape shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    long n = numel(shape);
    std::vector<double> v(n);
    for (long i = 0; i < n; ++i) v[i] = 0.001 * i;
    std::shuffle(v.begin(), v.end(), rng);
    std::uniform_real_distribution<double> jitter(-2e-4, 2e-4);
    for (long i = 0; i < n; ++i) v[i] += jitter(rng);
    return Tensor::from(std::move(shape), std::move(v));
}

// orthogonal-ish matrix with a strong spectral gap, for power-iteration cases
Tensor gapped_matrix(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.1, 1.4);
    std::vector<double> m(static_cast<long>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) m[static_cast<long>(i) * n + i] = 2.0 / (i + 1);  // gap 2:1
    auto rotate = [&](std::vector<double>& mat, int a, int b, double th, bool left) {
        double c = std::cos(th), s = std::sin(th);
        for (int k = 0; k < n; ++k) {
            double &x = left ? mat[static_cast<long>(a) * n + k] : mat[static_cast<long>(k) * n + a];
            double &y = left ? mat[static_cast<long>(b) * n + k] : mat[static_cast<long>(k) * n + b];
            double nx = c * x - s * y, ny = s * x + c * y;
            x = nx;
            y = ny;
        }
    };
    for (int r = 0; r < 3 * n; ++r) {
        int a = static_cast<int>(rng() % n), b = static_cast<int>(rng() % n);
        if (a == b) continue;
        rotate(m, a, b, angle(rng), r & 1);
    }
    return Tensor::from({n, n}, std::move(m));
}

using InputGen = std::function<std::vector<Tensor>(std::uint64_t)>;

GradSuiteCase run_case(const std::string& name, const LossBuilder& build, const InputGen& gen,
                       int seeds, double tolerance = 1e-4) {
    GradSuiteCase c;
    c.name = name;
    c.tolerance = tolerance;
    for (int s = 0; s < seeds; ++s)
        c.max_error = std::max(c.max_error, grad_check(build, gen(1000 + 17 * s), kEps));
    return c;
}

// small generators shared by several cases
std::vector<Tensor> gen_pair(std::uint64_t seed) {
    return {rough_tensor({2, 3, 4}, seed), rough_tensor({2, 3, 4}, seed + 1)};
}
std::vector<Tensor> gen_scalar_pair(std::uint64_t seed) {
    return {rough_tensor({2, 3}, seed), rough_tensor({1}, seed + 1)};
}
std::vector<Tensor> gen_one(std::uint64_t seed) { return {rough_tensor({3, 5}, seed)}; }
std::vector<Tensor> gen_positive(std::uint64_t seed) {
    return {positive_tensor({3, 4}, seed)};
}
std::vector<Tensor> gen_div(std::uint64_t seed) {
    return {rough_tensor({2, 3, 4}, seed), positive_tensor({2, 3, 4}, seed + 1, 0.5, 2.0)};
}
std::vector<Tensor> gen_conv(std::uint64_t seed) {
    return {rough_tensor({2, 5, 6}, seed), rough_tensor({3, 2, 3, 3}, seed + 1),
            rough_tensor({3}, seed + 2)};
}
std::vector<Tensor> gen_conv1x1(std::uint64_t seed) {
    return {rough_tensor({3, 4, 4}, seed), rough_tensor({2, 3, 1, 1}, seed + 1),
            rough_tensor({2}, seed + 2)};
}
std::vector<Tensor> gen_plane(std::uint64_t seed) {
    return {separated_tensor({2, 4, 6}, seed)};
}
std::vector<Tensor> gen_small_plane(std::uint64_t seed) {
    return {rough_tensor({2, 3, 3}, seed)};
}
std::vector<Tensor> gen_three(std::uint64_t seed) {
    return {rough_tensor({1, 2, 3}, seed), rough_tensor({2, 2, 3}, seed + 1),
            rough_tensor({1, 2, 3}, seed + 2)};
}
std::vector<Tensor> gen_lstm(std::uint64_t seed) {
    return {rough_tensor({12, 5, 3, 3}, seed, 0.02),  // gate conv weight (4*3 x (2+3))
            rough_tensor({12}, seed + 1, 0.02),
            rough_tensor({2, 4, 4}, seed + 2),  // input
            rough_tensor({3, 4, 4}, seed + 3, 0.02),
            rough_tensor({3, 4, 4}, seed + 4, 0.02)};
}
std::vector<Tensor> gen_sn(std::uint64_t seed) { return {gapped_matrix(6, seed)}; }
std::vector<Tensor> gen_kernels(std::uint64_t seed) {
    // vert/horiz kernel fields (k=3) for both directions plus two frames, 5x4
    return {positive_tensor({3, 5, 4}, seed, 0.05, 1.0),
            positive_tensor({3, 5, 4}, seed + 1, 0.05, 1.0),
            positive_tensor({3, 5, 4}, seed + 2, 0.05, 1.0),
            positive_tensor({3, 5, 4}, seed + 3, 0.05, 1.0),
            rough_tensor({1, 5, 4}, seed + 4),
            rough_tensor({1, 5, 4}, seed + 5)};
}
std::vector<Tensor> gen_frames2(std::uint64_t seed) {
    return {separated_tensor({1, 4, 4}, seed), separated_tensor({1, 4, 4}, seed + 1)};
}
std::vector<Tensor> gen_gan(std::uint64_t seed) {
    return {separated_tensor({1, 4, 4}, seed), separated_tensor({1, 4, 4}, seed + 1),
            rough_tensor({1}, seed + 2)};
}
std::vector<Tensor> gen_two_scalars(std::uint64_t seed) {
    return {rough_tensor({1}, seed), rough_tensor({1}, seed + 1)};
}
std::vector<Tensor> gen_blender(std::uint64_t seed) {
    // deep activations, skips at H/8 and H/4 for both directions (H=32)
    return {rough_tensor({2, 4, 4}, seed, 0.02),     rough_tensor({2, 4, 4}, seed + 1, 0.02),
            rough_tensor({3, 4, 4}, seed + 2, 0.02), rough_tensor({3, 4, 4}, seed + 3, 0.02),
            rough_tensor({2, 8, 8}, seed + 4, 0.02), rough_tensor({2, 8, 8}, seed + 5, 0.02)};
}

FrameSequence wrap_frames(const Tensor& t) {
    FrameSequence s;
    s.frames.push_back(t);
    return s;
}

}  // namespace

std::vector<GradSuiteCase> run_gradient_suite(int seeds) {
    std::vector<GradSuiteCase> out;
    auto push = [&](GradSuiteCase c) { out.push_back(std::move(c)); };

    push(run_case("elementwise.add",
                  [](const std::vector<Tensor>& in) { return sum(add(in[0], in[1])); }, gen_pair,
                  seeds));
    push(run_case("elementwise.add_scalar",
                  [](const std::vector<Tensor>& in) { return sum(add(in[0], in[1])); },
                  gen_scalar_pair, seeds));
    push(run_case("elementwise.sub",
                  [](const std::vector<Tensor>& in) { return sum_sq(sub(in[0], in[1])); },
                  gen_pair, seeds));
    push(run_case("elementwise.mul",
                  [](const std::vector<Tensor>& in) { return sum(mul(in[0], in[1])); }, gen_pair,
                  seeds));
    push(run_case("elementwise.div",
                  [](const std::vector<Tensor>& in) { return sum(div(in[0], in[1])); }, gen_div,
                  seeds));
    push(run_case("elementwise.scale",
                  [](const std::vector<Tensor>& in) { return sum(scale(in[0], -1.7)); }, gen_one,
                  seeds));
    push(run_case("elementwise.neg",
                  [](const std::vector<Tensor>& in) { return sum(neg(in[0])); }, gen_one, seeds));
    push(run_case("elementwise.relu",
                  [](const std::vector<Tensor>& in) { return sum(relu(in[0])); }, gen_one, seeds));
    push(run_case("elementwise.sigmoid",
                  [](const std::vector<Tensor>& in) { return sum(sigmoid(in[0])); }, gen_one,
                  seeds));
    push(run_case("elementwise.tanh",
                  [](const std::vector<Tensor>& in) { return sum(tanh(in[0])); }, gen_one, seeds));
    push(run_case("elementwise.log",
                  [](const std::vector<Tensor>& in) { return sum(log(in[0])); }, gen_positive,
                  seeds));
    push(run_case("elementwise.clamp_min",
                  [](const std::vector<Tensor>& in) { return sum(clamp_min(in[0], 0.02)); },
                  gen_one, seeds));
    push(run_case("reduce.sum", [](const std::vector<Tensor>& in) { return sum(in[0]); }, gen_one,
                  seeds));
    push(run_case("reduce.mean", [](const std::vector<Tensor>& in) { return mean(in[0]); },
                  gen_one, seeds));
    push(run_case("reduce.sum_abs", [](const std::vector<Tensor>& in) { return sum_abs(in[0]); },
                  gen_one, seeds));
    push(run_case("reduce.sum_sq", [](const std::vector<Tensor>& in) { return sum_sq(in[0]); },
                  gen_one, seeds));
    push(run_case("conv2d",
                  [](const std::vector<Tensor>& in) {
                      return sum_sq(conv2d(in[0], in[1], in[2], 1));
                  },
                  gen_conv, seeds));
    push(run_case("conv2d.1x1_pad0",
                  [](const std::vector<Tensor>& in) {
                      return sum_sq(conv2d(in[0], in[1], in[2], 0));
                  },
                  gen_conv1x1, seeds));
    push(run_case("conv2d.relu_chain",
                  [](const std::vector<Tensor>& in) {
                      return sum_sq(relu(conv2d(in[0], in[1], in[2], 1)));
                  },
                  gen_conv, seeds));
    push(run_case("concat_channels",
                  [](const std::vector<Tensor>& in) {
                      return sum_sq(concat_channels({in[0], in[1], in[2]}));
                  },
                  gen_three, seeds));
    push(run_case("slice_channels",
                  [](const std::vector<Tensor>& in) {
                      return sum_sq(slice_channels(concat_channels({in[0], in[1]}), 1, 3));
                  },
                  gen_three, seeds));
    push(run_case("reshape",
                  [](const std::vector<Tensor>& in) {
                      return sum_sq(reshape(in[0], {static_cast<int>(in[0].size()), 1, 1}));
                  },
                  gen_one, seeds));
    push(run_case("max_pool2",
                  [](const std::vector<Tensor>& in) { return sum_sq(max_pool2(in[0])); },
                  gen_plane, seeds));
    push(run_case("bilinear_upsample2",
                  [](const std::vector<Tensor>& in) { return sum_sq(bilinear_upsample2(in[0])); },
                  gen_small_plane, seeds));
    push(run_case("subsample2",
                  [](const std::vector<Tensor>& in) { return sum_sq(subsample2(in[0])); },
                  gen_plane, seeds));
    push(run_case("convlstm.step3",
                  [](const std::vector<Tensor>& in) {
                      ConvLSTMCell cell;
                      cell.weight = in[0];
                      cell.bias = in[1];
                      cell.in_channels = 2;
                      cell.hidden_channels = 3;
                      ConvLSTMState st{in[3], in[4]};
                      Tensor loss;
                      for (int s = 0; s < 3; ++s) {
                          auto [h, next] = cell.step(in[2], st);
                          st = next;
                          loss = s == 0 ? sum_sq(h) : add(loss, sum_sq(h));
                      }
                      return loss;
                  },
                  gen_lstm, seeds));
    push(run_case("spectral_norm.effective",
                  [](const std::vector<Tensor>& in) {
                      SpectralNorm sn(in[0], 3.0);
                      return sum_sq(sn.effective(50));
                  },
                  gen_sn, seeds));
    push(run_case("apply_kernels",
                  [](const std::vector<Tensor>& in) {
                      SeparableKernelField field;
                      field.vert_p = in[0];
                      field.horiz_p = in[1];
                      field.vert_f = in[2];
                      field.horiz_f = in[3];
                      field.kernel_size = 3;
                      return sum_sq(apply_kernels(field, in[4], in[5]));
                  },
                  gen_kernels, seeds));
    push(run_case("kernel_generation",
                  [](const std::vector<Tensor>& in) {
                      BlenderSettings s;
                      s.time_aware = true;
                      s.act_channels = 2;
                      s.skip_deep_channels = 3;
                      s.skip_mid_channels = 2;
                      s.enc_a = 4;
                      s.enc_b = 4;
                      s.head_c = 3;
                      s.kernel_size = 3;
                      s.convs_per_block = 1;
                      KernelBlender net(s, 99);
                      StepActivations ep{in[0], in[4], in[2]};
                      StepActivations ef{in[1], in[5], in[3]};
                      SeparableKernelField field = net.generate_kernels(ep, ef, 0.3);
                      return add(add(sum_sq(field.vert_p), sum_sq(field.horiz_p)),
                                 add(sum_sq(field.vert_f), sum_sq(field.horiz_f)));
                  },
                  gen_blender, seeds));
    push(run_case("loss.l2",
                  [](const std::vector<Tensor>& in) {
                      return l2_loss(wrap_frames(in[0]), wrap_frames(in[1]));
                  },
                  gen_frames2, seeds));
    push(run_case("loss.gdl",
                  [](const std::vector<Tensor>& in) {
                      return gdl_loss(wrap_frames(in[0]), wrap_frames(in[1]));
                  },
                  gen_frames2, seeds));
    push(run_case("loss.image",
                  [](const std::vector<Tensor>& in) {
                      return image_loss(wrap_frames(in[0]), wrap_frames(in[1]));
                  },
                  gen_frames2, seeds));
    push(run_case("loss.generator",
                  [](const std::vector<Tensor>& in) {
                      Tensor d_fake = sigmoid(in[2]);
                      GeneratorLoss gl =
                          generator_loss(std::nullopt, std::nullopt, wrap_frames(in[0]),
                                         wrap_frames(in[1]), d_fake, 1.0, 0.002);
                      return gl.total;
                  },
                  gen_gan, seeds));
    push(run_case("loss.discriminator",
                  [](const std::vector<Tensor>& in) {
                      return discriminator_loss(sigmoid(in[0]), sigmoid(in[1]));
                  },
                  gen_two_scalars, seeds));
    push(run_case("discriminator.forward",
                  [](const std::vector<Tensor>& in) {
                      DiscriminatorSettings s;
                      s.frame_channels = 1;
                      s.total_frames = 3;
                      s.height = 8;
                      s.width = 8;
                      s.channels = {3, 4};
                      Discriminator d(s, 7);
                      FrameSequence p = wrap_frames(in[0]);
                      FrameSequence m = wrap_frames(in[1]);
                      FrameSequence f = wrap_frames(in[2]);
                      return d.forward(p, m, f, 2);
                  },
                  [](std::uint64_t seed) -> std::vector<Tensor> {
                      return {rough_tensor({1, 8, 8}, seed, 0.02),
                              rough_tensor({1, 8, 8}, seed + 1, 0.02),
                              rough_tensor({1, 8, 8}, seed + 2, 0.02)};
                  },
                  seeds));
    return out;
}

}  // namespace midgap
