#include "midgap/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace midgap {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

// ---------------------------------------------------------------- Tensor

static std::shared_ptr<TensorData> make_data(Shape shape, std::vector<double> values) {
    if (numel(shape) != static_cast<long>(values.size()))
        throw ShapeError("tensor value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
    auto d = std::make_shared<TensorData>();
    d->shape = std::move(shape);
    d->values = std::move(values);
    return d;
}

Tensor Tensor::zeros(Shape shape) {
    long n = numel(shape);
    return Tensor(make_data(std::move(shape), std::vector<double>(n, 0.0)));
}

Tensor Tensor::full(Shape shape, double v) {
    long n = numel(shape);
    return Tensor(make_data(std::move(shape), std::vector<double>(n, v)));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
    return Tensor(make_data(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

Tensor Tensor::param(Shape shape, std::vector<double> values) {
    Tensor t = from(std::move(shape), std::move(values));
    t.set_requires_grad(true);
    return t;
}

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
    return d_->values[0];
}

void Tensor::zero_grad() {
    if (d_->requires_grad) std::fill(d_->grad.begin(), d_->grad.end(), 0.0);
}

void Tensor::set_requires_grad(bool on) {
    d_->requires_grad = on;
    if (on)
        d_->grad.assign(d_->values.size(), 0.0);
    else
        d_->grad.clear();
}

// ---------------------------------------------------------------- Graph

namespace {
thread_local std::vector<Graph*> g_tape_stack;
}

Graph::Graph() { g_tape_stack.push_back(this); }

Graph::~Graph() {
    // pop our own entry; NoGradScope entries are nullptr
    for (auto it = g_tape_stack.rbegin(); it != g_tape_stack.rend(); ++it) {
        if (*it == this) {
            g_tape_stack.erase(std::next(it).base());
            break;
        }
    }
}

Graph* Graph::active() {
    return g_tape_stack.empty() ? nullptr : g_tape_stack.back();
}

void Graph::record(std::shared_ptr<TensorData> out, std::function<void()> pull) {
    entries_.push_back({std::move(out), std::move(pull)});
}

void Graph::backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw ShapeError("backward requires a scalar loss");
    if (!loss.requires_grad())
        throw ShapeError("backward on a loss that requires no gradient");
    for (auto& e : entries_) std::fill(e.out->grad.begin(), e.out->grad.end(), 0.0);
    bool is_output = false;
    for (auto& e : entries_)
        if (e.out == loss.data()) {
            is_output = true;
            break;
        }
    if (is_output)
        loss.data()->grad[0] = 1.0;
    else
        loss.data()->grad[0] += 1.0;  // loss is itself a leaf
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->pull();
}

NoGradScope::NoGradScope() { g_tape_stack.push_back(nullptr); }
NoGradScope::~NoGradScope() { g_tape_stack.pop_back(); }

// ---------------------------------------------------------------- helpers

namespace detail {

bool record_op(const std::vector<Tensor>& inputs, Tensor& out, std::function<void()> pull) {
    Graph* g = Graph::active();
    if (!g) return false;
    bool any = false;
    for (const auto& t : inputs)
        if (t.defined() && t.requires_grad()) any = true;
    if (!any) return false;
    out.set_requires_grad(true);
    g->record(out.data(), std::move(pull));
    return true;
}

void check_finite(const Tensor& t, const char* op) {
    for (double v : t.values())
        if (!std::isfinite(v))
            throw DomainError(std::string(op) + " produced a non-finite value");
}

}  // namespace detail

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

// binary ops broadcast a single-element tensor against any shape
enum class Bcast { None, A, B };

Bcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() == b.shape()) return Bcast::None;
    if (a.size() == 1) return Bcast::A;
    if (b.size() == 1) return Bcast::B;
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " are not broadcast-compatible");
    }

template <class Fwd, class Pull>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, Pull make_pull) {
    Bcast bc = broadcast_kind(a, b, name);
    const Shape& out_shape = (bc == Bcast::A) ? b.shape() : a.shape();
    long n = numel(out_shape);
    std::vector<double> vals(n);
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    for (long i = 0; i < n; ++i) {
        double x = (bc == Bcast::A) ? pa[0] : pa[i];
        double y = (bc == Bcast::B) ? pb[0] : pb[i];
        vals[i] = fwd(x, y);
    }
    Tensor out = Tensor::from(out_shape, std::move(vals));
    detail::record_op({a, b}, out, make_pull(a, b, out, bc));
    return out;
}

// accumulate src into dst honoring scalar broadcast on dst
void axpy_bcast(std::vector<double>& dst, const std::vector<double>& src) {
    if (dst.size() == 1) {
        double s = 0.0;
        for (double v : src) s += v;
        dst[0] += s;
    } else {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
}

}  // namespace

// ---------------------------------------------------------------- elementwise

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "add", [](double x, double y) { return x + y; },
        [](Tensor a, Tensor b, Tensor out, Bcast) {
            return [a, b, out]() mutable {
                const auto& g = out.grad();
                if (a.requires_grad()) axpy_bcast(a.grad_mut(), g);
                if (b.requires_grad()) axpy_bcast(b.grad_mut(), g);
            };
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](Tensor a, Tensor b, Tensor out, Bcast) {
            return [a, b, out]() mutable {
                const auto& g = out.grad();
                if (a.requires_grad()) axpy_bcast(a.grad_mut(), g);
                if (b.requires_grad()) {
                    std::vector<double> ng(g.size());
                    for (std::size_t i = 0; i < g.size(); ++i) ng[i] = -g[i];
                    axpy_bcast(b.grad_mut(), ng);
                }
            };
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](Tensor a, Tensor b, Tensor out, Bcast bc) {
            return [a, b, out, bc]() mutable {
                const auto& g = out.grad();
                const auto& av = a.values();
                const auto& bv = b.values();
                if (a.requires_grad()) {
                    std::vector<double> t(g.size());
                    for (std::size_t i = 0; i < g.size(); ++i)
                        t[i] = g[i] * (bc == Bcast::B ? bv[0] : bv[i]);
                    axpy_bcast(a.grad_mut(), t);
                }
                if (b.requires_grad()) {
                    std::vector<double> t(g.size());
                    for (std::size_t i = 0; i < g.size(); ++i)
                        t[i] = g[i] * (bc == Bcast::A ? av[0] : av[i]);
                    axpy_bcast(b.grad_mut(), t);
                }
            };
        });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "div", [](double x, double y) { return x / y; },
        [](Tensor a, Tensor b, Tensor out, Bcast bc) {
            return [a, b, out, bc]() mutable {
                const auto& g = out.grad();
                const auto& av = a.values();
                const auto& bv = b.values();
                if (a.requires_grad()) {
                    std::vector<double> t(g.size());
                    for (std::size_t i = 0; i < g.size(); ++i)
                        t[i] = g[i] / (bc == Bcast::B ? bv[0] : bv[i]);
                    axpy_bcast(a.grad_mut(), t);
                }
                if (b.requires_grad()) {
                    std::vector<double> t(g.size());
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        double x = (bc == Bcast::A) ? av[0] : av[i];
                        double y = (bc == Bcast::B) ? bv[0] : bv[i];
                        t[i] = -g[i] * x / (y * y);
                    }
                    axpy_bcast(b.grad_mut(), t);
                }
            };
        });
}

namespace {

template <class Fwd, class Dfn>
Tensor unary_op(const Tensor& a, Fwd fwd, Dfn dfn) {
    long n = a.size();
    std::vector<double> vals(n);
    const double* pa = a.values().data();
    for (long i = 0; i < n; ++i) vals[i] = fwd(pa[i]);
    Tensor out = Tensor::from(a.shape(), std::move(vals));
    Tensor ain = a;
    detail::record_op({a}, out, [ain, out, dfn]() mutable {
        if (!ain.requires_grad()) return;
        const auto& g = out.grad();
        const auto& x = ain.values();
        const auto& y = out.values();
        auto& ag = ain.grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) ag[i] += g[i] * dfn(x[i], y[i]);
    });
    return out;
}

}  // namespace

Tensor scale(const Tensor& a, double c) {
    return unary_op(
        a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Tensor neg(const Tensor& a) {
    return unary_op(
        a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor relu(const Tensor& a) {
    return unary_op(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
    return unary_op(
        a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor log(const Tensor& a) {
    for (double v : a.values())
        if (v <= 0.0) throw DomainError("log of non-positive value");
    return unary_op(
        a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor clamp_min(const Tensor& a, double floor) {
    return unary_op(
        a, [floor](double x) { return x < floor ? floor : x; },
        [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------- reductions

namespace {

template <class Fwd, class Dfn>
Tensor reduce_op(const Tensor& a, Fwd fwd, Dfn dfn) {
    Tensor out = Tensor::scalar(fwd(a.values()));
    Tensor ain = a;
    detail::record_op({a}, out, [ain, out, dfn]() mutable {
        if (!ain.requires_grad()) return;
        double g = out.grad()[0];
        const auto& x = ain.values();
        auto& ag = ain.grad_mut();
        for (std::size_t i = 0; i < x.size(); ++i) ag[i] += g * dfn(x[i], x.size());
    });
    return out;
}

}  // namespace

Tensor sum(const Tensor& a) {
    return reduce_op(
        a,
        [](const std::vector<double>& v) {
            double s = 0.0;
            for (double x : v) s += x;
            return s;
        },
        [](double, std::size_t) { return 1.0; });
}

Tensor mean(const Tensor& a) {
    return reduce_op(
        a,
        [](const std::vector<double>& v) {
            double s = 0.0;
            for (double x : v) s += x;
            return s / static_cast<double>(v.size());
        },
        [](double, std::size_t n) { return 1.0 / static_cast<double>(n); });
}

Tensor sum_abs(const Tensor& a) {
    return reduce_op(
        a,
        [](const std::vector<double>& v) {
            double s = 0.0;
            for (double x : v) s += std::abs(x);
            return s;
        },
        [](double x, std::size_t) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor sum_sq(const Tensor& a) {
    return reduce_op(
        a,
        [](const std::vector<double>& v) {
            double s = 0.0;
            for (double x : v) s += x * x;
            return s;
        },
        [](double x, std::size_t) { return 2.0 * x; });
}

// ---------------------------------------------------------------- conv2d

namespace {

constexpr long kParallelMacs = 250000;  // below this a conv runs single-threaded

// narrow spatial extents vectorize poorly in the direct loops; the GEMM path
// rewrites them as (co x r) * (r x s) products over contiguous rows
// (patch matrix rows r = (ci*k+ky)*k+kx, columns s = oy*ow+ox)
bool use_gemm_path(int ci_n, int k, long spatial) {
    return spatial <= 96 && static_cast<long>(ci_n) * k * k * spatial <= (1L << 21);
}

void build_patches(std::vector<double>& patches, const double* in, int ci_n, int h, int wd, int k,
                   int pad, int oh, int ow) {
    const long s_n = static_cast<long>(oh) * ow;
    patches.assign(static_cast<long>(ci_n) * k * k * s_n, 0.0);
    for (int ci = 0; ci < ci_n; ++ci) {
        const double* iplane = in + static_cast<long>(ci) * h * wd;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* prow = patches.data() + ((static_cast<long>(ci) * k + ky) * k + kx) * s_n;
                int y0 = std::max(0, pad - ky), y1 = std::min(oh, h + pad - ky);
                int x0 = std::max(0, pad - kx), x1 = std::min(ow, wd + pad - kx);
                for (int oy = y0; oy < y1; ++oy) {
                    const double* irow = iplane + static_cast<long>(oy + ky - pad) * wd + (kx - pad);
                    double* dst = prow + static_cast<long>(oy) * ow;
                    for (int ox = x0; ox < x1; ++ox) dst[ox] = irow[ox];
                }
            }
        }
    }
}

void conv2d_forward_gemm(const double* patches, const double* w, const double* bias, double* out,
                         int r_n, int co_n, long s_n, long macs) {
#pragma omp parallel for schedule(static) if (macs > kParallelMacs)
    for (int co = 0; co < co_n; ++co) {
        double* orow = out + static_cast<long>(co) * s_n;
        for (long s = 0; s < s_n; ++s) orow[s] = bias[co];
        const double* wrow = w + static_cast<long>(co) * r_n;
        for (int r = 0; r < r_n; ++r) {
            double wv = wrow[r];
            const double* prow = patches + static_cast<long>(r) * s_n;
            for (long s = 0; s < s_n; ++s) orow[s] += wv * prow[s];
        }
    }
}

void conv2d_forward_kernel(const double* in, const double* w, const double* bias, double* out,
                           int ci_n, int h, int wd, int co_n, int k, int pad, int oh, int ow) {
    long macs = static_cast<long>(co_n) * ci_n * k * k * oh * ow;
    const long s_n = static_cast<long>(oh) * ow;
    if (use_gemm_path(ci_n, k, s_n)) {
        std::vector<double> patches;
        build_patches(patches, in, ci_n, h, wd, k, pad, oh, ow);
        conv2d_forward_gemm(patches.data(), w, bias, out, ci_n * k * k, co_n, s_n, macs);
        return;
    }
#pragma omp parallel for schedule(static) if (macs > kParallelMacs)
    for (int co = 0; co < co_n; ++co) {
        double* oplane = out + static_cast<long>(co) * oh * ow;
        for (long i = 0; i < static_cast<long>(oh) * ow; ++i) oplane[i] = bias[co];
        for (int ci = 0; ci < ci_n; ++ci) {
            const double* iplane = in + static_cast<long>(ci) * h * wd;
            const double* wk = w + ((static_cast<long>(co) * ci_n + ci) * k) * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    double wv = wk[ky * k + kx];
                    int y0 = std::max(0, pad - ky);
                    int y1 = std::min(oh, h + pad - ky);
                    int x0 = std::max(0, pad - kx);
                    int x1 = std::min(ow, wd + pad - kx);
                    for (int oy = y0; oy < y1; ++oy) {
                        const double* irow = iplane + static_cast<long>(oy + ky - pad) * wd + (kx - pad);
                        double* orow = oplane + static_cast<long>(oy) * ow;
                        for (int ox = x0; ox < x1; ++ox) orow[ox] += wv * irow[ox];
                    }
                }
            }
        }
    }
}

void conv2d_backward_input(const double* gout, const double* w, double* gin, int ci_n, int h,
                           int wd, int co_n, int k, int pad, int oh, int ow) {
    long macs = static_cast<long>(co_n) * ci_n * k * k * oh * ow;
    const long s_n = static_cast<long>(oh) * ow;
    if (use_gemm_path(ci_n, k, s_n)) {
        const int r_per_ci = k * k;
#pragma omp parallel for schedule(static) if (macs > kParallelMacs)
        for (int ci = 0; ci < ci_n; ++ci) {
            double* gplane = gin + static_cast<long>(ci) * h * wd;
            std::vector<double> row(s_n);
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    int r = (ci * k + ky) * k + kx;
                    std::fill(row.begin(), row.end(), 0.0);
                    for (int co = 0; co < co_n; ++co) {
                        double wv = w[static_cast<long>(co) * ci_n * r_per_ci + r];
                        const double* gorow = gout + static_cast<long>(co) * s_n;
                        for (long s = 0; s < s_n; ++s) row[s] += wv * gorow[s];
                    }
                    int y0 = std::max(0, pad - ky), y1 = std::min(oh, h + pad - ky);
                    int x0 = std::max(0, pad - kx), x1 = std::min(ow, wd + pad - kx);
                    for (int oy = y0; oy < y1; ++oy) {
                        double* grow = gplane + static_cast<long>(oy + ky - pad) * wd + (kx - pad);
                        const double* src = row.data() + static_cast<long>(oy) * ow;
                        for (int ox = x0; ox < x1; ++ox) grow[ox] += src[ox];
                    }
                }
            }
        }
        return;
    }
#pragma omp parallel for schedule(static) if (macs > kParallelMacs)
    for (int ci = 0; ci < ci_n; ++ci) {
        double* gplane = gin + static_cast<long>(ci) * h * wd;
        for (int co = 0; co < co_n; ++co) {
            const double* goplane = gout + static_cast<long>(co) * oh * ow;
            const double* wk = w + ((static_cast<long>(co) * ci_n + ci) * k) * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    double wv = wk[ky * k + kx];
                    int y0 = std::max(0, pad - ky);
                    int y1 = std::min(oh, h + pad - ky);
                    int x0 = std::max(0, pad - kx);
                    int x1 = std::min(ow, wd + pad - kx);
                    for (int oy = y0; oy < y1; ++oy) {
                        double* grow = gplane + static_cast<long>(oy + ky - pad) * wd + (kx - pad);
                        const double* gorow = goplane + static_cast<long>(oy) * ow;
                        for (int ox = x0; ox < x1; ++ox) grow[ox] += wv * gorow[ox];
                    }
                }
            }
        }
    }
}

void conv2d_backward_weight(const double* gout, const double* in, double* gw, double* gb,
                            int ci_n, int h, int wd, int co_n, int k, int pad, int oh, int ow) {
    long macs = static_cast<long>(co_n) * ci_n * k * k * oh * ow;
    const long s_n = static_cast<long>(oh) * ow;
    if (gw && use_gemm_path(ci_n, k, s_n)) {
        const long r_n = static_cast<long>(ci_n) * k * k;
        std::vector<double> patches;
        build_patches(patches, in, ci_n, h, wd, k, pad, oh, ow);
        std::vector<double> patches_t(r_n * s_n, 0.0);
        for (long r = 0; r < r_n; ++r)
            for (long s = 0; s < s_n; ++s) patches_t[s * r_n + r] = patches[r * s_n + s];
#pragma omp parallel for schedule(static) if (macs > kParallelMacs)
        for (int co = 0; co < co_n; ++co) {
            const double* gorow = gout + static_cast<long>(co) * s_n;
            if (gb) {
                double acc = 0.0;
                for (long s = 0; s < s_n; ++s) acc += gorow[s];
                gb[co] += acc;
            }
            double* gwrow = gw + static_cast<long>(co) * r_n;
            for (long s = 0; s < s_n; ++s) {
                double gv = gorow[s];
                const double* prow = patches_t.data() + s * r_n;
                for (long r = 0; r < r_n; ++r) gwrow[r] += gv * prow[r];
            }
        }
        return;
    }
#pragma omp parallel for schedule(static) if (macs > kParallelMacs)
    for (int co = 0; co < co_n; ++co) {
        const double* goplane = gout + static_cast<long>(co) * oh * ow;
        if (gb) {
            double s = 0.0;
            for (long i = 0; i < static_cast<long>(oh) * ow; ++i) s += goplane[i];
            gb[co] += s;
        }
        if (!gw) continue;
        for (int ci = 0; ci < ci_n; ++ci) {
            const double* iplane = in + static_cast<long>(ci) * h * wd;
            double* gwk = gw + ((static_cast<long>(co) * ci_n + ci) * k) * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    int y0 = std::max(0, pad - ky);
                    int y1 = std::min(oh, h + pad - ky);
                    int x0 = std::max(0, pad - kx);
                    int x1 = std::min(ow, wd + pad - kx);
                    double s = 0.0;
                    for (int oy = y0; oy < y1; ++oy) {
                        const double* irow = iplane + static_cast<long>(oy + ky - pad) * wd + (kx - pad);
                        const double* gorow = goplane + static_cast<long>(oy) * ow;
                        for (int ox = x0; ox < x1; ++ox) s += irow[ox] * gorow[ox];
                    }
                    gwk[ky * k + kx] += s;
                }
            }
        }
    }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int padding) {
    if (input.shape().size() != 3) throw ShapeError("conv2d: input must be CxHxW");
    if (weight.shape().size() != 4) throw ShapeError("conv2d: weight must be CoxCixkxk");
    const int ci_n = input.shape()[0], h = input.shape()[1], wd = input.shape()[2];
    const int co_n = weight.shape()[0], k = weight.shape()[2];
    if (weight.shape()[1] != ci_n)
        throw ShapeError("conv2d: weight expects " + std::to_string(weight.shape()[1]) +
                         " input channels, got " + std::to_string(ci_n));
    if (weight.shape()[3] != k || k % 2 == 0) throw ShapeError("conv2d: kernel must be square and odd");
    if (bias.size() != co_n) throw ShapeError("conv2d: bias size mismatch");
    if (padding < 0) throw ShapeError("conv2d: negative padding");
    const int oh = h + 2 * padding - k + 1;
    const int ow = wd + 2 * padding - k + 1;
    if (oh <= 0 || ow <= 0) throw ShapeError("conv2d: kernel larger than padded input");

    Tensor out = Tensor::zeros({co_n, oh, ow});
    conv2d_forward_kernel(input.values().data(), weight.values().data(), bias.values().data(),
                          out.values_mut().data(), ci_n, h, wd, co_n, k, padding, oh, ow);

    Tensor in_t = input, w_t = weight, b_t = bias;
    detail::record_op({input, weight, bias}, out, [in_t, w_t, b_t, out, ci_n, h, wd, co_n, k,
                                                   padding, oh, ow]() mutable {
        const double* g = out.grad().data();
        if (in_t.requires_grad())
            conv2d_backward_input(g, w_t.values().data(), in_t.grad_mut().data(), ci_n, h, wd,
                                  co_n, k, padding, oh, ow);
        if (w_t.requires_grad() || b_t.requires_grad())
            conv2d_backward_weight(g, in_t.values().data(),
                                   w_t.requires_grad() ? w_t.grad_mut().data() : nullptr,
                                   b_t.requires_grad() ? b_t.grad_mut().data() : nullptr, ci_n, h,
                                   wd, co_n, k, padding, oh, ow);
    });
    return out;
}

// ---------------------------------------------------------------- structural

Tensor concat_channels(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_channels: empty part list");
    int h = parts[0].shape()[1], w = parts[0].shape()[2];
    int c_total = 0;
    for (const auto& p : parts) {
        if (p.shape().size() != 3) throw ShapeError("concat_channels: parts must be CxHxW");
        if (p.shape()[1] != h || p.shape()[2] != w)
            throw ShapeError("concat_channels: spatial mismatch " + shape_str(p.shape()));
        c_total += p.shape()[0];
    }
    std::vector<double> vals;
    vals.reserve(static_cast<long>(c_total) * h * w);
    for (const auto& p : parts) vals.insert(vals.end(), p.values().begin(), p.values().end());
    Tensor out = Tensor::from({c_total, h, w}, std::move(vals));
    std::vector<Tensor> ins = parts;
    detail::record_op(ins, out, [ins, out]() mutable {
        const auto& g = out.grad();
        std::size_t off = 0;
        for (auto& p : ins) {
            std::size_t n = p.values().size();
            if (p.requires_grad()) {
                auto& pg = p.grad_mut();
                for (std::size_t i = 0; i < n; ++i) pg[i] += g[off + i];
            }
            off += n;
        }
    });
    return out;
}

Tensor slice_channels(const Tensor& a, int c0, int c1) {
    if (a.shape().size() != 3) throw ShapeError("slice_channels: input must be CxHxW");
    int c = a.shape()[0], h = a.shape()[1], w = a.shape()[2];
    if (c0 < 0 || c1 > c || c0 >= c1) throw ShapeError("slice_channels: bad channel range");
    long plane = static_cast<long>(h) * w;
    std::vector<double> vals(a.values().begin() + c0 * plane, a.values().begin() + c1 * plane);
    Tensor out = Tensor::from({c1 - c0, h, w}, std::move(vals));
    Tensor ain = a;
    detail::record_op({a}, out, [ain, out, c0, plane]() mutable {
        if (!ain.requires_grad()) return;
        const auto& g = out.grad();
        auto& ag = ain.grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) ag[c0 * plane + i] += g[i];
    });
    return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (numel(shape) != a.size())
        throw ShapeError("reshape: element count mismatch " + shape_str(a.shape()) + " -> " +
                         shape_str(shape));
    Tensor out = Tensor::from(std::move(shape), a.values());
    Tensor ain = a;
    detail::record_op({a}, out, [ain, out]() mutable {
        if (!ain.requires_grad()) return;
        const auto& g = out.grad();
        auto& ag = ain.grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) ag[i] += g[i];
    });
    return out;
}

Tensor max_pool2(const Tensor& a) {
    if (a.shape().size() != 3) throw ShapeError("max_pool2: input must be CxHxW");
    int c = a.shape()[0], h = a.shape()[1], w = a.shape()[2];
    if (h % 2 || w % 2) throw ShapeError("max_pool2: extents must be even, got " + shape_str(a.shape()));
    int oh = h / 2, ow = w / 2;
    std::vector<double> vals(static_cast<long>(c) * oh * ow);
    std::vector<int> argmax(vals.size());  // flat index into the input plane
    const double* in = a.values().data();
    for (int ch = 0; ch < c; ++ch) {
        const double* ip = in + static_cast<long>(ch) * h * w;
        double* op = vals.data() + static_cast<long>(ch) * oh * ow;
        int* ap = argmax.data() + static_cast<long>(ch) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                int base = 2 * oy * w + 2 * ox;
                // ties resolved to the first candidate in row-major order
                int cand[4] = {base, base + 1, base + w, base + w + 1};
                int best = cand[0];
                for (int i = 1; i < 4; ++i)
                    if (ip[cand[i]] > ip[best]) best = cand[i];
                op[oy * ow + ox] = ip[best];
                ap[oy * ow + ox] = best;
            }
        }
    }
    Tensor out = Tensor::from({c, oh, ow}, std::move(vals));
    Tensor ain = a;
    detail::record_op({a}, out, [ain, out, argmax, c, h, w, oh, ow]() mutable {
        if (!ain.requires_grad()) return;
        const auto& g = out.grad();
        auto& ag = ain.grad_mut();
        for (int ch = 0; ch < c; ++ch) {
            long obase = static_cast<long>(ch) * oh * ow;
            long ibase = static_cast<long>(ch) * h * w;
            for (long i = 0; i < static_cast<long>(oh) * ow; ++i)
                ag[ibase + argmax[obase + i]] += g[obase + i];
        }
    });
    return out;
}

namespace {

// align-corners-false sampling for factor-2 upsampling: src = dst/2 - 0.25
struct LinWeights {
    std::vector<int> i0, i1;
    std::vector<double> w0, w1;
};

LinWeights upsample_weights(int n) {
    LinWeights lw;
    lw.i0.resize(2 * n);
    lw.i1.resize(2 * n);
    lw.w0.resize(2 * n);
    lw.w1.resize(2 * n);
    for (int d = 0; d < 2 * n; ++d) {
        double src = 0.5 * (d + 0.5) - 0.5;
        int lo = static_cast<int>(std::floor(src));
        double frac = src - lo;
        int hi = lo + 1;
        lw.i0[d] = std::clamp(lo, 0, n - 1);
        lw.i1[d] = std::clamp(hi, 0, n - 1);
        lw.w0[d] = 1.0 - frac;
        lw.w1[d] = frac;
    }
    return lw;
}

}  // namespace

Tensor bilinear_upsample2(const Tensor& a) {
    if (a.shape().size() != 3) throw ShapeError("bilinear_upsample2: input must be CxHxW");
    int c = a.shape()[0], h = a.shape()[1], w = a.shape()[2];
    int oh = 2 * h, ow = 2 * w;
    LinWeights wy = upsample_weights(h), wx = upsample_weights(w);
    std::vector<double> vals(static_cast<long>(c) * oh * ow);
    const double* in = a.values().data();
    for (int ch = 0; ch < c; ++ch) {
        const double* ip = in + static_cast<long>(ch) * h * w;
        double* op = vals.data() + static_cast<long>(ch) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            const double* r0 = ip + static_cast<long>(wy.i0[oy]) * w;
            const double* r1 = ip + static_cast<long>(wy.i1[oy]) * w;
            double wy0 = wy.w0[oy], wy1 = wy.w1[oy];
            for (int ox = 0; ox < ow; ++ox) {
                double top = wy0 * r0[wx.i0[ox]] + wy1 * r1[wx.i0[ox]];
                double bot = wy0 * r0[wx.i1[ox]] + wy1 * r1[wx.i1[ox]];
                op[oy * ow + ox] = wx.w0[ox] * top + wx.w1[ox] * bot;
            }
        }
    }
    Tensor out = Tensor::from({c, oh, ow}, std::move(vals));
    Tensor ain = a;
    detail::record_op({a}, out, [ain, out, wy, wx, c, h, w, oh, ow]() mutable {
        if (!ain.requires_grad()) return;
        const auto& g = out.grad();
        auto& ag = ain.grad_mut();
        for (int ch = 0; ch < c; ++ch) {
            const double* gp = g.data() + static_cast<long>(ch) * oh * ow;
            double* ap = ag.data() + static_cast<long>(ch) * h * w;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    double gv = gp[oy * ow + ox];
                    ap[wy.i0[oy] * w + wx.i0[ox]] += gv * wy.w0[oy] * wx.w0[ox];
                    ap[wy.i1[oy] * w + wx.i0[ox]] += gv * wy.w1[oy] * wx.w0[ox];
                    ap[wy.i0[oy] * w + wx.i1[ox]] += gv * wy.w0[oy] * wx.w1[ox];
                    ap[wy.i1[oy] * w + wx.i1[ox]] += gv * wy.w1[oy] * wx.w1[ox];
                }
            }
        }
    });
    return out;
}

Tensor subsample2(const Tensor& a) {
    if (a.shape().size() != 3) throw ShapeError("subsample2: input must be CxHxW");
    int c = a.shape()[0], h = a.shape()[1], w = a.shape()[2];
    int oh = (h + 1) / 2, ow = (w + 1) / 2;
    std::vector<double> vals(static_cast<long>(c) * oh * ow);
    const double* in = a.values().data();
    for (int ch = 0; ch < c; ++ch)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                vals[(static_cast<long>(ch) * oh + oy) * ow + ox] =
                    in[(static_cast<long>(ch) * h + 2 * oy) * w + 2 * ox];
    Tensor out = Tensor::from({c, oh, ow}, std::move(vals));
    Tensor ain = a;
    detail::record_op({a}, out, [ain, out, c, h, w, oh, ow]() mutable {
        if (!ain.requires_grad()) return;
        const auto& g = out.grad();
        auto& ag = ain.grad_mut();
        for (int ch = 0; ch < c; ++ch)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox)
                    ag[(static_cast<long>(ch) * h + 2 * oy) * w + 2 * ox] +=
                        g[(static_cast<long>(ch) * oh + oy) * ow + ox];
    });
    return out;
}

}  // namespace midgap
