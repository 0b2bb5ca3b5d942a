#pragma once
#include <functional>
#include <memory>
#include <vector>

#include "midgap/common.hpp"

namespace midgap {

using Shape = std::vector<int>;

inline long numel(const Shape& s) {
    long n = 1;
    for (int d : s) n *= d;
    return n;
}
std::string shape_str(const Shape& s);

struct TensorData {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // allocated iff requires_grad
    bool requires_grad = false;
};

// Value-semantic handle to a shared tensor node. Values are immutable once the
// tensor participates in a recorded graph; only the gradient store mutates.
// Leaf parameters may be rewritten in place between graphs (optimizer steps).
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double v);
    static Tensor from(Shape shape, std::vector<double> values);
    static Tensor scalar(double v);
    // leaf with gradient storage
    static Tensor param(Shape shape, std::vector<double> values);

    bool defined() const { return static_cast<bool>(d_); }
    const Shape& shape() const { return d_->shape; }
    long size() const { return static_cast<long>(d_->values.size()); }
    bool requires_grad() const { return d_->requires_grad; }

    const std::vector<double>& values() const { return d_->values; }
    const std::vector<double>& grad() const { return d_->grad; }
    // in-place access for optimizers, initializers and loaders
    std::vector<double>& values_mut() { return d_->values; }
    std::vector<double>& grad_mut() { return d_->grad; }

    double item() const;
    void zero_grad();
    void set_requires_grad(bool on);

    const std::shared_ptr<TensorData>& data() const { return d_; }
    bool same_storage(const Tensor& other) const { return d_ == other.d_; }

private:
    explicit Tensor(std::shared_ptr<TensorData> d) : d_(std::move(d)) {}
    std::shared_ptr<TensorData> d_;
};

// Reverse-mode tape. Constructing a Graph makes it the active tape for the
// current thread; ops record themselves when any input requires a gradient.
class Graph {
public:
    Graph();
    ~Graph();
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // Seeds d(loss)/d(loss)=1 and pulls gradients back through every recorded
    // op once, in reverse order. Leaf gradients accumulate across calls;
    // op-output gradients are reset at the start of each call.
    void backward(const Tensor& loss);

    std::size_t op_count() const { return entries_.size(); }

    static Graph* active();
    void record(std::shared_ptr<TensorData> out, std::function<void()> pull);

private:
    struct Entry {
        std::shared_ptr<TensorData> out;
        std::function<void()> pull;
    };
    std::vector<Entry> entries_;
};

// Suspends recording while alive (evaluation passes inside a training scope).
struct NoGradScope {
    NoGradScope();
    ~NoGradScope();
};

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor log(const Tensor& a);
Tensor clamp_min(const Tensor& a, double floor);

// ---- reductions (scalar result) ----
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_abs(const Tensor& a);
Tensor sum_sq(const Tensor& a);

// ---- structural ----
// input C_in x H x W, weight C_out x C_in x k x k (k odd), bias C_out
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int padding);
Tensor concat_channels(const std::vector<Tensor>& parts);
Tensor slice_channels(const Tensor& a, int c0, int c1);
Tensor reshape(const Tensor& a, Shape shape);
Tensor max_pool2(const Tensor& a);
Tensor bilinear_upsample2(const Tensor& a);
Tensor subsample2(const Tensor& a);  // keeps even-indexed rows/cols

namespace detail {
// Shared by ops defined outside tensor.cpp (losses, kernel application).
// Marks `out` as requiring grad and records `pull` if a tape is active and
// any of `inputs` requires grad. Returns true when recorded.
bool record_op(const std::vector<Tensor>& inputs, Tensor& out, std::function<void()> pull);
void check_finite(const Tensor& t, const char* op);
}  // namespace detail

}  // namespace midgap
