#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "robotseg/errors.hpp"

namespace robotseg {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tape;

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;      // empty until first backward touches it
    std::uint64_t tape_epoch = 0;  // epoch of the record that owns `node`
    int node = -1;
};

// Dense f64 tensor. Copies share storage; ops always allocate fresh outputs.
class Tensor {
public:
    Tensor() : impl_(std::make_shared<TensorImpl>()) {}
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
    static Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0); }

    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t dim(std::size_t i) const;
    std::size_t size() const { return impl_->data.size(); }

    std::vector<double>& data() { return impl_->data; }
    const std::vector<double>& data() const { return impl_->data; }

    double item() const;
    double& at(std::size_t flat);
    double at(std::size_t flat) const;
    double& operator()(std::size_t i) { return at(i); }
    double& operator()(std::size_t i, std::size_t j);
    double& operator()(std::size_t i, std::size_t j, std::size_t k);
    double& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l);
    double operator()(std::size_t i) const { return at(i); }
    double operator()(std::size_t i, std::size_t j) const;
    double operator()(std::size_t i, std::size_t j, std::size_t k) const;
    double operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const;

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool b = true);

    // Accumulated gradient as a tensor (zeros if backward never reached this leaf).
    Tensor grad() const;
    std::vector<double>& grad_data();
    void zero_grad();

    // Value copy detached from any record and from this tensor's storage.
    Tensor detach() const;

    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

// Append-only record of tensor operations. Constructing one makes it the
// active record for the current thread; ops executed while it is active
// register themselves. backward() runs one reverse sweep, adds gradients
// into the grad buffers of grad-enabled leaves, and consumes the record.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    std::uint64_t epoch() const { return epoch_; }
    std::size_t node_count() const { return nodes_.size(); }

    // Node id of t on this record; registers a leaf when t requires grad.
    // Returns -1 for constants.
    int input_node(const Tensor& t);

    // Register an op output. backprop(tape, self_node) reads tape.grad(self_node)
    // and accumulates into the input nodes' buffers.
    int record(std::vector<int> inputs, std::size_t out_size,
               std::function<void(Tape&, int)> backprop);

    // Mark t as the output of `node` on this record.
    void attach(Tensor& t, int node);

    std::vector<double>& grad(int node);

    void backward(const Tensor& loss);

private:
    struct Node {
        std::vector<int> inputs;
        std::size_t size;
        std::function<void(Tape&, int)> backprop;  // null for leaves
        std::shared_ptr<TensorImpl> leaf;          // set for leaves only
    };
    std::vector<Node> nodes_;
    std::vector<std::vector<double>> grads_;
    std::uint64_t epoch_;
};

void backward(const Tensor& loss);

// ---- elementwise / broadcast ----
Shape broadcast_shape(const Shape& a, const Shape& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double s) { return add(a, Tensor::scalar(s)); }
inline Tensor operator-(const Tensor& a, double s) { return sub(a, Tensor::scalar(s)); }
inline Tensor operator*(const Tensor& a, double s) { return mul(a, Tensor::scalar(s)); }
inline Tensor operator/(const Tensor& a, double s) { return div(a, Tensor::scalar(s)); }
inline Tensor operator+(double s, const Tensor& a) { return add(Tensor::scalar(s), a); }
inline Tensor operator-(double s, const Tensor& a) { return sub(Tensor::scalar(s), a); }
inline Tensor operator*(double s, const Tensor& a) { return mul(Tensor::scalar(s), a); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// ---- shape ----
Tensor reshape(const Tensor& t, Shape shape);
Tensor transpose(const Tensor& t);                       // 2-D
Tensor slice_rows(const Tensor& t, std::size_t r0, std::size_t r1);  // first axis [r0, r1)
Tensor concat_rows(const std::vector<Tensor>& parts);    // first axis

// ---- unary ----
Tensor sigmoid(const Tensor& t);
Tensor relu(const Tensor& t);
Tensor exp(const Tensor& t);
Tensor log(const Tensor& t);
Tensor sqrt(const Tensor& t);
Tensor pow_scalar(const Tensor& t, double p);
Tensor clamp(const Tensor& t, double lo, double hi);  // zero gradient outside [lo, hi]

// ---- reductions ----
Tensor sum(const Tensor& t);   // scalar
Tensor mean(const Tensor& t);  // scalar

// ---- linear algebra / nn ----
Tensor matmul(const Tensor& a, const Tensor& b);        // [m,k]x[k,n]
Tensor softmax(const Tensor& t, std::size_t axis);
// Single-head scaled dot-product attention: q [Lq,d], k [Lk,d], v [Lk,dv].
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v);
// Cosine similarity of two rank-1 vectors; constant 0 when either norm < 1e-12.
Tensor cosine(const Tensor& a, const Tensor& b);

// x [C,H,W], k [C,kh,kw], odd kernel, zero-padded 'same'.
Tensor depthwise_conv2d(const Tensor& x, const Tensor& k);
// x [Cin,H,W], w [Cout,Cin,kh,kw], b [Cout], odd kernel, zero-padded 'same'.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b);
// x [Cin,H,W], w [Cin,Cout,2,2], b [Cout], stride 2 -> [Cout,2H,2W].
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b);
// t [H,W], non-overlapping k x k mean; H, W divisible by k.
Tensor avg_pool2d(const Tensor& t, std::size_t k);
// t [H,W] -> [sH,sW], bilinear, half-pixel centers, edge clamp.
Tensor upsample_bilinear(const Tensor& t, std::size_t s);

}  // namespace robotseg
