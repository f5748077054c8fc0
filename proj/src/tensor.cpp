#include "robotseg/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

namespace robotseg {

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

namespace {

void require_shape_valid(const Shape& s) {
    if (s.empty()) throw DimensionError("tensor shape must have rank >= 1");
    for (std::size_t d : s)
        if (d == 0) throw DimensionError("tensor dimension of size 0 in " + shape_str(s));
}

void require_rank(const Tensor& t, std::size_t r, const char* what) {
    if (t.rank() != r)
        throw DimensionError(std::string(what) + ": expected rank " + std::to_string(r) +
                             ", got " + shape_str(t.shape()));
}

std::atomic<std::uint64_t> g_epoch_counter{1};
thread_local Tape* g_active_tape = nullptr;

std::uint64_t next_epoch() { return g_epoch_counter.fetch_add(1); }

}  // namespace

Tensor::Tensor(Shape shape, double fill) : impl_(std::make_shared<TensorImpl>()) {
    require_shape_valid(shape);
    impl_->shape = std::move(shape);
    impl_->data.assign(shape_numel(impl_->shape), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : impl_(std::make_shared<TensorImpl>()) {
    require_shape_valid(shape);
    if (shape_numel(shape) != values.size())
        throw DimensionError("tensor data size " + std::to_string(values.size()) +
                             " does not match shape " + shape_str(shape));
    impl_->shape = std::move(shape);
    impl_->data = std::move(values);
}

std::size_t Tensor::dim(std::size_t i) const {
    if (i >= rank()) throw DimensionError("axis " + std::to_string(i) + " out of range for " + shape_str(shape()));
    return impl_->shape[i];
}

double Tensor::item() const {
    if (size() != 1) throw ContractError("item() requires a single-element tensor, got " + shape_str(shape()));
    return impl_->data[0];
}

double& Tensor::at(std::size_t flat) {
    if (flat >= size()) throw DimensionError("flat index out of range");
    return impl_->data[flat];
}

double Tensor::at(std::size_t flat) const {
    if (flat >= size()) throw DimensionError("flat index out of range");
    return impl_->data[flat];
}

double& Tensor::operator()(std::size_t i, std::size_t j) {
    if (rank() != 2) throw DimensionError("2-index access on " + shape_str(shape()));
    return impl_->data[i * dim(1) + j];
}
double Tensor::operator()(std::size_t i, std::size_t j) const {
    return const_cast<Tensor*>(this)->operator()(i, j);
}
double& Tensor::operator()(std::size_t i, std::size_t j, std::size_t k) {
    if (rank() != 3) throw DimensionError("3-index access on " + shape_str(shape()));
    return impl_->data[(i * dim(1) + j) * dim(2) + k];
}
double Tensor::operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return const_cast<Tensor*>(this)->operator()(i, j, k);
}
double& Tensor::operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    if (rank() != 4) throw DimensionError("4-index access on " + shape_str(shape()));
    return impl_->data[((i * dim(1) + j) * dim(2) + k) * dim(3) + l];
}
double Tensor::operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return const_cast<Tensor*>(this)->operator()(i, j, k, l);
}

Tensor& Tensor::set_requires_grad(bool b) {
    impl_->requires_grad = b;
    return *this;
}

Tensor Tensor::grad() const {
    Tensor g(impl_->shape, 0.0);
    if (!impl_->grad.empty()) g.impl_->data = impl_->grad;
    return g;
}

std::vector<double>& Tensor::grad_data() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
    return impl_->grad;
}

void Tensor::zero_grad() {
    impl_->grad.assign(impl_->data.size(), 0.0);
}

Tensor Tensor::detach() const {
    return Tensor(impl_->shape, impl_->data);
}

// ---- Tape ----

Tape::Tape() : epoch_(next_epoch()) {
    if (g_active_tape)
        throw ContractError("a computation record is already active on this thread");
    g_active_tape = this;
}

Tape::~Tape() {
    if (g_active_tape == this) g_active_tape = nullptr;
}

Tape* Tape::active() { return g_active_tape; }

int Tape::input_node(const Tensor& t) {
    TensorImpl& impl = *t.impl();
    if (impl.node >= 0 && impl.tape_epoch == epoch_) return impl.node;
    if (!impl.requires_grad) return -1;
    nodes_.push_back(Node{{}, impl.data.size(), nullptr, t.impl()});
    impl.node = static_cast<int>(nodes_.size() - 1);
    impl.tape_epoch = epoch_;
    return impl.node;
}

int Tape::record(std::vector<int> inputs, std::size_t out_size,
                 std::function<void(Tape&, int)> backprop) {
    nodes_.push_back(Node{std::move(inputs), out_size, std::move(backprop), nullptr});
    return static_cast<int>(nodes_.size() - 1);
}

void Tape::attach(Tensor& t, int node) {
    t.impl()->node = node;
    t.impl()->tape_epoch = epoch_;
}

std::vector<double>& Tape::grad(int node) { return grads_[node]; }

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1) throw ContractError("backward requires a scalar loss");
    const TensorImpl& li = *loss.impl();
    if (li.node < 0 || li.tape_epoch != epoch_)
        throw ContractError("loss is not connected to the active computation record");

    grads_.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) grads_[i].assign(nodes_[i].size, 0.0);
    grads_[li.node][0] = 1.0;

    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i)
        if (nodes_[i].backprop) nodes_[i].backprop(*this, i);

    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!nodes_[i].leaf) continue;
        TensorImpl& leaf = *nodes_[i].leaf;
        if (leaf.grad.empty()) leaf.grad.assign(leaf.data.size(), 0.0);
        const auto& g = grads_[i];
        for (std::size_t j = 0; j < g.size(); ++j) leaf.grad[j] += g[j];
    }

    // Consumed: stale node ids on tensors are invalidated by the epoch bump.
    nodes_.clear();
    grads_.clear();
    epoch_ = next_epoch();
}

void backward(const Tensor& loss) {
    Tape* t = Tape::active();
    if (!t) throw ContractError("backward requires an active computation record");
    t->backward(loss);
}

// ---- broadcast machinery ----

Shape broadcast_shape(const Shape& a, const Shape& b) {
    std::size_t r = std::max(a.size(), b.size());
    Shape out(r);
    for (std::size_t i = 0; i < r; ++i) {
        std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
        std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
        if (da != db && da != 1 && db != 1)
            throw DimensionError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        out[i] = std::max(da, db);
    }
    return out;
}

namespace {

// Strides of `in` aligned to broadcast result `out`; 0 on broadcast dims.
std::vector<std::size_t> bcast_strides(const Shape& out, const Shape& in) {
    std::vector<std::size_t> st(out.size(), 0);
    std::size_t acc = 1;
    for (std::size_t i = 0; i < in.size(); ++i) {
        std::size_t d = in.size() - 1 - i;
        std::size_t o = out.size() - 1 - i;
        st[o] = (in[d] == 1) ? 0 : acc;
        acc *= in[d];
    }
    return st;
}

template <class F>
void for_each_bcast(const Shape& out, const Shape& a, const Shape& b, F&& f) {
    std::size_t n = shape_numel(out);
    std::vector<std::size_t> sa = bcast_strides(out, a);
    std::vector<std::size_t> sb = bcast_strides(out, b);
    std::size_t r = out.size();
    std::vector<std::size_t> idx(r, 0);
    std::size_t ao = 0, bo = 0;
    for (std::size_t i = 0; i < n; ++i) {
        f(i, ao, bo);
        for (std::size_t d = r; d-- > 0;) {
            ++idx[d];
            ao += sa[d];
            bo += sb[d];
            if (idx[d] < out[d]) break;
            ao -= sa[d] * out[d];
            bo -= sb[d] * out[d];
            idx[d] = 0;
        }
    }
}

// fwd(av, bv) -> out value; dfa/dfb(g, av, bv) -> gradient contributions.
template <class Fwd, class Dfa, class Dfb>
Tensor binary_op(const Tensor& a, const Tensor& b, Fwd fwd, Dfa dfa, Dfb dfb) {
    Shape os = broadcast_shape(a.shape(), b.shape());
    Tensor out(os, 0.0);
    const auto& ad = a.data();
    const auto& bd = b.data();
    auto& od = out.data();
    if (a.shape() == b.shape()) {
        for (std::size_t i = 0; i < od.size(); ++i) od[i] = fwd(ad[i], bd[i]);
    } else {
        for_each_bcast(os, a.shape(), b.shape(),
                       [&](std::size_t i, std::size_t ao, std::size_t bo) { od[i] = fwd(ad[ao], bd[bo]); });
    }
    Tape* tape = Tape::active();
    if (!tape) return out;
    int na = tape->input_node(a);
    int nb = tape->input_node(b);
    if (na < 0 && nb < 0) return out;
    auto ai = a.impl();
    auto bi = b.impl();
    int node = tape->record({na, nb}, out.size(), [=](Tape& tp, int self) {
        const auto& g = tp.grad(self);
        std::vector<double>* ga = na >= 0 ? &tp.grad(na) : nullptr;
        std::vector<double>* gb = nb >= 0 ? &tp.grad(nb) : nullptr;
        for_each_bcast(os, ai->shape, bi->shape, [&](std::size_t i, std::size_t ao, std::size_t bo) {
            if (ga) (*ga)[ao] += dfa(g[i], ai->data[ao], bi->data[bo]);
            if (gb) (*gb)[bo] += dfb(g[i], ai->data[ao], bi->data[bo]);
        });
    });
    tape->attach(out, node);
    return out;
}

template <class Fwd, class Dfx>
Tensor unary_op(const Tensor& a, Fwd fwd, Dfx dfx) {
    Tensor out(a.shape(), 0.0);
    const auto& ad = a.data();
    auto& od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = fwd(ad[i]);
    Tape* tape = Tape::active();
    if (!tape) return out;
    int na = tape->input_node(a);
    if (na < 0) return out;
    auto ai = a.impl();
    auto oi = out.impl();
    int node = tape->record({na}, out.size(), [=](Tape& tp, int self) {
        const auto& g = tp.grad(self);
        auto& ga = tp.grad(na);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += dfx(g[i], ai->data[i], oi->data[i]);
    });
    tape->attach(out, node);
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, [](double x, double y) { return x + y; },
        [](double g, double, double) { return g; }, [](double g, double, double) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, [](double x, double y) { return x - y; },
        [](double g, double, double) { return g; }, [](double g, double, double) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, [](double x, double y) { return x * y; },
        [](double g, double, double y) { return g * y; }, [](double g, double x, double) { return g * x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, [](double x, double y) { return x / y; },
        [](double g, double, double y) { return g / y; },
        [](double g, double x, double y) { return -g * x / (y * y); });
}

Tensor neg(const Tensor& a) {
    return unary_op(
        a, [](double x) { return -x; }, [](double g, double, double) { return -g; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double g, double, double y) { return g * y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
    return unary_op(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double g, double x, double) { return x > 0.0 ? g : 0.0; });
}

Tensor exp(const Tensor& a) {
    return unary_op(
        a, [](double x) { return std::exp(x); }, [](double g, double, double y) { return g * y; });
}

Tensor log(const Tensor& a) {
    return unary_op(
        a, [](double x) { return std::log(x); }, [](double g, double x, double) { return g / x; });
}

Tensor sqrt(const Tensor& a) {
    return unary_op(
        a, [](double x) { return std::sqrt(x); },
        [](double g, double, double y) { return g / (2.0 * y); });
}

Tensor pow_scalar(const Tensor& a, double p) {
    return unary_op(
        a, [p](double x) { return std::pow(x, p); },
        [p](double g, double x, double) { return g * p * std::pow(x, p - 1.0); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (lo > hi) throw ConfigError("clamp bounds out of order");
    return unary_op(
        a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
        [lo, hi](double g, double x, double) { return (x >= lo && x <= hi) ? g : 0.0; });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    Tensor out({1}, {s});
    Tape* tape = Tape::active();
    if (!tape) return out;
    int na = tape->input_node(a);
    if (na < 0) return out;
    std::size_t n = a.size();
    int node = tape->record({na}, 1, [=](Tape& tp, int self) {
        double g = tp.grad(self)[0];
        auto& ga = tp.grad(na);
        for (std::size_t i = 0; i < n; ++i) ga[i] += g;
    });
    tape->attach(out, node);
    return out;
}

Tensor mean(const Tensor& a) {
    return sum(a) / static_cast<double>(a.size());
}

Tensor reshape(const Tensor& a, Shape shape) {
    require_shape_valid(shape);
    if (shape_numel(shape) != a.size())
        throw DimensionError("cannot reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
    Tensor out(shape, a.data());
    Tape* tape = Tape::active();
    if (!tape) return out;
    int na = tape->input_node(a);
    if (na < 0) return out;
    int node = tape->record({na}, out.size(), [=](Tape& tp, int self) {
        const auto& g = tp.grad(self);
        auto& ga = tp.grad(na);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
    tape->attach(out, node);
    return out;
}

Tensor transpose(const Tensor& a) {
    require_rank(a, 2, "transpose");
    std::size_t m = a.dim(0), n = a.dim(1);
    Tensor out({n, m}, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.data()[j * m + i] = a.data()[i * n + j];
    Tape* tape = Tape::active();
    if (!tape) return out;
    int na = tape->input_node(a);
    if (na < 0) return out;
    int node = tape->record({na}, out.size(), [=](Tape& tp, int self) {
        const auto& g = tp.grad(self);
        auto& ga = tp.grad(na);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    });
    tape->attach(out, node);
    return out;
}

Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1) {
    if (r0 >= r1 || r1 > a.dim(0))
        throw ContractError("slice_rows [" + std::to_string(r0) + "," + std::to_string(r1) +
                            ") invalid for " + shape_str(a.shape()));
    std::size_t row = a.size() / a.dim(0);
    Shape os = a.shape();
    os[0] = r1 - r0;
    Tensor out(os, std::vector<double>(a.data().begin() + r0 * row, a.data().begin() + r1 * row));
    Tape* tape = Tape::active();
    if (!tape) return out;
    int na = tape->input_node(a);
    if (na < 0) return out;
    int node = tape->record({na}, out.size(), [=](Tape& tp, int self) {
        const auto& g = tp.grad(self);
        auto& ga = tp.grad(na);
        for (std::size_t i = 0; i < g.size(); ++i) ga[r0 * row + i] += g[i];
    });
    tape->attach(out, node);
    return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_rows on empty list");
    Shape os = parts[0].shape();
    std::size_t rows = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != os.size())
            throw DimensionError("concat_rows rank mismatch: " + shape_str(p.shape()));
        for (std::size_t d = 1; d < os.size(); ++d)
            if (p.shape()[d] != os[d])
                throw DimensionError("concat_rows trailing shape mismatch: " + shape_str(p.shape()) +
                                     " vs " + shape_str(os));
        rows += p.dim(0);
    }
    os[0] = rows;
    Tensor out(os, 0.0);
    std::size_t off = 0;
    for (const Tensor& p : parts) {
        std::copy(p.data().begin(), p.data().end(), out.data().begin() + off);
        off += p.size();
    }
    Tape* tape = Tape::active();
    if (!tape) return out;
    std::vector<int> ns(parts.size());
    bool any = false;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        ns[i] = tape->input_node(parts[i]);
        any = any || ns[i] >= 0;
    }
    if (!any) return out;
    std::vector<std::size_t> sizes(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) sizes[i] = parts[i].size();
    int node = tape->record(ns, out.size(), [=](Tape& tp, int self) {
        const auto& g = tp.grad(self);
        std::size_t o = 0;
        for (std::size_t i = 0; i < ns.size(); ++i) {
            if (ns[i] >= 0) {
                auto& ga = tp.grad(ns[i]);
                for (std::size_t j = 0; j < sizes[i]; ++j) ga[j] += g[o + j];
            }
            o += sizes[i];
        }
    });
    tape->attach(out, node);
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul lhs");
    require_rank(b, 2, "matmul rhs");
    if (a.dim(1) != b.dim(0))
        throw DimensionError("matmul shape mismatch: " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out({m, n}, 0.0);
    const auto& ad = a.data();
    const auto& bd = b.data();
    auto& od = out.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < k; ++l) {
            double av = ad[i * k + l];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) od[i * n + j] += av * bd[l * n + j];
        }
    Tape* tape = Tape::active();
    if (!tape) return out;
    int na = tape->input_node(a);
    int nb = tape->input_node(b);
    if (na < 0 && nb < 0) return out;
    auto ai = a.impl();
    auto bi = b.impl();
    int node = tape->record({na, nb}, out.size(), [=](Tape& tp, int self) {
        const auto& g = tp.grad(self);
        if (na >= 0) {
            auto& ga = tp.grad(na);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t l = 0; l < k; ++l) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bi->data[l * n + j];
                    ga[i * k + l] += s;
                }
        }
        if (nb >= 0) {
            auto& gb = tp.grad(nb);
            for (std::size_t l = 0; l < k; ++l)
                for (std::size_t j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < m; ++i) s += ai->data[i * k + l] * g[i * n + j];
                    gb[l * n + j] += s;
                }
        }
    });
    tape->attach(out, node);
    return out;
}

Tensor softmax(const Tensor& a, std::size_t axis) {
    if (axis >= a.rank())
        throw DimensionError("softmax axis " + std::to_string(axis) + " out of range for " +
                             shape_str(a.shape()));
    std::size_t len = a.dim(axis);
    std::size_t inner = 1, outer = 1;
    for (std::size_t d = axis + 1; d < a.rank(); ++d) inner *= a.dim(d);
    for (std::size_t d = 0; d < axis; ++d) outer *= a.dim(d);
    Tensor out(a.shape(), 0.0);
    const auto& ad = a.data();
    auto& od = out.data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < inner; ++in) {
            std::size_t base = o * len * inner + in;
            double mx = ad[base];
            for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, ad[base + i * inner]);
            double z = 0.0;
            for (std::size_t i = 0; i < len; ++i) {
                double e = std::exp(ad[base + i * inner] - mx);
                od[base + i * inner] = e;
                z += e;
            }
            for (std::size_t i = 0; i < len; ++i) od[base + i * inner] /= z;
        }
    Tape* tape = Tape::active();
    if (!tape) return out;
    int na = tape->input_node(a);
    if (na < 0) return out;
    auto oi = out.impl();
    int node = tape->record({na}, out.size(), [=](Tape& tp, int self) {
        const auto& g = tp.grad(self);
        auto& ga = tp.grad(na);
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t in = 0; in < inner; ++in) {
                std::size_t base = o * len * inner + in;
                double s = 0.0;
                for (std::size_t i = 0; i < len; ++i)
                    s += g[base + i * inner] * oi->data[base + i * inner];
                for (std::size_t i = 0; i < len; ++i) {
                    std::size_t ix = base + i * inner;
                    ga[ix] += oi->data[ix] * (g[ix] - s);
                }
            }
    });
    tape->attach(out, node);
    return out;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    require_rank(q, 2, "attention queries");
    require_rank(k, 2, "attention keys");
    require_rank(v, 2, "attention values");
    if (q.dim(1) != k.dim(1))
        throw DimensionError("attention q/k width mismatch: " + shape_str(q.shape()) + " vs " +
                             shape_str(k.shape()));
    if (k.dim(0) != v.dim(0))
        throw DimensionError("attention k/v length mismatch: " + shape_str(k.shape()) + " vs " +
                             shape_str(v.shape()));
    double scale = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
    Tensor scores = matmul(q, transpose(k)) * scale;
    return matmul(softmax(scores, 1), v);
}

Tensor cosine(const Tensor& a, const Tensor& b) {
    require_rank(a, 1, "cosine lhs");
    require_rank(b, 1, "cosine rhs");
    if (a.size() != b.size())
        throw DimensionError("cosine length mismatch: " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    double na2 = 0.0, nb2 = 0.0;
    for (double x : a.data()) na2 += x * x;
    for (double x : b.data()) nb2 += x * x;
    if (std::sqrt(na2) < 1e-12 || std::sqrt(nb2) < 1e-12) return Tensor::scalar(0.0);
    Tensor dot = sum(a * b);
    return dot / (sqrt(sum(a * a)) * sqrt(sum(b * b)));
}

Tensor depthwise_conv2d(const Tensor& x, const Tensor& k) {
    require_rank(x, 3, "depthwise_conv2d input");
    require_rank(k, 3, "depthwise_conv2d kernel");
    if (x.dim(0) != k.dim(0))
        throw DimensionError("depthwise_conv2d channel mismatch: " + shape_str(x.shape()) + " vs " +
                             shape_str(k.shape()));
    std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    std::size_t kh = k.dim(1), kw = k.dim(2);
    if (kh % 2 == 0 || kw % 2 == 0)
        throw ConfigError("depthwise_conv2d kernel must be odd, got " + shape_str(k.shape()));
    std::size_t ph = kh / 2, pw = kw / 2;
    Tensor out({C, H, W}, 0.0);
    const auto& xd = x.data();
    const auto& kd = k.data();
    auto& od = out.data();
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j) {
                double s = 0.0;
                for (std::size_t u = 0; u < kh; ++u) {
                    std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i + u) - static_cast<std::ptrdiff_t>(ph);
                    if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(H)) continue;
                    for (std::size_t v = 0; v < kw; ++v) {
                        std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j + v) - static_cast<std::ptrdiff_t>(pw);
                        if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(W)) continue;
                        s += xd[(c * H + ii) * W + jj] * kd[(c * kh + u) * kw + v];
                    }
                }
                od[(c * H + i) * W + j] = s;
            }
    Tape* tape = Tape::active();
    if (!tape) return out;
    int nx = tape->input_node(x);
    int nk = tape->input_node(k);
    if (nx < 0 && nk < 0) return out;
    auto xi = x.impl();
    auto ki = k.impl();
    int node = tape->record({nx, nk}, out.size(), [=](Tape& tp, int self) {
        const auto& g = tp.grad(self);
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < H; ++i)
                for (std::size_t j = 0; j < W; ++j) {
                    double gv = g[(c * H + i) * W + j];
                    if (gv == 0.0) continue;
                    for (std::size_t u = 0; u < kh; ++u) {
                        std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i + u) - static_cast<std::ptrdiff_t>(ph);
                        if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(H)) continue;
                        for (std::size_t v = 0; v < kw; ++v) {
                            std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j + v) - static_cast<std::ptrdiff_t>(pw);
                            if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(W)) continue;
                            std::size_t xoff = (c * H + ii) * W + jj;
                            std::size_t koff = (c * kh + u) * kw + v;
                            if (nx >= 0) tp.grad(nx)[xoff] += gv * ki->data[koff];
                            if (nk >= 0) tp.grad(nk)[koff] += gv * xi->data[xoff];
                        }
                    }
                }
    });
    tape->attach(out, node);
    return out;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_rank(x, 3, "conv2d input");
    require_rank(w, 4, "conv2d weight");
    require_rank(b, 1, "conv2d bias");
    if (x.dim(0) != w.dim(1))
        throw DimensionError("conv2d channel mismatch: " + shape_str(x.shape()) + " vs " +
                             shape_str(w.shape()));
    if (b.dim(0) != w.dim(0))
        throw DimensionError("conv2d bias mismatch: " + shape_str(b.shape()) + " vs " +
                             shape_str(w.shape()));
    std::size_t Ci = x.dim(0), H = x.dim(1), W = x.dim(2);
    std::size_t Co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (kh % 2 == 0 || kw % 2 == 0)
        throw ConfigError("conv2d kernel must be odd, got " + shape_str(w.shape()));
    std::size_t ph = kh / 2, pw = kw / 2;
    Tensor out({Co, H, W}, 0.0);
    const auto& xd = x.data();
    const auto& wd = w.data();
    auto& od = out.data();
    for (std::size_t co = 0; co < Co; ++co)
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j) {
                double s = b.data()[co];
                for (std::size_t ci = 0; ci < Ci; ++ci)
                    for (std::size_t u = 0; u < kh; ++u) {
                        std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i + u) - static_cast<std::ptrdiff_t>(ph);
                        if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(H)) continue;
                        for (std::size_t v = 0; v < kw; ++v) {
                            std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j + v) - static_cast<std::ptrdiff_t>(pw);
                            if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(W)) continue;
                            s += xd[(ci * H + ii) * W + jj] * wd[((co * Ci + ci) * kh + u) * kw + v];
                        }
                    }
                od[(co * H + i) * W + j] = s;
            }
    Tape* tape = Tape::active();
    if (!tape) return out;
    int nx = tape->input_node(x);
    int nw = tape->input_node(w);
    int nb = tape->input_node(b);
    if (nx < 0 && nw < 0 && nb < 0) return out;
    auto xi = x.impl();
    auto wi = w.impl();
    int node = tape->record({nx, nw, nb}, out.size(), [=](Tape& tp, int self) {
        const auto& g = tp.grad(self);
        for (std::size_t co = 0; co < Co; ++co)
            for (std::size_t i = 0; i < H; ++i)
                for (std::size_t j = 0; j < W; ++j) {
                    double gv = g[(co * H + i) * W + j];
                    if (gv == 0.0) continue;
                    if (nb >= 0) tp.grad(nb)[co] += gv;
                    for (std::size_t ci = 0; ci < Ci; ++ci)
                        for (std::size_t u = 0; u < kh; ++u) {
                            std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i + u) - static_cast<std::ptrdiff_t>(ph);
                            if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(H)) continue;
                            for (std::size_t v = 0; v < kw; ++v) {
                                std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j + v) - static_cast<std::ptrdiff_t>(pw);
                                if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(W)) continue;
                                std::size_t xoff = (ci * H + ii) * W + jj;
                                std::size_t woff = ((co * Ci + ci) * kh + u) * kw + v;
                                if (nx >= 0) tp.grad(nx)[xoff] += gv * wi->data[woff];
                                if (nw >= 0) tp.grad(nw)[woff] += gv * xi->data[xoff];
                            }
                        }
                }
    });
    tape->attach(out, node);
    return out;
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_rank(x, 3, "conv_transpose2d input");
    require_rank(w, 4, "conv_transpose2d weight");
    require_rank(b, 1, "conv_transpose2d bias");
    if (x.dim(0) != w.dim(0))
        throw DimensionError("conv_transpose2d channel mismatch: " + shape_str(x.shape()) + " vs " +
                             shape_str(w.shape()));
    if (w.dim(2) != 2 || w.dim(3) != 2)
        throw ConfigError("conv_transpose2d expects a 2x2 kernel, got " + shape_str(w.shape()));
    if (b.dim(0) != w.dim(1))
        throw DimensionError("conv_transpose2d bias mismatch: " + shape_str(b.shape()) + " vs " +
                             shape_str(w.shape()));
    std::size_t Ci = x.dim(0), H = x.dim(1), W = x.dim(2), Co = w.dim(1);
    Tensor out({Co, 2 * H, 2 * W}, 0.0);
    const auto& xd = x.data();
    const auto& wd = w.data();
    auto& od = out.data();
    for (std::size_t co = 0; co < Co; ++co)
        std::fill(od.begin() + co * 4 * H * W, od.begin() + (co + 1) * 4 * H * W, b.data()[co]);
    for (std::size_t ci = 0; ci < Ci; ++ci)
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j) {
                double xv = xd[(ci * H + i) * W + j];
                if (xv == 0.0) continue;
                for (std::size_t co = 0; co < Co; ++co)
                    for (std::size_t u = 0; u < 2; ++u)
                        for (std::size_t v = 0; v < 2; ++v)
                            od[(co * 2 * H + 2 * i + u) * 2 * W + 2 * j + v] +=
                                xv * wd[((ci * Co + co) * 2 + u) * 2 + v];
            }
    Tape* tape = Tape::active();
    if (!tape) return out;
    int nx = tape->input_node(x);
    int nw = tape->input_node(w);
    int nb = tape->input_node(b);
    if (nx < 0 && nw < 0 && nb < 0) return out;
    auto xi = x.impl();
    auto wi = w.impl();
    int node = tape->record({nx, nw, nb}, out.size(), [=](Tape& tp, int self) {
        const auto& g = tp.grad(self);
        if (nb >= 0) {
            auto& gb = tp.grad(nb);
            for (std::size_t co = 0; co < Co; ++co)
                for (std::size_t p = 0; p < 4 * H * W; ++p) gb[co] += g[co * 4 * H * W + p];
        }
        for (std::size_t ci = 0; ci < Ci; ++ci)
            for (std::size_t i = 0; i < H; ++i)
                for (std::size_t j = 0; j < W; ++j) {
                    std::size_t xoff = (ci * H + i) * W + j;
                    for (std::size_t co = 0; co < Co; ++co)
                        for (std::size_t u = 0; u < 2; ++u)
                            for (std::size_t v = 0; v < 2; ++v) {
                                double gv = g[(co * 2 * H + 2 * i + u) * 2 * W + 2 * j + v];
                                std::size_t woff = ((ci * Co + co) * 2 + u) * 2 + v;
                                if (nx >= 0) tp.grad(nx)[xoff] += gv * wi->data[woff];
                                if (nw >= 0) tp.grad(nw)[woff] += gv * xi->data[xoff];
                            }
                }
    });
    tape->attach(out, node);
    return out;
}

Tensor avg_pool2d(const Tensor& t, std::size_t k) {
    require_rank(t, 2, "avg_pool2d input");
    if (k == 0) throw ConfigError("avg_pool2d window must be positive");
    std::size_t H = t.dim(0), W = t.dim(1);
    if (H % k != 0 || W % k != 0)
        throw DimensionError("avg_pool2d: " + shape_str(t.shape()) + " not divisible by " +
                             std::to_string(k));
    std::size_t h = H / k, w = W / k;
    Tensor out({h, w}, 0.0);
    const auto& td = t.data();
    auto& od = out.data();
    double inv = 1.0 / static_cast<double>(k * k);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            double s = 0.0;
            for (std::size_t u = 0; u < k; ++u)
                for (std::size_t v = 0; v < k; ++v) s += td[(i * k + u) * W + j * k + v];
            od[i * w + j] = s * inv;
        }
    Tape* tape = Tape::active();
    if (!tape) return out;
    int nt = tape->input_node(t);
    if (nt < 0) return out;
    int node = tape->record({nt}, out.size(), [=](Tape& tp, int self) {
        const auto& g = tp.grad(self);
        auto& gt = tp.grad(nt);
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) {
                double gv = g[i * w + j] * inv;
                for (std::size_t u = 0; u < k; ++u)
                    for (std::size_t v = 0; v < k; ++v) gt[(i * k + u) * W + j * k + v] += gv;
            }
    });
    tape->attach(out, node);
    return out;
}

namespace {

struct LinSample {
    std::size_t i0, i1;
    double w;  // weight of i1
};

LinSample lin_sample(std::size_t out_i, std::size_t s, std::size_t n) {
    double f = (static_cast<double>(out_i) + 0.5) / static_cast<double>(s) - 0.5;
    if (f <= 0.0) return {0, 0, 0.0};
    if (f >= static_cast<double>(n - 1)) return {n - 1, n - 1, 0.0};
    std::size_t i0 = static_cast<std::size_t>(f);
    return {i0, i0 + 1, f - static_cast<double>(i0)};
}

}  // namespace

Tensor upsample_bilinear(const Tensor& t, std::size_t s) {
    require_rank(t, 2, "upsample_bilinear input");
    if (s == 0) throw ConfigError("upsample_bilinear scale must be positive");
    std::size_t H = t.dim(0), W = t.dim(1);
    std::size_t OH = H * s, OW = W * s;
    Tensor out({OH, OW}, 0.0);
    const auto& td = t.data();
    auto& od = out.data();
    for (std::size_t i = 0; i < OH; ++i) {
        LinSample ri = lin_sample(i, s, H);
        for (std::size_t j = 0; j < OW; ++j) {
            LinSample cj = lin_sample(j, s, W);
            od[i * OW + j] = (1.0 - ri.w) * (1.0 - cj.w) * td[ri.i0 * W + cj.i0] +
                             (1.0 - ri.w) * cj.w * td[ri.i0 * W + cj.i1] +
                             ri.w * (1.0 - cj.w) * td[ri.i1 * W + cj.i0] +
                             ri.w * cj.w * td[ri.i1 * W + cj.i1];
        }
    }
    Tape* tape = Tape::active();
    if (!tape) return out;
    int nt = tape->input_node(t);
    if (nt < 0) return out;
    int node = tape->record({nt}, out.size(), [=](Tape& tp, int self) {
        const auto& g = tp.grad(self);
        auto& gt = tp.grad(nt);
        for (std::size_t i = 0; i < OH; ++i) {
            LinSample ri = lin_sample(i, s, H);
            for (std::size_t j = 0; j < OW; ++j) {
                LinSample cj = lin_sample(j, s, W);
                double gv = g[i * OW + j];
                gt[ri.i0 * W + cj.i0] += gv * (1.0 - ri.w) * (1.0 - cj.w);
                gt[ri.i0 * W + cj.i1] += gv * (1.0 - ri.w) * cj.w;
                gt[ri.i1 * W + cj.i0] += gv * ri.w * (1.0 - cj.w);
                gt[ri.i1 * W + cj.i1] += gv * ri.w * cj.w;
            }
        }
    });
    tape->attach(out, node);
    return out;
}

}  // namespace robotseg
