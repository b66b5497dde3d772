#include "cystonet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace cysto {

void raise(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
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
bool g_checked_mode = true;
thread_local GradTape* g_active_tape = nullptr;

void validate_shape(const Shape& s) {
    for (int d : s)
        if (d <= 0) raise(ErrorKind::Shape, "tensor extents must be positive, got " + shape_str(s));
}
}  // namespace

void set_checked_mode(bool on) { g_checked_mode = on; }
bool checked_mode() { return g_checked_mode; }

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    validate_shape(shape);
    auto node = std::make_shared<TensorNode>();
    node->value.assign(shape_numel(shape), 0.0);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.node_->value.begin(), t.node_->value.end(), v);
    return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    validate_shape(shape);
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
        raise(ErrorKind::Shape, "from_data: " + shape_str(shape) + " does not hold " +
                                    std::to_string(data.size()) + " values");
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->value = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from_data({1}, {v}, requires_grad); }

const Shape& Tensor::shape() const {
    if (!node_) raise(ErrorKind::State, "use of undefined tensor");
    return node_->shape;
}

int Tensor::dim(int axis) const {
    const Shape& s = shape();
    if (axis < 0) axis += static_cast<int>(s.size());
    if (axis < 0 || axis >= static_cast<int>(s.size()))
        raise(ErrorKind::InvalidArgument, "dim: axis out of range");
    return s[axis];
}

std::int64_t Tensor::numel() const { return shape_numel(shape()); }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
    if (!node_) raise(ErrorKind::State, "use of undefined tensor");
    if (!node_->leaf) raise(ErrorKind::State, "requires_grad can only be toggled on leaf tensors");
    node_->requires_grad = on;
}

const std::vector<double>& Tensor::data() const {
    if (!node_) raise(ErrorKind::State, "use of undefined tensor");
    return node_->value;
}

std::vector<double>& Tensor::mutable_data() {
    if (!node_) raise(ErrorKind::State, "use of undefined tensor");
    return node_->value;
}

double Tensor::item() const {
    if (numel() != 1) raise(ErrorKind::Shape, "item: tensor has " + std::to_string(numel()) + " elements");
    return data()[0];
}

const std::vector<double>& Tensor::grad() const {
    if (!node_) raise(ErrorKind::State, "use of undefined tensor");
    return detail::ensure_grad(*node_);
}

void Tensor::zero_grad() {
    if (!node_) raise(ErrorKind::State, "use of undefined tensor");
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

// ---------------------------------------------------------------------------
// GradTape

GradTape::GradTape() {
    prev_ = g_active_tape;
    g_active_tape = this;
}

GradTape::~GradTape() { g_active_tape = prev_; }

GradTape* GradTape::active() { return g_active_tape; }

void GradTape::record(const char* name, std::shared_ptr<TensorNode> out, std::function<void()> backward_fn) {
    records_.push_back({name, std::move(out), std::move(backward_fn)});
}

void GradTape::backward(const Tensor& loss) {
    if (consumed_) raise(ErrorKind::State, "backward: tape already consumed; re-record the forward pass");
    if (!loss.defined() || loss.numel() != 1)
        raise(ErrorKind::InvalidArgument, "backward: loss must be a defined scalar tensor");
    consumed_ = true;
    const auto& node = loss.node();
    if (!node->requires_grad)
        raise(ErrorKind::InvalidArgument, "backward: loss does not depend on any recorded operation");
    detail::ensure_grad(*node)[0] += 1.0;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        if (it->out->grad.empty()) continue;  // never reached from the loss
        it->backward_fn();
    }
}

// ---------------------------------------------------------------------------
// Op plumbing

namespace detail {

std::vector<double>& ensure_grad(TensorNode& node) {
    if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
    return node.grad;
}

void check_finite(const char* op, const std::vector<double>& values) {
    if (!g_checked_mode) return;
    for (double v : values)
        if (!std::isfinite(v))
            raise(ErrorKind::Numeric, std::string("op '") + op + "' produced a non-finite value");
}

Tensor make_op(const char* name, Shape shape, std::vector<double> value, bool requires_grad) {
    check_finite(name, value);
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->leaf = false;
    node->requires_grad = requires_grad && GradTape::active() != nullptr;
    return Tensor::wrap(node);
}

double canonical_sum(double* terms, int n) {
    std::sort(terms, terms + n);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += terms[i];
    return s;
}

}  // namespace detail

namespace {

using detail::ensure_grad;
using detail::kCanonicalReduceMax;
using detail::make_op;

// Strides of `in` aligned to the trailing axes of `out`; 0 on broadcast axes.
std::vector<std::int64_t> broadcast_strides(const char* op, const Shape& out, const Shape& in) {
    const int nd = static_cast<int>(out.size());
    const int ni = static_cast<int>(in.size());
    if (ni > nd) raise(ErrorKind::Shape, std::string(op) + ": cannot broadcast " + shape_str(in) + " to " + shape_str(out));
    std::vector<std::int64_t> strides(nd, 0);
    std::int64_t run = 1;
    for (int d = ni - 1; d >= 0; --d) {
        const int od = d + (nd - ni);
        if (in[d] == out[od]) {
            strides[od] = run;
        } else if (in[d] == 1) {
            strides[od] = 0;
        } else {
            raise(ErrorKind::Shape, std::string(op) + ": shapes " + shape_str(in) + " and " + shape_str(out) + " do not broadcast");
        }
        run *= in[d];
    }
    return strides;
}

Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
    const int nd = std::max(a.size(), b.size());
    Shape out(nd);
    for (int d = 0; d < nd; ++d) {
        const int da = d - (nd - static_cast<int>(a.size()));
        const int db = d - (nd - static_cast<int>(b.size()));
        const int ea = da >= 0 ? a[da] : 1;
        const int eb = db >= 0 ? b[db] : 1;
        if (ea != eb && ea != 1 && eb != 1)
            raise(ErrorKind::Shape, std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) + " do not broadcast");
        out[d] = std::max(ea, eb);
    }
    return out;
}

// Row-major odometer over `out`, yielding linear offsets into two aligned inputs.
template <class F>
void bcast_for_each(const Shape& out, const std::vector<std::int64_t>& sa, const std::vector<std::int64_t>& sb, F&& f) {
    const int nd = static_cast<int>(out.size());
    const std::int64_t n = shape_numel(out);
    std::vector<int> coord(nd, 0);
    std::int64_t ia = 0, ib = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        f(i, ia, ib);
        for (int d = nd - 1; d >= 0; --d) {
            ++coord[d];
            ia += sa[d];
            ib += sb[d];
            if (coord[d] < out[d]) break;
            coord[d] = 0;
            ia -= static_cast<std::int64_t>(out[d]) * sa[d];
            ib -= static_cast<std::int64_t>(out[d]) * sb[d];
        }
    }
}

struct BinaryGrads {
    // dval_a, dval_b as functions of (a, b, out_grad) evaluated per element.
    std::function<double(double, double, double)> da;
    std::function<double(double, double, double)> db;
};

Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, const std::function<double(double, double)>& f,
                 const BinaryGrads& g) {
    const Shape out_shape = broadcast_shape(name, a.shape(), b.shape());
    const std::int64_t n = shape_numel(out_shape);
    std::vector<double> value(n);
    const auto& av = a.data();
    const auto& bv = b.data();
    if (a.shape() == b.shape()) {
        for (std::int64_t i = 0; i < n; ++i) value[i] = f(av[i], bv[i]);
    } else {
        auto sa = broadcast_strides(name, out_shape, a.shape());
        auto sb = broadcast_strides(name, out_shape, b.shape());
        bcast_for_each(out_shape, sa, sb,
                       [&](std::int64_t i, std::int64_t ia, std::int64_t ib) { value[i] = f(av[ia], bv[ib]); });
    }
    auto an = a.node();
    auto bn = b.node();
    bool req = an->requires_grad || bn->requires_grad;
    Tensor out = make_op(name, out_shape, std::move(value), req);
    if (out.requires_grad()) {
        auto on = out.node();
        GradTape::active()->record(name, on, [an, bn, on, g, name]() {
            const Shape& os = on->shape;
            const auto& og = on->grad;
            const bool same_a = an->shape == os;
            const bool same_b = bn->shape == os;
            if (an->requires_grad && bn->requires_grad && same_a && same_b) {
                auto& ga = ensure_grad(*an);
                auto& gb = ensure_grad(*bn);
                for (std::size_t i = 0; i < og.size(); ++i) {
                    ga[i] += g.da(an->value[i], bn->value[i], og[i]);
                    gb[i] += g.db(an->value[i], bn->value[i], og[i]);
                }
                return;
            }
            auto sa = broadcast_strides(name, os, an->shape);
            auto sb = broadcast_strides(name, os, bn->shape);
            if (an->requires_grad) {
                auto& ga = ensure_grad(*an);
                bcast_for_each(os, sa, sb, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
                    ga[ia] += g.da(an->value[ia], bn->value[ib], og[i]);
                });
            }
            if (bn->requires_grad) {
                auto& gb = ensure_grad(*bn);
                bcast_for_each(os, sa, sb, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
                    gb[ib] += g.db(an->value[ia], bn->value[ib], og[i]);
                });
            }
        });
    }
    return out;
}

Tensor unary_op(const char* name, const Tensor& a, const std::function<double(double)>& f,
                const std::function<double(double, double, double)>& dfn /* (x, y, og) -> dx */) {
    const std::int64_t n = a.numel();
    std::vector<double> value(n);
    const auto& av = a.data();
    for (std::int64_t i = 0; i < n; ++i) value[i] = f(av[i]);
    auto an = a.node();
    Tensor out = make_op(name, a.shape(), std::move(value), an->requires_grad);
    if (out.requires_grad()) {
        auto on = out.node();
        GradTape::active()->record(name, on, [an, on, dfn]() {
            auto& ga = ensure_grad(*an);
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                ga[i] += dfn(an->value[i], on->value[i], on->grad[i]);
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Matmul kernels. Contractions of kCanonicalReduceMax or fewer terms are
// summed in value-sorted order (see tensor.hpp); longer ones run index-order.

void mm_nn(const double* a, const double* b, double* c, int m, int k, int n, bool acc,
           bool canonical = false) {
    if (!acc) std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
    if (canonical && k <= kCanonicalReduceMax) {
        double terms[kCanonicalReduceMax];
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                for (int p = 0; p < k; ++p) terms[p] = a[static_cast<std::size_t>(i) * k + p] * b[static_cast<std::size_t>(p) * n + j];
                c[static_cast<std::size_t>(i) * n + j] += detail::canonical_sum(terms, k);
            }
        return;
    }
    for (int i = 0; i < m; ++i) {
        double* ci = c + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double aip = a[static_cast<std::size_t>(i) * k + p];
            const double* bp = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

// c[M,N] (+)= a[M,K] * b[N,K]^T. Gradient-side only, so always index order.
void mm_nt(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < n; ++j) {
            const double* bj = b + static_cast<std::size_t>(j) * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
            double& out = c[static_cast<std::size_t>(i) * n + j];
            out = acc ? out + s : s;
        }
    }
}

// c[K,N] (+)= a[M,K]^T * b[M,N]
void mm_tn(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
    if (!acc) std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(k) * n);
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * k;
        const double* bi = b + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double v = ai[p];
            double* cp = c + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) cp[j] += v * bi[j];
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise ops

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        "add", a, b, [](double x, double y) { return x + y; },
        {[](double, double, double og) { return og; }, [](double, double, double og) { return og; }});
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        "sub", a, b, [](double x, double y) { return x - y; },
        {[](double, double, double og) { return og; }, [](double, double, double og) { return -og; }});
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        "mul", a, b, [](double x, double y) { return x * y; },
        {[](double, double y, double og) { return og * y; }, [](double x, double, double og) { return og * x; }});
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(
        "div", a, b, [](double x, double y) { return x / y; },
        {[](double, double y, double og) { return og / y; },
         [](double x, double y, double og) { return -og * x / (y * y); }});
}

Tensor add_scalar(const Tensor& a, double c) {
    return unary_op(
        "add_scalar", a, [c](double x) { return x + c; }, [](double, double, double og) { return og; });
}

Tensor mul_scalar(const Tensor& a, double c) {
    return unary_op(
        "mul_scalar", a, [c](double x) { return x * c; }, [c](double, double, double og) { return og * c; });
}

Tensor pow_scalar(const Tensor& a, double p) {
    return unary_op(
        "pow_scalar", a, [p](double x) { return std::pow(x, p); },
        [p](double x, double, double og) { return og * p * std::pow(x, p - 1.0); });
}

Tensor exp(const Tensor& a) {
    return unary_op(
        "exp", a, [](double x) { return std::exp(x); }, [](double, double y, double og) { return og * y; });
}

Tensor log(const Tensor& a) {
    return unary_op(
        "log", a, [](double x) { return std::log(x); }, [](double x, double, double og) { return og / x; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(
        "sigmoid", a, [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
        [](double, double y, double og) { return og * y * (1.0 - y); });
}

Tensor leaky_relu(const Tensor& a, double slope) {
    return unary_op(
        "leaky_relu", a, [slope](double x) { return x >= 0.0 ? x : slope * x; },
        [slope](double x, double, double og) { return x >= 0.0 ? og : og * slope; });
}

// ---------------------------------------------------------------------------
// Matmul

Tensor matmul(const Tensor& a, const Tensor& b, bool canonical_reduce) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if ((sa.size() != 2 && sa.size() != 3) || (sb.size() != 2 && sb.size() != 3))
        raise(ErrorKind::Shape, "matmul: operands must be 2-D or batched 3-D, got " + shape_str(sa) + " x " + shape_str(sb));
    const bool ba = sa.size() == 3;
    const bool bb = sb.size() == 3;
    const int batch = ba ? sa[0] : (bb ? sb[0] : 1);
    if (ba && bb && sa[0] != sb[0])
        raise(ErrorKind::Shape, "matmul: batch extents differ: " + shape_str(sa) + " x " + shape_str(sb));
    const int m = sa[ba ? 1 : 0], k = sa[ba ? 2 : 1];
    const int kb = sb[bb ? 1 : 0], n = sb[bb ? 2 : 1];
    if (k != kb) raise(ErrorKind::Shape, "matmul: inner extents differ: " + shape_str(sa) + " x " + shape_str(sb));

    Shape out_shape = (ba || bb) ? Shape{batch, m, n} : Shape{m, n};
    std::vector<double> value(shape_numel(out_shape));
    const std::int64_t stride_a = ba ? static_cast<std::int64_t>(m) * k : 0;
    const std::int64_t stride_b = bb ? static_cast<std::int64_t>(k) * n : 0;
    const std::int64_t stride_c = static_cast<std::int64_t>(m) * n;
    for (int t = 0; t < batch; ++t)
        mm_nn(a.data().data() + t * stride_a, b.data().data() + t * stride_b, value.data() + t * stride_c, m, k, n, false, canonical_reduce);

    auto an = a.node();
    auto bn = b.node();
    bool req = an->requires_grad || bn->requires_grad;
    Tensor out = make_op("matmul", out_shape, std::move(value), req);
    if (out.requires_grad()) {
        auto on = out.node();
        GradTape::active()->record("matmul", on, [an, bn, on, batch, m, k, n, stride_a, stride_b, stride_c]() {
            const auto& og = on->grad;
            if (an->requires_grad) {
                auto& ga = ensure_grad(*an);
                for (int t = 0; t < batch; ++t)  // dA = dC * B^T; unbatched A accumulates over the batch
                    mm_nt(og.data() + t * stride_c, bn->value.data() + t * stride_b, ga.data() + t * stride_a, m, n, k, true);
            }
            if (bn->requires_grad) {
                auto& gb = ensure_grad(*bn);
                for (int t = 0; t < batch; ++t)  // dB = A^T * dC
                    mm_tn(an->value.data() + t * stride_a, og.data() + t * stride_c, gb.data() + t * stride_b, m, k, n, true);
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Softmax

Tensor softmax(const Tensor& a, int axis) {
    const Shape& s = a.shape();
    if (axis < 0) axis += static_cast<int>(s.size());
    if (axis < 0 || axis >= static_cast<int>(s.size())) raise(ErrorKind::InvalidArgument, "softmax: axis out of range");
    std::int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= s[d];
    for (int d = axis + 1; d < static_cast<int>(s.size()); ++d) inner *= s[d];
    const int L = s[axis];

    std::vector<double> value(a.numel());
    const auto& av = a.data();
    std::vector<double> terms(L);
    for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t in = 0; in < inner; ++in) {
            const std::int64_t base = o * L * inner + in;
            double mx = av[base];
            for (int l = 1; l < L; ++l) mx = std::max(mx, av[base + l * inner]);
            for (int l = 0; l < L; ++l) {
                const double e = std::exp(av[base + l * inner] - mx);
                value[base + l * inner] = e;
                terms[l] = e;
            }
            double denom;
            if (L <= kCanonicalReduceMax) {
                denom = detail::canonical_sum(terms.data(), L);
            } else {
                denom = 0.0;
                for (int l = 0; l < L; ++l) denom += terms[l];
            }
            for (int l = 0; l < L; ++l) value[base + l * inner] /= denom;
        }
    }

    auto an = a.node();
    Tensor out = make_op("softmax", s, std::move(value), an->requires_grad);
    if (out.requires_grad()) {
        auto on = out.node();
        GradTape::active()->record("softmax", on, [an, on, outer, inner, L]() {
            auto& ga = ensure_grad(*an);
            const auto& y = on->value;
            const auto& og = on->grad;
            for (std::int64_t o = 0; o < outer; ++o)
                for (std::int64_t in = 0; in < inner; ++in) {
                    const std::int64_t base = o * L * inner + in;
                    double dot = 0.0;
                    for (int l = 0; l < L; ++l) dot += og[base + l * inner] * y[base + l * inner];
                    for (int l = 0; l < L; ++l) {
                        const std::int64_t i = base + l * inner;
                        ga[i] += y[i] * (og[i] - dot);
                    }
                }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    auto an = a.node();
    Tensor out = make_op("sum", {1}, {s}, an->requires_grad);
    if (out.requires_grad()) {
        auto on = out.node();
        GradTape::active()->record("sum", on, [an, on]() {
            auto& ga = ensure_grad(*an);
            const double g = on->grad[0];
            for (double& v : ga) v += g;
        });
    }
    return out;
}

Tensor mean(const Tensor& a) {
    const double inv = 1.0 / static_cast<double>(a.numel());
    double s = 0.0;
    for (double v : a.data()) s += v;
    s *= inv;
    auto an = a.node();
    Tensor out = make_op("mean", {1}, {s}, an->requires_grad);
    if (out.requires_grad()) {
        auto on = out.node();
        GradTape::active()->record("mean", on, [an, on, inv]() {
            auto& ga = ensure_grad(*an);
            const double g = on->grad[0] * inv;
            for (double& v : ga) v += g;
        });
    }
    return out;
}

namespace {
Tensor reduce_axes(const char* name, const Tensor& a, const std::vector<int>& axes, bool keepdims, bool take_mean) {
    const Shape& s = a.shape();
    std::vector<bool> reduced(s.size(), false);
    std::int64_t count = 1;
    for (int ax : axes) {
        if (ax < 0) ax += static_cast<int>(s.size());
        if (ax < 0 || ax >= static_cast<int>(s.size())) raise(ErrorKind::InvalidArgument, std::string(name) + ": axis out of range");
        if (reduced[ax]) raise(ErrorKind::InvalidArgument, std::string(name) + ": duplicate axis");
        reduced[ax] = true;
        count *= s[ax];
    }
    Shape out_shape;
    Shape kept_shape(s.size());  // out shape with reduced axes as 1, for index mapping
    for (std::size_t d = 0; d < s.size(); ++d) {
        kept_shape[d] = reduced[d] ? 1 : s[d];
        if (reduced[d]) {
            if (keepdims) out_shape.push_back(1);
        } else {
            out_shape.push_back(s[d]);
        }
    }
    if (out_shape.empty()) out_shape.push_back(1);

    std::vector<double> value(shape_numel(out_shape), 0.0);
    auto so = broadcast_strides(name, s, kept_shape);  // maps input coords to output offsets
    const auto& av = a.data();
    bcast_for_each(s, so, so, [&](std::int64_t i, std::int64_t io, std::int64_t) { value[io] += av[i]; });
    const double inv = take_mean ? 1.0 / static_cast<double>(count) : 1.0;
    if (take_mean)
        for (double& v : value) v *= inv;

    auto an = a.node();
    Tensor out = make_op(name, out_shape, std::move(value), an->requires_grad);
    if (out.requires_grad()) {
        auto on = out.node();
        GradTape::active()->record(name, on, [an, on, so, inv]() {
            auto& ga = ensure_grad(*an);
            const auto& og = on->grad;
            bcast_for_each(an->shape, so, so,
                           [&](std::int64_t i, std::int64_t io, std::int64_t) { ga[i] += og[io] * inv; });
        });
    }
    return out;
}
}  // namespace

Tensor sum_axes(const Tensor& a, const std::vector<int>& axes, bool keepdims) {
    return reduce_axes("sum_axes", a, axes, keepdims, false);
}

Tensor mean_axes(const Tensor& a, const std::vector<int>& axes, bool keepdims) {
    return reduce_axes("mean_axes", a, axes, keepdims, true);
}

// ---------------------------------------------------------------------------
// Shape ops

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel())
        raise(ErrorKind::Shape, "reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    auto an = a.node();
    Tensor out = make_op("reshape", std::move(shape), a.data(), an->requires_grad);
    if (out.requires_grad()) {
        auto on = out.node();
        GradTape::active()->record("reshape", on, [an, on]() {
            auto& ga = ensure_grad(*an);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += on->grad[i];
        });
    }
    return out;
}

namespace {
void permute_raw(const Shape& in_shape, const std::vector<int>& perm, const double* in, double* out, bool accumulate_into_in) {
    // accumulate_into_in=false: out[perm-major order] = in. true: in += un-permuted out.
    const int nd = static_cast<int>(in_shape.size());
    Shape out_shape(nd);
    for (int d = 0; d < nd; ++d) out_shape[d] = in_shape[perm[d]];
    std::vector<std::int64_t> in_strides(nd, 1);
    for (int d = nd - 2; d >= 0; --d) in_strides[d] = in_strides[d + 1] * in_shape[d + 1];
    std::vector<std::int64_t> step(nd);  // input stride per output axis
    for (int d = 0; d < nd; ++d) step[d] = in_strides[perm[d]];
    std::vector<int> coord(nd, 0);
    std::int64_t src = 0;
    const std::int64_t n = shape_numel(in_shape);
    for (std::int64_t i = 0; i < n; ++i) {
        if (accumulate_into_in)
            const_cast<double*>(in)[src] += out[i];
        else
            out[i] = in[src];
        for (int d = nd - 1; d >= 0; --d) {
            ++coord[d];
            src += step[d];
            if (coord[d] < out_shape[d]) break;
            coord[d] = 0;
            src -= static_cast<std::int64_t>(out_shape[d]) * step[d];
        }
    }
}
}  // namespace

Tensor transpose(const Tensor& a, const std::vector<int>& perm) {
    const Shape& s = a.shape();
    if (perm.size() != s.size()) raise(ErrorKind::InvalidArgument, "transpose: perm rank mismatch");
    std::vector<bool> seen(s.size(), false);
    Shape out_shape(s.size());
    for (std::size_t d = 0; d < perm.size(); ++d) {
        if (perm[d] < 0 || perm[d] >= static_cast<int>(s.size()) || seen[perm[d]])
            raise(ErrorKind::InvalidArgument, "transpose: invalid permutation");
        seen[perm[d]] = true;
        out_shape[d] = s[perm[d]];
    }
    std::vector<double> value(a.numel());
    permute_raw(s, perm, a.data().data(), value.data(), false);
    auto an = a.node();
    Tensor out = make_op("transpose", out_shape, std::move(value), an->requires_grad);
    if (out.requires_grad()) {
        auto on = out.node();
        std::vector<int> p = perm;
        GradTape::active()->record("transpose", on, [an, on, p]() {
            auto& ga = ensure_grad(*an);
            permute_raw(an->shape, p, ga.data(), const_cast<double*>(on->grad.data()), true);
        });
    }
    return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) raise(ErrorKind::InvalidArgument, "concat: no inputs");
    const Shape& s0 = parts[0].shape();
    const int nd = static_cast<int>(s0.size());
    if (axis < 0) axis += nd;
    if (axis < 0 || axis >= nd) raise(ErrorKind::InvalidArgument, "concat: axis out of range");
    Shape out_shape = s0;
    bool req = false;
    for (const Tensor& p : parts) {
        const Shape& sp = p.shape();
        if (static_cast<int>(sp.size()) != nd) raise(ErrorKind::Shape, "concat: rank mismatch");
        for (int d = 0; d < nd; ++d)
            if (d != axis && sp[d] != s0[d]) raise(ErrorKind::Shape, "concat: extents differ outside the concat axis");
        req = req || p.requires_grad();
    }
    out_shape[axis] = 0;
    for (const Tensor& p : parts) out_shape[axis] += p.shape()[axis];

    std::int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= s0[d];
    for (int d = axis + 1; d < nd; ++d) inner *= s0[d];
    std::vector<double> value(shape_numel(out_shape));
    const std::int64_t out_row = static_cast<std::int64_t>(out_shape[axis]) * inner;
    std::int64_t offset = 0;
    for (const Tensor& p : parts) {
        const std::int64_t part_row = static_cast<std::int64_t>(p.shape()[axis]) * inner;
        const auto& pv = p.data();
        for (std::int64_t o = 0; o < outer; ++o)
            std::memcpy(value.data() + o * out_row + offset, pv.data() + o * part_row, sizeof(double) * part_row);
        offset += part_row;
    }

    std::vector<std::shared_ptr<TensorNode>> nodes;
    nodes.reserve(parts.size());
    for (const Tensor& p : parts) nodes.push_back(p.node());
    Tensor out = make_op("concat", out_shape, std::move(value), req);
    if (out.requires_grad()) {
        auto on = out.node();
        const int ax = axis;
        GradTape::active()->record("concat", on, [nodes, on, outer, inner, out_row, ax]() {
            std::int64_t offset = 0;
            for (const auto& nd_ : nodes) {
                const std::int64_t part_row = static_cast<std::int64_t>(nd_->shape[ax]) * inner;
                if (nd_->requires_grad) {
                    auto& g = ensure_grad(*nd_);
                    for (std::int64_t o = 0; o < outer; ++o)
                        for (std::int64_t i = 0; i < part_row; ++i) g[o * part_row + i] += on->grad[o * out_row + offset + i];
                }
                offset += part_row;
            }
        });
    }
    return out;
}

Tensor slice(const Tensor& a, int axis, int start, int len) {
    const Shape& s = a.shape();
    const int nd = static_cast<int>(s.size());
    if (axis < 0) axis += nd;
    if (axis < 0 || axis >= nd) raise(ErrorKind::InvalidArgument, "slice: axis out of range");
    if (start < 0 || len <= 0 || start + len > s[axis])
        raise(ErrorKind::InvalidArgument, "slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                                              ") outside extent " + std::to_string(s[axis]));
    Shape out_shape = s;
    out_shape[axis] = len;
    std::int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= s[d];
    for (int d = axis + 1; d < nd; ++d) inner *= s[d];
    const std::int64_t in_row = static_cast<std::int64_t>(s[axis]) * inner;
    const std::int64_t out_row = static_cast<std::int64_t>(len) * inner;
    std::vector<double> value(shape_numel(out_shape));
    const auto& av = a.data();
    for (std::int64_t o = 0; o < outer; ++o)
        std::memcpy(value.data() + o * out_row, av.data() + o * in_row + start * inner, sizeof(double) * out_row);
    auto an = a.node();
    Tensor out = make_op("slice", out_shape, std::move(value), an->requires_grad);
    if (out.requires_grad()) {
        auto on = out.node();
        GradTape::active()->record("slice", on, [an, on, outer, inner, in_row, out_row, start]() {
            auto& ga = ensure_grad(*an);
            for (std::int64_t o = 0; o < outer; ++o)
                for (std::int64_t i = 0; i < out_row; ++i) ga[o * in_row + start * inner + i] += on->grad[o * out_row + i];
        });
    }
    return out;
}

}  // namespace cysto
