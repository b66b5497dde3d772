#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace cysto {

enum class ErrorKind { InvalidArgument, Shape, Numeric, Io, State };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& msg);

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

/// Global NaN/Inf detection toggle. When on, every op scans its output and
/// raises ErrorKind::Numeric instead of letting non-finite values propagate.
void set_checked_mode(bool on);
bool checked_mode();

struct TensorNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first touched during backward
    bool requires_grad = false;
    bool leaf = true;
};

/// Dense row-major float64 tensor. Value-semantic handle over a shared node
/// so autodiff closures and user code see the same gradients.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    int ndim() const { return static_cast<int>(shape().size()); }
    int dim(int axis) const;
    std::int64_t numel() const;

    bool requires_grad() const;
    void set_requires_grad(bool on);

    const std::vector<double>& data() const;
    std::vector<double>& mutable_data();
    double item() const;

    /// Gradient of the most recent backward pass. For a requires_grad tensor
    /// that no recorded op touched, this is a zero array of matching size.
    const std::vector<double>& grad() const;
    void zero_grad();

    const std::shared_ptr<TensorNode>& node() const { return node_; }
    static Tensor wrap(std::shared_ptr<TensorNode> node) { return Tensor(std::move(node)); }

private:
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}
    std::shared_ptr<TensorNode> node_;
};

/// Records the ops of one forward pass; replaying them in reverse implements
/// reverse-mode differentiation. Scoped: construction pushes this tape as the
/// active recording target, destruction pops it. A tape can run backward once.
class GradTape {
public:
    GradTape();
    ~GradTape();
    GradTape(const GradTape&) = delete;
    GradTape& operator=(const GradTape&) = delete;

    /// Seeds d(loss)/d(loss) = 1 and replays all records in reverse order,
    /// accumulating gradients into every reachable requires_grad tensor.
    void backward(const Tensor& loss);

    bool consumed() const { return consumed_; }
    std::size_t size() const { return records_.size(); }

    static GradTape* active();
    void record(const char* name, std::shared_ptr<TensorNode> out, std::function<void()> backward_fn);

private:
    struct Record {
        const char* name;
        std::shared_ptr<TensorNode> out;
        std::function<void()> backward_fn;
    };
    std::vector<Record> records_;
    bool consumed_ = false;
    GradTape* prev_ = nullptr;
};

namespace detail {
std::vector<double>& ensure_grad(TensorNode& node);
void check_finite(const char* op, const std::vector<double>& values);

/// Creates the output tensor of an op. The result requires grad only when
/// `requires_grad` is set and a tape is live; the caller then records its
/// backward closure on that tape.
Tensor make_op(const char* name, Shape shape, std::vector<double> value, bool requires_grad);

/// Reductions over at most this many terms may be summed in value-sorted
/// order, which makes the result invariant to operand permutations. Softmax
/// always canonicalises short rows; matmul only on request (see matmul), for
/// contractions that run over the token axis. Token-permutation equivariance
/// of the attention blocks relies on this. Longer reductions accumulate in
/// index order.
inline constexpr int kCanonicalReduceMax = 32;

double canonical_sum(double* terms, int n);
}  // namespace detail

// Elementwise binary ops with numpy-style trailing broadcast.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor pow_scalar(const Tensor& a, double p);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);

/// [M,K]x[K,N] -> [M,N]. Also batched: [B,M,K]x[B,K,N] and [B,M,K]x[K,N].
/// With canonical_reduce, contractions of up to kCanonicalReduceMax terms are
/// summed in value-sorted order; pass true when K is a token axis whose
/// ordering must not influence the result bitwise. Sorting costs roughly an
/// order of magnitude over the plain loop, so it stays opt-in.
Tensor matmul(const Tensor& a, const Tensor& b, bool canonical_reduce = false);

/// Max-subtracted softmax along `axis` (negative axis counts from the back).
Tensor softmax(const Tensor& a, int axis);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_axes(const Tensor& a, const std::vector<int>& axes, bool keepdims);
Tensor mean_axes(const Tensor& a, const std::vector<int>& axes, bool keepdims);

Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a, const std::vector<int>& perm);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, int start, int len);

}  // namespace cysto
