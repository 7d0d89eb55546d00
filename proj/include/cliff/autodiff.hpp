#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace cliff {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct DomainError : Error {
    using Error::Error;
};

namespace ad {

/// Module-wide epsilon used to guard logs and divisions whose operands are
/// provably nonnegative (densities, normalizers).
inline constexpr double kEps = 1e-12;

namespace test_hooks {
/// Negates the backward rule of abs. Exists only so the gradcheck harness
/// can prove it detects a broken rule; never set outside tests.
inline bool negate_abs_backward = false;
}  // namespace test_hooks

struct Node;
using NodePtr = std::shared_ptr<Node>;

namespace detail {
/// Tape graphs are rebuilt every batch, so freed value/gradient buffers are
/// recycled through a thread-local pool instead of round-tripping the
/// allocator (fresh pages cost a kernel zero-fill per epoch).
std::vector<double> acquire_buffer(std::size_t size);
void release_buffer(std::vector<double>&& buf);
}  // namespace detail

/// One node of the computation tape: a rank-2 value array, a lazily
/// allocated gradient of identical shape, and the backward rule that
/// scatters this node's gradient into its parents.
struct Node {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> val;
    std::vector<double> grad;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backward;
    const char* op = "leaf";
    bool needs_grad = false;

    Node() = default;
    Node(const Node&) = delete;
    Node& operator=(const Node&) = delete;
    ~Node() {
        detail::release_buffer(std::move(val));
        detail::release_buffer(std::move(grad));
    }

    std::size_t size() const { return rows * cols; }

    void ensure_grad() {
        if (grad.size() != val.size()) {
            grad = detail::acquire_buffer(val.size());
            std::fill(grad.begin(), grad.end(), 0.0);
        }
    }
};

/// Value-semantics handle on a tape node. Copies share the node.
///
/// All tensors are rank 2 (scalars are 1x1, vectors are n x 1 or 1 x n).
/// Values are stored row-major in 64-bit floats.
class Tensor {
public:
    Tensor() = default;

    /// Leaf with respect to which gradients are requested.
    static Tensor param(std::size_t rows, std::size_t cols, std::vector<double> values);
    /// Leaf treated as a constant: backward never visits it.
    static Tensor constant(std::size_t rows, std::size_t cols, std::vector<double> values);
    static Tensor constant(std::size_t rows, std::size_t cols, double fill);
    static Tensor scalar(double v);

    bool defined() const { return static_cast<bool>(node_); }
    std::size_t rows() const { return node_->rows; }
    std::size_t cols() const { return node_->cols; }
    std::size_t size() const { return node_->size(); }
    bool is_scalar() const { return size() == 1; }

    const std::vector<double>& value() const { return node_->val; }
    const std::vector<double>& grad() const;
    double item() const;

    bool needs_grad() const { return node_->needs_grad; }
    Node* node() const { return node_.get(); }
    const NodePtr& ptr() const { return node_; }

    explicit Tensor(NodePtr n) : node_(std::move(n)) {}

private:
    NodePtr node_;
};

// Elementwise binary ops broadcast along any axis of extent 1, so a K x 1
// column against a 1 x n row yields a K x n outer combination.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
/// Natural log. Rejects non-positive entries; callers guard with kEps.
Tensor log(const Tensor& a);
/// Absolute value with subgradient 0 at exactly 0.
Tensor abs(const Tensor& a);

/// alpha * a + beta, fused.
Tensor scale(const Tensor& a, double alpha, double beta = 0.0);

Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor sum(const Tensor& a);     // all entries -> 1x1
Tensor mean(const Tensor& a);    // all entries -> 1x1
Tensor rowsum(const Tensor& a);  // r x c -> r x 1
Tensor colsum(const Tensor& a);  // r x c -> 1 x c

/// Materialized broadcast of a to (rows, cols); each axis must match or be 1.
Tensor broadcast(const Tensor& a, std::size_t rows, std::size_t cols);
Tensor concat_cols(const std::vector<Tensor>& columns);
Tensor slice_col(const Tensor& a, std::size_t j);

/// Reverse pass from a scalar root. Each reachable node that needs a
/// gradient is visited exactly once in reverse topological order; repeated
/// calls without constructing a fresh graph accumulate.
void backward(const Tensor& root);

}  // namespace ad
}  // namespace cliff
