#pragma once

// N-dimensional tensor with reverse-mode automatic differentiation.
//
// A BasicTensor is a cheap handle to a shared graph node. Values are fixed
// once an operation has produced them; only leaves (parameters, inputs) may
// be written through mutable_data(). Gradients accumulate on leaves until
// zero_grad(). BasicTensor<float> is the storage type; BasicTensor<double>
// runs the same graph code for finite-difference checks.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace selfen {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Graph recording is on by default; NoGradGuard disables it for the
// current thread (frozen networks, inference).
bool grad_enabled();

class NoGradGuard {
 public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
    bool previous_;
};

namespace detail {

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    bool backward_done = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into parents' grads.
    std::function<void(Node&)> backward_fn;

    bool is_leaf() const { return parents.empty(); }
    std::vector<T>& ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
        return grad;
    }
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

}  // namespace detail

template <typename T>
class BasicTensor {
 public:
    using value_type = T;

    BasicTensor() = default;
    explicit BasicTensor(detail::NodePtr<T> node) : node_(std::move(node)) {}

    static BasicTensor zeros(Shape shape, bool requires_grad = false);
    static BasicTensor full(Shape shape, T value, bool requires_grad = false);
    static BasicTensor from_vector(Shape shape, std::vector<T> values, bool requires_grad = false);
    static BasicTensor scalar(T value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const { return data().size(); }

    std::span<const T> data() const;
    // Leaves only; throws GraphError on operation outputs.
    std::span<T> mutable_data();

    bool has_grad() const;
    std::span<const T> grad() const;
    std::span<T> mutable_grad();
    void zero_grad();

    bool requires_grad() const;
    void set_requires_grad(bool flag);
    bool is_leaf() const;
    const char* op_name() const;

    // Value of a one-element tensor.
    T item() const;

    // Independent leaf copy of the values, optionally converted.
    template <typename U>
    BasicTensor<U> cast() const {
        const auto src = data();
        return BasicTensor<U>::from_vector(shape(), std::vector<U>(src.begin(), src.end()));
    }

    const detail::NodePtr<T>& node() const { return node_; }

 private:
    detail::Node<T>& checked() const;
    detail::NodePtr<T> node_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// Populates grads of every requires_grad leaf reachable from `loss`.
// Throws GraphError for a non-scalar loss or a second call on the same loss
// without reset_backward().
template <typename T>
void backward(const BasicTensor<T>& loss);

template <typename T>
void reset_backward(const BasicTensor<T>& loss);

namespace detail {

// Wraps a freshly computed value as an operation output. Parents and the
// backward rule are recorded only when grad mode is on and some parent
// requires grad.
template <typename T>
BasicTensor<T> make_result(const char* op, Shape shape, std::vector<T> value,
                           std::vector<NodePtr<T>> parents, std::function<void(Node<T>&)> backward_fn);

}  // namespace detail

}  // namespace selfen
