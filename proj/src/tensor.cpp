#include "selfen/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "selfen/error.hpp"

namespace selfen {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
    const auto n = shape_numel(shape);
    return from_vector(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from_vector(Shape shape, std::vector<T> values, bool requires_grad) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (auto d : shape)
        if (d == 0) throw ShapeError("tensor dimensions must be positive: " + shape_str(shape));
    if (shape_numel(shape) != values.size())
        throw ShapeError("data length " + std::to_string(values.size()) + " does not match shape " +
                         shape_str(shape));
    auto node = std::make_shared<detail::Node<T>>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return BasicTensor(std::move(node));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad) {
    return from_vector({1}, {value}, requires_grad);
}

template <typename T>
detail::Node<T>& BasicTensor<T>::checked() const {
    if (!node_) throw GraphError("use of an undefined tensor");
    return *node_;
}

template <typename T>
const Shape& BasicTensor<T>::shape() const {
    return checked().shape;
}

template <typename T>
std::size_t BasicTensor<T>::dim(std::size_t axis) const {
    const auto& s = shape();
    if (axis >= s.size()) throw ShapeError("axis out of range for shape " + shape_str(s));
    return s[axis];
}

template <typename T>
std::span<const T> BasicTensor<T>::data() const {
    return checked().value;
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_data() {
    auto& n = checked();
    if (!n.is_leaf()) throw GraphError(std::string("cannot write into the output of '") + n.op + "'");
    return n.value;
}

template <typename T>
bool BasicTensor<T>::has_grad() const {
    const auto& n = checked();
    return !n.grad.empty();
}

template <typename T>
std::span<const T> BasicTensor<T>::grad() const {
    return checked().grad;
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_grad() {
    return checked().ensure_grad();
}

template <typename T>
void BasicTensor<T>::zero_grad() {
    auto& n = checked();
    n.grad.clear();
}

template <typename T>
bool BasicTensor<T>::requires_grad() const {
    return checked().requires_grad;
}

template <typename T>
void BasicTensor<T>::set_requires_grad(bool flag) {
    auto& n = checked();
    if (!n.is_leaf()) throw GraphError("requires_grad can only be changed on leaf tensors");
    n.requires_grad = flag;
}

template <typename T>
bool BasicTensor<T>::is_leaf() const {
    return checked().is_leaf();
}

template <typename T>
const char* BasicTensor<T>::op_name() const {
    return checked().op;
}

template <typename T>
T BasicTensor<T>::item() const {
    const auto d = data();
    if (d.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return d[0];
}

template <typename T>
void backward(const BasicTensor<T>& loss) {
    if (!loss.defined()) throw GraphError("backward on an undefined tensor");
    if (loss.numel() != 1) throw GraphError("backward requires a scalar loss, got " + shape_str(loss.shape()));
    auto root = loss.node();
    if (root->backward_done) throw GraphError("backward already ran on this loss; call reset_backward first");
    root->backward_done = true;
    if (!root->requires_grad) return;

    // Iterative post-order DFS gives inputs before consumers.
    std::vector<detail::Node<T>*> order;
    std::unordered_set<detail::Node<T>*> visited;
    std::vector<std::pair<detail::Node<T>*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            auto* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (auto* node : order)
        if (node->is_leaf()) node->ensure_grad();
    root->ensure_grad()[0] += T(1);

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto* node = *it;
        if (node->is_leaf()) continue;
        if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
        node->grad.clear();
        node->grad.shrink_to_fit();
    }
}

template <typename T>
void reset_backward(const BasicTensor<T>& loss) {
    if (!loss.defined()) throw GraphError("reset_backward on an undefined tensor");
    loss.node()->backward_done = false;
}

namespace detail {

template <typename T>
BasicTensor<T> make_result(const char* op, Shape shape, std::vector<T> value, std::vector<NodePtr<T>> parents,
                           std::function<void(Node<T>&)> backward_fn) {
#ifndef NDEBUG
    bool inputs_finite = true;
    for (const auto& p : parents)
        for (auto v : p->value) inputs_finite = inputs_finite && std::isfinite(v);
    if (inputs_finite)
        for (auto v : value)
            if (!std::isfinite(v)) throw DomainError(std::string("non-finite output from '") + op + "'");
#endif
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->op = op;
    bool needs = false;
    if (grad_enabled())
        for (const auto& p : parents) needs = needs || p->requires_grad;
    if (needs) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backward_fn = std::move(backward_fn);
    }
    return BasicTensor<T>(std::move(node));
}

template BasicTensor<float> make_result(const char*, Shape, std::vector<float>, std::vector<NodePtr<float>>,
                                        std::function<void(Node<float>&)>);
template BasicTensor<double> make_result(const char*, Shape, std::vector<double>, std::vector<NodePtr<double>>,
                                         std::function<void(Node<double>&)>);

}  // namespace detail

template class BasicTensor<float>;
template class BasicTensor<double>;
template void backward(const BasicTensor<float>&);
template void backward(const BasicTensor<double>&);
template void reset_backward(const BasicTensor<float>&);
template void reset_backward(const BasicTensor<double>&);

}  // namespace selfen
