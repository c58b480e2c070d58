#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sdnn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tensor;

namespace detail {

struct Node;

using NodePtr = std::shared_ptr<Node>;

/// Backward rule of a recorded operation. Receives the gradient flowing into
/// the operation's output and the operation's inputs; accumulates into the
/// `grad` buffer of every input that requires a gradient.
using BackwardFn = std::function<void(std::span<const float> out_grad,
                                      std::span<const NodePtr> inputs)>;

struct OpRecord {
    std::string name;
    std::uint64_t sequence = 0;
    std::vector<NodePtr> inputs;
    Node* output = nullptr; // owns this record, so outlives it
    BackwardFn backward;
};

struct Node {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad; // empty until a gradient is accumulated
    bool requires_grad = false;
    std::shared_ptr<OpRecord> creator; // null for leaves

    std::span<float> ensure_grad();
};

} // namespace detail

/// N-dimensional float tensor, row-major with the last axis fastest.
///
/// A Tensor is a shared handle: copies refer to the same storage, which is how
/// parameters are updated in place by an optimizer while the autodiff graph
/// still references them. Use clone() for an independent copy.
class Tensor {
public:
    Tensor();
    Tensor(Shape shape, std::vector<float> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor scalar(float value, bool requires_grad = false);

    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const;

    std::span<const float> data() const;
    std::span<float> mutable_data();
    float item() const;

    bool requires_grad() const;
    void set_requires_grad(bool value);
    bool has_grad() const;
    std::span<const float> grad() const;
    void zero_grad();

    bool is_leaf() const;

    /// Deep copy of data; the copy is a leaf with no gradient.
    Tensor clone() const;
    /// Shares no graph history; same values, no gradient requirement.
    Tensor detach() const { return clone(); }

    const detail::NodePtr& node() const { return node_; }
    explicit Tensor(detail::NodePtr node);

private:
    detail::NodePtr node_;
};

/// Ordered list of the operations reachable from a root tensor.
///
/// Entries are sorted by creation sequence, so each operation appears after
/// every operation that produced one of its inputs.
class Tape {
public:
    static Tape collect(const Tensor& root);

    std::span<const std::shared_ptr<detail::OpRecord>> entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    /// Runs every backward rule once, in reverse order. Non-leaf gradients are
    /// reset first; leaf gradients accumulate.
    void backward(const Tensor& root) const;

private:
    std::vector<std::shared_ptr<detail::OpRecord>> entries_;
};

/// Populates grad() on every requires_grad leaf reachable from `loss`.
/// Gradients accumulate across calls; callers zero them between steps.
void backward(const Tensor& loss);

/// Whether new operations are recorded for differentiation on this thread.
bool grad_enabled();

/// Disables recording for its lifetime (evaluation passes).
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

/// Creates the output tensor of an operation and, when any input requires a
/// gradient and recording is enabled, attaches the backward rule.
Tensor make_result(std::string name, Shape shape, std::vector<float> data,
                   std::initializer_list<Tensor> inputs, BackwardFn backward);

/// Test hook: when set to an op name, that op's backward rule scales the
/// gradients it emits by 1.5. Used to prove the gradient checker can fail.
void set_backward_fault(std::string op_name);
const std::string& backward_fault();
float backward_fault_scale(const std::string& op_name);

/// Piecewise ops (relu, max pooling) fold the branch they take at every
/// element into a per-thread hash while a KinkTrace is alive. Two evaluations
/// with equal signatures lie on the same smooth piece.
bool kink_trace_active();
void kink_trace_mix(std::uint64_t value);

class KinkTrace {
public:
    KinkTrace();
    ~KinkTrace();
    KinkTrace(const KinkTrace&) = delete;
    KinkTrace& operator=(const KinkTrace&) = delete;
    std::uint64_t signature() const;

private:
    bool previous_;
    std::uint64_t saved_hash_;
};

} // namespace detail

} // namespace sdnn
