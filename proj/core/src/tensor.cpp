#include "sdnn/tensor.hpp"

#include "sdnn/error.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace sdnn {

namespace {

std::atomic<std::uint64_t> g_sequence{0};
thread_local bool t_grad_enabled = true;
thread_local bool t_kink_trace = false;
thread_local std::uint64_t t_kink_hash = 0;
std::string g_backward_fault;

void check_shape(const Shape& shape)
{
    for (std::size_t extent : shape) {
        if (extent == 0) {
            throw ShapeError("tensor extents must be >= 1, got " + shape_string(shape));
        }
    }
}

} // namespace

std::size_t shape_numel(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape)
{
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            out << 'x';
        }
        out << shape[i];
    }
    out << ']';
    return out.str();
}

std::span<float> detail::Node::ensure_grad()
{
    if (grad.size() != data.size()) {
        grad.assign(data.size(), 0.0f);
    }
    return grad;
}

Tensor::Tensor() : Tensor(Shape{1}, std::vector<float>{0.0f}) {}

Tensor::Tensor(Shape shape, std::vector<float> data, bool requires_grad)
    : node_(std::make_shared<detail::Node>())
{
    check_shape(shape);
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_string(shape));
    }
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
}

Tensor::Tensor(detail::NodePtr node) : node_(std::move(node)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad)
{
    return full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad)
{
    check_shape(shape);
    std::vector<float> data(shape_numel(shape), value);
    return Tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(float value, bool requires_grad)
{
    return Tensor(Shape{1}, std::vector<float>{value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const
{
    if (axis >= node_->shape.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string(node_->shape));
    }
    return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->data.size(); }

std::span<const float> Tensor::data() const { return node_->data; }

std::span<float> Tensor::mutable_data() { return node_->data; }

float Tensor::item() const
{
    if (numel() != 1) {
        throw ShapeError("item() needs a single-element tensor, got " + shape_string(shape()));
    }
    return node_->data[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

void Tensor::set_requires_grad(bool value) { node_->requires_grad = value; }

bool Tensor::has_grad() const { return !node_->grad.empty(); }

std::span<const float> Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad()
{
    if (!node_->grad.empty()) {
        std::fill(node_->grad.begin(), node_->grad.end(), 0.0f);
    }
}

bool Tensor::is_leaf() const { return node_->creator == nullptr; }

Tensor Tensor::clone() const { return Tensor(node_->shape, node_->data, false); }

Tape Tape::collect(const Tensor& root)
{
    Tape tape;
    std::unordered_set<const detail::OpRecord*> seen;
    std::vector<const detail::Node*> stack{root.node().get()};
    while (!stack.empty()) {
        const detail::Node* node = stack.back();
        stack.pop_back();
        const auto& op = node->creator;
        if (!op || !seen.insert(op.get()).second) {
            continue;
        }
        tape.entries_.push_back(op);
        for (const auto& input : op->inputs) {
            stack.push_back(input.get());
        }
    }
    std::sort(tape.entries_.begin(), tape.entries_.end(),
              [](const auto& a, const auto& b) { return a->sequence < b->sequence; });
    return tape;
}

void Tape::backward(const Tensor& root) const
{
    // Intermediate gradients are per-pass scratch space.
    for (const auto& op : entries_) {
        for (const auto& input : op->inputs) {
            if (input->creator && input->requires_grad) {
                std::fill(input->grad.begin(), input->grad.end(), 0.0f);
            }
        }
    }
    const auto& root_node = root.node();
    if (root_node->creator) {
        root_node->grad.assign(root_node->data.size(), 0.0f);
    }
    auto root_grad = root_node->ensure_grad();
    root_grad[0] += 1.0f;

    for (std::size_t i = entries_.size(); i-- > 0;) {
        const detail::Node* out = entries_[i]->output;
        if (out->grad.empty()) {
            continue;
        }
        entries_[i]->backward(out->grad, entries_[i]->inputs);
    }
}

void backward(const Tensor& loss)
{
    if (loss.numel() != 1) {
        throw ShapeError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
    }
    Tape::collect(loss).backward(loss);
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

namespace detail {

Tensor make_result(std::string name, Shape shape, std::vector<float> data,
                   std::initializer_list<Tensor> inputs, BackwardFn backward)
{
    Tensor out(std::move(shape), std::move(data), false);
    if (!t_grad_enabled) {
        return out;
    }
    const bool needs_grad =
        std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
    if (!needs_grad) {
        return out;
    }
    auto record = std::make_shared<OpRecord>();
    record->name = std::move(name);
    record->sequence = g_sequence.fetch_add(1, std::memory_order_relaxed);
    for (const Tensor& input : inputs) {
        record->inputs.push_back(input.node());
    }
    record->backward = std::move(backward);
    record->output = out.node().get();
    out.node()->requires_grad = true;
    out.node()->creator = std::move(record);
    return out;
}

void set_backward_fault(std::string op_name) { g_backward_fault = std::move(op_name); }

const std::string& backward_fault() { return g_backward_fault; }

float backward_fault_scale(const std::string& op_name)
{
    return (!g_backward_fault.empty() && g_backward_fault == op_name) ? 1.5f : 1.0f;
}

bool kink_trace_active() { return t_kink_trace; }

void kink_trace_mix(std::uint64_t value)
{
    // splitmix64 finalizer over the running hash
    std::uint64_t z = t_kink_hash ^ (value + 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    t_kink_hash = z ^ (z >> 31);
}

KinkTrace::KinkTrace() : previous_(t_kink_trace), saved_hash_(t_kink_hash)
{
    t_kink_trace = true;
    t_kink_hash = 0;
}

KinkTrace::~KinkTrace()
{
    t_kink_trace = previous_;
    t_kink_hash = saved_hash_;
}

std::uint64_t KinkTrace::signature() const { return t_kink_hash; }

} // namespace detail

} // namespace sdnn
