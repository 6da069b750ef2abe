#include "ecgaug/tensor.hpp"

#include <atomic>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace ecgaug {

namespace ops {
Tensor add(const Tensor& a, const Tensor& b); // ops_basic.cpp
}

namespace {

thread_local Tape* g_active_tape = nullptr;
thread_local bool g_grad_enabled = true;
std::atomic<uint64_t> g_tape_counter{1};

Tensor raw_add(const Tensor& a, const Tensor& b) {
    std::vector<double> out(a.data().begin(), a.data().end());
    auto pb = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] += pb[i];
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = a.shape();
    impl->data = std::move(out);
    return Tensor(std::move(impl));
}

} // namespace

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (int64_t e : shape) {
        if (e <= 0) throw ShapeError("non-positive extent in shape " + shape_str(shape));
        n *= e;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor Tensor::zeros(Shape shape) {
    auto impl = std::make_shared<TensorImpl>();
    int64_t n = shape_numel(shape);
    impl->shape = std::move(shape);
    impl->data.assign(static_cast<size_t>(n), 0.0);
    return Tensor(std::move(impl));
}

Tensor Tensor::full(Shape shape, double value) {
    auto impl = std::make_shared<TensorImpl>();
    int64_t n = shape_numel(shape);
    impl->shape = std::move(shape);
    impl->data.assign(static_cast<size_t>(n), value);
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

Tensor Tensor::from(Shape shape, std::vector<double> data) {
    int64_t n = shape_numel(shape);
    if (n != static_cast<int64_t>(data.size()))
        throw ShapeError("Tensor::from: " + std::to_string(data.size()) +
                         " values for shape " + shape_str(shape));
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    return Tensor(std::move(impl));
}

const Shape& Tensor::shape() const {
    if (!impl_) throw Error("shape() on undefined tensor");
    return impl_->shape;
}

int64_t Tensor::numel() const { return static_cast<int64_t>(shape_numel(shape())); }
int64_t Tensor::dim() const { return static_cast<int64_t>(shape().size()); }

int64_t Tensor::extent(int64_t axis) const {
    const Shape& s = shape();
    if (axis < 0 || axis >= static_cast<int64_t>(s.size()))
        throw ShapeError("extent: axis " + std::to_string(axis) + " of " + shape_str(s));
    return s[static_cast<size_t>(axis)];
}

std::span<const double> Tensor::data() const {
    if (!impl_) throw Error("data() on undefined tensor");
    return {impl_->data.data(), impl_->data.size()};
}

std::span<double> Tensor::raw_data() {
    if (!impl_) throw Error("raw_data() on undefined tensor");
    if (impl_->vjp) throw Error("raw_data(): refusing to mutate a graph node");
    return {impl_->data.data(), impl_->data.size()};
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item(): tensor has " + std::to_string(numel()) + " elements");
    return impl_->data[0];
}

double Tensor::at(std::initializer_list<int64_t> index) const {
    const Shape& s = shape();
    if (index.size() != s.size()) throw ShapeError("at(): rank mismatch");
    int64_t flat = 0;
    size_t d = 0;
    for (int64_t i : index) {
        if (i < 0 || i >= s[d]) throw ShapeError("at(): index out of range");
        flat = flat * s[d] + i;
        ++d;
    }
    return impl_->data[static_cast<size_t>(flat)];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
    if (!impl_) throw Error("set_requires_grad on undefined tensor");
    if (!impl_->leaf) throw Error("set_requires_grad: only leaves can be re-marked");
    impl_->requires_grad = value;
    return *this;
}

bool Tensor::is_leaf() const { return impl_ && impl_->leaf; }

Tensor Tensor::grad() const {
    if (!impl_) throw Error("grad() on undefined tensor");
    return impl_->grad;
}

void Tensor::clear_grad() {
    if (impl_) impl_->grad = Tensor();
}

Tensor Tensor::detach() const {
    if (!impl_) throw Error("detach() on undefined tensor");
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;
    return Tensor(std::move(impl));
}

Tape::Tape(bool higher_order) : higher_order_(higher_order) {
    id_ = g_tape_counter.fetch_add(1);
    prev_ = g_active_tape;
    g_active_tape = this;
}

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(const Tensor& node) {
    node.impl()->tape_id = id_;
    node.impl()->tape_pos = nodes_.size();
    nodes_.push_back(node);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor make_node(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                 Vjp vjp, const char* op) {
    int64_t n = shape_numel(shape);
    if (n != static_cast<int64_t>(data.size()))
        throw ShapeError(std::string(op) + ": " + std::to_string(data.size()) +
                         " values for shape " + shape_str(shape));
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->op = op;

    bool track = false;
    if (g_grad_enabled && g_active_tape) {
        for (const Tensor& p : parents)
            if (p.defined() && (p.requires_grad() || p.impl()->vjp)) { track = true; break; }
    }
    Tensor out(std::move(impl));
    if (track) {
        out.impl()->parents = std::move(parents);
        out.impl()->vjp = std::move(vjp);
        out.impl()->leaf = false;
        out.impl()->requires_grad = true;
        g_active_tape->record(out);
    }
    return out;
}

namespace {

// Shared reverse sweep. Returns accumulated gradients per reachable impl.
// Stored tensors are never mutated in place; each accumulation builds a fresh
// sum, so a gradient handed to several parents stays intact.
std::unordered_map<TensorImpl*, Tensor> reverse_sweep(const Tape& tape,
                                                      const std::vector<Tensor>& nodes,
                                                      const Tensor& root,
                                                      bool create_graph) {
    if (!root.defined()) throw Error("backward: undefined loss");
    if (root.numel() != 1)
        throw ShapeError("backward: loss must be a scalar, got " + shape_str(root.shape()));
    TensorImpl* root_impl = root.impl();
    if (!root_impl->vjp) {
        if (root_impl->leaf && root_impl->requires_grad) {
            // Trivial graph: d(root)/d(root) = 1.
            std::unordered_map<TensorImpl*, Tensor> grads;
            grads[root_impl] = Tensor::scalar(1.0);
            return grads;
        }
        throw Error("backward: loss was not recorded on a tape "
                    "(no active tape during the forward pass?)");
    }
    if (root_impl->tape_id != tape.id())
        throw Error("backward: loss belongs to a different tape");

    // Reachability from the root through recorded edges.
    std::unordered_set<TensorImpl*> reachable;
    std::vector<TensorImpl*> stack{root_impl};
    while (!stack.empty()) {
        TensorImpl* cur = stack.back();
        stack.pop_back();
        if (!reachable.insert(cur).second) continue;
        for (const Tensor& p : cur->parents)
            if (p.defined() && (p.impl()->vjp || p.requires_grad()))
                stack.push_back(p.impl());
    }

    std::unordered_map<TensorImpl*, Tensor> grads;
    grads[root_impl] = Tensor::scalar(1.0);

    auto accumulate = [&](TensorImpl* key, const Tensor& g) {
        auto it = grads.find(key);
        if (it == grads.end()) {
            grads.emplace(key, g);
        } else if (create_graph) {
            // Recorded addition so the accumulated gradient stays differentiable.
            it->second = ops::add(it->second, g);
        } else {
            it->second = raw_add(it->second, g);
        }
    };

    // nodes vector may grow while we iterate (create_graph appends the
    // re-recorded backward ops); index from the root position downwards.
    size_t start = root_impl->tape_pos;
    for (size_t pos = start + 1; pos-- > 0;) {
        TensorImpl* node = nodes[pos].impl();
        if (!reachable.count(node)) continue;
        auto git = grads.find(node);
        if (git == grads.end() || !node->vjp) continue;
        Tensor gout = git->second;
        std::vector<Tensor> parent_grads;
        if (create_graph) {
            parent_grads = node->vjp(gout);
        } else {
            NoGradGuard ng;
            parent_grads = node->vjp(gout);
        }
        if (parent_grads.size() != node->parents.size())
            throw Error(std::string("backward: vjp arity mismatch in op ") + node->op);
        for (size_t i = 0; i < parent_grads.size(); ++i) {
            const Tensor& parent = node->parents[i];
            if (!parent.defined()) continue;
            TensorImpl* pi = parent.impl();
            if (!pi->vjp && !pi->requires_grad) continue;
            if (!parent_grads[i].defined()) continue;
            if (parent_grads[i].shape() != pi->shape)
                throw ShapeError(std::string("backward: vjp of ") + node->op +
                                 " produced shape " + shape_str(parent_grads[i].shape()) +
                                 " for parent " + shape_str(pi->shape));
            accumulate(pi, parent_grads[i]);
        }
    }
    return grads;
}

} // namespace

void Tape::backward(const Tensor& loss, bool create_graph) {
    auto grads = reverse_sweep(*this, nodes_, loss, create_graph);
    for (auto& [impl, g] : grads) {
        if (!impl->leaf || !impl->requires_grad) continue;
        if (impl->grad.defined()) {
            NoGradGuard ng;
            impl->grad = raw_add(impl->grad, g);
        } else {
            impl->grad = g;
        }
    }
}

std::vector<Tensor> Tape::grad(const Tensor& output, const std::vector<Tensor>& inputs) {
    return grad(output, inputs, higher_order_);
}

std::vector<Tensor> Tape::grad(const Tensor& output, const std::vector<Tensor>& inputs,
                               bool create_graph) {
    auto grads = reverse_sweep(*this, nodes_, output, create_graph);
    std::vector<Tensor> out;
    out.reserve(inputs.size());
    for (const Tensor& in : inputs) {
        auto it = grads.find(in.impl());
        if (it != grads.end())
            out.push_back(it->second);
        else
            out.push_back(Tensor::zeros(in.shape()));
    }
    return out;
}

void backward(const Tensor& loss, bool create_graph) {
    Tape* tape = Tape::active();
    if (!tape) throw Error("backward: no active tape");
    tape->backward(loss, create_graph);
}

} // namespace ecgaug
