#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ecgaug/error.hpp"

namespace ecgaug {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl;

// Dense row-major array of 64-bit floats with shape metadata.
//
// A Tensor is a cheap shared handle. Leaf tensors (parameters, inputs) may be
// marked requires_grad; results of ops executed while a Tape is active keep
// references to their inputs so Tape::backward / Tape::grad can replay the
// chain rule. Results produced with no active tape carry no graph state.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor scalar(double value);
    static Tensor from(Shape shape, std::vector<double> data);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    int64_t numel() const;
    int64_t dim() const;
    int64_t extent(int64_t axis) const;

    std::span<const double> data() const;
    // Mutable access to leaf storage (optimizer updates, running stats).
    // Refuses to expose graph-node storage.
    std::span<double> raw_data();
    double item() const;
    double at(std::initializer_list<int64_t> index) const;

    bool requires_grad() const;
    Tensor& set_requires_grad(bool value);
    bool is_leaf() const;
    Tensor grad() const;
    void clear_grad();
    // Fresh leaf with copied data and no graph history.
    Tensor detach() const;

    TensorImpl* impl() const { return impl_.get(); }
    const std::shared_ptr<TensorImpl>& impl_ptr() const { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

// Given the gradient of the loss w.r.t. an op's output, produce the gradients
// w.r.t. each recorded parent, in parent order.
using Vjp = std::function<std::vector<Tensor>(const Tensor& grad_out)>;

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    bool leaf = true;
    Tensor grad;

    // Graph state, populated only when recorded on a tape.
    std::vector<Tensor> parents;
    Vjp vjp;
    const char* op = "";
    uint64_t tape_id = 0;
    size_t tape_pos = 0;
};

// Records op results in creation order (so parents always precede children).
// One tape is built per training step and dropped afterwards. When
// higher_order is set, gradients computed by grad() are themselves recorded
// onto the tape, so a later backward() differentiates through them - this is
// how the gradient penalty reaches the critic parameters.
class Tape {
public:
    explicit Tape(bool higher_order = false);
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool higher_order() const { return higher_order_; }
    size_t size() const { return nodes_.size(); }
    uint64_t id() const { return id_; }

    // Accumulates into .grad of every reachable requires_grad leaf.
    void backward(const Tensor& loss, bool create_graph = false);

    // Functional form: returns d(output)/d(inputs) without touching leaf .grad.
    // create_graph defaults to the tape's higher_order flag.
    std::vector<Tensor> grad(const Tensor& output, const std::vector<Tensor>& inputs);
    std::vector<Tensor> grad(const Tensor& output, const std::vector<Tensor>& inputs,
                             bool create_graph);

    static Tape* active();

private:
    friend Tensor make_node(Shape, std::vector<double>, std::vector<Tensor>, Vjp, const char*);
    void record(const Tensor& node);

    std::vector<Tensor> nodes_;
    bool higher_order_ = false;
    uint64_t id_ = 0;
    Tape* prev_ = nullptr;
};

// Temporarily disables recording; ops run as plain numeric evaluation.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

bool grad_enabled();

// Backward on the innermost active tape; errors if none is active.
void backward(const Tensor& loss, bool create_graph = false);

// Op plumbing: wraps a computed value, recording parents + vjp when a tape is
// active, grad mode is on, and at least one parent requires grad.
Tensor make_node(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                 Vjp vjp, const char* op);

} // namespace ecgaug
