#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "textgan/error.hpp"
#include "textgan/rng.hpp"

namespace textgan {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);

namespace detail {

struct TensorImpl {
    Shape shape;
    std::vector<float> data;   // row-major
    std::vector<float> grad;   // empty until first accumulation
    bool requires_grad = false;
    bool tracked = false;      // produced by a recorded op on the active tape
};

}  // namespace detail

// Dense float32 tensor handle with value semantics over shared storage.
// Values are written once by the op that creates the tensor; only gradient
// buffers and optimizer updates mutate storage afterwards.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value);
    static Tensor scalar(float value);
    static Tensor from(Shape shape, std::vector<float> data, bool requires_grad = false);
    static Tensor randn(Shape shape, Rng& rng, float stddev, bool requires_grad = false);
    static Tensor rand_uniform(Shape shape, Rng& rng, float lo, float hi, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(p_); }
    const Shape& shape() const { return p_->shape; }
    int ndim() const { return static_cast<int>(p_->shape.size()); }
    int dim(int i) const { return p_->shape[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(p_->data.size()); }

    std::vector<float>& data() { return p_->data; }
    const std::vector<float>& data() const { return p_->data; }
    float item() const;

    // 2-d accessors (row-major).
    float at(int r, int c) const { return p_->data[static_cast<size_t>(r) * dim(1) + c]; }
    float& at(int r, int c) { return p_->data[static_cast<size_t>(r) * dim(1) + c]; }

    bool requires_grad() const { return p_->requires_grad; }
    Tensor& set_requires_grad(bool v) {
        p_->requires_grad = v;
        return *this;
    }
    // True when gradients must flow through this tensor during backward.
    bool needs_grad() const { return p_->requires_grad || p_->tracked; }
    void mark_tracked() { p_->tracked = true; }

    bool grad_allocated() const { return !p_->grad.empty(); }
    // Allocates a zero gradient buffer on first use. Gradient storage is
    // shared like the data, so it is reachable through const handles.
    std::vector<float>& grad() const;
    void zero_grad() const { p_->grad.clear(); }

    bool same_storage(const Tensor& other) const { return p_ == other.p_; }

private:
    std::shared_ptr<detail::TensorImpl> p_;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Reverse-mode tape: a flat list of recorded operations. backward() seeds the
// loss gradient with 1 and replays backward rules in reverse recorded order;
// tensors feeding multiple consumers accumulate gradients additively.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(const char* op_name, std::function<void()> backward_fn);
    void backward(const Tensor& loss);
    size_t size() const { return records_.size(); }
    void clear() { records_.clear(); }

    static Tape* active();

private:
    friend class TapeScope;
    struct Record {
        const char* op;
        std::function<void()> backward_fn;
    };
    std::vector<Record> records_;
};

// RAII activation of a tape for the current thread.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

namespace debug {
// When enabled, every op scans its output and throws NumericError naming the
// op on the first NaN/Inf. Off by default.
void set_nan_guard(bool enabled);
bool nan_guard_enabled();
}  // namespace debug

namespace ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
// [r x c] plus a length-c row vector broadcast over rows.
Tensor add_bias(const Tensor& m, const Tensor& bias);
// Elementwise addition of a constant buffer (no gradient into the constant).
Tensor add_const(const Tensor& a, const std::vector<float>& c);

Tensor matmul(const Tensor& a, const Tensor& b);
// a [m x d] * transpose(b [n x d]) -> [m x n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
// max(x, lo) elementwise; gradient passes only where x > lo.
Tensor clamp_min(const Tensor& x, float lo);

// Softmax along the last axis of a 1-d or 2-d tensor, max-subtracted.
Tensor softmax(const Tensor& x);
// Per-row log softmax value at the given index: out[i] = log p(ids[i] | row i).
Tensor log_softmax_gather(const Tensor& logits, const std::vector<int>& ids);
// Mean over non-ignored rows of -log softmax(logits)[target].
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets, int ignore_index);
// Weighted sum with constant weights: sum_i v[i] * w[i] -> scalar.
Tensor dot_const(const Tensor& v, const std::vector<float>& w);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, int begin, int end);
Tensor reshape(const Tensor& x, Shape shape);

// Gather rows of table by id; backward scatter-adds into the table gradient.
Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids);

// Per-row mean/variance normalization with learned gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, float eps = 1e-5f);

// Inverted dropout: train mode scales kept units by 1/(1-rate), eval is identity.
Tensor dropout(const Tensor& x, float rate, Rng& rng, bool training);

// Sampling utilities (no gradient).
int multinomial_sample(const std::vector<float>& probs, Rng& rng);
int argmax(const std::vector<float>& values);

}  // namespace ops

struct FiniteDiffReport {
    float max_rel_err = 0.0f;
    int64_t worst_index = -1;
    bool pass = false;
};

// Central finite-difference gradient oracle. Compares the analytic gradient of
// scalar-valued f at x against (f(x+eps)-f(x-eps))/2eps per coordinate; the
// reported error is |analytic-numeric| / max(|analytic|, |numeric|, 1).
// f must be deterministic.
FiniteDiffReport finite_diff_check(const std::function<Tensor(const Tensor&)>& f,
                                   const Tensor& x, float eps, float tol);

}  // namespace textgan
