#include "textgan/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace textgan {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << "]";
    return os.str();
}

namespace {

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

thread_local Tape* g_active_tape = nullptr;
std::atomic<bool> g_nan_guard{false};

void guard_output(const char* op, const Tensor& out) {
    if (!g_nan_guard.load(std::memory_order_relaxed)) return;
    for (float v : out.data()) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite value produced by op '") + op + "'");
        }
    }
}

// Records a backward rule when a tape is active and any input needs gradient.
// Marks the output as tracked so downstream ops keep propagating.
template <typename Fn>
void maybe_record(const char* op, Tensor& out, bool any_input_needs_grad, Fn&& backward_fn) {
    guard_output(op, out);
    Tape* tape = Tape::active();
    if (tape != nullptr && any_input_needs_grad) {
        out.mark_tracked();
        tape->record(op, std::forward<Fn>(backward_fn));
    }
}

// Gradient buffer of t if one was ever accumulated, else nullptr (= all-zero).
const std::vector<float>* grad_or_null(const Tensor& t) {
    return t.grad_allocated() ? &t.grad() : nullptr;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    Tensor t;
    t.p_ = std::make_shared<detail::TensorImpl>();
    t.p_->shape = std::move(shape);
    t.p_->data.assign(static_cast<size_t>(shape_numel(t.p_->shape)), 0.0f);
    t.p_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::full(Shape shape, float value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.data().begin(), t.data().end(), value);
    return t;
}

Tensor Tensor::scalar(float value) { return full({1}, value); }

Tensor Tensor::from(Shape shape, std::vector<float> data, bool requires_grad) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
        throw ShapeError("Tensor::from: " + shape_str(shape) + " does not hold " +
                         std::to_string(data.size()) + " values");
    }
    Tensor t;
    t.p_ = std::make_shared<detail::TensorImpl>();
    t.p_->shape = std::move(shape);
    t.p_->data = std::move(data);
    t.p_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::randn(Shape shape, Rng& rng, float stddev, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (float& v : t.data()) v = rng.normal(0.0f, stddev);
    return t;
}

Tensor Tensor::rand_uniform(Shape shape, Rng& rng, float lo, float hi, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (float& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

float Tensor::item() const {
    if (numel() != 1) {
        throw ContractError("item(): tensor has " + std::to_string(numel()) + " elements");
    }
    return p_->data[0];
}

std::vector<float>& Tensor::grad() const {
    if (p_->grad.empty()) p_->grad.assign(p_->data.size(), 0.0f);
    return p_->grad;
}

Tape* Tape::active() { return g_active_tape; }

void Tape::record(const char* op_name, std::function<void()> backward_fn) {
    records_.push_back({op_name, std::move(backward_fn)});
}

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw ContractError("backward(): loss must be scalar, got " + shape_str(loss.shape()));
    }
    loss.grad()[0] += 1.0f;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        it->backward_fn();
    }
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

namespace debug {
void set_nan_guard(bool enabled) { g_nan_guard.store(enabled, std::memory_order_relaxed); }
bool nan_guard_enabled() { return g_nan_guard.load(std::memory_order_relaxed); }
}  // namespace debug

namespace ops {

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    Tensor out = Tensor::zeros(a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    maybe_record("add", out, a.needs_grad() || b.needs_grad(), [a, b, out]() mutable {
        const auto* g = grad_or_null(out);
        if (!g) return;
        if (a.needs_grad()) {
            auto& ga = a.grad();
            for (size_t i = 0; i < g->size(); ++i) ga[i] += (*g)[i];
        }
        if (b.needs_grad()) {
            auto& gb = b.grad();
            for (size_t i = 0; i < g->size(); ++i) gb[i] += (*g)[i];
        }
    });
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape("sub", a, b);
    Tensor out = Tensor::zeros(a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    maybe_record("sub", out, a.needs_grad() || b.needs_grad(), [a, b, out]() mutable {
        const auto* g = grad_or_null(out);
        if (!g) return;
        if (a.needs_grad()) {
            auto& ga = a.grad();
            for (size_t i = 0; i < g->size(); ++i) ga[i] += (*g)[i];
        }
        if (b.needs_grad()) {
            auto& gb = b.grad();
            for (size_t i = 0; i < g->size(); ++i) gb[i] -= (*g)[i];
        }
    });
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    Tensor out = Tensor::zeros(a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    maybe_record("mul", out, a.needs_grad() || b.needs_grad(), [a, b, out]() mutable {
        const auto* g = grad_or_null(out);
        if (!g) return;
        if (a.needs_grad()) {
            auto& ga = a.grad();
            for (size_t i = 0; i < g->size(); ++i) ga[i] += (*g)[i] * b.data()[i];
        }
        if (b.needs_grad()) {
            auto& gb = b.grad();
            for (size_t i = 0; i < g->size(); ++i) gb[i] += (*g)[i] * a.data()[i];
        }
    });
    return out;
}

Tensor scale(const Tensor& a, float s) {
    Tensor out = Tensor::zeros(a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * s;
    maybe_record("scale", out, a.needs_grad(), [a, out, s]() mutable {
        const auto* g = grad_or_null(out);
        if (!g || !a.needs_grad()) return;
        auto& ga = a.grad();
        for (size_t i = 0; i < g->size(); ++i) ga[i] += (*g)[i] * s;
    });
    return out;
}

Tensor add_bias(const Tensor& m, const Tensor& bias) {
    if (m.ndim() != 2 || bias.ndim() != 1 || m.dim(1) != bias.dim(0)) {
        throw ShapeError("add_bias: " + shape_str(m.shape()) + " + " + shape_str(bias.shape()));
    }
    const int rows = m.dim(0), cols = m.dim(1);
    Tensor out = Tensor::zeros(m.shape());
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            out.at(r, c) = m.at(r, c) + bias.data()[static_cast<size_t>(c)];
    maybe_record("add_bias", out, m.needs_grad() || bias.needs_grad(),
                 [m, bias, out, rows, cols]() mutable {
                     const auto* g = grad_or_null(out);
                     if (!g) return;
                     if (m.needs_grad()) {
                         auto& gm = m.grad();
                         for (size_t i = 0; i < g->size(); ++i) gm[i] += (*g)[i];
                     }
                     if (bias.needs_grad()) {
                         auto& gb = bias.grad();
                         for (int r = 0; r < rows; ++r)
                             for (int c = 0; c < cols; ++c)
                                 gb[static_cast<size_t>(c)] += (*g)[static_cast<size_t>(r) * cols + c];
                     }
                 });
    return out;
}

Tensor add_const(const Tensor& a, const std::vector<float>& c) {
    if (static_cast<int64_t>(c.size()) != a.numel()) {
        throw ShapeError("add_const: constant size " + std::to_string(c.size()) +
                         " vs tensor " + shape_str(a.shape()));
    }
    Tensor out = Tensor::zeros(a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] + c[static_cast<size_t>(i)];
    maybe_record("add_const", out, a.needs_grad(), [a, out]() mutable {
        const auto* g = grad_or_null(out);
        if (!g || !a.needs_grad()) return;
        auto& ga = a.grad();
        for (size_t i = 0; i < g->size(); ++i) ga[i] += (*g)[i];
    });
    return out;
}

namespace {

// out[m x n] += A[m x k] * B[k x n]; ikj order keeps the inner loop contiguous.
void gemm_acc(const float* a, const float* b, float* out, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const float* arow = a + static_cast<size_t>(i) * k;
        float* orow = out + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const float av = arow[p];
            if (av == 0.0f) continue;
            const float* brow = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

// out[m x n] += A[m x k] * transpose(B[n x k])
void gemm_nt_acc(const float* a, const float* b, float* out, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const float* arow = a + static_cast<size_t>(i) * k;
        float* orow = out + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const float* brow = b + static_cast<size_t>(j) * k;
            float acc = 0.0f;
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            orow[j] += acc;
        }
    }
}

// out[k x n] += transpose(A[m x k]) * B[m x n]
void gemm_tn_acc(const float* a, const float* b, float* out, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const float* arow = a + static_cast<size_t>(i) * k;
        const float* brow = b + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const float av = arow[p];
            if (av == 0.0f) continue;
            float* orow = out + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: " + shape_str(a.shape()) + " * " + shape_str(b.shape()));
    }
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out = Tensor::zeros({m, n});
    gemm_acc(a.data().data(), b.data().data(), out.data().data(), m, k, n);
    maybe_record("matmul", out, a.needs_grad() || b.needs_grad(), [a, b, out, m, k, n]() mutable {
        const auto* g = grad_or_null(out);
        if (!g) return;
        if (a.needs_grad()) {
            // dA = dC * B^T
            gemm_nt_acc(g->data(), b.data().data(), a.grad().data(), m, n, k);
        }
        if (b.needs_grad()) {
            // dB = A^T * dC
            gemm_tn_acc(a.data().data(), g->data(), b.grad().data(), m, k, n);
        }
    });
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(1)) {
        throw ShapeError("matmul_nt: " + shape_str(a.shape()) + " * " + shape_str(b.shape()) + "^T");
    }
    const int m = a.dim(0), d = a.dim(1), n = b.dim(0);
    Tensor out = Tensor::zeros({m, n});
    gemm_nt_acc(a.data().data(), b.data().data(), out.data().data(), m, d, n);
    maybe_record("matmul_nt", out, a.needs_grad() || b.needs_grad(), [a, b, out, m, d, n]() mutable {
        const auto* g = grad_or_null(out);
        if (!g) return;
        if (a.needs_grad()) {
            // dA = dC * B
            gemm_acc(g->data(), b.data().data(), a.grad().data(), m, n, d);
        }
        if (b.needs_grad()) {
            // dB = dC^T * A
            gemm_tn_acc(g->data(), a.data().data(), b.grad().data(), m, n, d);
        }
    });
    return out;
}

Tensor tanh(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) out.data()[i] = std::tanh(x.data()[i]);
    maybe_record("tanh", out, x.needs_grad(), [x, out]() mutable {
        const auto* g = grad_or_null(out);
        if (!g || !x.needs_grad()) return;
        auto& gx = x.grad();
        for (size_t i = 0; i < g->size(); ++i) {
            const float y = out.data()[i];
            gx[i] += (*g)[i] * (1.0f - y * y);
        }
    });
    return out;
}

Tensor sigmoid(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) {
        const float v = x.data()[i];
        out.data()[i] = v >= 0.0f ? 1.0f / (1.0f + std::exp(-v))
                                  : std::exp(v) / (1.0f + std::exp(v));
    }
    maybe_record("sigmoid", out, x.needs_grad(), [x, out]() mutable {
        const auto* g = grad_or_null(out);
        if (!g || !x.needs_grad()) return;
        auto& gx = x.grad();
        for (size_t i = 0; i < g->size(); ++i) {
            const float y = out.data()[i];
            gx[i] += (*g)[i] * y * (1.0f - y);
        }
    });
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i] > 0.0f ? x.data()[i] : 0.0f;
    maybe_record("relu", out, x.needs_grad(), [x, out]() mutable {
        const auto* g = grad_or_null(out);
        if (!g || !x.needs_grad()) return;
        auto& gx = x.grad();
        for (size_t i = 0; i < g->size(); ++i) {
            if (x.data()[i] > 0.0f) gx[i] += (*g)[i];
        }
    });
    return out;
}

Tensor clamp_min(const Tensor& x, float lo) {
    Tensor out = Tensor::zeros(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) out.data()[i] = std::max(x.data()[i], lo);
    maybe_record("clamp_min", out, x.needs_grad(), [x, out, lo]() mutable {
        const auto* g = grad_or_null(out);
        if (!g || !x.needs_grad()) return;
        auto& gx = x.grad();
        for (size_t i = 0; i < g->size(); ++i) {
            if (x.data()[i] > lo) gx[i] += (*g)[i];
        }
    });
    return out;
}

namespace {

void softmax_row(const float* in, float* out, int n) {
    float mx = in[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, in[i]);
    double denom = 0.0;
    for (int i = 0; i < n; ++i) {
        const double e = std::exp(static_cast<double>(in[i]) - mx);
        out[i] = static_cast<float>(e);
        denom += e;
    }
    const float inv = static_cast<float>(1.0 / denom);
    for (int i = 0; i < n; ++i) out[i] *= inv;
}

double log_sum_exp_row(const float* in, int n) {
    float mx = in[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, in[i]);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::exp(static_cast<double>(in[i]) - mx);
    return static_cast<double>(mx) + std::log(s);
}

}  // namespace

Tensor softmax(const Tensor& x) {
    if (x.ndim() != 1 && x.ndim() != 2) {
        throw ShapeError("softmax: expects 1-d or 2-d, got " + shape_str(x.shape()));
    }
    const int n = x.dim(x.ndim() - 1);
    if (n < 1) throw ShapeError("softmax: empty axis");
    const int rows = static_cast<int>(x.numel() / n);
    Tensor out = Tensor::zeros(x.shape());
    for (int r = 0; r < rows; ++r) {
        softmax_row(x.data().data() + static_cast<size_t>(r) * n,
                    out.data().data() + static_cast<size_t>(r) * n, n);
    }
    maybe_record("softmax", out, x.needs_grad(), [x, out, rows, n]() mutable {
        const auto* g = grad_or_null(out);
        if (!g || !x.needs_grad()) return;
        auto& gx = x.grad();
        for (int r = 0; r < rows; ++r) {
            const size_t off = static_cast<size_t>(r) * n;
            double dot = 0.0;
            for (int i = 0; i < n; ++i) dot += static_cast<double>((*g)[off + i]) * out.data()[off + i];
            for (int i = 0; i < n; ++i) {
                gx[off + i] += out.data()[off + i] * ((*g)[off + i] - static_cast<float>(dot));
            }
        }
    });
    return out;
}

Tensor log_softmax_gather(const Tensor& logits, const std::vector<int>& ids) {
    if (logits.ndim() != 2) {
        throw ShapeError("log_softmax_gather: expects 2-d logits, got " + shape_str(logits.shape()));
    }
    const int rows = logits.dim(0), n = logits.dim(1);
    if (static_cast<int>(ids.size()) != rows) {
        throw ShapeError("log_softmax_gather: " + std::to_string(ids.size()) + " ids for " +
                         std::to_string(rows) + " rows");
    }
    Tensor out = Tensor::zeros({rows});
    for (int r = 0; r < rows; ++r) {
        const int id = ids[static_cast<size_t>(r)];
        if (id < 0 || id >= n) {
            throw IndexError("log_softmax_gather: id " + std::to_string(id) + " out of range [0, " +
                             std::to_string(n) + ") at row " + std::to_string(r));
        }
        const float* row = logits.data().data() + static_cast<size_t>(r) * n;
        out.data()[static_cast<size_t>(r)] =
            static_cast<float>(static_cast<double>(row[id]) - log_sum_exp_row(row, n));
    }
    maybe_record("log_softmax_gather", out, logits.needs_grad(), [logits, out, ids, rows, n]() mutable {
        const auto* g = grad_or_null(out);
        if (!g || !logits.needs_grad()) return;
        auto& gl = logits.grad();
        std::vector<float> p(static_cast<size_t>(n));
        for (int r = 0; r < rows; ++r) {
            const float gy = (*g)[static_cast<size_t>(r)];
            if (gy == 0.0f) continue;
            const size_t off = static_cast<size_t>(r) * n;
            softmax_row(logits.data().data() + off, p.data(), n);
            for (int i = 0; i < n; ++i) gl[off + i] -= gy * p[static_cast<size_t>(i)];
            gl[off + ids[static_cast<size_t>(r)]] += gy;
        }
    });
    return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets, int ignore_index) {
    if (logits.ndim() != 2) {
        throw ShapeError("cross_entropy: expects 2-d logits, got " + shape_str(logits.shape()));
    }
    const int rows = logits.dim(0);
    if (static_cast<int>(targets.size()) != rows) {
        throw ShapeError("cross_entropy: target count mismatch");
    }
    int effective = 0;
    for (int t : targets) {
        if (t != ignore_index) ++effective;
    }
    if (effective == 0) throw ContractError("cross_entropy: no effective targets");
    // Ignored rows gather index 0 with zero weight so no gradient reaches them.
    std::vector<int> gather_ids(targets.size());
    std::vector<float> weights(targets.size());
    const float w = -1.0f / static_cast<float>(effective);
    for (size_t i = 0; i < targets.size(); ++i) {
        const bool ignored = targets[i] == ignore_index;
        gather_ids[i] = ignored ? 0 : targets[i];
        weights[i] = ignored ? 0.0f : w;
    }
    Tensor lp = log_softmax_gather(logits, gather_ids);
    return dot_const(lp, weights);
}

Tensor dot_const(const Tensor& v, const std::vector<float>& w) {
    if (static_cast<int64_t>(w.size()) != v.numel()) {
        throw ShapeError("dot_const: weight count mismatch");
    }
    double acc = 0.0;
    for (int64_t i = 0; i < v.numel(); ++i) {
        acc += static_cast<double>(v.data()[i]) * w[static_cast<size_t>(i)];
    }
    Tensor out = Tensor::scalar(static_cast<float>(acc));
    maybe_record("dot_const", out, v.needs_grad(), [v, out, w]() mutable {
        const auto* g = grad_or_null(out);
        if (!g || !v.needs_grad()) return;
        auto& gv = v.grad();
        const float gy = (*g)[0];
        for (size_t i = 0; i < w.size(); ++i) gv[i] += gy * w[i];
    });
    return out;
}

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (float v : x.data()) acc += v;
    Tensor out = Tensor::scalar(static_cast<float>(acc));
    maybe_record("sum", out, x.needs_grad(), [x, out]() mutable {
        const auto* g = grad_or_null(out);
        if (!g || !x.needs_grad()) return;
        auto& gx = x.grad();
        for (float& v : gx) v += (*g)[0];
    });
    return out;
}

Tensor mean(const Tensor& x) {
    if (x.numel() == 0) throw ContractError("mean: empty tensor");
    double acc = 0.0;
    for (float v : x.data()) acc += v;
    const float inv = 1.0f / static_cast<float>(x.numel());
    Tensor out = Tensor::scalar(static_cast<float>(acc) * inv);
    maybe_record("mean", out, x.needs_grad(), [x, out, inv]() mutable {
        const auto* g = grad_or_null(out);
        if (!g || !x.needs_grad()) return;
        auto& gx = x.grad();
        for (float& v : gx) v += (*g)[0] * inv;
    });
    return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ContractError("concat: no parts");
    const int nd = parts[0].ndim();
    if (axis < 0 || axis >= nd) throw ShapeError("concat: bad axis");
    Shape out_shape = parts[0].shape();
    int total = 0;
    for (const Tensor& p : parts) {
        if (p.ndim() != nd) throw ShapeError("concat: rank mismatch");
        for (int i = 0; i < nd; ++i) {
            if (i != axis && p.dim(i) != out_shape[static_cast<size_t>(i)]) {
                throw ShapeError("concat: " + shape_str(p.shape()) + " vs " + shape_str(out_shape));
            }
        }
        total += p.dim(axis);
    }
    out_shape[static_cast<size_t>(axis)] = total;

    // Treat each tensor as [outer x axis_dim x inner].
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= out_shape[static_cast<size_t>(i)];
    for (int i = axis + 1; i < nd; ++i) inner *= out_shape[static_cast<size_t>(i)];

    Tensor out = Tensor::zeros(out_shape);
    bool any_grad = false;
    int64_t offset = 0;
    for (const Tensor& p : parts) {
        any_grad = any_grad || p.needs_grad();
        const int64_t pa = p.dim(axis);
        for (int64_t o = 0; o < outer; ++o) {
            std::memcpy(out.data().data() + (o * total + offset) * inner,
                        p.data().data() + o * pa * inner,
                        static_cast<size_t>(pa * inner) * sizeof(float));
        }
        offset += pa;
    }
    maybe_record("concat", out, any_grad, [parts, out, outer, inner, total, axis]() mutable {
        const auto* g = grad_or_null(out);
        if (!g) return;
        int64_t offset = 0;
        for (Tensor p : parts) {
            const int64_t pa = p.dim(axis);
            if (p.needs_grad()) {
                auto& gp = p.grad();
                for (int64_t o = 0; o < outer; ++o) {
                    const float* src = g->data() + (o * total + offset) * inner;
                    float* dst = gp.data() + o * pa * inner;
                    for (int64_t i = 0; i < pa * inner; ++i) dst[i] += src[i];
                }
            }
            offset += pa;
        }
    });
    return out;
}

Tensor slice(const Tensor& x, int axis, int begin, int end) {
    const int nd = x.ndim();
    if (axis < 0 || axis >= nd) throw ShapeError("slice: bad axis");
    const int ad = x.dim(axis);
    if (begin < 0 || end > ad || begin >= end) {
        throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of axis size " + std::to_string(ad));
    }
    Shape out_shape = x.shape();
    out_shape[static_cast<size_t>(axis)] = end - begin;
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= x.dim(i);
    for (int i = axis + 1; i < nd; ++i) inner *= x.dim(i);
    const int64_t len = end - begin;

    Tensor out = Tensor::zeros(out_shape);
    for (int64_t o = 0; o < outer; ++o) {
        std::memcpy(out.data().data() + o * len * inner,
                    x.data().data() + (o * ad + begin) * inner,
                    static_cast<size_t>(len * inner) * sizeof(float));
    }
    maybe_record("slice", out, x.needs_grad(), [x, out, outer, inner, ad, begin, len]() mutable {
        const auto* g = grad_or_null(out);
        if (!g || !x.needs_grad()) return;
        auto& gx = x.grad();
        for (int64_t o = 0; o < outer; ++o) {
            const float* src = g->data() + o * len * inner;
            float* dst = gx.data() + (o * ad + begin) * inner;
            for (int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
        }
    });
    return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
    }
    Tensor out = Tensor::from(std::move(shape), x.data());
    maybe_record("reshape", out, x.needs_grad(), [x, out]() mutable {
        const auto* g = grad_or_null(out);
        if (!g || !x.needs_grad()) return;
        auto& gx = x.grad();
        for (size_t i = 0; i < g->size(); ++i) gx[i] += (*g)[i];
    });
    return out;
}

Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids) {
    if (table.ndim() != 2) throw ShapeError("embedding_rows: table must be 2-d");
    const int vocab = table.dim(0), d = table.dim(1);
    Tensor out = Tensor::zeros({static_cast<int>(ids.size()), d});
    for (size_t i = 0; i < ids.size(); ++i) {
        const int id = ids[i];
        if (id < 0 || id >= vocab) {
            throw IndexError("embedding_rows: id " + std::to_string(id) + " out of range [0, " +
                             std::to_string(vocab) + ")");
        }
        std::memcpy(out.data().data() + i * static_cast<size_t>(d),
                    table.data().data() + static_cast<size_t>(id) * d,
                    static_cast<size_t>(d) * sizeof(float));
    }
    maybe_record("embedding_rows", out, table.needs_grad(), [table, out, ids, d]() mutable {
        const auto* g = grad_or_null(out);
        if (!g || !table.needs_grad()) return;
        auto& gt = table.grad();
        for (size_t i = 0; i < ids.size(); ++i) {
            const float* src = g->data() + i * static_cast<size_t>(d);
            float* dst = gt.data() + static_cast<size_t>(ids[i]) * d;
            for (int j = 0; j < d; ++j) dst[j] += src[j];
        }
    });
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, float eps) {
    if (x.ndim() != 2) throw ShapeError("layer_norm: expects 2-d input");
    const int rows = x.dim(0), d = x.dim(1);
    if (gain.ndim() != 1 || gain.dim(0) != d || bias.ndim() != 1 || bias.dim(0) != d) {
        throw ShapeError("layer_norm: gain/bias must be [" + std::to_string(d) + "]");
    }
    Tensor out = Tensor::zeros(x.shape());
    std::vector<float> inv_std(static_cast<size_t>(rows));
    std::vector<float> xhat(static_cast<size_t>(rows) * d);
    for (int r = 0; r < rows; ++r) {
        const float* row = x.data().data() + static_cast<size_t>(r) * d;
        double m = 0.0;
        for (int i = 0; i < d; ++i) m += row[i];
        m /= d;
        double var = 0.0;
        for (int i = 0; i < d; ++i) {
            const double dv = row[i] - m;
            var += dv * dv;
        }
        var /= d;
        const float istd = static_cast<float>(1.0 / std::sqrt(var + eps));
        inv_std[static_cast<size_t>(r)] = istd;
        for (int i = 0; i < d; ++i) {
            const float xh = (row[i] - static_cast<float>(m)) * istd;
            xhat[static_cast<size_t>(r) * d + i] = xh;
            out.at(r, i) = xh * gain.data()[static_cast<size_t>(i)] + bias.data()[static_cast<size_t>(i)];
        }
    }
    maybe_record("layer_norm", out,
                 x.needs_grad() || gain.needs_grad() || bias.needs_grad(),
                 [x, gain, bias, out, rows, d, inv_std = std::move(inv_std),
                  xhat = std::move(xhat)]() mutable {
                     const auto* g = grad_or_null(out);
                     if (!g) return;
                     for (int r = 0; r < rows; ++r) {
                         const size_t off = static_cast<size_t>(r) * d;
                         if (gain.needs_grad()) {
                             auto& gg = gain.grad();
                             for (int i = 0; i < d; ++i) gg[static_cast<size_t>(i)] += (*g)[off + i] * xhat[off + i];
                         }
                         if (bias.needs_grad()) {
                             auto& gb = bias.grad();
                             for (int i = 0; i < d; ++i) gb[static_cast<size_t>(i)] += (*g)[off + i];
                         }
                         if (x.needs_grad()) {
                             // dx = istd * (dy*g - mean(dy*g) - xhat * mean(dy*g*xhat))
                             auto& gx = x.grad();
                             double s1 = 0.0, s2 = 0.0;
                             for (int i = 0; i < d; ++i) {
                                 const double dg = static_cast<double>((*g)[off + i]) *
                                                   gain.data()[static_cast<size_t>(i)];
                                 s1 += dg;
                                 s2 += dg * xhat[off + i];
                             }
                             s1 /= d;
                             s2 /= d;
                             const float istd = inv_std[static_cast<size_t>(r)];
                             for (int i = 0; i < d; ++i) {
                                 const double dg = static_cast<double>((*g)[off + i]) *
                                                   gain.data()[static_cast<size_t>(i)];
                                 gx[off + i] += istd * static_cast<float>(dg - s1 - xhat[off + i] * s2);
                             }
                         }
                     }
                 });
    return out;
}

Tensor dropout(const Tensor& x, float rate, Rng& rng, bool training) {
    if (rate < 0.0f || rate >= 1.0f) throw ContractError("dropout: rate must be in [0, 1)");
    if (!training || rate == 0.0f) return x;
    const float keep_scale = 1.0f / (1.0f - rate);
    std::vector<float> mask(static_cast<size_t>(x.numel()));
    for (float& m : mask) m = rng.uniform01() < rate ? 0.0f : keep_scale;
    Tensor out = Tensor::zeros(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i] * mask[static_cast<size_t>(i)];
    maybe_record("dropout", out, x.needs_grad(), [x, out, mask = std::move(mask)]() mutable {
        const auto* g = grad_or_null(out);
        if (!g || !x.needs_grad()) return;
        auto& gx = x.grad();
        for (size_t i = 0; i < g->size(); ++i) gx[i] += (*g)[i] * mask[i];
    });
    return out;
}

int multinomial_sample(const std::vector<float>& probs, Rng& rng) {
    if (probs.empty()) throw ContractError("multinomial_sample: empty distribution");
    double total = 0.0;
    for (float p : probs) total += p;
    if (total <= 0.0) throw ContractError("multinomial_sample: non-positive mass");
    const double u = rng.uniform01() * total;
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

int argmax(const std::vector<float>& values) {
    if (values.empty()) throw ContractError("argmax: empty input");
    int best = 0;
    for (size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[static_cast<size_t>(best)]) best = static_cast<int>(i);
    }
    return best;
}

}  // namespace ops

FiniteDiffReport finite_diff_check(const std::function<Tensor(const Tensor&)>& f,
                                   const Tensor& x, float eps, float tol) {
    if (eps <= 0.0f) throw ContractError("finite_diff_check: eps must be positive");

    Tensor probe = Tensor::from(x.shape(), x.data(), /*requires_grad=*/true);
    std::vector<float> analytic;
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor y = f(probe);
        if (y.numel() != 1) throw ContractError("finite_diff_check: f must return a scalar");
        tape.backward(y);
        analytic = probe.grad_allocated() ? probe.grad()
                                          : std::vector<float>(static_cast<size_t>(x.numel()), 0.0f);
    }

    auto eval = [&f](const Tensor& point) {
        Tape tape;
        TapeScope scope(tape);
        return f(point).item();
    };

    FiniteDiffReport report;
    for (int64_t i = 0; i < x.numel(); ++i) {
        Tensor xp = Tensor::from(x.shape(), x.data());
        Tensor xm = Tensor::from(x.shape(), x.data());
        xp.data()[i] += eps;
        xm.data()[i] -= eps;
        const float numeric = (eval(xp) - eval(xm)) / (2.0f * eps);
        const float a = analytic[static_cast<size_t>(i)];
        const float denom = std::max({std::fabs(a), std::fabs(numeric), 1.0f});
        const float rel = std::fabs(a - numeric) / denom;
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst_index = i;
        }
    }
    report.pass = report.max_rel_err <= tol;
    return report;
}

}  // namespace textgan
