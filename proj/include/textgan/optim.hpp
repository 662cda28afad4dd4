#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "textgan/tensor.hpp"

namespace textgan {

// Adam with bias correction. Moment buffers are Tensors so checkpoints can
// carry them under "adam.<param>.m" / ".v".
class Adam {
public:
    explicit Adam(const NamedTensors& params, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : params_(params), beta1_(beta1), beta2_(beta2), eps_(eps) {
        slots_.reserve(params_.size());
        for (const auto& [name, t] : params_) {
            (void)name;
            slots_.push_back({Tensor::zeros(t.shape()), Tensor::zeros(t.shape())});
        }
    }

    void zero_grad() {
        for (auto& [name, t] : params_) {
            (void)name;
            t.zero_grad();
        }
    }

    void step(float lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (size_t i = 0; i < params_.size(); ++i) {
            Tensor& p = params_[i].second;
            Slot& s = slots_[i];
            const bool has_grad = p.grad_allocated();
            for (int64_t j = 0; j < p.numel(); ++j) {
                const float g = has_grad ? p.grad()[static_cast<size_t>(j)] : 0.0f;
                float& m = s.m.data()[static_cast<size_t>(j)];
                float& v = s.v.data()[static_cast<size_t>(j)];
                m = static_cast<float>(beta1_ * m + (1.0 - beta1_) * g);
                v = static_cast<float>(beta2_ * v + (1.0 - beta2_) * g * g);
                const double mhat = m / bc1;
                const double vhat = v / bc2;
                p.data()[static_cast<size_t>(j)] -=
                    static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    int64_t step_count() const { return t_; }
    void set_step_count(int64_t t) { t_ = t; }

    // Moment buffers keyed by parameter name, for checkpointing.
    NamedTensors state() const {
        NamedTensors out;
        for (size_t i = 0; i < params_.size(); ++i) {
            out.emplace_back("adam." + params_[i].first + ".m", slots_[i].m);
            out.emplace_back("adam." + params_[i].first + ".v", slots_[i].v);
        }
        return out;
    }

private:
    struct Slot {
        Tensor m, v;
    };
    NamedTensors params_;
    std::vector<Slot> slots_;
    int64_t t_ = 0;
    double beta1_, beta2_, eps_;
};

}  // namespace textgan
