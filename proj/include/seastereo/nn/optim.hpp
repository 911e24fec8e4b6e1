#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "seastereo/nn/autograd.hpp"
#include "seastereo/rng.hpp"

namespace seastereo::nn {

// Named parameter registry. Creation order is the checkpoint order.
template <typename T>
class ParamStore {
public:
    Var<T> create(const std::string& name, Tensor<T> init) {
        if (by_name_.count(name))
            raise(ErrorCode::Internal, "duplicate parameter: " + name);
        auto v = make_leaf<T>(std::move(init), true, name);
        by_name_[name] = v;
        ordered_.push_back(v);
        return v;
    }
    const std::vector<Var<T>>& params() const { return ordered_; }
    Var<T> find(const std::string& name) const {
        auto it = by_name_.find(name);
        return it == by_name_.end() ? nullptr : it->second;
    }
    void zero_grad() {
        for (auto& p : ordered_) p->zero_grad();
    }
    int64_t total_params() const {
        int64_t n = 0;
        for (const auto& p : ordered_) n += p->value.numel();
        return n;
    }

private:
    std::map<std::string, Var<T>> by_name_;
    std::vector<Var<T>> ordered_;
};

template <typename T>
Tensor<T> kaiming_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
    Tensor<T> t(shape);
    T bound = T(std::sqrt(6.0 / double(fan_in)));
    for (auto& v : t.data) v = T(rng.uniform(-double(bound), double(bound)));
    return t;
}

template <typename T>
Tensor<T> normal_init(std::vector<int> shape, double stddev, Rng& rng) {
    Tensor<T> t(shape);
    for (auto& v : t.data) v = T(rng.normal() * stddev);
    return t;
}

struct LrSchedule {
    double base_lr = 2e-4;
    int total_steps = 1;
    double warmup_fraction = 0.05;
    bool one_cycle = true;  // linear warmup then cosine decay; else constant

    double at(int step) const {
        if (!one_cycle) return base_lr;
        double warm = std::max(1.0, warmup_fraction * total_steps);
        if (step < warm) return base_lr * (step + 1) / warm;
        double t = double(step - warm) / std::max(1.0, total_steps - warm);
        return base_lr * 0.5 * (1.0 + std::cos(M_PI * std::min(1.0, t)));
    }
};

// Adam with decoupled weight decay and optional global-norm gradient clipping.
template <typename T>
class Adam {
public:
    explicit Adam(const std::vector<Var<T>>& params, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8, double weight_decay = 1e-5,
                  double clip_norm = 1.0)
        : params_(params),
          beta1_(beta1),
          beta2_(beta2),
          eps_(eps),
          weight_decay_(weight_decay),
          clip_norm_(clip_norm) {
        for (const auto& p : params_) {
            m_.emplace_back(p->value.shape);
            v_.emplace_back(p->value.shape);
        }
    }

    double grad_norm() const {
        double ss = 0;
        for (const auto& p : params_)
            if (!p->grad.data.empty())
                for (T g : p->grad.data) ss += double(g) * double(g);
        return std::sqrt(ss);
    }

    void step(double lr) {
        ++t_;
        double clip_scale = 1.0;
        if (clip_norm_ > 0) {
            double n = grad_norm();
            if (n > clip_norm_) clip_scale = clip_norm_ / n;
        }
        double bc1 = 1.0 - std::pow(beta1_, t_);
        double bc2 = 1.0 - std::pow(beta2_, t_);
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i];
            if (p->grad.data.empty()) continue;
            for (size_t j = 0; j < p->value.data.size(); ++j) {
                double g = double(p->grad.data[j]) * clip_scale;
                double m = beta1_ * double(m_[i].data[j]) + (1 - beta1_) * g;
                double v = beta2_ * double(v_[i].data[j]) + (1 - beta2_) * g * g;
                m_[i].data[j] = T(m);
                v_[i].data[j] = T(v);
                double update = (m / bc1) / (std::sqrt(v / bc2) + eps_);
                double value = double(p->value.data[j]);
                value -= lr * (update + weight_decay_ * value);
                p->value.data[j] = T(value);
            }
        }
    }

    void zero_grad() {
        for (auto& p : params_) p->zero_grad();
    }

private:
    std::vector<Var<T>> params_;
    std::vector<Tensor<T>> m_, v_;
    double beta1_, beta2_, eps_, weight_decay_, clip_norm_;
    int t_ = 0;
};

}  // namespace seastereo::nn
