// regopt.hpp
// Entropy and angle regularizers, the entropy schedule, and Adam with a
// cosine-annealed learning rate.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rhodarts/densmat.hpp"
#include "rhodarts/searchspace.hpp"

namespace rhodarts {

struct EntropyScheduleCfg {
    double s0 = 0.0;
    double s1 = 0.1;
};

/// s0 + (s1 - s0) sin(pi t) up to t = 1/2, then s1.
inline double schedule(double t, const EntropyScheduleCfg& cfg) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::out_of_range("schedule time must lie in [0, 1]");
    if (cfg.s1 <= 0.0) throw std::invalid_argument("schedule maximum s1 must be positive");
    if (t <= 0.5) return cfg.s0 + (cfg.s1 - cfg.s0) * std::sin(kPi * t);
    return cfg.s1;
}

/// Entropy of each position's gate distribution, 0 ln 0 = 0.
inline double position_entropy(std::span<const double> p) {
    double s = 0;
    for (double v : p) {
        if (v > 0.0) s -= v * std::log(v);
    }
    return s;
}

/// Normalized mean entropy of all positions: sum_ij S_ij / (m n ln|G|).
inline double mean_normalized_entropy(const ProbTable& probs) {
    double total = 0;
    for (std::size_t s = 0; s < probs.slots(); ++s) total += position_entropy(probs.row(s));
    return total / (static_cast<double>(probs.slots()) * std::log(static_cast<double>(probs.n_gates)));
}

inline double entropy_term(const ProbTable& probs, double t, const EntropyScheduleCfg& cfg) {
    return schedule(t, cfg) * mean_normalized_entropy(probs);
}

/// Gradient of entropy_term with respect to the (effective) logits.
inline std::vector<double> entropy_term_grad_alpha(const ProbTable& probs, double t, const EntropyScheduleCfg& cfg) {
    const double scale =
        schedule(t, cfg) / (static_cast<double>(probs.slots()) * std::log(static_cast<double>(probs.n_gates)));
    std::vector<double> g(probs.p.size(), 0.0);
    for (std::size_t s = 0; s < probs.slots(); ++s) {
        const auto row = probs.row(s);
        double mean_log = 0;
        for (double v : row) {
            if (v > 0.0) mean_log += v * std::log(v);
        }
        for (std::size_t k = 0; k < row.size(); ++k) {
            const double lp = row[k] > 0.0 ? std::log(row[k]) : 0.0;
            // dS/dalpha_k = -P_k (ln P_k - sum_j P_j ln P_j)
            g[s * probs.n_gates + k] = -scale * row[k] * (lp - mean_log);
        }
    }
    return g;
}

/// s_theta * sum (relu(theta - pi) + relu(-theta - pi))^2
inline double angle_penalty(std::span<const double> theta, double s_theta) {
    double acc = 0;
    for (double v : theta) {
        const double excess = std::max(0.0, v - kPi) + std::max(0.0, -v - kPi);
        acc += excess * excess;
    }
    return s_theta * acc;
}

inline std::vector<double> angle_penalty_grad(std::span<const double> theta, double s_theta) {
    std::vector<double> g(theta.size(), 0.0);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        if (theta[i] > kPi) g[i] = 2.0 * s_theta * (theta[i] - kPi);
        else if (theta[i] < -kPi) g[i] = 2.0 * s_theta * (theta[i] + kPi);
    }
    return g;
}

struct AdamConfig {
    double lr = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t t_max = 100;
    bool restart = true;  // warm restarts every t_max steps; false clamps at the minimum
};

/// Adam with learning rate lr_min + (lr - lr_min)(1 + cos(pi * step / t_max)) / 2, lr_min = 0.
class AdamCosine {
public:
    AdamCosine() = default;
    AdamCosine(std::size_t n_params, AdamConfig cfg, std::string name = "params")
        : cfg_(cfg), name_(std::move(name)), m_(n_params, 0.0), v_(n_params, 0.0) {
        if (cfg.t_max == 0) throw std::invalid_argument("t_max must be positive");
    }

    double learning_rate(std::size_t schedule_step) const {
        std::size_t pos = schedule_step;
        if (cfg_.restart) pos %= cfg_.t_max;
        else if (pos > cfg_.t_max) pos = cfg_.t_max;
        return 0.5 * cfg_.lr * (1.0 + std::cos(kPi * static_cast<double>(pos) / static_cast<double>(cfg_.t_max)));
    }

    /// Learning rate that the next call to step() will use.
    double current_lr() const { return learning_rate(schedule_step_); }

    std::size_t steps() const { return t_; }
    std::size_t schedule_step() const { return schedule_step_; }

    /// When false, step() leaves the schedule position alone and the caller
    /// advances it with advance_schedule() (e.g. once per epoch).
    void set_auto_schedule(bool on) { auto_schedule_ = on; }
    void advance_schedule() { ++schedule_step_; }

    void step(std::span<double> params, std::span<const double> grads) {
        if (params.size() != m_.size() || grads.size() != m_.size()) {
            throw std::invalid_argument("optimizer '" + name_ + "' got mismatched parameter/gradient sizes");
        }
        for (std::size_t i = 0; i < grads.size(); ++i) {
            if (!std::isfinite(grads[i])) {
                throw std::domain_error("non-finite gradient for " + name_ + "[" + std::to_string(i) + "]");
            }
        }
        const double lr = current_lr();
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
            const double mhat = m_[i] / bc1;
            const double vhat = v_[i] / bc2;
            params[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        if (auto_schedule_) ++schedule_step_;
    }

private:
    AdamConfig cfg_;
    std::string name_;
    std::vector<double> m_, v_;
    std::size_t t_ = 0;
    std::size_t schedule_step_ = 0;
    bool auto_schedule_ = true;
};

}  // namespace rhodarts
