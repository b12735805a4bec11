// search.hpp
// The density-matrix architecture search loop (macro and micro settings) and
// the task objectives it trains against.

#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "rhodarts/difftape.hpp"
#include "rhodarts/regopt.hpp"
#include "rhodarts/rng.hpp"
#include "rhodarts/searchspace.hpp"
#include "rhodarts/tasks/classify.hpp"
#include "rhodarts/tasks/maxcut.hpp"
#include "rhodarts/tasks/state_init.hpp"

namespace rhodarts {

struct SearchConfig {
    std::size_t layers = 4;
    std::size_t epochs = 1000;
    bool hidden_units = false;
    EntropyScheduleCfg entropy{0.0, 0.1};
    double s_theta = 0.01;
    AdamConfig adam{};
    NoiseSpec noise{};
    TapeOptions tape{};
    /// Advance the cosine schedule once per epoch instead of once per update.
    bool schedule_per_epoch = false;
    /// Present for micro search.
    std::optional<SuperCircuitStructure> structure;
};

struct EpochLog {
    double loss = 0;       // task loss + regularizers
    double task_loss = 0;
    double entropy = 0;    // mean normalized gate entropy
    double lr = 0;
};

struct SearchResult {
    Program program;
    ArchLogits logits;
    ThetaParams theta;
    ArchitectureMatrix arch;
    std::vector<EpochLog> history;  // one entry per epoch
};

/// A training objective: produces the task loss and its gradient for one update.
class Objective {
public:
    virtual ~Objective() = default;
    virtual int n_qubits() const = 0;
    virtual std::size_t batches_per_epoch() const { return 1; }
    /// Called at the start of every epoch.
    virtual void begin_epoch(std::size_t /*epoch*/) {}
    virtual double evaluate(const Program& prog, const ArchLogits& logits, const ThetaParams& theta,
                            std::size_t batch, GradientBundle& grads) = 0;
};

/// Loss offset + tr(seed rho_out) from a fixed initial state (state preparation, max-cut).
class LinearObjective : public Objective {
public:
    LinearObjective(DensityMatrix rho0, DensityMatrix seed, double offset, TapeOptions tape = {})
        : rho0_(std::move(rho0)), seed_(std::move(seed)), offset_(offset), tape_(tape) {}

    static LinearObjective state_init(const StateInitTask& task, TapeOptions tape = {}) {
        return {DensityMatrix(task.n), state_init_seed(task.target), 1.0, tape};
    }
    static LinearObjective maxcut(const MaxCutTask& task, TapeOptions tape = {}) {
        return {pure_to_density(uniform_superposition(task.graph.n)), maxcut_seed(task), 0.0, tape};
    }

    int n_qubits() const override { return rho0_.n_qubits(); }
    const DensityMatrix& initial_state() const { return rho0_; }

    double evaluate(const Program& prog, const ArchLogits& logits, const ThetaParams& theta, std::size_t,
                    GradientBundle& grads) override {
        auto [rho, tape] = record_forward(prog, logits, theta.values, rho0_, tape_);
        double loss = offset_;
        const auto a = rho.data();
        const auto s = seed_.data();
        for (std::size_t k = 0; k < a.size(); ++k) loss += (std::conj(s[k]) * a[k]).real();
        grads = backward(tape, seed_);
        return loss;
    }

private:
    DensityMatrix rho0_;
    DensityMatrix seed_;
    double offset_;
    TapeOptions tape_;
};

/// Per-epoch shuffled mini-batch partition of a training set.
class BatchOrder {
public:
    BatchOrder(std::size_t count, std::size_t batch_size, std::uint64_t seed)
        : batch_(batch_size), rng_(seed, "batches"), order_(count) {
        if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
        if (count == 0) throw std::invalid_argument("empty training set");
        std::iota(order_.begin(), order_.end(), std::size_t{0});
    }

    std::size_t batches() const { return (order_.size() + batch_ - 1) / batch_; }

    /// Fisher-Yates reshuffle.
    void shuffle() {
        for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng_.below(i)]);
    }

    std::vector<std::size_t> indices(std::size_t batch) const {
        const std::size_t lo = batch * batch_, hi = std::min(order_.size(), lo + batch_);
        return {order_.begin() + static_cast<std::ptrdiff_t>(lo), order_.begin() + static_cast<std::ptrdiff_t>(hi)};
    }

private:
    std::size_t batch_;
    Stream rng_;
    std::vector<std::size_t> order_;
};

/// Mini-batch binary cross-entropy on encoded examples.
///
/// Predictions are tr(O Phi(rho_i)) = <psi_i| Phi^dagger(O) |psi_i>, so one
/// adjoint pass gives every prediction in the batch. The gradient of the batch
/// loss equals the gradient of tr(O Phi(sum_i w_i rho_i)) with w_i = dL/dp_i,
/// which one forward sweep over the weighted ensemble accumulates.
class ClassifyObjective : public Objective {
public:
    ClassifyObjective(const ClassifyTask& task, std::size_t batch_size, std::uint64_t seed)
        : task_(&task), order_(task.train_states.size(), batch_size, seed) {}

    int n_qubits() const override { return task_->n_qubits; }
    std::size_t batches_per_epoch() const override { return order_.batches(); }
    void begin_epoch(std::size_t) override { order_.shuffle(); }
    std::vector<std::size_t> batch_indices(std::size_t batch) const { return order_.indices(batch); }

    double evaluate(const Program& prog, const ArchLogits& logits, const ThetaParams& theta, std::size_t batch,
                    GradientBundle& grads) override {
        const auto idx = batch_indices(batch);
        const DensityMatrix obs = prediction_observable(task_->n_qubits);
        const AdjointTape adj = record_adjoint(prog, logits, theta.values, obs);
        const DensityMatrix& heis = adj.pulled_back();

        std::vector<double> p(idx.size());
        std::vector<int> y(idx.size());
        for (std::size_t b = 0; b < idx.size(); ++b) {
            const PureState& psi = task_->train_states[idx[b]];
            p[b] = expectation(heis, psi);
            y[b] = task_->train_labels[idx[b]];
        }
        const double loss = bce_loss(p, y);
        const auto w = bce_grad(p, y);

        DensityMatrix ensemble = DensityMatrix::zero(task_->n_qubits);
        for (std::size_t b = 0; b < idx.size(); ++b) {
            if (w[b] == 0.0) continue;
            const PureState& psi = task_->train_states[idx[b]];
            const std::size_t n = psi.dim();
            for (std::size_t r = 0; r < n; ++r) {
                const cplx a = w[b] * psi[r];
                cplx* row = &ensemble(r, 0);
                for (std::size_t c = 0; c < n; ++c) row[c] += a * std::conj(psi[c]);
            }
        }
        grads = forward_with_gradients(adj, ensemble);
        return loss;
    }

    /// <psi| A |psi> for Hermitian A.
    static double expectation(const DensityMatrix& a, const PureState& psi) {
        cplx acc = 0;
        for (std::size_t r = 0; r < psi.dim(); ++r) {
            cplx row = 0;
            for (std::size_t c = 0; c < psi.dim(); ++c) row += a(r, c) * psi[c];
            acc += std::conj(psi[r]) * row;
        }
        return acc.real();
    }

private:
    const ClassifyTask* task_;
    BatchOrder order_;
};

/// Reference path for ClassifyObjective: each example is an independent taped
/// forward/backward pass and the per-example gradients are averaged.
inline double classify_batch_per_example(const Program& prog, const ArchLogits& logits, const ThetaParams& theta,
                                         const ClassifyTask& task, const std::vector<std::size_t>& idx,
                                         GradientBundle& grads) {
    std::vector<double> p(idx.size());
    std::vector<int> y(idx.size());
    std::vector<Tape> tapes;
    for (std::size_t b = 0; b < idx.size(); ++b) {
        auto [rho, tape] = record_forward(prog, logits, theta.values, pure_to_density(task.train_states[idx[b]]));
        p[b] = predict(rho);
        y[b] = task.train_labels[idx[b]];
        tapes.push_back(std::move(tape));
    }
    const double loss = bce_loss(p, y);
    const auto w = bce_grad(p, y);
    DensityMatrix obs = prediction_observable(task.n_qubits);
    for (std::size_t b = 0; b < idx.size(); ++b) {
        DensityMatrix seed = obs;
        seed *= w[b];
        GradientBundle g = backward(tapes[b], seed);
        if (b == 0) {
            grads = std::move(g);
            continue;
        }
        for (std::size_t i = 0; i < g.d_theta.size(); ++i) grads.d_theta[i] += g.d_theta[i];
        for (std::size_t i = 0; i < g.d_probs.size(); ++i) grads.d_probs[i] += g.d_probs[i];
        for (std::size_t i = 0; i < g.d_alpha.size(); ++i) grads.d_alpha[i] += g.d_alpha[i];
        for (std::size_t i = 0; i < g.d_arch.size(); ++i) grads.d_arch[i] += g.d_arch[i];
    }
    return loss;
}

/// Build the search program for a configuration and register width.
inline Program build_program(const SearchConfig& cfg, int n_qubits) {
    if (cfg.structure) {
        const auto gates = GateSet::standard(static_cast<int>(cfg.structure->width()));
        return micro_program(*cfg.structure, cfg.layers, gates, cfg.noise);
    }
    return macro_program(n_qubits, cfg.layers, GateSet::standard(n_qubits), cfg.noise);
}

/// Joint gradient-descent search over logits and angles.
/// `on_epoch` (optional) observes the log after every epoch.
inline SearchResult rho_search(Objective& objective, const SearchConfig& cfg, std::uint64_t seed,
                               const std::function<void(std::size_t, const EpochLog&)>& on_epoch = {}) {
    SearchResult res;
    res.program = build_program(cfg, objective.n_qubits());
    const Program& prog = res.program;
    Stream alpha_rng(seed, "init/alpha");
    Stream theta_rng(seed, "init/theta");
    res.logits = init_logits(prog.layers, prog.width, prog.gates.size(), cfg.hidden_units, alpha_rng);
    res.theta = init_theta(prog.copies, prog.layers, prog.width, theta_rng);

    AdamCosine opt_arch(res.logits.parameter_count(), cfg.adam, "alpha");
    AdamCosine opt_theta(res.theta.values.size(), cfg.adam, "theta");
    opt_arch.set_auto_schedule(!cfg.schedule_per_epoch);
    opt_theta.set_auto_schedule(!cfg.schedule_per_epoch);

    const std::size_t per_epoch = objective.batches_per_epoch();
    const std::size_t total_updates = cfg.epochs * per_epoch;
    std::vector<double> arch_params(res.logits.parameter_count());

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        objective.begin_epoch(epoch);
        EpochLog log;
        log.lr = opt_theta.current_lr();
        for (std::size_t b = 0; b < per_epoch; ++b) {
            const std::size_t update = epoch * per_epoch + b;
            const double t =
                total_updates > 1 ? static_cast<double>(update) / static_cast<double>(total_updates - 1) : 0.0;
            GradientBundle g;
            const double task_loss = objective.evaluate(prog, res.logits, res.theta, b, g);

            const ProbTable probs = gate_probs(res.logits);
            const double ent_term = entropy_term(probs, t, cfg.entropy);
            const double ang_term = angle_penalty(res.theta.values, cfg.s_theta);
            const auto ent_grad = arch_param_grad(res.logits, entropy_term_grad_alpha(probs, t, cfg.entropy));
            const auto ang_grad = angle_penalty_grad(res.theta.values, cfg.s_theta);
            for (std::size_t i = 0; i < g.d_arch.size(); ++i) g.d_arch[i] += ent_grad[i];
            for (std::size_t i = 0; i < g.d_theta.size(); ++i) g.d_theta[i] += ang_grad[i];

            for (std::size_t i = 0; i < arch_params.size(); ++i) arch_params[i] = res.logits.parameter(i);
            opt_arch.step(arch_params, g.d_arch);
            for (std::size_t i = 0; i < arch_params.size(); ++i) res.logits.parameter(i) = arch_params[i];
            opt_theta.step(res.theta.values, g.d_theta);

            log.task_loss += task_loss / static_cast<double>(per_epoch);
            log.loss += (task_loss + ent_term + ang_term) / static_cast<double>(per_epoch);
            log.entropy = mean_normalized_entropy(probs);
        }
        if (cfg.schedule_per_epoch) {
            opt_arch.advance_schedule();
            opt_theta.advance_schedule();
        }
        res.history.push_back(log);
        if (on_epoch) on_epoch(epoch, log);
    }
    res.arch = discretize(gate_probs(res.logits));
    return res;
}

// ---------------------------------------------------------------------------
// Evaluation of discretized circuits
// ---------------------------------------------------------------------------

inline bool program_has_noise(const Program& prog) {
    for (const auto& st : prog.steps) {
        if (const auto* ns = std::get_if<NoiseStep>(&st); ns && ns->spec.active()) return true;
    }
    return false;
}

/// Output distribution of the discrete circuit from `psi0` (density path when the program is noisy).
inline std::vector<double> discrete_output_probs(const Program& prog, const ArchitectureMatrix& arch,
                                                 std::span<const double> theta, const PureState& psi0) {
    if (program_has_noise(prog)) {
        return measurement_probs(simulate_discrete(prog, arch, theta, pure_to_density(psi0)));
    }
    return measurement_probs(simulate_discrete(prog, arch, theta, psi0));
}

inline double discrete_fidelity(const Program& prog, const ArchitectureMatrix& arch, std::span<const double> theta,
                                const PureState& target) {
    const PureState zero(prog.n_qubits);
    if (program_has_noise(prog)) {
        return fidelity(simulate_discrete(prog, arch, theta, DensityMatrix(prog.n_qubits)), target);
    }
    return fidelity(simulate_discrete(prog, arch, theta, zero), target);
}

inline MaxCutMetrics discrete_maxcut_metrics(const Program& prog, const ArchitectureMatrix& arch,
                                             std::span<const double> theta, const MaxCutTask& task) {
    return metrics_from_probs(discrete_output_probs(prog, arch, theta, uniform_superposition(task.graph.n)), task);
}

/// Fraction of examples whose prediction (p >= 0.5 means label 1) matches.
inline double discrete_accuracy(const Program& prog, const ArchitectureMatrix& arch, std::span<const double> theta,
                                const std::vector<PureState>& states, const std::vector<int>& labels) {
    if (states.empty()) return 0.0;
    const bool noisy = program_has_noise(prog);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < states.size(); ++i) {
        const double p = noisy ? predict(simulate_discrete(prog, arch, theta, pure_to_density(states[i])))
                               : predict(simulate_discrete(prog, arch, theta, states[i]));
        correct += static_cast<std::size_t>((p >= 0.5 ? 1 : 0) == labels[i]);
    }
    return static_cast<double>(correct) / static_cast<double>(states.size());
}

}  // namespace rhodarts
