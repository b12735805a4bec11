// qdarts.hpp
// Gumbel-softmax baseline: one sampled circuit per epoch, simulated as a
// state vector, an inner loop of angle updates, then one logit update through
// the straight-through estimator.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "rhodarts/search.hpp"

namespace rhodarts {

struct GumbelCfg {
    double tau = 0.05;
    std::size_t inner_iter = 10;
    std::size_t trajectories = 1;  // noise trajectories per epoch (noisy runs only)

    void validate() const {
        if (!(tau > 0.0)) throw std::invalid_argument("Gumbel temperature must be positive");
        if (inner_iter == 0) throw std::invalid_argument("inner iteration count must be positive");
        if (trajectories == 0) throw std::invalid_argument("trajectory count must be positive");
    }
};

struct GumbelSample {
    std::size_t hard = 0;       // index of the one-hot forward choice
    std::vector<double> soft;   // tempered softmax of ln P + G
    std::vector<double> noise;  // the Gumbel variates G
};

/// Sample from fixed Gumbel variates (deterministic).
inline GumbelSample gumbel_from_noise(std::span<const double> logits, std::span<const double> g, double tau) {
    if (logits.size() != g.size() || logits.empty()) throw std::invalid_argument("logit/noise size mismatch");
    if (!(tau > 0.0)) throw std::invalid_argument("Gumbel temperature must be positive");
    GumbelSample s;
    s.noise.assign(g.begin(), g.end());
    const double mx = *std::max_element(logits.begin(), logits.end());
    double lse = 0;
    for (double a : logits) lse += std::exp(a - mx);
    lse = mx + std::log(lse);
    std::vector<double> z(logits.size());
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = (logits[k] - lse + g[k]) / tau;
    s.hard = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    const double zmax = z[s.hard];
    double sum = 0;
    s.soft.resize(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) sum += s.soft[k] = std::exp(z[k] - zmax);
    for (auto& v : s.soft) v /= sum;
    return s;
}

inline GumbelSample gumbel_sample_position(std::span<const double> logits, Stream& rng, double tau) {
    std::vector<double> g(logits.size());
    for (auto& v : g) v = rng.gumbel();
    return gumbel_from_noise(logits, g, tau);
}

/// Task loss over state-vector outputs. `adjoints` (when non-null) receives
/// lambda_i with dL = sum_i 2 Re<lambda_i|dpsi_i>.
class PureObjective {
public:
    virtual ~PureObjective() = default;
    virtual int n_qubits() const = 0;
    virtual std::size_t batches_per_epoch() const { return 1; }
    virtual void begin_epoch(std::size_t) {}
    virtual std::vector<const PureState*> inputs(std::size_t batch) const = 0;
    virtual double loss(const std::vector<PureState>& outs, std::size_t batch,
                        std::vector<PureState>* adjoints) const = 0;
};

class StateInitPure : public PureObjective {
public:
    explicit StateInitPure(const StateInitTask& task) : target_(task.target), zero_(task.n) {}
    int n_qubits() const override { return target_.n_qubits(); }
    std::vector<const PureState*> inputs(std::size_t) const override { return {&zero_}; }
    double loss(const std::vector<PureState>& outs, std::size_t, std::vector<PureState>* adj) const override {
        const cplx ov = inner(target_, outs[0]);
        if (adj) {
            PureState lam = target_;
            for (std::size_t k = 0; k < lam.dim(); ++k) lam[k] *= -ov;
            adj->assign(1, std::move(lam));
        }
        return 1.0 - std::norm(ov);
    }

private:
    PureState target_, zero_;
};

class MaxCutPure : public PureObjective {
public:
    explicit MaxCutPure(const MaxCutTask& task)
        : task_(&task), psi0_(uniform_superposition(task.graph.n)) {}
    int n_qubits() const override { return task_->graph.n; }
    std::vector<const PureState*> inputs(std::size_t) const override { return {&psi0_}; }
    double loss(const std::vector<PureState>& outs, std::size_t, std::vector<PureState>* adj) const override {
        const double scale = -1.0 / static_cast<double>(task_->edge_count());
        const PureState& psi = outs[0];
        double l = 0;
        PureState lam(psi.n_qubits());
        for (std::size_t k = 0; k < psi.dim(); ++k) {
            l += scale * task_->h_diag[k] * std::norm(psi[k]);
            lam[k] = scale * task_->h_diag[k] * psi[k];
        }
        if (adj) adj->assign(1, std::move(lam));
        return l;
    }

private:
    const MaxCutTask* task_;
    PureState psi0_;
};

class ClassifyPure : public PureObjective {
public:
    ClassifyPure(const ClassifyTask& task, std::size_t batch_size, std::uint64_t seed)
        : task_(&task), order_(task.train_states.size(), batch_size, seed) {}
    int n_qubits() const override { return task_->n_qubits; }
    std::size_t batches_per_epoch() const override { return order_.batches(); }
    void begin_epoch(std::size_t) override { order_.shuffle(); }
    std::vector<const PureState*> inputs(std::size_t batch) const override {
        std::vector<const PureState*> v;
        for (auto i : order_.indices(batch)) v.push_back(&task_->train_states[i]);
        return v;
    }
    double loss(const std::vector<PureState>& outs, std::size_t batch, std::vector<PureState>* adj) const override {
        const auto idx = order_.indices(batch);
        std::vector<double> p(outs.size());
        std::vector<int> y(outs.size());
        for (std::size_t b = 0; b < outs.size(); ++b) {
            p[b] = predict(outs[b]);
            y[b] = task_->train_labels[idx[b]];
        }
        if (adj) {
            const auto w = bce_grad(p, y);
            adj->clear();
            for (std::size_t b = 0; b < outs.size(); ++b) {
                PureState lam(outs[b].n_qubits());
                for (std::size_t k = 1; k < lam.dim(); k += 2) lam[k] = w[b] * outs[b][k];
                lam[0] = 0.0;
                adj->push_back(std::move(lam));
            }
        }
        return bce_loss(p, y);
    }

private:
    const ClassifyTask* task_;
    BatchOrder order_;
};

namespace detail {

/// One gate of a sampled circuit realization, tagged with its search slot.
struct SampledOp {
    CircuitOp op;
    bool pauli = false;         // injected noise operator (X or Z)
    Gate2 pauli_gate{};
    std::size_t slot = 0;
    std::size_t theta = 0;
    const MixtureStep* step = nullptr;
};

inline std::vector<SampledOp> realize(const Program& prog, const std::vector<std::size_t>& choice,
                                      std::span<const double> theta, Stream* noise_rng) {
    std::vector<SampledOp> ops;
    for (const auto& st : prog.steps) {
        if (const auto* mix = std::get_if<MixtureStep>(&st)) {
            const std::size_t k = choice[mix->slot];
            const GateId& g = prog.gates[k];
            SampledOp s;
            s.op = {g.kind, mix->qubit, mix->targets[k], theta[mix->theta]};
            s.slot = mix->slot;
            s.theta = mix->theta;
            s.step = mix;
            ops.push_back(s);
            continue;
        }
        const NoiseSpec& spec = std::get<NoiseStep>(st).spec;
        if (!spec.active()) continue;
        if (spec.kind == NoiseKind::Depolarizing) {
            throw std::invalid_argument("the state-vector baseline cannot model depolarizing noise");
        }
        const bool bit = spec.kind == NoiseKind::BitFlip || spec.kind == NoiseKind::BitPhaseFlip;
        const bool phase = spec.kind == NoiseKind::PhaseFlip || spec.kind == NoiseKind::BitPhaseFlip;
        for (int q = 0; q < prog.n_qubits; ++q) {
            if (bit && noise_rng->bernoulli(spec.p)) {
                SampledOp s;
                s.pauli = true;
                s.pauli_gate = gates::x();
                s.op.qubit = q;
                ops.push_back(s);
            }
            if (phase && noise_rng->bernoulli(spec.p)) {
                SampledOp s;
                s.pauli = true;
                s.pauli_gate = gates::z();
                s.op.qubit = q;
                ops.push_back(s);
            }
        }
    }
    return ops;
}

inline void apply_sampled(PureState& psi, const SampledOp& s) {
    if (s.pauli) psi.apply(s.pauli_gate, s.op.qubit);
    else apply_op(psi, s.op);
}

inline void apply_sampled_adjoint(PureState& psi, const SampledOp& s) {
    if (s.pauli) {
        psi.apply(s.pauli_gate, s.op.qubit);
        return;
    }
    switch (s.op.kind) {
        case GateKind::I: break;
        case GateKind::Cnot: psi.apply_cnot(s.op.qubit, s.op.target); break;
        default: psi.apply(rotation(s.op.kind, s.op.theta).adjoint(), s.op.qubit); break;
    }
}

/// Candidate gate k of a position applied to psi.
inline PureState apply_candidate(const Program& prog, const MixtureStep& step, std::size_t k, double theta,
                                 PureState psi) {
    const GateId& g = prog.gates[k];
    apply_op(psi, {g.kind, step.qubit, step.targets[k], theta});
    return psi;
}

struct PureGrad {
    double loss = 0;
    std::vector<double> d_theta;
    std::vector<double> d_hard;  // dL/dh per slot and candidate (slot-major)
};

/// Loss and reverse-mode gradients of one realization over a batch.
inline PureGrad pure_reverse(const Program& prog, const std::vector<SampledOp>& ops, std::span<const double> theta,
                             const PureObjective& obj, std::size_t batch, bool want_hard) {
    PureGrad pg;
    pg.d_theta.assign(theta.size(), 0.0);
    if (want_hard) pg.d_hard.assign(prog.slots() * prog.gates.size(), 0.0);
    const auto inputs = obj.inputs(batch);
    std::vector<PureState> outs;
    outs.reserve(inputs.size());
    for (const PureState* in : inputs) {
        PureState psi = *in;
        for (const auto& s : ops) apply_sampled(psi, s);
        outs.push_back(std::move(psi));
    }
    std::vector<PureState> lams;
    pg.loss = obj.loss(outs, batch, &lams);

    for (std::size_t b = 0; b < outs.size(); ++b) {
        PureState psi = std::move(outs[b]);
        PureState& lam = lams[b];
        for (std::size_t o = ops.size(); o-- > 0;) {
            const SampledOp& s = ops[o];
            if (!s.pauli && s.op.kind != GateKind::I && s.op.kind != GateKind::Cnot) {
                PureState gpsi = psi;
                gpsi.apply(generator(s.op.kind), s.op.qubit);
                pg.d_theta[s.theta] += inner(lam, gpsi).imag();
            }
            apply_sampled_adjoint(psi, s);  // psi now holds the op input
            if (want_hard && !s.pauli) {
                for (std::size_t k = 0; k < prog.gates.size(); ++k) {
                    const PureState cand = apply_candidate(prog, *s.step, k, theta[s.theta], psi);
                    pg.d_hard[s.slot * prog.gates.size() + k] += 2.0 * inner(lam, cand).real();
                }
            }
            apply_sampled_adjoint(lam, s);
        }
    }
    return pg;
}

}  // namespace detail

/// Alternating Gumbel-softmax search. Returns the same record as rho_search.
inline SearchResult qdarts_search(PureObjective& objective, const SearchConfig& cfg, const GumbelCfg& gcfg,
                                  std::uint64_t seed,
                                  const std::function<void(std::size_t, const EpochLog&)>& on_epoch = {}) {
    gcfg.validate();
    SearchResult res;
    res.program = build_program(cfg, objective.n_qubits());
    const Program& prog = res.program;
    if (cfg.noise.active() && cfg.noise.kind == NoiseKind::Depolarizing) {
        throw std::invalid_argument("the state-vector baseline cannot model depolarizing noise");
    }
    Stream alpha_rng(seed, "init/alpha");
    Stream theta_rng(seed, "init/theta");
    Stream gumbel_rng(seed, "qdarts/gumbel");
    Stream traj_rng(seed, "qdarts/trajectory");
    res.logits = init_logits(prog.layers, prog.width, prog.gates.size(), cfg.hidden_units, alpha_rng);
    res.theta = init_theta(prog.copies, prog.layers, prog.width, theta_rng);

    AdamConfig theta_cfg = cfg.adam;
    theta_cfg.t_max = cfg.adam.t_max * gcfg.inner_iter;
    AdamCosine opt_arch(res.logits.parameter_count(), cfg.adam, "alpha");
    AdamCosine opt_theta(res.theta.values.size(), theta_cfg, "theta");
    opt_arch.set_auto_schedule(!cfg.schedule_per_epoch);
    opt_theta.set_auto_schedule(!cfg.schedule_per_epoch);

    const std::size_t per_epoch = objective.batches_per_epoch();
    const std::size_t total_updates = cfg.epochs * per_epoch;
    const std::size_t n_gates = prog.gates.size();
    const std::size_t n_traj = cfg.noise.active() ? gcfg.trajectories : 1;
    std::vector<double> arch_params(res.logits.parameter_count());

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        objective.begin_epoch(epoch);
        EpochLog log;
        log.lr = opt_arch.current_lr();
        for (std::size_t b = 0; b < per_epoch; ++b) {
            const std::size_t update = epoch * per_epoch + b;
            const double t =
                total_updates > 1 ? static_cast<double>(update) / static_cast<double>(total_updates - 1) : 0.0;

            // Sample one circuit (and its noise realizations) for this update.
            const std::vector<double> alpha = res.logits.alpha();
            std::vector<GumbelSample> samples(prog.slots());
            std::vector<std::size_t> choice(prog.slots());
            for (std::size_t s = 0; s < prog.slots(); ++s) {
                samples[s] = gumbel_sample_position({alpha.data() + s * n_gates, n_gates}, gumbel_rng, gcfg.tau);
                choice[s] = samples[s].hard;
            }
            std::vector<std::uint64_t> traj_seeds(n_traj);
            for (auto& v : traj_seeds) v = traj_rng.next_u64();

            auto evaluate = [&](bool want_hard) {
                detail::PureGrad acc;
                for (std::size_t r = 0; r < n_traj; ++r) {
                    Stream noise(traj_seeds[r], "trajectory");
                    const auto ops = detail::realize(prog, choice, res.theta.values, &noise);
                    detail::PureGrad g = detail::pure_reverse(prog, ops, res.theta.values, objective, b, want_hard);
                    if (r == 0) {
                        acc = std::move(g);
                        continue;
                    }
                    acc.loss += g.loss;
                    for (std::size_t i = 0; i < g.d_theta.size(); ++i) acc.d_theta[i] += g.d_theta[i];
                    for (std::size_t i = 0; i < g.d_hard.size(); ++i) acc.d_hard[i] += g.d_hard[i];
                }
                const double inv = 1.0 / static_cast<double>(n_traj);
                acc.loss *= inv;
                for (auto& v : acc.d_theta) v *= inv;
                for (auto& v : acc.d_hard) v *= inv;
                return acc;
            };

            // Inner loop on the angles: task loss + angle penalty.
            for (std::size_t it = 0; it < gcfg.inner_iter; ++it) {
                detail::PureGrad g = evaluate(false);
                const auto pen = angle_penalty_grad(res.theta.values, cfg.s_theta);
                for (std::size_t i = 0; i < pen.size(); ++i) g.d_theta[i] += pen[i];
                opt_theta.step(res.theta.values, g.d_theta);
            }

            // Logit update: task loss through the soft sample + entropy term.
            const detail::PureGrad g = evaluate(true);
            std::vector<double> d_alpha(alpha.size(), 0.0);
            for (std::size_t s = 0; s < prog.slots(); ++s) {
                const auto& soft = samples[s].soft;
                double mean = 0;
                for (std::size_t k = 0; k < n_gates; ++k) mean += soft[k] * g.d_hard[s * n_gates + k];
                for (std::size_t k = 0; k < n_gates; ++k) {
                    d_alpha[s * n_gates + k] = soft[k] * (g.d_hard[s * n_gates + k] - mean) / gcfg.tau;
                }
            }
            const ProbTable probs = gate_probs(res.logits);
            const auto ent = entropy_term_grad_alpha(probs, t, cfg.entropy);
            for (std::size_t i = 0; i < d_alpha.size(); ++i) d_alpha[i] += ent[i];
            const auto d_arch = arch_param_grad(res.logits, d_alpha);
            for (std::size_t i = 0; i < arch_params.size(); ++i) arch_params[i] = res.logits.parameter(i);
            opt_arch.step(arch_params, d_arch);
            for (std::size_t i = 0; i < arch_params.size(); ++i) res.logits.parameter(i) = arch_params[i];

            const double ent_term = entropy_term(probs, t, cfg.entropy);
            log.task_loss += g.loss / static_cast<double>(per_epoch);
            log.loss += (g.loss + ent_term) / static_cast<double>(per_epoch);
            log.entropy = mean_normalized_entropy(probs);
        }
        if (cfg.schedule_per_epoch) {
            opt_arch.advance_schedule();
            for (std::size_t it = 0; it < gcfg.inner_iter; ++it) opt_theta.advance_schedule();
        }
        res.history.push_back(log);
        if (on_epoch) on_epoch(epoch, log);
    }
    res.arch = discretize(gate_probs(res.logits));
    return res;
}

}  // namespace rhodarts
