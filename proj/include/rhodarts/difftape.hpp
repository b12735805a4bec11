// difftape.hpp
// Reverse-mode gradients of scalar losses through mixture-channel programs,
// with respect to the angles theta and the architecture logits alpha (or the
// hidden-unit factors H, v).
//
// Losses enter through a Hermitian seed Lambda with dL = tr(Lambda d rho).
// Two routes are provided:
//   * record_forward / backward: cache the input of each step, then pull the
//     seed back through the adjoint channels.
//   * record_adjoint / forward_with_gradients: for losses linear in rho the
//     seed does not depend on the state, so the adjoint states can be computed
//     first and the gradient accumulated during a single forward sweep. This
//     is what makes batched classification affordable: one sweep over the
//     label-weighted ensemble replaces one sweep per example.

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rhodarts/densmat.hpp"
#include "rhodarts/searchspace.hpp"

namespace rhodarts {

struct GradientBundle {
    std::vector<double> d_theta;  // flat, program theta order
    std::vector<double> d_probs;  // slot-major, gate-minor
    std::vector<double> d_alpha;  // effective logits
    std::vector<double> d_arch;   // ArchLogits::parameter order (alpha, or H then v)

    bool all_finite() const {
        for (const auto* v : {&d_theta, &d_probs, &d_alpha, &d_arch}) {
            for (double x : *v) {
                if (!std::isfinite(x)) return false;
            }
        }
        return true;
    }
};

namespace detail {

struct BlockGrad {
    double g = 0;   // Re tr(Lambda U rho U^dagger)
    cplx h = 0;     // tr(Lambda P U rho U^dagger), P the rotation generator
};

/// Per-block pass for a single-qubit gate. Optionally accumulates the adjoint
/// (lam_in += w U^dagger Lambda U) and the forward image (out += w U rho U^dagger).
template <bool kAdjoint, bool kForward>
BlockGrad rotation_pass(const cplx* rho, const cplx* lam, std::size_t dim, const Gate2& g, const Gate2& gen,
                        int q, double w, cplx* lam_in, cplx* out) {
    const std::size_t mask = std::size_t{1} << q;
    const cplx u0 = g.u[0], u1 = g.u[1], u2 = g.u[2], u3 = g.u[3];
    const cplx c0 = std::conj(u0), c1 = std::conj(u1), c2 = std::conj(u2), c3 = std::conj(u3);
    const cplx s0 = gen.u[0], s1 = gen.u[1], s2 = gen.u[2], s3 = gen.u[3];
    double gsum = 0;
    cplx hsum = 0;
    for (std::size_t rh = 0; rh < dim; rh += 2 * mask) {
        for (std::size_t r0 = rh; r0 < rh + mask; ++r0) {
            const std::size_t r1 = r0 | mask;
            const cplx* i0 = rho + r0 * dim;
            const cplx* i1 = rho + r1 * dim;
            const cplx* l0 = lam + r0 * dim;
            const cplx* l1 = lam + r1 * dim;
            for (std::size_t ch = 0; ch < dim; ch += 2 * mask) {
                for (std::size_t a = ch; a < ch + mask; ++a) {
                    const std::size_t b = a | mask;
                    const cplx t00 = u0 * i0[a] + u1 * i1[a];
                    const cplx t01 = u0 * i0[b] + u1 * i1[b];
                    const cplx t10 = u2 * i0[a] + u3 * i1[a];
                    const cplx t11 = u2 * i0[b] + u3 * i1[b];
                    const cplx y00 = t00 * c0 + t01 * c1;
                    const cplx y01 = t00 * c2 + t01 * c3;
                    const cplx y10 = t10 * c0 + t11 * c1;
                    const cplx y11 = t10 * c2 + t11 * c3;
                    const cplx L00 = std::conj(l0[a]), L01 = std::conj(l0[b]);
                    const cplx L10 = std::conj(l1[a]), L11 = std::conj(l1[b]);
                    gsum += (L00 * y00 + L01 * y01 + L10 * y10 + L11 * y11).real();
                    hsum += L00 * (s0 * y00 + s1 * y10) + L01 * (s0 * y01 + s1 * y11) +
                            L10 * (s2 * y00 + s3 * y10) + L11 * (s2 * y01 + s3 * y11);
                    if constexpr (kForward) {
                        cplx* o0 = out + r0 * dim;
                        cplx* o1 = out + r1 * dim;
                        o0[a] += w * y00;
                        o0[b] += w * y01;
                        o1[a] += w * y10;
                        o1[b] += w * y11;
                    }
                    if constexpr (kAdjoint) {
                        // U^dagger L U
                        const cplx la = l0[a], lb = l0[b], lc = l1[a], ld = l1[b];
                        const cplx v00 = c0 * la + c2 * lc;
                        const cplx v01 = c0 * lb + c2 * ld;
                        const cplx v10 = c1 * la + c3 * lc;
                        const cplx v11 = c1 * lb + c3 * ld;
                        cplx* o0 = lam_in + r0 * dim;
                        cplx* o1 = lam_in + r1 * dim;
                        o0[a] += w * (v00 * u0 + v01 * u2);
                        o0[b] += w * (v00 * u1 + v01 * u3);
                        o1[a] += w * (v10 * u0 + v11 * u2);
                        o1[b] += w * (v10 * u1 + v11 * u3);
                    }
                }
            }
        }
    }
    return {gsum, hsum};
}

template <bool kAdjoint, bool kForward>
double cnot_pass(const cplx* rho, const cplx* lam, std::size_t dim, int control, int target, double w,
                 cplx* lam_in, cplx* out) {
    const std::size_t cm = std::size_t{1} << control, tm = std::size_t{1} << target;
    double gsum = 0;
    for (std::size_t r = 0; r < dim; ++r) {
        const std::size_t pr = (r & cm) ? (r ^ tm) : r;
        const cplx* ir = rho + pr * dim;
        const cplx* lr = lam + r * dim;
        const cplx* lpr = lam + pr * dim;
        for (std::size_t c = 0; c < dim; ++c) {
            const std::size_t pc = (c & cm) ? (c ^ tm) : c;
            gsum += (std::conj(lr[c]) * ir[pc]).real();
            if constexpr (kForward) out[r * dim + c] += w * ir[pc];
            if constexpr (kAdjoint) lam_in[r * dim + c] += w * lpr[pc];
        }
    }
    return gsum;
}

template <bool kAdjoint, bool kForward>
double identity_pass(const cplx* rho, const cplx* lam, std::size_t count, double w, cplx* lam_in, cplx* out) {
    double gsum = 0;
    for (std::size_t k = 0; k < count; ++k) {
        gsum += (std::conj(lam[k]) * rho[k]).real();
        if constexpr (kForward) out[k] += w * rho[k];
        if constexpr (kAdjoint) lam_in[k] += w * lam[k];
    }
    return gsum;
}

/// Gradient contributions of one mixture step given its input state and the
/// adjoint at its output. Writes into d_probs row / d_theta entry and, per the
/// template flags, the pulled-back adjoint and the forward output.
template <bool kAdjoint, bool kForward>
void mixture_step_pass(const GateSet& gates, const MixtureStep& step, std::span<const double> probs, double theta,
                       const DensityMatrix& rho, const DensityMatrix& lam, DensityMatrix* lam_in,
                       DensityMatrix* out, double* d_probs_row, double& d_theta) {
    const std::size_t dim = rho.dim();
    const cplx* r = rho.data().data();
    const cplx* l = lam.data().data();
    cplx* li = kAdjoint ? lam_in->data().data() : nullptr;
    cplx* o = kForward ? out->data().data() : nullptr;
    for (std::size_t k = 0; k < gates.size(); ++k) {
        const double w = probs[k];
        const GateKind kind = gates[k].kind;
        switch (kind) {
            case GateKind::I:
                d_probs_row[k] += identity_pass<kAdjoint, kForward>(r, l, dim * dim, w, li, o);
                break;
            case GateKind::Cnot:
                d_probs_row[k] += cnot_pass<kAdjoint, kForward>(r, l, dim, step.qubit, step.targets[k], w, li, o);
                break;
            default: {
                const auto bg = rotation_pass<kAdjoint, kForward>(r, l, dim, rotation(kind, theta), generator(kind),
                                                                  step.qubit, w, li, o);
                d_probs_row[k] += bg.g;
                // dL/dtheta = Re tr(L (U' rho U^+ + U rho U'^+)), U' = -(i/2) P U
                d_theta += w * bg.h.imag();
                break;
            }
        }
    }
}

}  // namespace detail

/// Map a gradient on the effective logits to the trainable parameters of
/// `logits` (identity, or the chain rule through alpha_ij = H_ij v_ij).
inline std::vector<double> arch_param_grad(const ArchLogits& logits, const std::vector<double>& d_alpha) {
    if (!logits.has_hidden()) return d_alpha;
    const auto& hu = logits.hidden();
    const std::size_t g = logits.n_gates();
    std::vector<double> out(hu.h.size() + hu.v.size(), 0.0);
    double* dh = out.data();
    double* dv = out.data() + hu.h.size();
    for (std::size_t s = 0; s < logits.slots(); ++s) {
        for (std::size_t k = 0; k < g; ++k) {
            const double da = d_alpha[s * g + k];
            for (std::size_t u = 0; u < hu.k; ++u) {
                dh[(s * g + k) * hu.k + u] = da * hu.v[s * hu.k + u];
                dv[s * hu.k + u] += hu.h[(s * g + k) * hu.k + u] * da;
            }
        }
    }
    return out;
}

/// Chain d_probs through the softmax and, when present, the hidden-unit product.
inline void finish_arch_gradient(const ArchLogits& logits, const ProbTable& probs, GradientBundle& gb) {
    const std::size_t g = probs.n_gates;
    gb.d_alpha.assign(gb.d_probs.size(), 0.0);
    for (std::size_t s = 0; s < probs.slots(); ++s) {
        const double* p = probs.p.data() + s * g;
        const double* dp = gb.d_probs.data() + s * g;
        double dot = 0;
        for (std::size_t k = 0; k < g; ++k) dot += p[k] * dp[k];
        for (std::size_t k = 0; k < g; ++k) gb.d_alpha[s * g + k] = p[k] * (dp[k] - dot);
    }
    gb.d_arch = arch_param_grad(logits, gb.d_alpha);
}

struct TapeOptions {
    /// 0 caches every step input; otherwise only every k-th step input is kept
    /// and segments are recomputed during the backward pass.
    std::size_t checkpoint_every = 0;
};

class Tape {
public:
    std::size_t size() const { return program_.steps.size(); }
    bool consumed() const { return consumed_; }
    const ProbTable& probs() const { return probs_; }

private:
    friend std::pair<DensityMatrix, Tape> record_forward(const Program&, const ArchLogits&, std::span<const double>,
                                                         const DensityMatrix&, TapeOptions);
    friend GradientBundle backward(Tape&, const DensityMatrix&);

    /// Advance `cur` by step s; `scratch` is reused storage.
    void step_forward(std::size_t s, DensityMatrix& cur, DensityMatrix& scratch) const {
        const auto& st = program_.steps[s];
        if (const auto* mix = std::get_if<MixtureStep>(&st)) {
            mix_into(scratch, cur, program_.gates, *mix, probs_.row(mix->slot), theta_[mix->theta]);
            std::swap(cur, scratch);
        } else {
            cur.apply_noise(std::get<NoiseStep>(st).spec);
        }
        if ((s + 1) % DensityMatrix::kHermitizeInterval == 0) cur.hermitize();
    }

    Program program_;
    ArchLogits logits_;
    ProbTable probs_;
    std::vector<double> theta_;
    TapeOptions options_;
    std::vector<DensityMatrix> cache_;  // step inputs, or checkpoints
    bool consumed_ = false;
};

/// Forward pass that records what backward() needs. The returned state equals
/// forward() on the same arguments bit for bit.
inline std::pair<DensityMatrix, Tape> record_forward(const Program& prog, const ArchLogits& logits,
                                                     std::span<const double> theta, const DensityMatrix& rho0,
                                                     TapeOptions options = {}) {
    Tape tape;
    tape.program_ = prog;
    tape.logits_ = logits;
    tape.probs_ = gate_probs(logits);
    tape.theta_.assign(theta.begin(), theta.end());
    tape.options_ = options;
    check_shapes(prog, tape.probs_, theta);
    if (rho0.n_qubits() != prog.n_qubits) throw std::invalid_argument("initial state has the wrong qubit count");

    DensityMatrix cur = rho0;
    DensityMatrix scratch = DensityMatrix::zero(prog.n_qubits);
    const std::size_t every = options.checkpoint_every;
    tape.cache_.reserve(every == 0 ? prog.steps.size() : prog.steps.size() / every + 1);
    for (std::size_t s = 0; s < prog.steps.size(); ++s) {
        if (every == 0 || s % every == 0) tape.cache_.push_back(cur);
        tape.step_forward(s, cur, scratch);
    }
    return {std::move(cur), std::move(tape)};
}

/// Pull the seed dL/drho back through the tape. A tape can be consumed once.
inline GradientBundle backward(Tape& tape, const DensityMatrix& seed) {
    if (tape.consumed_) throw std::logic_error("tape already consumed by a backward pass");
    tape.consumed_ = true;
    const Program& prog = tape.program_;
    if (seed.n_qubits() != prog.n_qubits) throw std::invalid_argument("seed has the wrong qubit count");

    GradientBundle gb;
    gb.d_theta.assign(prog.theta_count(), 0.0);
    gb.d_probs.assign(tape.probs_.p.size(), 0.0);

    DensityMatrix lam = seed;
    DensityMatrix lam_in = DensityMatrix::zero(prog.n_qubits);
    DensityMatrix scratch = DensityMatrix::zero(prog.n_qubits);
    const std::size_t n_steps = prog.steps.size();
    const std::size_t every = tape.options_.checkpoint_every == 0 ? 1 : tape.options_.checkpoint_every;
    const bool full_cache = tape.options_.checkpoint_every == 0;
    std::vector<DensityMatrix> segment;

    // Walk segments [begin, end) from the back.
    std::size_t end = n_steps;
    while (end > 0) {
        const std::size_t begin = full_cache ? end - 1 : ((end - 1) / every) * every;
        const std::size_t cache_idx = full_cache ? begin : begin / every;
        segment.clear();
        segment.push_back(tape.cache_[cache_idx]);
        for (std::size_t s = begin; s + 1 < end; ++s) {
            DensityMatrix next = segment.back();
            tape.step_forward(s, next, scratch);
            segment.push_back(std::move(next));
        }
        for (std::size_t s = end; s-- > begin;) {
            const DensityMatrix& rho_in = segment[s - begin];
            const auto& st = prog.steps[s];
            if (const auto* mix = std::get_if<MixtureStep>(&st)) {
                std::fill(lam_in.data().begin(), lam_in.data().end(), cplx{0.0, 0.0});
                detail::mixture_step_pass<true, false>(prog.gates, *mix, tape.probs_.row(mix->slot),
                                                       tape.theta_[mix->theta], rho_in, lam, &lam_in, nullptr,
                                                       gb.d_probs.data() + mix->slot * prog.gates.size(),
                                                       gb.d_theta[mix->theta]);
                std::swap(lam, lam_in);
            } else {
                // Every supported noise channel is self-adjoint.
                lam.apply_noise(std::get<NoiseStep>(st).spec);
            }
        }
        end = begin;
    }
    finish_arch_gradient(tape.logits_, tape.probs_, gb);
    return gb;
}

/// Adjoint states for a fixed observable seed, for the forward-accumulation route.
class AdjointTape {
public:
    const DensityMatrix& pulled_back() const { return pulled_back_; }
    const ProbTable& probs() const { return probs_; }

private:
    friend AdjointTape record_adjoint(const Program&, const ArchLogits&, std::span<const double>,
                                      const DensityMatrix&);
    friend GradientBundle forward_with_gradients(const AdjointTape&, const DensityMatrix&, DensityMatrix*);

    Program program_;
    ArchLogits logits_;
    ProbTable probs_;
    std::vector<double> theta_;
    std::vector<DensityMatrix> lam_after_;  // adjoint at the output of each step
    DensityMatrix pulled_back_;             // adjoint at the program input
};

/// Heisenberg-picture pass: Lambda_s = (E_{s+1} o ... o E_last)^dagger(seed).
inline AdjointTape record_adjoint(const Program& prog, const ArchLogits& logits, std::span<const double> theta,
                                  const DensityMatrix& seed) {
    AdjointTape t;
    t.program_ = prog;
    t.logits_ = logits;
    t.probs_ = gate_probs(logits);
    t.theta_.assign(theta.begin(), theta.end());
    check_shapes(prog, t.probs_, theta);
    if (seed.n_qubits() != prog.n_qubits) throw std::invalid_argument("seed has the wrong qubit count");

    const std::size_t n_steps = prog.steps.size();
    t.lam_after_.resize(n_steps);
    DensityMatrix lam = seed;
    for (std::size_t s = n_steps; s-- > 0;) {
        t.lam_after_[s] = lam;
        const auto& st = prog.steps[s];
        if (const auto* mix = std::get_if<MixtureStep>(&st)) {
            DensityMatrix next = DensityMatrix::zero(prog.n_qubits);
            cplx* li = next.data().data();
            const cplx* l = lam.data().data();
            const std::size_t dim = lam.dim();
            const auto row = t.probs_.row(mix->slot);
            const double th = t.theta_[mix->theta];
            for (std::size_t k = 0; k < prog.gates.size(); ++k) {
                const double w = row[k];
                if (w == 0.0) continue;
                const GateKind kind = prog.gates[k].kind;
                switch (kind) {
                    case GateKind::I: kernels::accumulate_scaled(li, l, dim * dim, w); break;
                    case GateKind::Cnot:
                        kernels::accumulate_cnot(li, l, dim, mix->qubit, mix->targets[k], w);
                        break;
                    case GateKind::Rz: kernels::accumulate_rz(li, l, dim, -th, mix->qubit, w); break;
                    default:
                        kernels::accumulate_conjugated(li, l, dim, rotation(kind, th).adjoint(), mix->qubit, w);
                        break;
                }
            }
            lam = std::move(next);
        } else {
            lam.apply_noise(std::get<NoiseStep>(st).spec);
        }
    }
    t.pulled_back_ = std::move(lam);
    return t;
}

/// Single forward sweep from rho0 accumulating gradients of tr(seed * rho_out).
/// `rho0` may be any Hermitian matrix (e.g. a weighted ensemble of inputs).
inline GradientBundle forward_with_gradients(const AdjointTape& t, const DensityMatrix& rho0,
                                             DensityMatrix* rho_out = nullptr) {
    const Program& prog = t.program_;
    if (rho0.n_qubits() != prog.n_qubits) throw std::invalid_argument("initial state has the wrong qubit count");
    GradientBundle gb;
    gb.d_theta.assign(prog.theta_count(), 0.0);
    gb.d_probs.assign(t.probs_.p.size(), 0.0);

    DensityMatrix cur = rho0;
    DensityMatrix next = DensityMatrix::zero(prog.n_qubits);
    for (std::size_t s = 0; s < prog.steps.size(); ++s) {
        const auto& st = prog.steps[s];
        if (const auto* mix = std::get_if<MixtureStep>(&st)) {
            std::fill(next.data().begin(), next.data().end(), cplx{0.0, 0.0});
            detail::mixture_step_pass<false, true>(prog.gates, *mix, t.probs_.row(mix->slot), t.theta_[mix->theta],
                                                   cur, t.lam_after_[s], nullptr, &next,
                                                   gb.d_probs.data() + mix->slot * prog.gates.size(),
                                                   gb.d_theta[mix->theta]);
            std::swap(cur, next);
        } else {
            cur.apply_noise(std::get<NoiseStep>(st).spec);
        }
    }
    finish_arch_gradient(t.logits_, t.probs_, gb);
    if (rho_out) *rho_out = std::move(cur);
    return gb;
}

}  // namespace rhodarts
