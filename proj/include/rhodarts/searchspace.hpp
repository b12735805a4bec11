// searchspace.hpp
// Architecture encoding, softmax gate distributions, mixture channels over
// the search space (macro and micro settings) and argmax discretization.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rhodarts/densmat.hpp"
#include "rhodarts/gateset.hpp"
#include "rhodarts/rng.hpp"

namespace rhodarts {

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Hidden-unit factorization alpha_ij = H_ij v_ij, H_ij in R^{|G| x K}.
struct HiddenUnits {
    std::size_t k = 0;
    std::vector<double> h;  // (slot, gate, unit)
    std::vector<double> v;  // (slot, unit)
};

/// Architecture logits over an m x width grid.
class ArchLogits {
public:
    ArchLogits() = default;
    ArchLogits(std::size_t layers, std::size_t width, std::size_t n_gates)
        : m_(layers), width_(width), g_(n_gates), alpha_(layers * width * n_gates, 0.0) {}

    static ArchLogits with_hidden(std::size_t layers, std::size_t width, std::size_t n_gates,
                                  std::size_t units) {
        ArchLogits a(layers, width, n_gates);
        a.alpha_.clear();
        a.hidden_ = HiddenUnits{units, std::vector<double>(layers * width * n_gates * units, 0.0),
                                std::vector<double>(layers * width * units, 0.0)};
        return a;
    }

    std::size_t layers() const { return m_; }
    std::size_t width() const { return width_; }
    std::size_t n_gates() const { return g_; }
    std::size_t slots() const { return m_ * width_; }
    bool has_hidden() const { return hidden_.has_value(); }

    HiddenUnits& hidden() { return hidden_.value(); }
    const HiddenUnits& hidden() const { return hidden_.value(); }

    /// Directly stored logits; only valid without hidden units.
    std::vector<double>& raw_alpha() {
        if (hidden_) throw std::logic_error("logits are derived from hidden units");
        return alpha_;
    }
    const std::vector<double>& raw_alpha() const {
        if (hidden_) throw std::logic_error("logits are derived from hidden units");
        return alpha_;
    }

    /// Effective logits (slot-major, gate-minor).
    std::vector<double> alpha() const {
        if (!hidden_) return alpha_;
        const auto& hu = *hidden_;
        std::vector<double> a(slots() * g_, 0.0);
        for (std::size_t s = 0; s < slots(); ++s) {
            for (std::size_t k = 0; k < g_; ++k) {
                double acc = 0;
                for (std::size_t u = 0; u < hu.k; ++u) acc += hu.h[(s * g_ + k) * hu.k + u] * hu.v[s * hu.k + u];
                a[s * g_ + k] = acc;
            }
        }
        return a;
    }

    /// Flattened trainable parameters (alpha, or H followed by v).
    std::size_t parameter_count() const {
        return hidden_ ? hidden_->h.size() + hidden_->v.size() : alpha_.size();
    }
    double& parameter(std::size_t i) {
        if (!hidden_) return alpha_[i];
        return i < hidden_->h.size() ? hidden_->h[i] : hidden_->v[i - hidden_->h.size()];
    }

private:
    std::size_t m_ = 0, width_ = 0, g_ = 0;
    std::vector<double> alpha_;
    std::optional<HiddenUnits> hidden_;
};

/// Rotation angles, shape copies x m x width (copies = 1 for macro search).
struct ThetaParams {
    std::size_t copies = 1, layers = 0, width = 0;
    std::vector<double> values;

    ThetaParams() = default;
    ThetaParams(std::size_t n_copies, std::size_t m, std::size_t w)
        : copies(n_copies), layers(m), width(w), values(n_copies * m * w, 0.0) {}

    double& at(std::size_t c, std::size_t i, std::size_t j) { return values[(c * layers + i) * width + j]; }
    double at(std::size_t c, std::size_t i, std::size_t j) const { return values[(c * layers + i) * width + j]; }
};

/// Softmax gate probabilities, slot-major.
struct ProbTable {
    std::size_t layers = 0, width = 0, n_gates = 0;
    std::vector<double> p;

    std::size_t slots() const { return layers * width; }
    std::span<const double> row(std::size_t slot) const { return {p.data() + slot * n_gates, n_gates}; }
    double at(std::size_t i, std::size_t j, std::size_t k) const { return p[(i * width + j) * n_gates + k]; }
};

/// Per-position softmax over the gate axis.
inline ProbTable softmax_rows(std::span<const double> logits, std::size_t layers, std::size_t width,
                              std::size_t n_gates) {
    ProbTable t{layers, width, n_gates, std::vector<double>(logits.size())};
    for (std::size_t s = 0; s < layers * width; ++s) {
        const double* a = logits.data() + s * n_gates;
        double* out = t.p.data() + s * n_gates;
        const double mx = *std::max_element(a, a + n_gates);
        double sum = 0;
        for (std::size_t k = 0; k < n_gates; ++k) sum += (out[k] = std::exp(a[k] - mx));
        for (std::size_t k = 0; k < n_gates; ++k) out[k] /= sum;
    }
    return t;
}

inline ProbTable gate_probs(const ArchLogits& logits) {
    const auto a = logits.alpha();
    return softmax_rows(a, logits.layers(), logits.width(), logits.n_gates());
}

// ---------------------------------------------------------------------------
// Discrete architectures and circuit structure
// ---------------------------------------------------------------------------

struct ArchitectureMatrix {
    std::size_t layers = 0, width = 0;
    std::vector<int> a;

    int at(std::size_t i, std::size_t j) const { return a[i * width + j]; }
    bool operator==(const ArchitectureMatrix&) const = default;
};

/// Qubit map of a micro-search super circuit: one row of n_s qubits per subcircuit.
struct SuperCircuitStructure {
    int n_qubits = 0;
    std::vector<std::vector<int>> rows;

    std::size_t subcircuits() const { return rows.size(); }
    std::size_t width() const { return rows.empty() ? 0 : rows.front().size(); }

    void validate() const {
        if (rows.empty()) throw std::invalid_argument("super circuit has no subcircuits");
        for (const auto& r : rows) {
            if (r.size() != width()) throw std::invalid_argument("super circuit rows differ in width");
            for (std::size_t a = 0; a < r.size(); ++a) {
                if (r[a] < 0 || r[a] >= n_qubits) {
                    throw std::out_of_range("super circuit references qubit " + std::to_string(r[a]) +
                                            " outside a " + std::to_string(n_qubits) + "-qubit register");
                }
                for (std::size_t b = a + 1; b < r.size(); ++b) {
                    if (r[a] == r[b]) throw std::invalid_argument("super circuit row repeats a qubit");
                }
            }
        }
    }
};

/// Probability of one discrete architecture: product of its per-position probabilities.
inline double arch_probability(const ArchitectureMatrix& arch, const ProbTable& probs) {
    if (arch.layers != probs.layers || arch.width != probs.width) {
        throw std::invalid_argument("architecture and probability table shapes differ");
    }
    double p = 1.0;
    for (std::size_t s = 0; s < arch.a.size(); ++s) {
        p *= probs.p[s * probs.n_gates + static_cast<std::size_t>(arch.a[s])];
    }
    return p;
}

/// Per-position argmax; ties go to the lowest gate index.
inline ArchitectureMatrix discretize(const ProbTable& probs) {
    ArchitectureMatrix arch{probs.layers, probs.width, std::vector<int>(probs.slots())};
    for (std::size_t s = 0; s < probs.slots(); ++s) {
        const auto row = probs.row(s);
        arch.a[s] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return arch;
}

// ---------------------------------------------------------------------------
// Programs: flattened channel sequences
// ---------------------------------------------------------------------------

struct MixtureStep {
    int qubit = 0;              // acted-on qubit; control for CNOT candidates
    std::size_t slot = 0;       // row of the probability table
    std::size_t theta = 0;      // index into the flat angle vector
    std::vector<int> targets;   // per gate-set entry: CNOT target qubit, or -1
};

struct NoiseStep {
    NoiseSpec spec;
};

using Step = std::variant<MixtureStep, NoiseStep>;

/// Sequence of mixture channels and noise channels in application order.
struct Program {
    int n_qubits = 0;
    GateSet gates;
    std::size_t layers = 0, width = 0, copies = 1;
    std::vector<Step> steps;

    std::size_t slots() const { return layers * width; }
    std::size_t theta_count() const { return copies * layers * width; }
};

namespace detail {

inline MixtureStep make_mixture_step(const GateSet& gates, const std::vector<int>& qubit_map,
                                     std::size_t j, std::size_t slot, std::size_t theta) {
    MixtureStep s;
    s.qubit = qubit_map[j];
    s.slot = slot;
    s.theta = theta;
    s.targets.assign(gates.size(), -1);
    const std::size_t w = qubit_map.size();
    for (std::size_t k = 0; k < gates.size(); ++k) {
        if (gates[k].kind == GateKind::Cnot) {
            s.targets[k] = qubit_map[(j + static_cast<std::size_t>(gates[k].offset)) % w];
        }
    }
    return s;
}

inline void check_gateset_width(const GateSet& gates, std::size_t width) {
    if (static_cast<std::size_t>(gates.max_offset()) >= width && gates.max_offset() > 0) {
        throw std::invalid_argument("CNOT offset exceeds the search width");
    }
}

}  // namespace detail

/// Macro search: m layers over all n qubits; noise after every layer.
inline Program macro_program(int n_qubits, std::size_t layers, const GateSet& gates,
                             const NoiseSpec& noise = {}) {
    detail::check_gateset_width(gates, static_cast<std::size_t>(n_qubits));
    Program prog{n_qubits, gates, layers, static_cast<std::size_t>(n_qubits), 1, {}};
    std::vector<int> identity_map(static_cast<std::size_t>(n_qubits));
    for (int q = 0; q < n_qubits; ++q) identity_map[static_cast<std::size_t>(q)] = q;
    for (std::size_t i = 0; i < layers; ++i) {
        for (std::size_t j = 0; j < prog.width; ++j) {
            const std::size_t slot = i * prog.width + j;
            prog.steps.emplace_back(detail::make_mixture_step(gates, identity_map, j, slot, slot));
        }
        if (noise.active()) prog.steps.emplace_back(NoiseStep{noise});
    }
    return prog;
}

/// Micro search: one shared m x n_s subcircuit repeated along the rows of C,
/// each copy with its own angles; noise after every subcircuit layer.
inline Program micro_program(const SuperCircuitStructure& structure, std::size_t layers, const GateSet& gates,
                             const NoiseSpec& noise = {}) {
    structure.validate();
    const std::size_t w = structure.width();
    detail::check_gateset_width(gates, w);
    Program prog{structure.n_qubits, gates, layers, w, structure.subcircuits(), {}};
    for (std::size_t c = 0; c < structure.subcircuits(); ++c) {
        const auto& qmap = structure.rows[c];
        for (std::size_t i = 0; i < layers; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                const std::size_t slot = i * w + j;
                prog.steps.emplace_back(detail::make_mixture_step(gates, qmap, j, slot, c * layers * w + slot));
            }
            if (noise.active()) prog.steps.emplace_back(NoiseStep{noise});
        }
    }
    return prog;
}

inline void check_shapes(const Program& prog, const ProbTable& probs, std::span<const double> theta) {
    if (probs.slots() != prog.slots() || probs.n_gates != prog.gates.size()) {
        throw std::invalid_argument("probability table does not match the program");
    }
    if (theta.size() != prog.theta_count()) throw std::invalid_argument("angle vector does not match the program");
}

// ---------------------------------------------------------------------------
// Mixture kernels
// ---------------------------------------------------------------------------

namespace kernels {

/// out += w * U in U^dagger on qubit q.
inline void accumulate_conjugated(cplx* out, const cplx* in, std::size_t dim, const Gate2& g, int q, double w) {
    const std::size_t mask = std::size_t{1} << q;
    const cplx u0 = g.u[0], u1 = g.u[1], u2 = g.u[2], u3 = g.u[3];
    const cplx c0 = w * std::conj(u0), c1 = w * std::conj(u1), c2 = w * std::conj(u2), c3 = w * std::conj(u3);
    for (std::size_t rh = 0; rh < dim; rh += 2 * mask) {
        for (std::size_t r0 = rh; r0 < rh + mask; ++r0) {
            const cplx* i0 = in + r0 * dim;
            const cplx* i1 = in + (r0 | mask) * dim;
            cplx* o0 = out + r0 * dim;
            cplx* o1 = out + (r0 | mask) * dim;
            for (std::size_t ch = 0; ch < dim; ch += 2 * mask) {
                for (std::size_t a = ch; a < ch + mask; ++a) {
                    const std::size_t b = a | mask;
                    const cplx t00 = u0 * i0[a] + u1 * i1[a];
                    const cplx t01 = u0 * i0[b] + u1 * i1[b];
                    const cplx t10 = u2 * i0[a] + u3 * i1[a];
                    const cplx t11 = u2 * i0[b] + u3 * i1[b];
                    o0[a] += t00 * c0 + t01 * c1;
                    o0[b] += t00 * c2 + t01 * c3;
                    o1[a] += t10 * c0 + t11 * c1;
                    o1[b] += t10 * c2 + t11 * c3;
                }
            }
        }
    }
}

/// out += w * Rz(theta) in Rz(theta)^dagger on qubit q (phase on the off-diagonal pairs).
inline void accumulate_rz(cplx* out, const cplx* in, std::size_t dim, double theta, int q, double w) {
    const std::size_t mask = std::size_t{1} << q;
    // (r bit 0, c bit 1): e^{-i theta/2} * conj(e^{i theta/2}) = e^{-i theta}
    const cplx ph01 = w * std::polar(1.0, -theta);
    const cplx ph10 = std::conj(ph01);
    for (std::size_t r = 0; r < dim; ++r) {
        const cplx* ir = in + r * dim;
        cplx* orow = out + r * dim;
        const bool rb = (r & mask) != 0;
        for (std::size_t c = 0; c < dim; ++c) {
            const bool cb = (c & mask) != 0;
            if (rb == cb) {
                orow[c] += w * ir[c];
            } else {
                orow[c] += (rb ? ph10 : ph01) * ir[c];
            }
        }
    }
}

/// out += w * CNOT in CNOT.
inline void accumulate_cnot(cplx* out, const cplx* in, std::size_t dim, int control, int target, double w) {
    const std::size_t cm = std::size_t{1} << control, tm = std::size_t{1} << target;
    for (std::size_t r = 0; r < dim; ++r) {
        const std::size_t pr = (r & cm) ? (r ^ tm) : r;
        const cplx* ir = in + pr * dim;
        cplx* orow = out + r * dim;
        for (std::size_t c = 0; c < dim; ++c) {
            const std::size_t pc = (c & cm) ? (c ^ tm) : c;
            orow[c] += w * ir[pc];
        }
    }
}

inline void accumulate_scaled(cplx* out, const cplx* in, std::size_t count, double w) {
    for (std::size_t k = 0; k < count; ++k) out[k] += w * in[k];
}

}  // namespace kernels

/// out = sum_k P_k M_k(theta) in M_k(theta)^dagger. `out` must be distinct from `in`.
inline void mix_into(DensityMatrix& out, const DensityMatrix& in, const GateSet& gates, const MixtureStep& step,
                     std::span<const double> probs, double theta) {
    const std::size_t dim = in.dim();
    cplx* o = out.data().data();
    const cplx* src = in.data().data();
    std::fill(o, o + dim * dim, cplx{0.0, 0.0});
    for (std::size_t k = 0; k < gates.size(); ++k) {
        const double w = probs[k];
        if (w == 0.0) continue;
        switch (gates[k].kind) {
            case GateKind::I: kernels::accumulate_scaled(o, src, dim * dim, w); break;
            case GateKind::Rz: kernels::accumulate_rz(o, src, dim, theta, step.qubit, w); break;
            case GateKind::Rx:
            case GateKind::Ry:
                kernels::accumulate_conjugated(o, src, dim, rotation(gates[k].kind, theta), step.qubit, w);
                break;
            case GateKind::Cnot: kernels::accumulate_cnot(o, src, dim, step.qubit, step.targets[k], w); break;
        }
    }
}

/// Apply a single mixture channel E_ij to rho.
inline DensityMatrix apply_mixture_position(const DensityMatrix& rho, const GateSet& gates, const MixtureStep& step,
                                            std::span<const double> probs, double theta) {
    if (probs.size() != gates.size()) throw std::invalid_argument("probability row does not match the gate set");
    rho.check_qubit(step.qubit);
    DensityMatrix out = DensityMatrix::zero(rho.n_qubits());
    mix_into(out, rho, gates, step, probs, theta);
    return out;
}

/// Convenience overload for macro position (i, j) of an n-qubit grid.
inline DensityMatrix apply_mixture_position(const DensityMatrix& rho, std::size_t i, std::size_t j,
                                            const ProbTable& probs, const ThetaParams& theta,
                                            const GateSet& gates) {
    std::vector<int> qmap(static_cast<std::size_t>(rho.n_qubits()));
    for (int q = 0; q < rho.n_qubits(); ++q) qmap[static_cast<std::size_t>(q)] = q;
    const std::size_t slot = i * probs.width + j;
    const auto step = detail::make_mixture_step(gates, qmap, j, slot, slot);
    return apply_mixture_position(rho, gates, step, probs.row(slot), theta.at(0, i, j));
}

/// Run every step of the program; re-hermitizes every DensityMatrix::kHermitizeInterval steps.
inline DensityMatrix forward(const Program& prog, const ProbTable& probs, std::span<const double> theta,
                             const DensityMatrix& rho0) {
    check_shapes(prog, probs, theta);
    if (rho0.n_qubits() != prog.n_qubits) throw std::invalid_argument("initial state has the wrong qubit count");
    DensityMatrix cur = rho0;
    DensityMatrix next = DensityMatrix::zero(prog.n_qubits);
    int since = 0;
    for (const auto& st : prog.steps) {
        if (const auto* mix = std::get_if<MixtureStep>(&st)) {
            mix_into(next, cur, prog.gates, *mix, probs.row(mix->slot), theta[mix->theta]);
            std::swap(cur, next);
        } else {
            cur.apply_noise(std::get<NoiseStep>(st).spec);
        }
        if (++since == DensityMatrix::kHermitizeInterval) {
            cur.hermitize();
            since = 0;
        }
    }
    return cur;
}

inline DensityMatrix forward_macro(const DensityMatrix& rho0, const ArchLogits& logits, const ThetaParams& theta,
                                   const NoiseSpec& noise = {}) {
    const auto gates = GateSet::standard(rho0.n_qubits());
    const auto prog = macro_program(rho0.n_qubits(), logits.layers(), gates, noise);
    return forward(prog, gate_probs(logits), theta.values, rho0);
}

inline DensityMatrix forward_micro(const DensityMatrix& rho0, const ArchLogits& logits, const ThetaParams& theta,
                                   const SuperCircuitStructure& structure, const NoiseSpec& noise = {}) {
    const auto gates = GateSet::standard(static_cast<int>(structure.width()));
    const auto prog = micro_program(structure, logits.layers(), gates, noise);
    return forward(prog, gate_probs(logits), theta.values, rho0);
}

// ---------------------------------------------------------------------------
// Discrete circuits
// ---------------------------------------------------------------------------

/// One gate of a discrete circuit.
struct CircuitOp {
    GateKind kind = GateKind::I;
    int qubit = 0;   // control for CNOT
    int target = -1;
    double theta = 0;
};

/// Expand a program and an architecture into the gate list of the selected circuit.
/// Noise steps are skipped; identity gates are kept so positions stay aligned.
inline std::vector<CircuitOp> circuit_ops(const Program& prog, const ArchitectureMatrix& arch,
                                          std::span<const double> theta) {
    if (arch.layers != prog.layers || arch.width != prog.width) {
        throw std::invalid_argument("architecture shape does not match the program");
    }
    std::vector<CircuitOp> ops;
    for (const auto& st : prog.steps) {
        const auto* mix = std::get_if<MixtureStep>(&st);
        if (!mix) continue;
        const auto k = static_cast<std::size_t>(arch.a[mix->slot]);
        if (k >= prog.gates.size()) throw std::out_of_range("architecture entry outside the gate set");
        const GateId& g = prog.gates[k];
        ops.push_back({g.kind, mix->qubit, mix->targets[k], theta[mix->theta]});
    }
    return ops;
}

inline void apply_op(DensityMatrix& rho, const CircuitOp& op) {
    switch (op.kind) {
        case GateKind::I: break;
        case GateKind::Cnot: rho.apply_cnot(op.qubit, op.target); break;
        default: rho.apply(rotation(op.kind, op.theta), op.qubit); break;
    }
}

inline void apply_op(PureState& psi, const CircuitOp& op) {
    switch (op.kind) {
        case GateKind::I: break;
        case GateKind::Cnot: psi.apply_cnot(op.qubit, op.target); break;
        default: psi.apply(rotation(op.kind, op.theta), op.qubit); break;
    }
}

/// Density-matrix simulation of the selected circuit, including the program's noise steps.
inline DensityMatrix simulate_discrete(const Program& prog, const ArchitectureMatrix& arch,
                                       std::span<const double> theta, DensityMatrix rho) {
    if (arch.layers != prog.layers || arch.width != prog.width) {
        throw std::invalid_argument("architecture shape does not match the program");
    }
    for (const auto& st : prog.steps) {
        if (const auto* mix = std::get_if<MixtureStep>(&st)) {
            const auto k = static_cast<std::size_t>(arch.a[mix->slot]);
            const GateId& g = prog.gates[k];
            apply_op(rho, {g.kind, mix->qubit, mix->targets[k], theta[mix->theta]});
        } else {
            rho.apply_noise(std::get<NoiseStep>(st).spec);
        }
    }
    return rho;
}

/// Noiseless pure-state simulation of the selected circuit.
inline PureState simulate_discrete(const Program& prog, const ArchitectureMatrix& arch,
                                   std::span<const double> theta, PureState psi) {
    for (const auto& st : prog.steps) {
        if (const auto* ns = std::get_if<NoiseStep>(&st); ns && ns->spec.active()) {
            throw std::invalid_argument("pure-state simulation cannot model noise; use the density path");
        }
    }
    for (const auto& op : circuit_ops(prog, arch, theta)) apply_op(psi, op);
    return psi;
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

/// alpha ~ N(0, 0.01^2), or H, v ~ N(0, (1/sqrt K)^2) with K = 2|G| under hidden units.
inline ArchLogits init_logits(std::size_t layers, std::size_t width, std::size_t n_gates, bool hidden,
                              Stream& rng) {
    if (!hidden) {
        ArchLogits a(layers, width, n_gates);
        for (auto& v : a.raw_alpha()) v = rng.normal(0.0, 0.01);
        return a;
    }
    const std::size_t k = 2 * n_gates;
    auto a = ArchLogits::with_hidden(layers, width, n_gates, k);
    const double sd = 1.0 / std::sqrt(static_cast<double>(k));
    for (auto& v : a.hidden().h) v = rng.normal(0.0, sd);
    for (auto& v : a.hidden().v) v = rng.normal(0.0, sd);
    return a;
}

/// theta ~ U(-pi, pi)
inline ThetaParams init_theta(std::size_t copies, std::size_t layers, std::size_t width, Stream& rng) {
    ThetaParams t(copies, layers, width);
    for (auto& v : t.values) v = rng.uniform(-kPi, kPi);
    return t;
}

}  // namespace rhodarts
