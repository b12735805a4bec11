// densmat.hpp
// Exact state-vector and density-matrix simulation of small qubit registers.
//
// Qubit q is bit q of the basis-state index (qubit 0 is the least significant
// bit). Density matrices are stored row-major; gates are applied in place over
// strided index pairs, never by building the 2^n x 2^n embedded unitary.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rhodarts {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

inline std::size_t dim_of(int n_qubits) { return std::size_t{1} << n_qubits; }

// ---------------------------------------------------------------------------
// Gate matrices
// ---------------------------------------------------------------------------

/// 2x2 complex matrix, row-major: {u00, u01, u10, u11}.
struct Gate2 {
    std::array<cplx, 4> u{};

    cplx operator()(int r, int c) const { return u[static_cast<std::size_t>(2 * r + c)]; }

    Gate2 adjoint() const {
        return {{std::conj(u[0]), std::conj(u[2]), std::conj(u[1]), std::conj(u[3])}};
    }
    friend Gate2 operator*(const Gate2& a, const Gate2& b) {
        return {{a.u[0] * b.u[0] + a.u[1] * b.u[2], a.u[0] * b.u[1] + a.u[1] * b.u[3],
                 a.u[2] * b.u[0] + a.u[3] * b.u[2], a.u[2] * b.u[1] + a.u[3] * b.u[3]}};
    }
};

/// 4x4 complex matrix acting on (qubit a = low bit, qubit b = high bit).
struct Gate4 {
    std::array<cplx, 16> u{};
};

namespace gates {

inline Gate2 identity() { return {{1.0, 0.0, 0.0, 1.0}}; }
inline Gate2 x() { return {{0.0, 1.0, 1.0, 0.0}}; }
inline Gate2 y() { return {{0.0, cplx(0, -1), cplx(0, 1), 0.0}}; }
inline Gate2 z() { return {{1.0, 0.0, 0.0, -1.0}}; }
inline Gate2 h() {
    const double s = 1.0 / std::sqrt(2.0);
    return {{s, s, s, -s}};
}
inline Gate2 rx(double theta) {
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    return {{c, cplx(0, -s), cplx(0, -s), c}};
}
inline Gate2 ry(double theta) {
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    return {{c, -s, s, c}};
}
inline Gate2 rz(double theta) {
    return {{std::polar(1.0, -theta / 2), 0.0, 0.0, std::polar(1.0, theta / 2)}};
}

/// CNOT with control on the low qubit of the pair and target on the high one.
inline Gate4 cnot() {
    Gate4 g;
    // basis index = low + 2*high
    g.u[0 * 4 + 0] = 1.0;
    g.u[1 * 4 + 3] = 1.0;
    g.u[2 * 4 + 2] = 1.0;
    g.u[3 * 4 + 1] = 1.0;
    return g;
}

}  // namespace gates

inline double unitarity_defect(const Gate2& g) {
    const Gate2 p = g.adjoint() * g;
    return std::max({std::abs(p.u[0] - 1.0), std::abs(p.u[1]), std::abs(p.u[2]),
                     std::abs(p.u[3] - 1.0)});
}

inline double unitarity_defect(const Gate4& g) {
    double worst = 0;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            cplx acc = 0;
            for (int k = 0; k < 4; ++k) acc += std::conj(g.u[k * 4 + r]) * g.u[k * 4 + c];
            worst = std::max(worst, std::abs(acc - (r == c ? 1.0 : 0.0)));
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

enum class NoiseKind { None, BitFlip, PhaseFlip, BitPhaseFlip, Depolarizing };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::None;
    double p = 0.0;

    NoiseSpec() = default;
    NoiseSpec(NoiseKind k, double prob) : kind(k), p(prob) {
        if (!(prob >= 0.0 && prob <= 1.0)) {
            throw std::invalid_argument("noise probability must lie in [0, 1], got " +
                                        std::to_string(prob));
        }
    }

    bool active() const { return kind != NoiseKind::None && p > 0.0; }
};

inline std::string to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::None: return "none";
        case NoiseKind::BitFlip: return "bitflip";
        case NoiseKind::PhaseFlip: return "phaseflip";
        case NoiseKind::BitPhaseFlip: return "bitphaseflip";
        case NoiseKind::Depolarizing: return "depolarizing";
    }
    return "none";
}

inline NoiseKind parse_noise_kind(const std::string& s) {
    if (s == "none") return NoiseKind::None;
    if (s == "bitflip") return NoiseKind::BitFlip;
    if (s == "phaseflip") return NoiseKind::PhaseFlip;
    if (s == "bitphaseflip") return NoiseKind::BitPhaseFlip;
    if (s == "depolarizing") return NoiseKind::Depolarizing;
    throw std::invalid_argument("unknown noise kind '" + s + "'");
}

/// Qubit selector for flip channels; `all` applies the channel to every qubit.
inline constexpr int kAllQubits = -1;

// ---------------------------------------------------------------------------
// Pure states
// ---------------------------------------------------------------------------

class PureState {
public:
    PureState() = default;

    /// |0...0>
    explicit PureState(int n_qubits) : n_(n_qubits), amp_(dim_of(n_qubits)) {
        check_n(n_qubits);
        amp_[0] = 1.0;
    }

    PureState(int n_qubits, std::vector<cplx> amplitudes) : n_(n_qubits), amp_(std::move(amplitudes)) {
        check_n(n_qubits);
        if (amp_.size() != dim_of(n_qubits)) {
            throw std::invalid_argument("dimension mismatch: " + std::to_string(amp_.size()) +
                                        " amplitudes for " + std::to_string(n_qubits) + " qubits");
        }
    }

    static PureState basis(int n_qubits, std::size_t index) {
        PureState s(n_qubits);
        if (index >= s.dim()) throw std::out_of_range("basis index out of range");
        s.amp_[0] = 0.0;
        s.amp_[index] = 1.0;
        return s;
    }

    int n_qubits() const { return n_; }
    std::size_t dim() const { return amp_.size(); }

    cplx& operator[](std::size_t k) { return amp_[k]; }
    const cplx& operator[](std::size_t k) const { return amp_[k]; }
    std::span<cplx> amplitudes() { return amp_; }
    std::span<const cplx> amplitudes() const { return amp_; }

    double norm_squared() const {
        double s = 0;
        for (const auto& a : amp_) s += std::norm(a);
        return s;
    }

    void normalize() {
        const double nrm = std::sqrt(norm_squared());
        if (nrm == 0.0) throw std::domain_error("cannot normalize the zero vector");
        for (auto& a : amp_) a /= nrm;
    }

    void apply(const Gate2& g, int q) {
        check_qubit(q);
        const std::size_t mask = std::size_t{1} << q, n = dim();
        for (std::size_t hi = 0; hi < n; hi += 2 * mask) {
            for (std::size_t i0 = hi; i0 < hi + mask; ++i0) {
                const std::size_t i1 = i0 | mask;
                const cplx a0 = amp_[i0], a1 = amp_[i1];
                amp_[i0] = g.u[0] * a0 + g.u[1] * a1;
                amp_[i1] = g.u[2] * a0 + g.u[3] * a1;
            }
        }
    }

    void apply_cnot(int control, int target) {
        check_pair(control, target);
        const std::size_t cm = std::size_t{1} << control, tm = std::size_t{1} << target;
        for (std::size_t k = 0; k < dim(); ++k) {
            if ((k & cm) && !(k & tm)) std::swap(amp_[k], amp_[k | tm]);
        }
    }

    void check_qubit(int q) const {
        if (q < 0 || q >= n_) {
            throw std::out_of_range("qubit index " + std::to_string(q) + " out of range for " +
                                    std::to_string(n_) + " qubits");
        }
    }
    void check_pair(int control, int target) const {
        check_qubit(control);
        check_qubit(target);
        if (control == target) throw std::invalid_argument("CNOT control and target coincide");
    }

private:
    static void check_n(int n) {
        if (n < 1 || n > 24) throw std::invalid_argument("qubit count out of range");
    }

    int n_ = 0;
    std::vector<cplx> amp_;
};

inline cplx inner(const PureState& a, const PureState& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("dimension mismatch in inner product");
    cplx acc = 0;
    for (std::size_t k = 0; k < a.dim(); ++k) acc += std::conj(a[k]) * b[k];
    return acc;
}

// ---------------------------------------------------------------------------
// Density matrices
// ---------------------------------------------------------------------------

/// N x N complex matrix over an n-qubit register.
///
/// Besides proper density matrices this type also carries the Hermitian
/// adjoint states and weighted ensembles used during differentiation, so the
/// trace-one invariant is checked by `validity()` rather than enforced on
/// construction.
class DensityMatrix {
public:
    /// Every this many channel applications the matrix is re-hermitized.
    static constexpr int kHermitizeInterval = 32;

    DensityMatrix() = default;

    /// |0...0><0...0|
    explicit DensityMatrix(int n_qubits) : n_(n_qubits), dim_(dim_of(n_qubits)), m_(dim_ * dim_) {
        if (n_qubits < 1 || n_qubits > 12) throw std::invalid_argument("qubit count out of range");
        m_[0] = 1.0;
    }

    static DensityMatrix zero(int n_qubits) {
        DensityMatrix d(n_qubits);
        d.m_[0] = 0.0;
        return d;
    }

    static DensityMatrix maximally_mixed(int n_qubits) {
        DensityMatrix d = zero(n_qubits);
        const double w = 1.0 / static_cast<double>(d.dim_);
        for (std::size_t k = 0; k < d.dim_; ++k) d(k, k) = w;
        return d;
    }

    static DensityMatrix from_entries(int n_qubits, std::vector<cplx> entries) {
        DensityMatrix d(n_qubits);
        if (entries.size() != d.m_.size()) throw std::invalid_argument("dimension mismatch");
        d.m_ = std::move(entries);
        return d;
    }

    int n_qubits() const { return n_; }
    std::size_t dim() const { return dim_; }

    cplx& operator()(std::size_t r, std::size_t c) { return m_[r * dim_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const { return m_[r * dim_ + c]; }
    std::span<cplx> data() { return m_; }
    std::span<const cplx> data() const { return m_; }

    cplx trace() const {
        cplx t = 0;
        for (std::size_t k = 0; k < dim_; ++k) t += (*this)(k, k);
        return t;
    }

    double hermiticity_defect() const {
        double worst = 0;
        for (std::size_t r = 0; r < dim_; ++r) {
            for (std::size_t c = r; c < dim_; ++c) {
                worst = std::max(worst, std::abs((*this)(r, c) - std::conj((*this)(c, r))));
            }
        }
        return worst;
    }

    /// Replace with (rho + rho^dagger) / 2.
    void hermitize() {
        for (std::size_t r = 0; r < dim_; ++r) {
            (*this)(r, r) = (*this)(r, r).real();
            for (std::size_t c = r + 1; c < dim_; ++c) {
                const cplx avg = 0.5 * ((*this)(r, c) + std::conj((*this)(c, r)));
                (*this)(r, c) = avg;
                (*this)(c, r) = std::conj(avg);
            }
        }
        since_hermitize_ = 0;
    }

    /// Bookkeeping hook called after every channel application.
    void note_channel() {
        if (++since_hermitize_ >= kHermitizeInterval) hermitize();
    }

    DensityMatrix& operator+=(const DensityMatrix& o) {
        check_same(o);
        for (std::size_t k = 0; k < m_.size(); ++k) m_[k] += o.m_[k];
        return *this;
    }
    DensityMatrix& operator*=(double s) {
        for (auto& v : m_) v *= s;
        return *this;
    }
    void axpy(double w, const DensityMatrix& o) {
        check_same(o);
        for (std::size_t k = 0; k < m_.size(); ++k) m_[k] += w * o.m_[k];
    }

    double max_abs_diff(const DensityMatrix& o) const {
        check_same(o);
        double worst = 0;
        for (std::size_t k = 0; k < m_.size(); ++k) worst = std::max(worst, std::abs(m_[k] - o.m_[k]));
        return worst;
    }

    void check_qubit(int q) const {
        if (q < 0 || q >= n_) {
            throw std::out_of_range("qubit index " + std::to_string(q) + " out of range for " +
                                    std::to_string(n_) + " qubits");
        }
    }
    void check_same(const DensityMatrix& o) const {
        if (o.dim_ != dim_) throw std::invalid_argument("dimension mismatch between matrices");
    }

    // -- in-place channels ---------------------------------------------------

    /// rho <- U rho U^dagger on qubit q.
    void apply(const Gate2& g, int q) {
        check_qubit(q);
        conjugate_blocks(q, [&](cplx& a00, cplx& a01, cplx& a10, cplx& a11) {
            conjugate_block(g, a00, a01, a10, a11);
        });
        note_channel();
    }

    void apply_cnot(int control, int target) {
        check_qubit(control);
        check_qubit(target);
        if (control == target) throw std::invalid_argument("CNOT control and target coincide");
        const std::size_t cm = std::size_t{1} << control, tm = std::size_t{1} << target;
        // Row permutation then column permutation.
        for (std::size_t r = 0; r < dim_; ++r) {
            if ((r & cm) && !(r & tm)) {
                std::swap_ranges(&m_[r * dim_], &m_[r * dim_] + dim_, &m_[(r | tm) * dim_]);
            }
        }
        for (std::size_t r = 0; r < dim_; ++r) {
            cplx* row = &m_[r * dim_];
            for (std::size_t c = 0; c < dim_; ++c) {
                if ((c & cm) && !(c & tm)) std::swap(row[c], row[c | tm]);
            }
        }
        note_channel();
    }

    /// Apply a two-qubit unitary; `g` indexes its basis as low + 2*high.
    void apply(const Gate4& g, int low, int high) {
        check_qubit(low);
        check_qubit(high);
        if (low == high) throw std::invalid_argument("two-qubit gate on a single qubit");
        const std::size_t lm = std::size_t{1} << low, hm = std::size_t{1} << high;
        auto sub = [&](std::size_t base, int k) {
            return base | ((k & 1) ? lm : 0) | ((k & 2) ? hm : 0);
        };
        std::vector<cplx> tmp(m_.size());
        // left multiply
        for (std::size_t base = 0; base < dim_; ++base) {
            if (base & (lm | hm)) continue;
            for (std::size_t c = 0; c < dim_; ++c) {
                std::array<cplx, 4> v;
                for (int k = 0; k < 4; ++k) v[k] = m_[sub(base, k) * dim_ + c];
                for (int r = 0; r < 4; ++r) {
                    cplx acc = 0;
                    for (int k = 0; k < 4; ++k) acc += g.u[r * 4 + k] * v[k];
                    tmp[sub(base, r) * dim_ + c] = acc;
                }
            }
        }
        // right multiply by U^dagger
        for (std::size_t r = 0; r < dim_; ++r) {
            for (std::size_t base = 0; base < dim_; ++base) {
                if (base & (lm | hm)) continue;
                std::array<cplx, 4> v;
                for (int k = 0; k < 4; ++k) v[k] = tmp[r * dim_ + sub(base, k)];
                for (int c = 0; c < 4; ++c) {
                    cplx acc = 0;
                    for (int k = 0; k < 4; ++k) acc += v[k] * std::conj(g.u[c * 4 + k]);
                    m_[r * dim_ + sub(base, c)] = acc;
                }
            }
        }
        note_channel();
    }

    /// Flip channels act on qubit q (or every qubit for kAllQubits); the
    /// depolarizing channel is global and ignores q. Depolarizing uses
    /// (1-p) rho + p tr(rho) I/N, which equals the textbook form on trace-one
    /// inputs and keeps the map linear.
    void apply_noise(const NoiseSpec& spec, int q = kAllQubits) {
        if (spec.kind == NoiseKind::None) return;
        if (spec.kind == NoiseKind::Depolarizing) {
            const cplx tr = trace();
            const double keep = 1.0 - spec.p;
            for (auto& v : m_) v *= keep;
            const cplx add = spec.p * tr / static_cast<double>(dim_);
            for (std::size_t k = 0; k < dim_; ++k) (*this)(k, k) += add;
            note_channel();
            return;
        }
        if (q == kAllQubits) {
            for (int j = 0; j < n_; ++j) flip_channel(spec, j);
        } else {
            check_qubit(q);
            flip_channel(spec, q);
        }
        note_channel();
    }

    /// Visit every 2x2 block {(r0,c0),(r0,c1),(r1,c0),(r1,c1)} where r1, c1 set bit q.
    template <class F>
    void conjugate_blocks(int q, F&& f) {
        const std::size_t mask = std::size_t{1} << q;
        for (std::size_t rh = 0; rh < dim_; rh += 2 * mask) {
            for (std::size_t r0 = rh; r0 < rh + mask; ++r0) {
                cplx* row0 = &m_[r0 * dim_];
                cplx* row1 = &m_[(r0 | mask) * dim_];
                for (std::size_t ch = 0; ch < dim_; ch += 2 * mask) {
                    for (std::size_t c0 = ch; c0 < ch + mask; ++c0) {
                        f(row0[c0], row0[c0 | mask], row1[c0], row1[c0 | mask]);
                    }
                }
            }
        }
    }

    static void conjugate_block(const Gate2& g, cplx& a00, cplx& a01, cplx& a10, cplx& a11) {
        const cplx t00 = g.u[0] * a00 + g.u[1] * a10;
        const cplx t01 = g.u[0] * a01 + g.u[1] * a11;
        const cplx t10 = g.u[2] * a00 + g.u[3] * a10;
        const cplx t11 = g.u[2] * a01 + g.u[3] * a11;
        const cplx c0 = std::conj(g.u[0]), c1 = std::conj(g.u[1]);
        const cplx c2 = std::conj(g.u[2]), c3 = std::conj(g.u[3]);
        a00 = t00 * c0 + t01 * c1;
        a01 = t00 * c2 + t01 * c3;
        a10 = t10 * c0 + t11 * c1;
        a11 = t10 * c2 + t11 * c3;
    }

private:
    void flip_channel(const NoiseSpec& spec, int q) {
        const double p = spec.p, keep = 1.0 - p;
        const bool bit = spec.kind == NoiseKind::BitFlip || spec.kind == NoiseKind::BitPhaseFlip;
        const bool phase = spec.kind == NoiseKind::PhaseFlip || spec.kind == NoiseKind::BitPhaseFlip;
        conjugate_blocks(q, [&](cplx& a00, cplx& a01, cplx& a10, cplx& a11) {
            if (bit) {
                // X rho X swaps a00<->a11 and a01<->a10
                const cplx b00 = keep * a00 + p * a11, b11 = keep * a11 + p * a00;
                const cplx b01 = keep * a01 + p * a10, b10 = keep * a10 + p * a01;
                a00 = b00;
                a11 = b11;
                a01 = b01;
                a10 = b10;
            }
            if (phase) {
                // Z rho Z negates the off-diagonal pair
                a01 *= keep - p;
                a10 *= keep - p;
            }
        });
    }

    int n_ = 0;
    std::size_t dim_ = 0;
    std::vector<cplx> m_;
    int since_hermitize_ = 0;
};

// ---------------------------------------------------------------------------
// Free-function interface
// ---------------------------------------------------------------------------

inline DensityMatrix pure_to_density(const PureState& psi) {
    DensityMatrix rho = DensityMatrix::zero(psi.n_qubits());
    const std::size_t n = psi.dim();
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) rho(r, c) = psi[r] * std::conj(psi[c]);
    }
    return rho;
}

inline DensityMatrix apply_1q_gate(DensityMatrix rho, const Gate2& g, int q) {
    rho.apply(g, q);
    return rho;
}

inline DensityMatrix apply_cnot(DensityMatrix rho, int control, int target) {
    rho.apply_cnot(control, target);
    return rho;
}

inline DensityMatrix apply_noise(DensityMatrix rho, const NoiseSpec& spec, int q = kAllQubits) {
    rho.apply_noise(spec, q);
    return rho;
}

/// <phi| rho |phi>
inline double fidelity(const DensityMatrix& rho, const PureState& phi) {
    if (rho.dim() != phi.dim()) throw std::invalid_argument("dimension mismatch in fidelity");
    cplx acc = 0;
    const std::size_t n = rho.dim();
    for (std::size_t r = 0; r < n; ++r) {
        cplx row = 0;
        for (std::size_t c = 0; c < n; ++c) row += rho(r, c) * phi[c];
        acc += std::conj(phi[r]) * row;
    }
    return acc.real();
}

inline double fidelity(const PureState& psi, const PureState& phi) { return std::norm(inner(phi, psi)); }

/// tr(rho H) for diagonal H = diag(h).
inline double expectation_diag(const DensityMatrix& rho, std::span<const double> h) {
    if (h.size() != rho.dim()) throw std::invalid_argument("dimension mismatch in expectation");
    double acc = 0;
    for (std::size_t k = 0; k < h.size(); ++k) acc += h[k] * rho(k, k).real();
    return acc;
}

inline double expectation_diag(const PureState& psi, std::span<const double> h) {
    if (h.size() != psi.dim()) throw std::invalid_argument("dimension mismatch in expectation");
    double acc = 0;
    for (std::size_t k = 0; k < h.size(); ++k) acc += h[k] * std::norm(psi[k]);
    return acc;
}

inline std::vector<double> measurement_probs(const DensityMatrix& rho) {
    std::vector<double> p(rho.dim());
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::clamp(rho(k, k).real(), 0.0, 1.0);
    return p;
}

inline std::vector<double> measurement_probs(const PureState& psi) {
    std::vector<double> p(psi.dim());
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::norm(psi[k]);
    return p;
}

/// Reduced 2x2 density matrix of one qubit.
inline Gate2 reduced_qubit(const DensityMatrix& rho, int q) {
    rho.check_qubit(q);
    const std::size_t mask = std::size_t{1} << q;
    Gate2 out{{0.0, 0.0, 0.0, 0.0}};
    for (std::size_t r = 0; r < rho.dim(); ++r) {
        const std::size_t rb = (r & mask) ? 1 : 0;
        const std::size_t rest = r & ~mask;
        for (int cb = 0; cb < 2; ++cb) {
            const std::size_t c = rest | (cb ? mask : 0);
            out.u[rb * 2 + static_cast<std::size_t>(cb)] += rho(r, c);
        }
    }
    return out;
}

struct Validity {
    double trace_defect;
    double hermiticity_defect;
};

inline Validity validity(const DensityMatrix& rho) {
    return {std::abs(rho.trace() - 1.0), rho.hermiticity_defect()};
}

}  // namespace rhodarts
