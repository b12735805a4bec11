// verify.hpp
// Self-check suite behind `rhodarts verify`: dense reference simulation,
// explicit architecture enumeration, finite differences, and channel validity.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "rhodarts/difftape.hpp"
#include "rhodarts/searchspace.hpp"

namespace rhodarts::verify {

using Mat = Eigen::MatrixXcd;

/// 2^n x 2^n operator acting as `g` on qubit q, built entry by entry.
inline Mat embed(const Gate2& g, int q, int n) {
    const std::size_t d = dim_of(n);
    Mat m = Mat::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    const std::size_t rest = ~(std::size_t{1} << q);
    for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            if ((r & rest) != (c & rest)) continue;
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                g(static_cast<int>((r >> q) & 1U), static_cast<int>((c >> q) & 1U));
        }
    }
    return m;
}

inline Mat cnot_matrix(int control, int target, int n) {
    const std::size_t d = dim_of(n);
    Mat m = Mat::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t c = 0; c < d; ++c) {
        const std::size_t r = ((c >> control) & 1U) ? c ^ (std::size_t{1} << target) : c;
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = 1.0;
    }
    return m;
}

inline Mat to_mat(const DensityMatrix& rho) {
    const auto d = static_cast<Eigen::Index>(rho.dim());
    Mat m(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) m(r, c) = rho(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    }
    return m;
}

inline double max_abs(const Mat& a, const DensityMatrix& b) {
    return (a - to_mat(b)).cwiseAbs().maxCoeff();
}

/// Kraus-sum form of every noise channel.
inline Mat apply_noise_dense(const Mat& rho, const NoiseSpec& spec, int n) {
    if (!spec.active()) return rho;
    const double p = spec.p;
    if (spec.kind == NoiseKind::Depolarizing) {
        const auto d = rho.rows();
        return (1 - p) * rho + p * rho.trace() * Mat::Identity(d, d) / static_cast<double>(d);
    }
    Mat out = rho;
    for (int q = 0; q < n; ++q) {
        auto flip = [&](const Gate2& g) {
            const Mat e = embed(g, q, n);
            out = (1 - p) * out + p * e * out * e.adjoint();
        };
        if (spec.kind == NoiseKind::BitFlip || spec.kind == NoiseKind::BitPhaseFlip) flip(gates::x());
        if (spec.kind == NoiseKind::PhaseFlip || spec.kind == NoiseKind::BitPhaseFlip) flip(gates::z());
    }
    return out;
}

inline Mat gate_matrix(const Program& prog, const MixtureStep& st, std::size_t k, double theta) {
    const GateId& g = prog.gates[k];
    if (g.kind == GateKind::I) return Mat::Identity(static_cast<Eigen::Index>(dim_of(prog.n_qubits)),
                                                    static_cast<Eigen::Index>(dim_of(prog.n_qubits)));
    if (g.kind == GateKind::Cnot) return cnot_matrix(st.qubit, st.targets[k], prog.n_qubits);
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    Gate2 r;
    switch (g.kind) {
        case GateKind::Rx: r = {{c, cplx(0, -s), cplx(0, -s), c}}; break;
        case GateKind::Ry: r = {{c, -s, s, c}}; break;
        default: r = {{std::polar(1.0, -theta / 2), 0.0, 0.0, std::polar(1.0, theta / 2)}}; break;
    }
    return embed(r, st.qubit, prog.n_qubits);
}

/// sum_A P_A Phi_A(rho0) over every gate assignment A of the program's
/// positions. Each micro-search copy is its own position with the shared
/// distribution of its slot.
inline Mat enumerate_mixture(const Program& prog, const ProbTable& probs, std::span<const double> theta,
                             const Mat& rho0) {
    std::vector<const MixtureStep*> pos;
    for (const auto& st : prog.steps) {
        if (const auto* mix = std::get_if<MixtureStep>(&st)) pos.push_back(mix);
    }
    const std::size_t g = prog.gates.size();
    std::vector<std::size_t> a(pos.size(), 0);
    Mat total = Mat::Zero(rho0.rows(), rho0.cols());
    for (;;) {
        double pa = 1.0;
        for (std::size_t s = 0; s < pos.size(); ++s) pa *= probs.row(pos[s]->slot)[a[s]];
        Mat rho = rho0;
        std::size_t s = 0;
        for (const auto& st : prog.steps) {
            if (const auto* mix = std::get_if<MixtureStep>(&st)) {
                const Mat u = gate_matrix(prog, *mix, a[s++], theta[mix->theta]);
                rho = u * rho * u.adjoint();
            } else {
                rho = apply_noise_dense(rho, std::get<NoiseStep>(st).spec, prog.n_qubits);
            }
        }
        total += pa * rho;
        s = 0;
        while (s < pos.size() && ++a[s] == g) a[s++] = 0;
        if (s == pos.size()) break;
    }
    return total;
}

inline std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

inline DensityMatrix random_state(int n, Stream& rng) {
    PureState psi(n);
    for (std::size_t k = 0; k < psi.dim(); ++k) psi[k] = cplx(rng.normal(), rng.normal());
    psi.normalize();
    return pure_to_density(psi);
}

inline NoiseSpec random_noise(Stream& rng) {
    const auto k = static_cast<NoiseKind>(rng.below(5));
    return k == NoiseKind::None ? NoiseSpec{} : NoiseSpec(k, rng.uniform(0.0, 0.3));
}

inline CheckResult check_enumeration(std::uint64_t seed, int trials) {
    Stream rng(seed, "verify/enumeration");
    double worst = 0;
    for (int t = 0; t < trials; ++t) {
        const bool micro = t % 2 == 1;
        const std::size_t m = 1 + rng.below(2);
        Program prog;
        if (micro) {
            const SuperCircuitStructure c{3, {{0, 1}, {1, 2}}};
            prog = micro_program(c, 1, GateSet::standard(2), random_noise(rng));
        } else {
            const int n = 1 + static_cast<int>(rng.below(2));
            prog = macro_program(n, m, GateSet::standard(n), random_noise(rng));
        }
        Stream init(seed + static_cast<std::uint64_t>(t), "verify/params");
        const ArchLogits lg = init_logits(prog.layers, prog.width, prog.gates.size(), false, init);
        ArchLogits wide = lg;
        for (auto& v : wide.raw_alpha()) v = init.normal();
        const ThetaParams th = init_theta(prog.copies, prog.layers, prog.width, init);
        const DensityMatrix rho0 = random_state(prog.n_qubits, rng);
        const ProbTable probs = gate_probs(wide);
        const DensityMatrix out = forward(prog, probs, th.values, rho0);
        worst = std::max(worst, max_abs(enumerate_mixture(prog, probs, th.values, to_mat(rho0)), out));
    }
    return {"mixture enumeration", worst <= 1e-10, "max deviation " + sci(worst)};
}

inline CheckResult check_gradients(std::uint64_t seed, int trials) {
    Stream rng(seed, "verify/gradients");
    double worst = 0;
    for (int t = 0; t < trials; ++t) {
        const int n = 1 + static_cast<int>(rng.below(3));
        const std::size_t m = 1 + rng.below(3);
        const Program prog = macro_program(n, m, GateSet::standard(n), random_noise(rng));
        ArchLogits lg(m, static_cast<std::size_t>(n), prog.gates.size());
        for (auto& v : lg.raw_alpha()) v = rng.normal();
        ThetaParams th(1, m, static_cast<std::size_t>(n));
        for (auto& v : th.values) v = rng.uniform(-kPi, kPi);
        const DensityMatrix rho0 = random_state(n, rng);
        const DensityMatrix seed_m = random_state(n, rng);
        auto loss = [&](const ArchLogits& a, const std::vector<double>& tv) {
            const DensityMatrix out = forward(prog, gate_probs(a), tv, rho0);
            double l = 0;
            for (std::size_t k = 0; k < out.data().size(); ++k) {
                l += (std::conj(seed_m.data()[k]) * out.data()[k]).real();
            }
            return l;
        };
        auto [out, tape] = record_forward(prog, lg, th.values, rho0);
        const GradientBundle g = backward(tape, seed_m);
        const double h = 1e-4;
        auto compare = [&](double analytic, double numeric) {
            const double err = std::abs(analytic - numeric) / std::max(1e-8 / 1e-5, std::abs(numeric));
            worst = std::max(worst, err);
        };
        for (std::size_t i = 0; i < th.values.size(); ++i) {
            auto tp = th.values, tm = th.values;
            tp[i] += h;
            tm[i] -= h;
            compare(g.d_theta[i], (loss(lg, tp) - loss(lg, tm)) / (2 * h));
        }
        for (std::size_t i = 0; i < lg.parameter_count(); ++i) {
            ArchLogits ap = lg, am = lg;
            ap.parameter(i) += h;
            am.parameter(i) -= h;
            compare(g.d_arch[i], (loss(ap, th.values) - loss(am, th.values)) / (2 * h));
        }
    }
    return {"finite-difference gradients", worst <= 1e-5, "max relative error " + sci(worst)};
}

inline CheckResult check_cptp(std::uint64_t seed, int applications) {
    Stream rng(seed, "verify/cptp");
    const int n = 3;
    DensityMatrix rho = random_state(n, rng);
    for (int i = 0; i < applications; ++i) {
        switch (rng.below(4)) {
            case 0: rho.apply(rotation(static_cast<GateKind>(1 + rng.below(3)), rng.uniform(-kPi, kPi)),
                              static_cast<int>(rng.below(n))); break;
            case 1: {
                const int c = static_cast<int>(rng.below(n));
                rho.apply_cnot(c, (c + 1 + static_cast<int>(rng.below(n - 1))) % n);
                break;
            }
            case 2: rho.apply_noise(random_noise(rng)); break;
            default: {
                ProbTable p = softmax_rows(std::vector<double>{rng.normal(), rng.normal(), rng.normal(),
                                                               rng.normal(), rng.normal(), rng.normal()},
                                           1, 1, 6);
                const auto gs = GateSet::standard(n);
                const Program prog = macro_program(n, 1, gs);
                const auto& st = std::get<MixtureStep>(prog.steps[rng.below(n)]);
                std::vector<double> theta(prog.theta_count(), rng.uniform(-kPi, kPi));
                rho = apply_mixture_position(rho, gs, st, p.row(0), theta[st.theta]);
                break;
            }
        }
    }
    const Eigen::SelfAdjointEigenSolver<Mat> es(to_mat(rho));
    const double tr_err = std::abs(rho.trace().real() - 1.0);
    const double herm = rho.hermiticity_defect();
    const double min_ev = es.eigenvalues().minCoeff();
    DensityMatrix dep = random_state(n, rng);
    dep.apply_noise(NoiseSpec(NoiseKind::Depolarizing, 1.0));
    const double dep_err = max_abs(Mat::Identity(8, 8) / 8.0, dep);
    const bool ok = tr_err < 1e-9 && herm < 1e-9 && min_ev >= -1e-8 && dep_err <= 1e-12;
    return {"channel validity", ok,
            "trace error " + sci(tr_err) + ", hermiticity " + sci(herm) + ", min eigenvalue " +
                sci(min_ev) + ", depolarizing(1) error " + sci(dep_err)};
}

/// Run every check, print one PASS/FAIL line each, and report overall success.
inline bool run_suite(std::ostream& out, std::uint64_t seed = 0) {
    const std::vector<CheckResult> results = {check_enumeration(seed, 20), check_gradients(seed, 20),
                                              check_cptp(seed, 500)};
    bool all = true;
    for (const auto& r : results) {
        out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
        all = all && r.passed;
    }
    return all;
}

}  // namespace rhodarts::verify
