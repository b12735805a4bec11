// state_init.hpp
// GHZ / W state preparation targets and the infidelity loss.

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "rhodarts/densmat.hpp"

namespace rhodarts {

enum class TargetKind { Ghz, W };

inline std::string to_string(TargetKind k) { return k == TargetKind::Ghz ? "ghz" : "w"; }

inline TargetKind parse_target_kind(const std::string& s) {
    if (s == "ghz") return TargetKind::Ghz;
    if (s == "w") return TargetKind::W;
    throw std::invalid_argument("unknown state target '" + s + "' (expected ghz or w)");
}

/// (|0...0> + |1...1>) / sqrt(2)
inline PureState ghz_state(int n) {
    if (n < 2) throw std::invalid_argument("GHZ state needs at least 2 qubits");
    PureState s(n);
    const double a = 1.0 / std::sqrt(2.0);
    s[0] = a;
    s[s.dim() - 1] = a;
    return s;
}

/// Equal superposition of the n basis states with a single 1 bit.
inline PureState w_state(int n) {
    if (n < 2) throw std::invalid_argument("W state needs at least 2 qubits");
    PureState s(n);
    s[0] = 0.0;
    const double a = 1.0 / std::sqrt(static_cast<double>(n));
    for (int q = 0; q < n; ++q) s[std::size_t{1} << q] = a;
    return s;
}

struct StateInitTask {
    TargetKind kind = TargetKind::Ghz;
    int n = 2;
    PureState target;

    StateInitTask(TargetKind k, int n_qubits)
        : kind(k), n(n_qubits), target(k == TargetKind::Ghz ? ghz_state(n_qubits) : w_state(n_qubits)) {}

    /// Default search depth m = 2n.
    std::size_t default_layers() const { return static_cast<std::size_t>(2 * n); }
};

/// 1 - <phi|rho|phi>
inline double state_init_loss(const DensityMatrix& rho, const PureState& target) {
    return 1.0 - fidelity(rho, target);
}

/// dL/drho for the infidelity loss: -|phi><phi|.
inline DensityMatrix state_init_seed(const PureState& target) {
    DensityMatrix seed = pure_to_density(target);
    seed *= -1.0;
    return seed;
}

}  // namespace rhodarts
