// gateset.hpp
// Candidate gate set {I, Rx, Ry, Rz, CNOT(+d)} for one grid position.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "rhodarts/densmat.hpp"

namespace rhodarts {

enum class GateKind { I, Rx, Ry, Rz, Cnot };

/// A candidate gate. CNOT entries use the position's qubit as control and
/// target the qubit `offset` places further along (mod the register width).
struct GateId {
    GateKind kind = GateKind::I;
    int offset = 0;

    bool parameterized() const {
        return kind == GateKind::Rx || kind == GateKind::Ry || kind == GateKind::Rz;
    }
    bool operator==(const GateId&) const = default;
};

inline std::string to_string(const GateId& g) {
    switch (g.kind) {
        case GateKind::I: return "I";
        case GateKind::Rx: return "Rx";
        case GateKind::Ry: return "Ry";
        case GateKind::Rz: return "Rz";
        case GateKind::Cnot: return "CNOT+" + std::to_string(g.offset);
    }
    return "?";
}

inline GateId parse_gate_id(const std::string& s) {
    if (s == "I") return {GateKind::I, 0};
    if (s == "Rx") return {GateKind::Rx, 0};
    if (s == "Ry") return {GateKind::Ry, 0};
    if (s == "Rz") return {GateKind::Rz, 0};
    if (s.rfind("CNOT+", 0) == 0) {
        const int d = std::stoi(s.substr(5));
        if (d < 1) throw std::invalid_argument("CNOT offset must be positive: " + s);
        return {GateKind::Cnot, d};
    }
    throw std::invalid_argument("unknown gate '" + s + "'");
}

/// Rotation matrix of a parameterized gate kind.
inline Gate2 rotation(GateKind kind, double theta) {
    switch (kind) {
        case GateKind::Rx: return gates::rx(theta);
        case GateKind::Ry: return gates::ry(theta);
        case GateKind::Rz: return gates::rz(theta);
        default: return gates::identity();
    }
}

/// Pauli generator of a rotation: R(theta) = exp(-i theta P / 2).
inline Gate2 generator(GateKind kind) {
    switch (kind) {
        case GateKind::Rx: return gates::x();
        case GateKind::Ry: return gates::y();
        case GateKind::Rz: return gates::z();
        default: throw std::invalid_argument("gate has no generator");
    }
}

class GateSet {
public:
    GateSet() = default;
    explicit GateSet(std::vector<GateId> entries) : entries_(std::move(entries)) {
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            for (std::size_t j = i + 1; j < entries_.size(); ++j) {
                if (entries_[i] == entries_[j]) throw std::invalid_argument("duplicate gate in gate set");
            }
        }
    }

    /// I, Rx, Ry, Rz followed by one CNOT per target offset 1..width-1.
    static GateSet standard(int width) {
        if (width < 1) throw std::invalid_argument("gate set width must be >= 1");
        std::vector<GateId> g{{GateKind::I, 0}, {GateKind::Rx, 0}, {GateKind::Ry, 0}, {GateKind::Rz, 0}};
        for (int d = 1; d < width; ++d) g.push_back({GateKind::Cnot, d});
        return GateSet(std::move(g));
    }

    std::size_t size() const { return entries_.size(); }
    const GateId& operator[](std::size_t k) const { return entries_.at(k); }
    const std::vector<GateId>& entries() const { return entries_; }

    /// Largest CNOT offset present (0 when there is none).
    int max_offset() const {
        int d = 0;
        for (const auto& g : entries_) {
            if (g.kind == GateKind::Cnot) d = std::max(d, g.offset);
        }
        return d;
    }

private:
    std::vector<GateId> entries_;
};

}  // namespace rhodarts
