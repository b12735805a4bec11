// export.hpp
// Architecture records (JSON) and OpenQASM 2.0 rendering of discrete circuits.

#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rhodarts/searchspace.hpp"

namespace rhodarts {

/// A discretized search result, independent of how it was found.
struct ArchitectureRecord {
    std::string mode = "macro";  // macro | micro
    int n_qubits = 0;
    std::size_t layers = 0;
    std::size_t width = 0;  // n for macro, n_s for micro
    std::vector<GateId> gateset;
    ArchitectureMatrix arch;
    std::vector<double> theta;
    std::optional<SuperCircuitStructure> structure;

    /// Program skeleton that reproduces the record's circuit (noise not included).
    Program program(const NoiseSpec& noise = {}) const {
        const GateSet gs(gateset);
        if (mode == "micro") {
            if (!structure) throw std::invalid_argument("micro record lacks its super-circuit structure");
            return micro_program(*structure, layers, gs, noise);
        }
        return macro_program(n_qubits, layers, gs, noise);
    }
};

inline ArchitectureRecord make_record(const Program& prog, const ArchitectureMatrix& arch,
                                      std::span<const double> theta,
                                      const std::optional<SuperCircuitStructure>& structure = std::nullopt) {
    ArchitectureRecord r;
    r.mode = structure ? "micro" : "macro";
    r.n_qubits = prog.n_qubits;
    r.layers = prog.layers;
    r.width = prog.width;
    r.gateset = prog.gates.entries();
    r.arch = arch;
    r.theta.assign(theta.begin(), theta.end());
    r.structure = structure;
    return r;
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline nlohmann::ordered_json to_json(const ArchitectureRecord& r) {
    nlohmann::ordered_json j;
    j["mode"] = r.mode;
    j["n"] = r.n_qubits;
    j["m"] = r.layers;
    if (r.mode == "micro") j["n_s"] = r.width;
    std::vector<std::string> gs;
    for (const auto& g : r.gateset) gs.push_back(to_string(g));
    j["gateset"] = gs;
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < r.arch.layers; ++i) {
        std::vector<std::string> row;
        for (std::size_t w = 0; w < r.arch.width; ++w) {
            row.push_back(to_string(r.gateset[static_cast<std::size_t>(r.arch.a[i * r.arch.width + w])]));
        }
        a.push_back(row);
    }
    j["A"] = a;
    j["theta"] = r.theta;
    if (r.structure) j["structure"] = r.structure->rows;
    return j;
}

inline ArchitectureRecord record_from_json(const nlohmann::json& j) {
    ArchitectureRecord r;
    r.mode = j.at("mode").get<std::string>();
    if (r.mode != "macro" && r.mode != "micro") throw std::invalid_argument("unknown architecture mode " + r.mode);
    r.n_qubits = j.at("n").get<int>();
    r.layers = j.at("m").get<std::size_t>();
    r.width = r.mode == "micro" ? j.at("n_s").get<std::size_t>() : static_cast<std::size_t>(r.n_qubits);
    for (const auto& s : j.at("gateset")) r.gateset.push_back(parse_gate_id(s.get<std::string>()));
    r.arch.layers = r.layers;
    r.arch.width = r.width;
    const auto& a = j.at("A");
    if (a.size() != r.layers) throw std::invalid_argument("architecture matrix has the wrong number of layers");
    for (const auto& row : a) {
        if (row.size() != r.width) throw std::invalid_argument("architecture row has the wrong width");
        for (const auto& cell : row) {
            const GateId g = parse_gate_id(cell.get<std::string>());
            const auto it = std::find(r.gateset.begin(), r.gateset.end(), g);
            if (it == r.gateset.end()) throw std::invalid_argument("architecture uses a gate outside its gate set");
            r.arch.a.push_back(static_cast<int>(it - r.gateset.begin()));
        }
    }
    r.theta = j.at("theta").get<std::vector<double>>();
    if (j.contains("structure")) {
        r.structure = SuperCircuitStructure{r.n_qubits, j.at("structure").get<std::vector<std::vector<int>>>()};
    }
    if (r.mode == "micro" && !r.structure) throw std::invalid_argument("micro record lacks its structure");
    const Program prog = r.program();
    if (r.theta.size() != prog.theta_count()) throw std::invalid_argument("angle vector does not match the record");
    return r;
}

inline void write_record(const std::string& path, const ArchitectureRecord& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << to_json(r).dump(2) << '\n';
}

inline ArchitectureRecord read_record(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return record_from_json(nlohmann::json::parse(in));
}

/// OpenQASM 2.0 text. Rotations become u3 gates (equal up to global phase),
/// CNOTs become cx, identities are dropped.
inline std::string to_qasm(const ArchitectureRecord& r) {
    const Program prog = r.program();
    std::ostringstream out;
    out << "OPENQASM 2.0;\n"
        << "include \"qelib1.inc\";\n"
        << "qreg q[" << r.n_qubits << "];\n";
    for (const auto& op : circuit_ops(prog, r.arch, r.theta)) {
        const std::string t = format_double(op.theta);
        switch (op.kind) {
            case GateKind::I: break;
            case GateKind::Rx: out << "u3(" << t << ",-pi/2,pi/2) q[" << op.qubit << "];\n"; break;
            case GateKind::Ry: out << "u3(" << t << ",0,0) q[" << op.qubit << "];\n"; break;
            case GateKind::Rz: out << "u3(0,0," << t << ") q[" << op.qubit << "];\n"; break;
            case GateKind::Cnot: out << "cx q[" << op.qubit << "],q[" << op.target << "];\n"; break;
        }
    }
    return out.str();
}

}  // namespace rhodarts
