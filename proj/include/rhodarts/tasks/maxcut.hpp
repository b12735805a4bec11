// maxcut.hpp
// Unweighted max-cut as diagonal-Hamiltonian optimization.

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rhodarts/densmat.hpp"
#include "rhodarts/rng.hpp"
#include "rhodarts/searchspace.hpp"

namespace rhodarts {

struct Graph {
    int n = 0;
    std::vector<std::pair<int, int>> edges;

    void validate() const {
        if (n < 2) throw std::invalid_argument("graph needs at least 2 vertices");
        for (const auto& [u, v] : edges) {
            if (u < 0 || v < 0 || u >= n || v >= n) throw std::out_of_range("edge endpoint outside the graph");
            if (u == v) throw std::invalid_argument("self-loop in max-cut graph");
        }
    }
};

/// h[k] = number of edges whose endpoints fall on different sides of partition k.
inline std::vector<double> maxcut_hamiltonian(const Graph& g) {
    g.validate();
    std::vector<double> h(dim_of(g.n), 0.0);
    for (std::size_t k = 0; k < h.size(); ++k) {
        int cut = 0;
        for (const auto& [u, v] : g.edges) cut += static_cast<int>(((k >> u) ^ (k >> v)) & 1U);
        h[k] = cut;
    }
    return h;
}

struct MaxCutTask {
    Graph graph;
    std::vector<double> h_diag;
    int true_max = 0;
    std::vector<std::size_t> optimal_states;

    explicit MaxCutTask(Graph g) : graph(std::move(g)), h_diag(maxcut_hamiltonian(graph)) {
        if (graph.edges.empty()) throw std::invalid_argument("max-cut graph has no edges");
        true_max = static_cast<int>(*std::max_element(h_diag.begin(), h_diag.end()));
        for (std::size_t k = 0; k < h_diag.size(); ++k) {
            if (static_cast<int>(h_diag[k]) == true_max) optimal_states.push_back(k);
        }
    }

    std::size_t edge_count() const { return graph.edges.size(); }
};

/// G(n, p): every unordered pair {i < j} included with probability p; edgeless draws are resampled.
inline MaxCutTask erdos_renyi(int n, double p_edge, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("Erdos-Renyi graph needs at least 2 vertices");
    if (!(p_edge > 0.0 && p_edge <= 1.0)) throw std::invalid_argument("edge probability must lie in (0, 1]");
    Stream rng(seed, "erdos_renyi");
    for (;;) {
        Graph g{n, {}};
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (rng.bernoulli(p_edge)) g.edges.emplace_back(i, j);
            }
        }
        if (!g.edges.empty()) return MaxCutTask(std::move(g));
    }
}

/// -<H_c> / |E|
inline double maxcut_loss(const DensityMatrix& rho, const MaxCutTask& task) {
    return -expectation_diag(rho, task.h_diag) / static_cast<double>(task.edge_count());
}

inline DensityMatrix maxcut_seed(const MaxCutTask& task) {
    DensityMatrix seed = DensityMatrix::zero(task.graph.n);
    const double scale = -1.0 / static_cast<double>(task.edge_count());
    for (std::size_t k = 0; k < task.h_diag.size(); ++k) seed(k, k) = scale * task.h_diag[k];
    return seed;
}

struct MaxCutMetrics {
    double e_m = 0;  // <H_c> / max(H_c)
    double p_m = 0;  // probability mass on optimal partitions
};

inline MaxCutMetrics metrics_from_probs(const std::vector<double>& probs, const MaxCutTask& task) {
    MaxCutMetrics m;
    double e = 0;
    for (std::size_t k = 0; k < probs.size(); ++k) e += probs[k] * task.h_diag[k];
    m.e_m = e / task.true_max;
    for (auto k : task.optimal_states) m.p_m += probs[k];
    return m;
}

inline MaxCutMetrics maxcut_metrics(const DensityMatrix& rho, const MaxCutTask& task) {
    return metrics_from_probs(measurement_probs(rho), task);
}

inline MaxCutMetrics maxcut_metrics(const PureState& psi, const MaxCutTask& task) {
    return metrics_from_probs(measurement_probs(psi), task);
}

/// Uniform superposition over all partitions.
inline PureState uniform_superposition(int n) {
    PureState s(n);
    const double a = 1.0 / std::sqrt(static_cast<double>(s.dim()));
    for (std::size_t k = 0; k < s.dim(); ++k) s[k] = a;
    return s;
}

/// One two-qubit subcircuit per edge, in edge-list order.
inline SuperCircuitStructure edges_to_supercircuit(const Graph& g) {
    if (g.edges.empty()) throw std::invalid_argument("graph has no edges");
    SuperCircuitStructure c{g.n, {}};
    for (const auto& [u, v] : g.edges) c.rows.push_back({u, v});
    return c;
}

/// Edge-list text: first line `n`, then one `u v` pair per line. '#' starts a comment.
inline Graph parse_graph(std::istream& in) {
    Graph g;
    std::string line;
    bool have_n = false;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        if (!have_n) {
            if (ls >> g.n) have_n = true;
            continue;
        }
        int u, v;
        if (ls >> u >> v) g.edges.emplace_back(u, v);
        else if (line.find_first_not_of(" \t\r") != std::string::npos) {
            throw std::invalid_argument("malformed edge line: '" + line + "'");
        }
    }
    if (!have_n) throw std::invalid_argument("graph file lacks the vertex-count header");
    g.validate();
    return g;
}

inline Graph read_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open graph file " + path);
    return parse_graph(in);
}

inline void write_graph(std::ostream& out, const Graph& g) {
    out << g.n << '\n';
    for (const auto& [u, v] : g.edges) out << u << ' ' << v << '\n';
}

}  // namespace rhodarts
