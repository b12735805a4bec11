// classify.hpp
// Binary image classification: IDX ingestion, PCA compression, angle and
// dense-angle encodings, and the binary cross-entropy loss on the probability
// of measuring qubit 0 as 1.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rhodarts/densmat.hpp"
#include "rhodarts/rng.hpp"

namespace rhodarts {

// ---------------------------------------------------------------------------
// IDX files
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxImages {
    std::uint32_t count = 0, rows = 0, cols = 0;
    std::vector<std::uint8_t> pixels;  // count * rows * cols
};

namespace detail {

inline std::uint32_t read_be32(std::istream& in) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw std::runtime_error("truncated IDX header");
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

inline void write_be32(std::ostream& out, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                                static_cast<char>(v)};
    out.write(b.data(), 4);
}

}  // namespace detail

inline IdxImages read_idx_images(std::istream& in) {
    IdxImages img;
    const std::uint32_t magic = detail::read_be32(in);
    if (magic != kIdxImagesMagic) throw std::runtime_error("not an IDX image file (bad magic)");
    img.count = detail::read_be32(in);
    img.rows = detail::read_be32(in);
    img.cols = detail::read_be32(in);
    img.pixels.resize(std::size_t{img.count} * img.rows * img.cols);
    if (!in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()))) {
        throw std::runtime_error("truncated IDX image payload");
    }
    return img;
}

inline std::vector<std::uint8_t> read_idx_labels(std::istream& in) {
    const std::uint32_t magic = detail::read_be32(in);
    if (magic != kIdxLabelsMagic) throw std::runtime_error("not an IDX label file (bad magic)");
    std::vector<std::uint8_t> labels(detail::read_be32(in));
    if (!in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(labels.size()))) {
        throw std::runtime_error("truncated IDX label payload");
    }
    return labels;
}

inline void write_idx_images(std::ostream& out, const IdxImages& img) {
    detail::write_be32(out, kIdxImagesMagic);
    detail::write_be32(out, img.count);
    detail::write_be32(out, img.rows);
    detail::write_be32(out, img.cols);
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
}

inline void write_idx_labels(std::ostream& out, const std::vector<std::uint8_t>& labels) {
    detail::write_be32(out, kIdxLabelsMagic);
    detail::write_be32(out, static_cast<std::uint32_t>(labels.size()));
    out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct Dataset {
    std::size_t dim = 0;
    std::vector<double> x;  // row-major, size() x dim
    std::vector<int> y;

    std::size_t size() const { return y.size(); }
    std::span<const double> row(std::size_t i) const { return {x.data() + i * dim, dim}; }
};

/// Load an MNIST split ("train" or "t10k") from `dir`, keeping digits 0 and 1
/// and scaling pixels to [0, 1].
inline Dataset load_mnist_binary(const std::filesystem::path& dir, const std::string& split) {
    std::ifstream fi(dir / (split + "-images-idx3-ubyte"), std::ios::binary);
    std::ifstream fl(dir / (split + "-labels-idx1-ubyte"), std::ios::binary);
    if (!fi || !fl) throw std::runtime_error("MNIST " + split + " files not found in " + dir.string());
    const IdxImages img = read_idx_images(fi);
    const auto labels = read_idx_labels(fl);
    if (labels.size() != img.count) throw std::runtime_error("MNIST image/label counts differ");
    Dataset d;
    d.dim = std::size_t{img.rows} * img.cols;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] > 1) continue;
        d.y.push_back(labels[i]);
        for (std::size_t p = 0; p < d.dim; ++p) d.x.push_back(img.pixels[i * d.dim + p] / 255.0);
    }
    return d;
}

/// Two isotropic Gaussian classes in [0,1]^dim with means 0.5 -/+ 0.15 s,
/// s a fixed random sign pattern, per-pixel noise 0.1, clamped to [0, 1].
/// Labels alternate 0, 1, 0, ...
inline Dataset synthetic_two_gaussian(std::size_t count, std::uint64_t seed, std::size_t dim = 784,
                                      const std::string& split = "train") {
    Stream pattern_rng(seed, "synthetic/pattern");
    std::vector<double> s(dim);
    for (auto& v : s) v = pattern_rng.bernoulli(0.5) ? 1.0 : -1.0;
    Stream rng(seed, "synthetic/" + split);
    Dataset d;
    d.dim = dim;
    d.x.reserve(count * dim);
    for (std::size_t i = 0; i < count; ++i) {
        const int label = static_cast<int>(i % 2);
        const double sign = label == 1 ? 1.0 : -1.0;
        for (std::size_t p = 0; p < dim; ++p) {
            d.x.push_back(std::clamp(0.5 + 0.15 * sign * s[p] + 0.1 * rng.normal(), 0.0, 1.0));
        }
        d.y.push_back(label);
    }
    return d;
}

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

struct PcaModel {
    std::size_t in_dim = 0, out_dim = 0;
    std::vector<double> mean;                // in_dim
    std::vector<double> components;         // out_dim x in_dim, row-major
    std::vector<double> explained_variance;  // out_dim
    double total_variance = 0;

    double explained_ratio() const {
        return std::accumulate(explained_variance.begin(), explained_variance.end(), 0.0) / total_variance;
    }

    std::vector<double> transform(std::span<const double> v) const {
        std::vector<double> out(out_dim, 0.0);
        for (std::size_t c = 0; c < out_dim; ++c) {
            double acc = 0;
            for (std::size_t p = 0; p < in_dim; ++p) acc += components[c * in_dim + p] * (v[p] - mean[p]);
            out[c] = acc;
        }
        return out;
    }

    Dataset transform(const Dataset& d) const {
        Dataset out;
        out.dim = out_dim;
        out.y = d.y;
        out.x.reserve(d.size() * out_dim);
        for (std::size_t i = 0; i < d.size(); ++i) {
            const auto r = transform(d.row(i));
            out.x.insert(out.x.end(), r.begin(), r.end());
        }
        return out;
    }
};

/// Principal components of the pooled rows of `parts`, by descending variance
/// (ties by component index); each component's largest-magnitude loading is positive.
inline PcaModel pca_fit(std::span<const Dataset* const> parts, std::size_t out_dim) {
    if (parts.empty()) throw std::invalid_argument("PCA needs data");
    const std::size_t dim = parts.front()->dim;
    std::size_t rows = 0;
    for (const auto* p : parts) {
        if (p->dim != dim) throw std::invalid_argument("PCA inputs differ in dimension");
        rows += p->size();
    }
    if (out_dim == 0 || out_dim > dim) throw std::invalid_argument("PCA output dimension out of range");
    if (rows < 2) throw std::invalid_argument("PCA needs at least two samples");

    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
    Eigen::Index r = 0;
    for (const auto* p : parts) {
        for (std::size_t i = 0; i < p->size(); ++i, ++r) {
            for (std::size_t c = 0; c < dim; ++c) x(r, static_cast<Eigen::Index>(c)) = p->x[i * dim + c];
        }
    }
    const Eigen::RowVectorXd mu = x.colwise().mean();
    x.rowwise() -= mu;
    const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(rows - 1);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw std::runtime_error("PCA eigendecomposition failed");

    std::vector<std::size_t> order(dim);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto& ev = es.eigenvalues();
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return ev(static_cast<Eigen::Index>(a)) > ev(static_cast<Eigen::Index>(b));
    });

    PcaModel m;
    m.in_dim = dim;
    m.out_dim = out_dim;
    m.mean.assign(mu.data(), mu.data() + dim);
    m.total_variance = cov.trace();
    m.components.resize(out_dim * dim);
    for (std::size_t c = 0; c < out_dim; ++c) {
        const auto col = static_cast<Eigen::Index>(order[c]);
        Eigen::VectorXd v = es.eigenvectors().col(col);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        for (std::size_t p = 0; p < dim; ++p) m.components[c * dim + p] = v(static_cast<Eigen::Index>(p));
        m.explained_variance.push_back(std::max(0.0, ev(col)));
    }
    return m;
}

struct PcaResult {
    PcaModel model;
    Dataset reduced;
};

inline PcaResult pca_fit_transform(const Dataset& data, std::size_t out_dim) {
    const Dataset* parts[] = {&data};
    PcaResult r{pca_fit(parts, out_dim), {}};
    r.reduced = r.model.transform(data);
    return r;
}

// ---------------------------------------------------------------------------
// Encodings
// ---------------------------------------------------------------------------

enum class Encoding { Angle, DenseAngle };

inline std::string to_string(Encoding e) { return e == Encoding::Angle ? "angle" : "dense"; }

inline Encoding parse_encoding(const std::string& s) {
    if (s == "angle") return Encoding::Angle;
    if (s == "dense") return Encoding::DenseAngle;
    throw std::invalid_argument("unknown encoding '" + s + "' (expected angle or dense)");
}

namespace detail {

inline PureState product_state(const std::vector<std::array<cplx, 2>>& qubits) {
    const int n = static_cast<int>(qubits.size());
    PureState s(n);
    for (std::size_t k = 0; k < s.dim(); ++k) {
        cplx a = 1.0;
        for (int q = 0; q < n; ++q) a *= qubits[static_cast<std::size_t>(q)][(k >> q) & 1U];
        s[k] = a;
    }
    return s;
}

}  // namespace detail

/// prod_i Ry(x_i / 2)|0>, one qubit per feature.
inline PureState encode_angle(std::span<const double> x) {
    if (x.empty()) throw std::invalid_argument("angle encoding needs at least one feature");
    std::vector<std::array<cplx, 2>> q(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) q[i] = {std::cos(x[i] / 4), std::sin(x[i] / 4)};
    return detail::product_state(q);
}

/// prod_i Ry(x_{i+n} / 2) Rx(x_i / 2)|0>, two features per qubit.
inline PureState encode_dense(std::span<const double> x) {
    if (x.empty() || x.size() % 2 != 0) throw std::invalid_argument("dense encoding needs an even feature count");
    const std::size_t n = x.size() / 2;
    std::vector<std::array<cplx, 2>> q(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Gate2 g = gates::ry(x[i + n] / 2) * gates::rx(x[i] / 2);
        q[i] = {g.u[0], g.u[2]};
    }
    return detail::product_state(q);
}

inline PureState encode(std::span<const double> x, Encoding e) {
    return e == Encoding::Angle ? encode_angle(x) : encode_dense(x);
}

inline std::size_t features_per_qubit(Encoding e) { return e == Encoding::Angle ? 1 : 2; }

// ---------------------------------------------------------------------------
// Predictions and loss
// ---------------------------------------------------------------------------

inline constexpr double kProbClamp = 1e-12;

/// Probability of measuring qubit 0 as 1: sum of odd diagonal entries.
inline double predict(const DensityMatrix& rho) {
    double p = 0;
    for (std::size_t k = 1; k < rho.dim(); k += 2) p += rho(k, k).real();
    return p;
}

inline double predict(const PureState& psi) {
    double p = 0;
    for (std::size_t k = 1; k < psi.dim(); k += 2) p += std::norm(psi[k]);
    return p;
}

/// Observable whose expectation is predict(): the projector onto qubit 0 = 1.
inline DensityMatrix prediction_observable(int n_qubits) {
    DensityMatrix o = DensityMatrix::zero(n_qubits);
    for (std::size_t k = 1; k < o.dim(); k += 2) o(k, k) = 1.0;
    return o;
}

inline double bce_loss(std::span<const double> p, std::span<const int> y) {
    if (p.size() != y.size() || p.empty()) throw std::invalid_argument("prediction/label size mismatch");
    double acc = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pc = std::clamp(p[i], kProbClamp, 1.0 - kProbClamp);
        acc += y[i] ? std::log(pc) : std::log(1.0 - pc);
    }
    return -acc / static_cast<double>(p.size());
}

/// dL/dp_i; zero where the clamp is active.
inline std::vector<double> bce_grad(std::span<const double> p, std::span<const int> y) {
    std::vector<double> g(p.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < kProbClamp || p[i] > 1.0 - kProbClamp) continue;
        g[i] = y[i] ? -inv_n / p[i] : inv_n / (1.0 - p[i]);
    }
    return g;
}

/// Encoded train/test sets ready for search.
struct ClassifyTask {
    int n_qubits = 8;
    Encoding encoding = Encoding::Angle;
    std::vector<PureState> train_states, test_states;
    std::vector<int> train_labels, test_labels;
    double explained_variance_ratio = 0;
};

/// PCA fit on the union of both splits, then encode each split.
inline ClassifyTask make_classify_task(const Dataset& train, const Dataset& test, int n_qubits, Encoding enc) {
    const std::size_t out_dim = static_cast<std::size_t>(n_qubits) * features_per_qubit(enc);
    const Dataset* parts[] = {&train, &test};
    const PcaModel pca = pca_fit(parts, out_dim);
    ClassifyTask t;
    t.n_qubits = n_qubits;
    t.encoding = enc;
    t.explained_variance_ratio = pca.explained_ratio();
    for (std::size_t i = 0; i < train.size(); ++i) t.train_states.push_back(encode(pca.transform(train.row(i)), enc));
    for (std::size_t i = 0; i < test.size(); ++i) t.test_states.push_back(encode(pca.transform(test.row(i)), enc));
    t.train_labels = train.y;
    t.test_labels = test.y;
    return t;
}

}  // namespace rhodarts
