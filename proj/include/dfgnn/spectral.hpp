#pragma once

// Graph Fourier analysis: eigendecomposition of symmetric graph operators,
// forward/inverse transforms, bucketed frequency histograms, and the
// frequency responses of stacked low-pass and high-pass filters.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "dfgnn/graph.hpp"

namespace dfgnn {

/// Eigenvalues ascending, eigenvectors as orthonormal columns.
struct Spectrum {
    Vector eigenvalues;
    Eigen::MatrixXd eigenvectors;

    std::size_t size() const { return static_cast<std::size_t>(eigenvalues.size()); }
};

inline constexpr std::size_t kMaxDenseEigenDim = 3000;

inline Spectrum sym_eigendecompose(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw InputError("eigendecomposition needs a square matrix");
    const double scale = std::max(1.0, m.norm());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw InputError("eigendecomposition needs a symmetric matrix");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    if (solver.info() != Eigen::Success) throw NumericError("symmetric eigensolver did not converge");
    Spectrum s{solver.eigenvalues(), solver.eigenvectors()};
    for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i)
        if (s.eigenvalues[i] < 0.0 && s.eigenvalues[i] > -1e-10) s.eigenvalues[i] = 0.0;
    return s;
}

inline Spectrum sym_eigendecompose(const SparseSymMatrix& m) {
    if (m.n() > kMaxDenseEigenDim)
        throw InputError("graph has " + std::to_string(m.n()) + " nodes; dense eigensolver cap is " +
                         std::to_string(kMaxDenseEigenDim) + " (subsample the graph)");
    return sym_eigendecompose(Eigen::MatrixXd(m.to_dense()));
}

/// Coefficients f(lambda_l) = sum_i x(i) e_l(i), i.e. E^T x.
inline Vector graph_fourier_transform(const Spectrum& s, const Vector& x) {
    if (static_cast<std::size_t>(x.size()) != s.size()) throw InputError("signal length does not match spectrum");
    return s.eigenvectors.transpose() * x;
}

inline Vector inverse_graph_fourier_transform(const Spectrum& s, const Vector& coeffs) {
    if (static_cast<std::size_t>(coeffs.size()) != s.size()) throw InputError("coefficient length does not match spectrum");
    return s.eigenvectors * coeffs;
}

enum class SpectralWeight { energy, amplitude };

struct FrequencyHistogram {
    std::vector<double> bucket_edges;  // buckets + 1 uniform edges over [0, 2]
    std::vector<double> mass;          // sums to 1 unless zero_signal
    bool zero_signal = false;

    /// Mass-weighted mean of the bucket centres.
    double mean_bucket_center() const {
        double m = 0.0;
        for (std::size_t b = 0; b < mass.size(); ++b) m += mass[b] * 0.5 * (bucket_edges[b] + bucket_edges[b + 1]);
        return m;
    }
};

/// Buckets the spectral energy f(lambda)^2 (or |f(lambda)|) of x over
/// [0, 2]; the last bucket is closed. Eigenvalues above 2 fall into it.
inline FrequencyHistogram frequency_histogram(const Spectrum& s, const Vector& x, std::size_t buckets = 10,
                                              SpectralWeight weight = SpectralWeight::energy) {
    if (buckets == 0) throw InputError("histogram needs at least one bucket");
    FrequencyHistogram h;
    h.bucket_edges.resize(buckets + 1);
    for (std::size_t b = 0; b <= buckets; ++b) h.bucket_edges[b] = 2.0 * static_cast<double>(b) / static_cast<double>(buckets);
    h.mass.assign(buckets, 0.0);
    const Vector f = graph_fourier_transform(s, x);
    double total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double c = f[static_cast<Eigen::Index>(i)];
        const double w = weight == SpectralWeight::energy ? c * c : std::abs(c);
        const double lambda = s.eigenvalues[static_cast<Eigen::Index>(i)];
        auto b = static_cast<std::ptrdiff_t>(std::floor(lambda / 2.0 * static_cast<double>(buckets)));
        b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(buckets) - 1);
        h.mass[static_cast<std::size_t>(b)] += w;
        total += w;
    }
    if (total <= 0.0) {
        h.zero_signal = true;
        std::fill(h.mass.begin(), h.mass.end(), 0.0);
        return h;
    }
    for (double& m : h.mass) m /= total;
    return h;
}

/// Spectral-energy-weighted mean eigenvalue of x: sum lambda_i f_i^2 / sum f_i^2.
inline double energy_weighted_mean_eigenvalue(const Spectrum& s, const Vector& x) {
    const Vector f = graph_fourier_transform(s, x);
    const double total = f.squaredNorm();
    if (total <= 0.0) return 0.0;
    return f.cwiseAbs2().dot(s.eigenvalues) / total;
}

/// Kernel of K stacked GCN layers: (1 - lambda)^K.
inline double lgf_kernel_response(double lambda, int layers) { return std::pow(1.0 - lambda, layers); }

/// Kernel of K stacked high-pass layers: lambda^K.
inline double hgf_kernel_response(double lambda, int layers) { return std::pow(lambda, layers); }

/// Dirichlet energy: sum over undirected edges of A_ij (x_i - x_j)^2.
inline double smoothness(const SparseSymMatrix& a, const Vector& x) {
    if (static_cast<std::size_t>(x.size()) != a.n()) throw InputError("signal length does not match graph");
    double e = 0.0;
    const auto& off = a.row_offsets();
    for (std::size_t r = 0; r < a.n(); ++r)
        for (std::size_t k = off[r]; k < off[r + 1]; ++k) {
            const std::size_t c = a.column_indices()[k];
            if (c <= r) continue;
            const double d = x[static_cast<Eigen::Index>(r)] - x[static_cast<Eigen::Index>(c)];
            e += a.values()[k] * d * d;
        }
    return e;
}

} // namespace dfgnn
