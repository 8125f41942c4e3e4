#pragma once

// Frequency analysis of feedback: fit a 1-D factorization to the signed
// interactions, then look at the fitted node signal through the spectra of
// the positive-only and negative-only subgraphs.

#include <vector>

#include "dfgnn/graph.hpp"
#include "dfgnn/mf.hpp"
#include "dfgnn/spectral.hpp"

namespace dfgnn {

/// Signed edges as MF targets: +1 for positive feedback, -1 for negative.
inline std::vector<Rating> sign_targets(const std::vector<SignedEdge>& edges) {
    std::vector<Rating> out;
    out.reserve(edges.size());
    for (const auto& e : edges) out.push_back({e.user, e.item, static_cast<double>(to_int(e.sign))});
    return out;
}

struct SubgraphSpectrum {
    FrequencyHistogram histogram;
    double mean_eigenvalue = 0.0;  // energy-weighted
    double max_eigenvalue = 0.0;
    bool empty_graph = false;
};

struct FrequencyAnalysis {
    Vector signal;
    MFModel mf;
    SubgraphSpectrum positive;
    SubgraphSpectrum negative;
};

inline SubgraphSpectrum subgraph_spectrum(const SignedBipartiteGraph& g, Sign sign, const Vector& x, std::size_t buckets) {
    SubgraphSpectrum out;
    out.empty_graph = g.edges(sign).empty();
    if (out.empty_graph) {
        out.histogram = frequency_histogram(sym_eigendecompose(Eigen::MatrixXd::Identity(1, 1)), Vector::Zero(1), buckets);
        return out;  // all-zero mass, zero_signal set
    }
    const auto spectrum = sym_eigendecompose(normalized_laplacian(sign_adjacency(g, sign)));
    out.histogram = frequency_histogram(spectrum, x, buckets);
    out.mean_eigenvalue = energy_weighted_mean_eigenvalue(spectrum, x);
    out.max_eigenvalue = spectrum.eigenvalues.maxCoeff();
    return out;
}

/// `mf_cfg.center` is forced on: the signal should separate above-average
/// from below-average feedback.
inline FrequencyAnalysis analyze_frequencies(const SignedBipartiteGraph& g, MFConfig mf_cfg, std::size_t buckets = 10) {
    if (g.num_nodes() > kMaxDenseEigenDim)
        throw InputError("graph has " + std::to_string(g.num_nodes()) + " nodes; the dense eigensolver is capped at " +
                         std::to_string(kMaxDenseEigenDim) + " (subsample users first)");
    std::vector<SignedEdge> edges = g.pos_edges;
    edges.insert(edges.end(), g.neg_edges.begin(), g.neg_edges.end());
    mf_cfg.center = true;
    FrequencyAnalysis a;
    a.mf = train_mf_1d(sign_targets(edges), g.num_users, g.num_items, mf_cfg);
    a.signal = node_signal(a.mf);
    a.positive = subgraph_spectrum(g, Sign::positive, a.signal, buckets);
    a.negative = subgraph_spectrum(g, Sign::negative, a.signal, buckets);
    return a;
}

} // namespace dfgnn
