#include <sstream>

#include <gtest/gtest.h>

#include "dfgnn/graph.hpp"
#include "dfgnn/spectral.hpp"
#include "oracles.hpp"

using namespace dfgnn;

namespace {

SignedBipartiteGraph k2(Sign s = Sign::positive) { return build_graph(1, 1, {{0, 0, s}}); }

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

} // namespace

TEST(BuildGraph, MinimalGraph) {
    const auto g = k2();
    EXPECT_EQ(g.pos_edges.size(), 1u);
    EXPECT_EQ(g.neg_edges.size(), 0u);
    EXPECT_EQ(g.num_nodes(), 2u);
}

TEST(BuildGraph, DuplicatesCollapse) {
    const auto g = build_graph(2, 2, {{0, 0, Sign::positive}, {0, 0, Sign::positive}});
    EXPECT_EQ(g.pos_edges.size(), 1u);
}

TEST(BuildGraph, ConflictingSignsRejected) {
    EXPECT_THROW(build_graph(2, 2, {{0, 0, Sign::positive}, {0, 0, Sign::negative}}), InputError);
}

TEST(BuildGraph, OutOfRangeRejected) {
    EXPECT_THROW(build_graph(1, 1, {{1, 0, Sign::positive}}), InputError);
    EXPECT_THROW(build_graph(1, 1, {{0, 1, Sign::negative}}), InputError);
}

TEST(BuildGraph, SortedUserMajor) {
    const auto g = build_graph(3, 3, {{2, 0, Sign::positive}, {0, 2, Sign::positive}, {0, 1, Sign::positive}, {1, 1, Sign::negative}});
    ASSERT_EQ(g.pos_edges.size(), 3u);
    EXPECT_EQ(g.pos_edges[0], (SignedEdge{0, 1, Sign::positive}));
    EXPECT_EQ(g.pos_edges[1], (SignedEdge{0, 2, Sign::positive}));
    EXPECT_EQ(g.pos_edges[2], (SignedEdge{2, 0, Sign::positive}));
}

TEST(SignAdjacency, K2) {
    const auto a = sign_adjacency(k2(), Sign::positive).to_dense();
    Eigen::MatrixXd expect(2, 2);
    expect << 0, 1, 1, 0;
    EXPECT_EQ(max_abs_diff(a, expect), 0.0);
}

TEST(SignAdjacency, EmptySign) {
    const auto a = sign_adjacency(k2(), Sign::negative);
    EXPECT_EQ(a.n(), 2u);
    EXPECT_EQ(a.nnz(), 0u);
}

TEST(SignAdjacency, IndexConvention) {
    const auto g = build_graph(2, 2, {{0, 0, Sign::positive}, {1, 1, Sign::positive}});
    const auto a = sign_adjacency(g, Sign::positive);
    EXPECT_EQ(a.nnz(), 4u);
    EXPECT_EQ(a.at(0, 2), 1.0);
    EXPECT_EQ(a.at(2, 0), 1.0);
    EXPECT_EQ(a.at(1, 3), 1.0);
    EXPECT_EQ(a.at(3, 1), 1.0);
}

TEST(SignAdjacency, SymmetricAndBipartite) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t nu = 1 + rng.index(10), ni = 1 + rng.index(10);
        const auto g = build_graph(nu, ni, oracle::random_edges(nu, ni, 0.4, 0.3, rng));
        for (Sign s : {Sign::positive, Sign::negative}) {
            const auto a = sign_adjacency(g, s);
            EXPECT_TRUE(a.is_symmetric(0.0));
            for (std::size_t r = 0; r < a.n(); ++r)
                for (std::size_t k = a.row_offsets()[r]; k < a.row_offsets()[r + 1]; ++k) {
                    const std::size_t c = a.column_indices()[k];
                    EXPECT_TRUE(std::min(r, c) < nu && std::max(r, c) >= nu);
                }
        }
    }
}

TEST(DegreeVector, Examples) {
    const auto d = degree_vector(sign_adjacency(k2(), Sign::positive));
    EXPECT_EQ(d[0], 1.0);
    EXPECT_EQ(d[1], 1.0);
    const auto z = degree_vector(sign_adjacency(k2(), Sign::negative));
    EXPECT_EQ(z[0], 0.0);
    EXPECT_EQ(z[1], 0.0);
    // star: user 0 linked to three items
    const auto star = build_graph(1, 3, {{0, 0, Sign::positive}, {0, 1, Sign::positive}, {0, 2, Sign::positive}});
    const auto ds = degree_vector(sign_adjacency(star, Sign::positive));
    EXPECT_EQ(ds[0], 3.0);
    for (int i = 1; i < 4; ++i) EXPECT_EQ(ds[i], 1.0);
}

TEST(NormalizedLaplacian, K2) {
    const auto l = normalized_laplacian(sign_adjacency(k2(), Sign::positive));
    Eigen::MatrixXd expect(2, 2);
    expect << 1, -1, -1, 1;
    EXPECT_LT(max_abs_diff(l.to_dense(), expect), 1e-15);
    const auto s = sym_eigendecompose(l);
    EXPECT_NEAR(s.eigenvalues[0], 0.0, 1e-12);
    EXPECT_NEAR(s.eigenvalues[1], 2.0, 1e-12);
}

TEST(NormalizedLaplacian, IsolatedNodesGiveIdentity) {
    const auto l = normalized_laplacian(sign_adjacency(k2(), Sign::negative));
    EXPECT_LT(max_abs_diff(l.to_dense(), Eigen::MatrixXd::Identity(2, 2)), 0.0 + 1e-300);
}

TEST(NormalizedLaplacian, MatchesDenseOracleAndSpectrumBound) {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const auto edges = oracle::random_edges(10, 10, 0.3, 0.0, rng);
        const auto g = build_graph(10, 10, edges);
        const auto l = normalized_laplacian(sign_adjacency(g, Sign::positive));
        const auto dense = oracle::dense_normalized_laplacian(oracle::dense_adjacency(10, 10, edges, Sign::positive));
        EXPECT_LT(max_abs_diff(l.to_dense(), dense), 1e-14);
        const auto [vals, vecs] = oracle::jacobi_eigen(dense);
        EXPECT_GE(vals.minCoeff(), -1e-9);
        EXPECT_LE(vals.maxCoeff(), 2.0 + 1e-9);
    }
}

TEST(HighPassOperator, EqualsNormalizedLaplacian) {
    Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const auto g = build_graph(7, 9, oracle::random_edges(7, 9, 0.35, 0.5, rng));
        for (Sign s : {Sign::positive, Sign::negative}) {
            const auto a = sign_adjacency(g, s);
            EXPECT_LE(max_abs_diff(high_pass_operator(a).to_dense(), normalized_laplacian(a).to_dense()), 1e-14);
        }
    }
}

TEST(HighPassOperator, K2Examples) {
    const auto h = high_pass_operator(sign_adjacency(k2(), Sign::positive));
    Vector x(2);
    x << 1, -1;
    const Vector y = spmv(h, x);
    EXPECT_NEAR(y[0], 2.0, 1e-15);
    EXPECT_NEAR(y[1], -2.0, 1e-15);
    x << 1, 1;
    EXPECT_LT(spmv(h, x).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(HighPassOperator, RegularGraphAnnihilatesConstants) {
    // complete bipartite K_{3,3}: every node has degree 3
    std::vector<SignedEdge> e;
    for (std::size_t u = 0; u < 3; ++u)
        for (std::size_t v = 0; v < 3; ++v) e.push_back({u, v, Sign::negative});
    const auto h = high_pass_operator(sign_adjacency(build_graph(3, 3, e), Sign::negative));
    EXPECT_LT(spmv(h, Vector::Constant(6, 2.5)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(AugmentedPropagation, K2AndIsolated) {
    const auto p = augmented_propagation(sign_adjacency(k2(), Sign::positive));
    Eigen::MatrixXd expect(2, 2);
    expect << 0.5, 0.5, 0.5, 0.5;
    EXPECT_LT(max_abs_diff(p.to_dense(), expect), 1e-15);
    const auto s = sym_eigendecompose(p);
    EXPECT_NEAR(s.eigenvalues[0], 0.0, 1e-12);
    EXPECT_NEAR(s.eigenvalues[1], 1.0, 1e-12);
    const auto iso = augmented_propagation(SparseSymMatrix::from_triplets(1, {}));
    EXPECT_EQ(iso.at(0, 0), 1.0);
}

TEST(AugmentedPropagation, LaplacianSpectrumBelowTwo) {
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const auto edges = oracle::random_edges(10, 10, 0.3, 0.0, rng);
        const auto g = build_graph(10, 10, edges);
        const auto p = augmented_propagation(sign_adjacency(g, Sign::positive));
        const auto dense = oracle::dense_augmented(oracle::dense_adjacency(10, 10, edges, Sign::positive));
        EXPECT_LT(max_abs_diff(p.to_dense(), dense), 1e-14);
        const Eigen::MatrixXd lt = Eigen::MatrixXd::Identity(20, 20) - dense;
        const auto [vals, vecs] = oracle::jacobi_eigen(lt);
        EXPECT_GE(vals.minCoeff(), -1e-9);
        EXPECT_LT(vals.maxCoeff(), 2.0);
    }
}

TEST(AugmentedPropagation, LowPassIdentityOnEigenpairs) {
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const auto g = build_graph(8, 8, oracle::random_edges(8, 8, 0.3, 0.0, rng));
        const auto p = augmented_propagation(sign_adjacency(g, Sign::positive));
        const Eigen::MatrixXd lt = Eigen::MatrixXd::Identity(16, 16) - Eigen::MatrixXd(p.to_dense());
        const auto s = sym_eigendecompose(lt);
        for (Eigen::Index i = 0; i < 16; ++i) {
            const Vector e = s.eigenvectors.col(i);
            EXPECT_LE((spmv(p, e) - (1.0 - s.eigenvalues[i]) * e).norm(), 1e-8);
        }
    }
}

TEST(Spmm, IdentityAndK2) {
    Matrix x(2, 1);
    x << 1, 2;
    EXPECT_EQ(max_abs_diff(spmm(SparseSymMatrix::identity(2), x), x), 0.0);
    const Matrix y = spmm(sign_adjacency(k2(), Sign::positive), x);
    EXPECT_EQ(y(0, 0), 2.0);
    EXPECT_EQ(y(1, 0), 1.0);
}

TEST(Spmm, DimensionMismatch) {
    EXPECT_THROW(spmm(SparseSymMatrix::identity(3), Matrix::Zero(2, 2)), InputError);
}

TEST(Spmm, MatchesDenseOracle) {
    Rng rng(99);
    for (std::size_t n : {1u, 5u, 17u, 50u, 64u}) {
        std::vector<SparseSymMatrix::Triplet> t;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j)
                if (rng.uniform() < 0.2) {
                    const double v = rng.uniform(-1, 1);
                    t.push_back({i, j, v});
                    if (i != j) t.push_back({j, i, v});
                }
        const auto m = SparseSymMatrix::from_triplets(n, t);
        Matrix x(static_cast<Eigen::Index>(n), 7);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1);
        const auto expect = oracle::dense_product(m.to_dense(), x);
        EXPECT_LT(max_abs_diff(spmm(m, x), expect), 1e-12);
    }
}

TEST(Spmm, BitIdenticalAcrossThreadCounts) {
    Rng rng(4);
    const auto g = build_graph(40, 40, oracle::random_edges(40, 40, 0.2, 0.0, rng));
    const auto p = augmented_propagation(sign_adjacency(g, Sign::positive));
    Matrix x(80, 16);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1);
    const Matrix one = spmm(p, x, 1);
    for (unsigned t : {2u, 3u, 8u}) EXPECT_TRUE(spmm(p, x, t) == one);
}

TEST(SparseSymMatrix, RejectsAsymmetric) {
    EXPECT_THROW(SparseSymMatrix::from_triplets(2, {{0, 1, 1.0}}), InputError);
}

TEST(EdgeList, RoundTripWithHeaderAndComments) {
    const std::vector<SignedEdge> edges{{0, 1, Sign::positive}, {2, 0, Sign::negative}};
    std::stringstream ss;
    write_edge_list(ss, edges);
    EXPECT_EQ(ss.str(), "user_id\titem_id\tsign\n0\t1\t+1\n2\t0\t-1\n");
    std::stringstream in("# comment\n" + ss.str().substr(ss.str().find('\n') + 1));
    EXPECT_EQ(read_edge_list(in), edges);
    std::stringstream with_header(ss.str());
    EXPECT_EQ(read_edge_list(with_header), edges);
}

TEST(EdgeList, BadSignRejected) {
    std::stringstream in("0\t0\t2\n");
    EXPECT_THROW(read_edge_list(in), InputError);
}
