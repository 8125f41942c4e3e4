#pragma once

// Signed bipartite user-item graph and the sparse symmetric operators built
// on top of it.
//
// Node convention: users occupy unified indices [0, |U|), items occupy
// [|U|, |U| + |V|).

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "dfgnn/error.hpp"

namespace dfgnn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Sign : int { negative = -1, positive = 1 };

inline int to_int(Sign s) { return static_cast<int>(s); }

struct SignedEdge {
    std::size_t user = 0;
    std::size_t item = 0;
    Sign sign = Sign::positive;

    friend bool operator==(const SignedEdge&, const SignedEdge&) = default;
};

inline bool edge_order(const SignedEdge& a, const SignedEdge& b) {
    if (a.user != b.user) return a.user < b.user;
    return a.item < b.item;
}

struct SignedBipartiteGraph {
    std::size_t num_users = 0;
    std::size_t num_items = 0;
    std::vector<SignedEdge> pos_edges;
    std::vector<SignedEdge> neg_edges;

    std::size_t num_nodes() const { return num_users + num_items; }
    std::size_t item_node(std::size_t item) const { return num_users + item; }
    const std::vector<SignedEdge>& edges(Sign s) const {
        return s == Sign::positive ? pos_edges : neg_edges;
    }
};

/// Builds a graph from an unordered edge list. Exact duplicates collapse;
/// a pair carrying both signs is rejected.
inline SignedBipartiteGraph build_graph(std::size_t num_users, std::size_t num_items,
                                        std::vector<SignedEdge> edges) {
    for (const auto& e : edges) {
        if (e.user >= num_users || e.item >= num_items) {
            std::ostringstream msg;
            msg << "edge (" << e.user << "," << e.item << ") out of range for "
                << num_users << " users, " << num_items << " items";
            throw InputError(msg.str());
        }
        if (e.sign != Sign::positive && e.sign != Sign::negative)
            throw InputError("edge sign must be +1 or -1");
    }
    std::sort(edges.begin(), edges.end(), [](const SignedEdge& a, const SignedEdge& b) {
        if (edge_order(a, b)) return true;
        if (edge_order(b, a)) return false;
        return to_int(a.sign) < to_int(b.sign);
    });
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    SignedBipartiteGraph g;
    g.num_users = num_users;
    g.num_items = num_items;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (i > 0 && edges[i - 1].user == edges[i].user && edges[i - 1].item == edges[i].item) {
            std::ostringstream msg;
            msg << "conflicting signs for pair (" << edges[i].user << "," << edges[i].item << ")";
            throw InputError(msg.str());
        }
        (edges[i].sign == Sign::positive ? g.pos_edges : g.neg_edges).push_back(edges[i]);
    }
    return g;
}

/// Symmetric sparse matrix in compressed row form. Column indices are
/// sorted within each row.
class SparseSymMatrix {
public:
    SparseSymMatrix() : row_offsets_(1, 0) {}

    struct Triplet {
        std::size_t row;
        std::size_t col;
        double value;
    };

    /// Assembles from triplets; duplicates are summed, entries with
    /// |value| <= drop_tol are dropped. Throws if the result is not symmetric.
    static SparseSymMatrix from_triplets(std::size_t n, std::vector<Triplet> triplets,
                                         double drop_tol = 0.0) {
        for (const auto& t : triplets)
            if (t.row >= n || t.col >= n) throw InputError("triplet index out of range");
        std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        SparseSymMatrix m;
        m.n_ = n;
        m.row_offsets_.assign(n + 1, 0);
        std::size_t i = 0;
        while (i < triplets.size()) {
            std::size_t j = i;
            double v = 0.0;
            while (j < triplets.size() && triplets[j].row == triplets[i].row &&
                   triplets[j].col == triplets[i].col)
                v += triplets[j++].value;
            if (std::abs(v) > drop_tol) {
                m.cols_.push_back(triplets[i].col);
                m.values_.push_back(v);
                ++m.row_offsets_[triplets[i].row + 1];
            }
            i = j;
        }
        for (std::size_t r = 0; r < n; ++r) m.row_offsets_[r + 1] += m.row_offsets_[r];
        if (!m.is_symmetric(1e-12)) throw InputError("matrix is not symmetric");
        return m;
    }

    static SparseSymMatrix identity(std::size_t n) {
        std::vector<Triplet> t;
        t.reserve(n);
        for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
        return from_triplets(n, std::move(t));
    }

    std::size_t n() const { return n_; }
    std::size_t nnz() const { return values_.size(); }
    const std::vector<std::size_t>& row_offsets() const { return row_offsets_; }
    const std::vector<std::size_t>& column_indices() const { return cols_; }
    const std::vector<double>& values() const { return values_; }

    double at(std::size_t r, std::size_t c) const {
        auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[r]);
        auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[r + 1]);
        auto it = std::lower_bound(first, last, c);
        if (it == last || *it != c) return 0.0;
        return values_[static_cast<std::size_t>(it - cols_.begin())];
    }

    bool is_symmetric(double tol) const {
        for (std::size_t r = 0; r < n_; ++r)
            for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
                const std::size_t c = cols_[k];
                auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[c]);
                auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[c + 1]);
                auto it = std::lower_bound(first, last, r);
                if (it == last || *it != r) return false;
                if (std::abs(values_[static_cast<std::size_t>(it - cols_.begin())] - values_[k]) > tol)
                    return false;
            }
        return true;
    }

    Matrix to_dense() const {
        Matrix d = Matrix::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
        for (std::size_t r = 0; r < n_; ++r)
            for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
                d(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cols_[k])) = values_[k];
        return d;
    }

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> row_offsets_;
    std::vector<std::size_t> cols_;
    std::vector<double> values_;
};

/// N x N 0/1 adjacency holding only the edges of one sign, mirrored
/// user <-> item.
inline SparseSymMatrix sign_adjacency(const SignedBipartiteGraph& g, Sign sign) {
    std::vector<SparseSymMatrix::Triplet> t;
    const auto& edges = g.edges(sign);
    t.reserve(2 * edges.size());
    for (const auto& e : edges) {
        t.push_back({e.user, g.item_node(e.item), 1.0});
        t.push_back({g.item_node(e.item), e.user, 1.0});
    }
    return SparseSymMatrix::from_triplets(g.num_nodes(), std::move(t));
}

inline Vector degree_vector(const SparseSymMatrix& a) {
    Vector d = Vector::Zero(static_cast<Eigen::Index>(a.n()));
    const auto& off = a.row_offsets();
    for (std::size_t r = 0; r < a.n(); ++r)
        for (std::size_t k = off[r]; k < off[r + 1]; ++k) d[static_cast<Eigen::Index>(r)] += a.values()[k];
    return d;
}

namespace detail {

// D^{-1/2} with 0 for isolated nodes.
inline std::vector<double> inv_sqrt_degrees(const Vector& d) {
    std::vector<double> s(static_cast<std::size_t>(d.size()));
    for (Eigen::Index i = 0; i < d.size(); ++i) s[static_cast<std::size_t>(i)] = d[i] > 0.0 ? 1.0 / std::sqrt(d[i]) : 0.0;
    return s;
}

} // namespace detail

/// I - D^{-1/2} A D^{-1/2}. Isolated nodes keep a unit diagonal.
inline SparseSymMatrix normalized_laplacian(const SparseSymMatrix& a) {
    const auto s = detail::inv_sqrt_degrees(degree_vector(a));
    std::vector<SparseSymMatrix::Triplet> t;
    t.reserve(a.nnz() + a.n());
    for (std::size_t i = 0; i < a.n(); ++i) t.push_back({i, i, 1.0});
    const auto& off = a.row_offsets();
    for (std::size_t r = 0; r < a.n(); ++r)
        for (std::size_t k = off[r]; k < off[r + 1]; ++k) {
            const std::size_t c = a.column_indices()[k];
            t.push_back({r, c, -s[r] * a.values()[k] * s[c]});
        }
    return SparseSymMatrix::from_triplets(a.n(), std::move(t), 1e-15);
}

/// D~^{-1/2} (A + I) D~^{-1/2}, the GCN propagation matrix.
inline SparseSymMatrix augmented_propagation(const SparseSymMatrix& a) {
    Vector d = degree_vector(a);
    d.array() += 1.0;
    const auto s = detail::inv_sqrt_degrees(d);
    std::vector<SparseSymMatrix::Triplet> t;
    t.reserve(a.nnz() + a.n());
    for (std::size_t i = 0; i < a.n(); ++i) t.push_back({i, i, s[i] * s[i]});
    const auto& off = a.row_offsets();
    for (std::size_t r = 0; r < a.n(); ++r)
        for (std::size_t k = off[r]; k < off[r + 1]; ++k) {
            const std::size_t c = a.column_indices()[k];
            t.push_back({r, c, s[r] * a.values()[k] * s[c]});
        }
    return SparseSymMatrix::from_triplets(a.n(), std::move(t), 1e-15);
}

/// D^{-1/2} (D - A) D^{-1/2}; the high-pass filter operator applied to the
/// negative-feedback graph. Same matrix as normalized_laplacian.
inline SparseSymMatrix high_pass_operator(const SparseSymMatrix& a) {
    return normalized_laplacian(a);
}

/// Sparse-dense product M * X. Each output row is accumulated in column
/// order, so the result does not depend on `threads`.
inline Matrix spmm(const SparseSymMatrix& m, const Matrix& x, unsigned threads = 1) {
    if (static_cast<std::size_t>(x.rows()) != m.n()) {
        std::ostringstream msg;
        msg << "spmm dimension mismatch: matrix " << m.n() << " vs operand rows " << x.rows();
        throw InputError(msg.str());
    }
    Matrix out = Matrix::Zero(x.rows(), x.cols());
    const auto& off = m.row_offsets();
    const auto& cols = m.column_indices();
    const auto& vals = m.values();
    auto run = [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            auto row = out.row(static_cast<Eigen::Index>(r));
            for (std::size_t k = off[r]; k < off[r + 1]; ++k)
                row.noalias() += vals[k] * x.row(static_cast<Eigen::Index>(cols[k]));
        }
    };
    if (threads <= 1 || m.n() < 2 * static_cast<std::size_t>(threads)) {
        run(0, m.n());
        return out;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (m.n() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t b = t * chunk;
        const std::size_t e = std::min(m.n(), b + chunk);
        if (b < e) pool.emplace_back(run, b, e);
    }
    for (auto& th : pool) th.join();
    return out;
}

inline Vector spmv(const SparseSymMatrix& m, const Vector& x) {
    Matrix xm(x.size(), 1);
    xm.col(0) = x;
    return spmm(m, xm).col(0);
}

// Edge-list interchange: `user<TAB>item<TAB>sign`, sign in {+1,-1}; lines
// starting with '#' are ignored and a non-numeric first line is a header.

inline void write_edge_list(std::ostream& os, const std::vector<SignedEdge>& edges) {
    os << "user_id\titem_id\tsign\n";
    for (const auto& e : edges)
        os << e.user << '\t' << e.item << '\t' << (e.sign == Sign::positive ? "+1" : "-1") << '\n';
}

inline std::vector<SignedEdge> read_edge_list(std::istream& is) {
    std::vector<SignedEdge> edges;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        std::string u, v, s;
        if (!std::getline(fields, u, '\t') || !std::getline(fields, v, '\t') || !std::getline(fields, s, '\t')) {
            throw InputError("edge list line " + std::to_string(lineno) + ": expected 3 tab-separated fields");
        }
        if (lineno == 1 && !u.empty() && !std::isdigit(static_cast<unsigned char>(u[0]))) continue;
        SignedEdge e;
        try {
            std::size_t pos = 0;
            e.user = std::stoull(u, &pos);
            if (pos != u.size()) throw std::invalid_argument(u);
            e.item = std::stoull(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
        } catch (const std::exception&) {
            throw InputError("edge list line " + std::to_string(lineno) + ": bad index");
        }
        if (s == "+1" || s == "1") e.sign = Sign::positive;
        else if (s == "-1") e.sign = Sign::negative;
        else throw InputError("edge list line " + std::to_string(lineno) + ": sign must be +1 or -1");
        edges.push_back(e);
    }
    return edges;
}

} // namespace dfgnn
