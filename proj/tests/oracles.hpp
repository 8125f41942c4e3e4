#pragma once

// Independent reference implementations used only by the tests. None of
// these call into the library's numeric code.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dfgnn/graph.hpp"
#include "dfgnn/ingest.hpp"
#include "dfgnn/rng.hpp"

namespace oracle {

using Dense = Eigen::MatrixXd;

/// Cyclic Jacobi rotations; eigenvalues ascending with matching columns.
inline std::pair<Eigen::VectorXd, Dense> jacobi_eigen(Dense a, int max_sweeps = 100) {
    const Eigen::Index n = a.rows();
    Dense v = Dense::Identity(n, n);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30) break;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) < a(y, y); });
    Eigen::VectorXd vals(n);
    Dense vecs(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        vals[i] = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
        vecs.col(i) = v.col(order[static_cast<std::size_t>(i)]);
    }
    return {vals, vecs};
}

/// Coefficients c_0..c_n of det(xI - A) = sum c_k x^k, via Faddeev-LeVerrier.
inline std::vector<double> characteristic_polynomial(const Dense& a) {
    const Eigen::Index n = a.rows();
    std::vector<double> c(static_cast<std::size_t>(n) + 1, 0.0);
    c[static_cast<std::size_t>(n)] = 1.0;
    Dense m = Dense::Zero(n, n);
    for (Eigen::Index k = 1; k <= n; ++k) {
        m = a * m + c[static_cast<std::size_t>(n - k + 1)] * Dense::Identity(n, n);
        c[static_cast<std::size_t>(n - k)] = -(a * m).trace() / static_cast<double>(k);
    }
    return c;
}

inline double poly_eval(const std::vector<double>& c, double x) {
    double r = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * x + *it;
    return r;
}

/// Real roots of the characteristic polynomial of a symmetric matrix with
/// well-separated eigenvalues: scan the Gershgorin interval for sign
/// changes, then bisect.
inline std::vector<double> char_poly_roots(const Dense& a, int grid = 200000) {
    const auto c = characteristic_polynomial(a);
    double lo = 0.0, hi = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double r = a.row(i).cwiseAbs().sum() - std::abs(a(i, i));
        lo = std::min(lo, a(i, i) - r);
        hi = std::max(hi, a(i, i) + r);
    }
    lo -= 1e-3;
    hi += 1e-3;
    std::vector<double> roots;
    double x0 = lo, f0 = poly_eval(c, lo);
    for (int i = 1; i <= grid; ++i) {
        const double x1 = lo + (hi - lo) * i / grid, f1 = poly_eval(c, x1);
        if ((f0 < 0) != (f1 < 0)) {
            double l = x0, r = x1, fl = f0;
            for (int it = 0; it < 200; ++it) {
                const double m = 0.5 * (l + r), fm = poly_eval(c, m);
                if ((fm < 0) == (fl < 0)) {
                    l = m;
                    fl = fm;
                } else {
                    r = m;
                }
            }
            roots.push_back(0.5 * (l + r));
        }
        x0 = x1;
        f0 = f1;
    }
    return roots;
}

/// Plain triple loop.
inline Dense dense_product(const Dense& a, const Dense& b) {
    Dense c = Dense::Zero(a.rows(), b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (Eigen::Index k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

/// Random bipartite signed edge list; each pair present with probability p.
inline std::vector<dfgnn::SignedEdge> random_edges(std::size_t nu, std::size_t ni, double p, double neg_share, dfgnn::Rng& rng) {
    std::vector<dfgnn::SignedEdge> e;
    for (std::size_t u = 0; u < nu; ++u)
        for (std::size_t v = 0; v < ni; ++v)
            if (rng.uniform() < p) e.push_back({u, v, rng.uniform() < neg_share ? dfgnn::Sign::negative : dfgnn::Sign::positive});
    return e;
}

/// Dense 0/1 adjacency of one sign, built directly from the edge list.
inline Dense dense_adjacency(std::size_t nu, std::size_t ni, const std::vector<dfgnn::SignedEdge>& edges, dfgnn::Sign sign) {
    const auto n = static_cast<Eigen::Index>(nu + ni);
    Dense a = Dense::Zero(n, n);
    for (const auto& e : edges)
        if (e.sign == sign) {
            const auto u = static_cast<Eigen::Index>(e.user), v = static_cast<Eigen::Index>(nu + e.item);
            a(u, v) = a(v, u) = 1.0;
        }
    return a;
}

/// I - D^-1/2 A D^-1/2 with unit diagonal on isolated nodes.
inline Dense dense_normalized_laplacian(const Dense& a) {
    const Eigen::Index n = a.rows();
    Dense l = Dense::Identity(n, n);
    const Eigen::VectorXd d = a.rowwise().sum();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (a(i, j) != 0.0) l(i, j) -= a(i, j) / std::sqrt(d[i] * d[j]);
    return l;
}

/// D~^-1/2 (A + I) D~^-1/2.
inline Dense dense_augmented(const Dense& a) {
    const Dense at = a + Dense::Identity(a.rows(), a.cols());
    const Eigen::VectorXd d = at.rowwise().sum();
    Dense p = at;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) p(i, j) = at(i, j) / std::sqrt(d[i] * d[j]);
    return p;
}

/// Removes one under-threshold node at a time until none remain.
inline std::vector<dfgnn::SignedRecord> slow_core_filter(std::vector<dfgnn::SignedRecord> recs, std::size_t k) {
    while (true) {
        std::map<std::string, std::size_t> uc, ic;
        for (const auto& r : recs) {
            ++uc[r.user_key];
            ++ic[r.item_key];
        }
        std::string victim;
        bool is_user = false;
        for (const auto& [key, c] : uc)
            if (c < k) {
                victim = key;
                is_user = true;
                break;
            }
        if (victim.empty())
            for (const auto& [key, c] : ic)
                if (c < k) {
                    victim = key;
                    break;
                }
        if (victim.empty()) return recs;
        std::vector<dfgnn::SignedRecord> kept;
        for (const auto& r : recs)
            if ((is_user ? r.user_key : r.item_key) != victim) kept.push_back(r);
        recs = std::move(kept);
    }
}

/// O(n^2) pairwise AUC: positive beats negative 1, tie 1/2.
inline double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (y[i] == 1 && y[j] == 0) {
                den += 1.0;
                num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            }
    return num / den;
}

/// Worst-rank position of candidate 0 after sorting by descending score,
/// placing the positive after every tied candidate.
inline std::size_t sorted_rank(const std::vector<double>& scores, std::size_t positive) {
    std::vector<std::size_t> idx(scores.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a != positive && b == positive;  // positive sorts last among ties
    });
    return static_cast<std::size_t>(std::find(idx.begin(), idx.end(), positive) - idx.begin()) + 1;
}

/// Macro F1 from explicit confusion counts for classes 0 and 1.
inline double confusion_f1_macro(const std::vector<int>& pred, const std::vector<int>& y) {
    double tp1 = 0, fp1 = 0, fn1 = 0, tn1 = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (pred[i] == 1 && y[i] == 1) ++tp1;
        else if (pred[i] == 1 && y[i] == 0) ++fp1;
        else if (pred[i] == 0 && y[i] == 1) ++fn1;
        else ++tn1;
    }
    auto f1 = [](double tp, double fp, double fn) { return tp + fp + fn == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn); };
    return 0.5 * (f1(tp1, fp1, fn1) + f1(tn1, fn1, fp1));
}

/// Central differences of a scalar function of a flat parameter vector.
inline std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                                             double h = 1e-6) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double s = x[i];
        x[i] = s + h;
        const double up = f(x);
        x[i] = s - h;
        const double down = f(x);
        x[i] = s;
        g[i] = (up - down) / (2 * h);
    }
    return g;
}

} // namespace oracle
