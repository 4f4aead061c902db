#pragma once

// Slow brute-force answers used to check the solver. Nothing here calls into
// the ellipsoid or metastep code.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "ellcut/error.hpp"
#include "ellcut/lp_feasibility.hpp"
#include "ellcut/oracles.hpp"

namespace ellcut::reference {

struct OracleVerdict {
    bool feasible = false;
    std::optional<Vector> witness;
    std::optional<double> min_value;
};

inline constexpr double kOracleFeasTol = 1e-9;

namespace detail {

inline void for_each_subset(Eigen::Index m, Eigen::Index max_size,
                            const std::function<void(const std::vector<Eigen::Index>&)>& visit) {
    std::vector<Eigen::Index> current;
    std::function<void(Eigen::Index)> rec = [&](Eigen::Index start) {
        visit(current);
        if (static_cast<Eigen::Index>(current.size()) == max_size) return;
        for (Eigen::Index k = start; k < m; ++k) {
            current.push_back(k);
            rec(k + 1);
            current.pop_back();
        }
    };
    rec(0);
}

// Every lattice point w with w_i in {0, 1/res, ..., 1} and sum w = 1.
inline void for_each_simplex_point(Eigen::Index m, int resolution, const std::function<void(const Vector&)>& visit) {
    std::vector<int> counts(static_cast<std::size_t>(m), 0);
    Vector w(m);
    std::function<void(Eigen::Index, int)> rec = [&](Eigen::Index i, int left) {
        if (i == m - 1) {
            counts[static_cast<std::size_t>(i)] = left;
            for (Eigen::Index j = 0; j < m; ++j) {
                w[j] = static_cast<double>(counts[static_cast<std::size_t>(j)]) / resolution;
            }
            visit(w);
            return;
        }
        for (int c = 0; c <= left; ++c) {
            counts[static_cast<std::size_t>(i)] = c;
            rec(i + 1, left - c);
        }
    };
    rec(0, resolution);
}

inline void check_resolution(int resolution) {
    if (resolution < 1 || resolution > 200) {
        throw Error(ErrorKind::SizeLimitExceeded, "lattice resolution must be in [1, 200]");
    }
}

}  // namespace detail

/**
 * @brief Feasibility of A x + b <= 0 by enumerating candidate points.
 *
 * For every row subset S with |S| <= n the minimum-norm solution of
 * A_S x = -b_S is a candidate (S empty gives x = 0). The minimum-norm point of
 * a nonempty polyhedron is one of them, so this is exact up to round-off. The
 * witness returned is the feasible candidate of least norm.
 */
inline OracleVerdict vertex_enumerate_feasible(const LinearSystem& sys) {
    const Eigen::Index n = sys.cols();
    const Eigen::Index m = sys.rows();
    if (n > 4 || m > 12) {
        throw Error(ErrorKind::SizeLimitExceeded, "vertex enumeration limited to n <= 4, m <= 12");
    }
    OracleVerdict out;
    double best_norm = std::numeric_limits<double>::infinity();
    detail::for_each_subset(m, n, [&](const std::vector<Eigen::Index>& rows) {
        Vector x = Vector::Zero(n);
        if (!rows.empty()) {
            const auto s = static_cast<Eigen::Index>(rows.size());
            Matrix As(s, n);
            Vector rhs(s);
            for (Eigen::Index i = 0; i < s; ++i) {
                As.row(i) = sys.A.row(rows[static_cast<std::size_t>(i)]);
                rhs[i] = -sys.b[rows[static_cast<std::size_t>(i)]];
            }
            x = As.completeOrthogonalDecomposition().solve(rhs);
            if ((As * x - rhs).norm() > 1e-9 * (1.0 + rhs.norm())) return;
        }
        if ((sys.A * x + sys.b).maxCoeff() <= kOracleFeasTol && x.norm() < best_norm) {
            best_norm = x.norm();
            out.feasible = true;
            out.witness = x;
        }
    });
    return out;
}

/**
 * @brief min q^T M q + c^T q + k over simplex lattice points that satisfy
 * `constraints` (within 1e-12).
 *
 * Objectives that are homogeneous with conic constraints reach the same
 * minimum over a band {1 <= 1^T q <= s} as over the simplex.
 */
inline OracleVerdict simplex_grid_min(const QuadraticForm& objective, const LinearConstraintSet& constraints,
                                      int resolution) {
    const Eigen::Index m = objective.dim();
    if (m > 4) {
        throw Error(ErrorKind::SizeLimitExceeded, "grid search limited to 4 variables");
    }
    detail::check_resolution(resolution);
    if (constraints.dim() != m) {
        throw Error(ErrorKind::DimensionMismatch, "constraint dimension differs from objective");
    }
    OracleVerdict out;
    double best = std::numeric_limits<double>::infinity();
    detail::for_each_simplex_point(m, resolution, [&](const Vector& w) {
        if (constraints.size() > 0 && constraints.violation(w).value > 1e-12) return;
        const double v = objective.eval(w);
        if (v < best) {
            best = v;
            out.witness = w;
        }
    });
    if (out.witness) {
        out.feasible = true;
        out.min_value = best;
    }
    return out;
}

/// min || sum_k w_k A_k || over lattice weights on the rows active at x (within 1e-9).
inline double sample_subgradient_norms(const LinearSystem& sys, const Vector& x, int resolution) {
    detail::check_resolution(resolution);
    if (x.size() != sys.cols()) {
        throw Error(ErrorKind::DimensionMismatch, "point dimension differs from system");
    }
    const Vector values = sys.A * x + sys.b;
    const double top = values.maxCoeff();
    std::vector<Eigen::Index> active;
    for (Eigen::Index k = 0; k < values.size(); ++k) {
        if (values[k] >= top - 1e-9) active.push_back(k);
    }
    if (active.size() > 4) {
        throw Error(ErrorKind::SizeLimitExceeded, "more than 4 active rows");
    }
    const auto s = static_cast<Eigen::Index>(active.size());
    Matrix rows(s, sys.cols());
    for (Eigen::Index i = 0; i < s; ++i) rows.row(i) = sys.A.row(active[static_cast<std::size_t>(i)]);
    double best = std::numeric_limits<double>::infinity();
    detail::for_each_simplex_point(s, resolution, [&](const Vector& w) {
        best = std::min(best, (rows.transpose() * w).norm());
    });
    return best;
}

}  // namespace ellcut::reference
