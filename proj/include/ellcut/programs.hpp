#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "ellcut/ellipsoid.hpp"
#include "ellcut/metastep.hpp"
#include "ellcut/oracles.hpp"

namespace ellcut {

/// {particular + basis * t | t in R^k}; basis columns are orthonormal.
struct AffineSubspace {
    Vector particular;
    Matrix basis;

    Vector embed(const Vector& t) const { return particular + basis * t; }
};

/**
 * @brief Solution set of E z = r, or nullopt if inconsistent.
 *
 * An equality-free system (E with zero rows) yields the whole space.
 */
inline std::optional<AffineSubspace> solve_affine(const Matrix& eq_rows, const Vector& eq_rhs, Eigen::Index dim,
                                                  double tolerance = 1e-10) {
    if (eq_rows.rows() == 0) {
        return AffineSubspace{Vector::Zero(dim), Matrix::Identity(dim, dim)};
    }
    if (eq_rows.cols() != dim || eq_rows.rows() != eq_rhs.size()) {
        throw Error(ErrorKind::DimensionMismatch, "equality system has wrong shape");
    }
    Eigen::JacobiSVD<Matrix> svd(eq_rows, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& sv = svd.singularValues();
    const double cutoff = 1e-12 * std::max(1.0, sv.size() > 0 ? sv[0] : 0.0);
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv[rank] > cutoff) {
        ++rank;
    }
    Vector particular = Vector::Zero(dim);
    for (Eigen::Index i = 0; i < rank; ++i) {
        particular += svd.matrixV().col(i) * (svd.matrixU().col(i).dot(eq_rhs) / sv[i]);
    }
    if ((eq_rows * particular - eq_rhs).norm() > tolerance * (1.0 + eq_rhs.norm())) {
        return std::nullopt;
    }
    return AffineSubspace{std::move(particular), svd.matrixV().rightCols(dim - rank)};
}

/**
 * @brief Settings for minimizing a convex quadratic over a bounded polyhedron.
 *
 * `norm_bound` bounds ||z|| over the feasible set and `value_span` bounds the
 * spread of the objective there; together they size a lifted ball that
 * covers every feasible (z, objective(z)), so the bisection's lower bracket
 * is a global lower bound.
 */
struct ProgramSettings {
    double eps = 1e-10;
    double tol = 1e-7;
    CutMode cut_mode = CutMode::DeepWithPatternSearch;
    double norm_bound = 1.0;
    double value_span = 1.0;
    std::size_t max_metasteps = 4;
};

struct ProgramResult {
    bool empty = false;
    Vector point;  // in the original coordinates
    double value = std::numeric_limits<double>::infinity();
    double lower = -std::numeric_limits<double>::infinity();
    double phase1_violation = 0.0;
    std::size_t phase1_iterations = 0;
    std::size_t iterations = 0;
    std::size_t level_queries = 0;
    std::size_t max_query_iterations = 0;
    MetastepStatus status = MetastepStatus::GlobalOptimumCertified;
};

/**
 * @brief min objective(z) s.t. E z = r, C z + e <= 0, solved with the metastep method.
 *
 * Equalities are eliminated by parametrizing their solution set; a phase-1
 * metastep run on the normalized violation function supplies the start point
 * or proves the polyhedron empty (violation above `tol`).
 */
inline ProgramResult minimize_program(const QuadraticForm& objective, const Matrix& eq_rows, const Vector& eq_rhs,
                                      const LinearConstraintSet& inequalities, const ProgramSettings& settings) {
    ProgramResult out;
    const Eigen::Index dim = objective.dim();
    if (inequalities.dim() != dim) {
        throw Error(ErrorKind::DimensionMismatch, "constraints and objective differ in dimension");
    }
    const auto subspace = solve_affine(eq_rows, eq_rhs, dim);
    if (!subspace) {
        out.empty = true;
        return out;
    }
    const Vector& p = subspace->particular;
    const Matrix& N = subspace->basis;
    const Eigen::Index k = N.cols();

    // rows orthogonal to the subspace reduce to round-off; make them exact constants
    Matrix reduced_rows = inequalities.rows() * N;
    for (Eigen::Index i = 0; i < reduced_rows.rows(); ++i) {
        if (reduced_rows.row(i).norm() <= 1e-12 * std::max(1.0, inequalities.rows().row(i).norm())) {
            reduced_rows.row(i).setZero();
        }
    }
    const LinearConstraintSet reduced =
        LinearConstraintSet(std::move(reduced_rows), inequalities.rows() * p + inequalities.offsets()).normalized();

    if (k == 0) {
        out.phase1_violation = reduced.size() > 0 ? reduced.violation(Vector::Zero(0)).value : 0.0;
        if (out.phase1_violation > settings.tol) {
            out.empty = true;
            return out;
        }
        out.point = p;
        out.value = objective.eval(p);
        out.lower = out.value;
        return out;
    }

    // t = N^T (z - p) and ||p|| <= ||z|| for feasible z, so ||t|| <= 2 norm_bound there
    const double t_bound = 2.0 * settings.norm_bound;
    Vector start = Vector::Zero(k);
    if (reduced.size() > 0) {
        const MaxAffineFunction violation = reduced.as_max_affine();
        MetastepConfig phase1;
        phase1.radius = 1.5 * t_bound + std::max(0.0, violation.eval(start));
        phase1.level_tolerance = 0.1 * settings.tol;
        phase1.cut_mode = settings.cut_mode;
        phase1.max_metasteps = 8;
        phase1.radius_growth = 2.0;
        phase1.stop_at_value = 0.0;
        const auto res = run_metasteps(violation, start, phase1);
        out.phase1_iterations = res.iterations;
        out.phase1_violation = res.best_value;
        if (res.best_value > settings.tol) {
            out.empty = true;
            return out;
        }
        start = res.best_point;
    }

    const Matrix gram = N.transpose() * objective.gram() * N;
    const Vector linear = N.transpose() * (2.0 * (objective.gram() * p) + objective.linear());
    const double constant = objective.eval(p);
    const QuadraticForm reduced_objective(gram, linear, constant);

    MetastepConfig cfg;
    cfg.radius = 1.01 * std::hypot(2.0 * t_bound, settings.value_span) + settings.tol;
    cfg.level_tolerance = settings.eps;
    cfg.cut_mode = settings.cut_mode;
    cfg.max_metasteps = settings.max_metasteps;
    cfg.constraint_tolerance = settings.tol;
    const auto res = run_metasteps(reduced_objective, start, cfg, &reduced);

    out.point = subspace->embed(res.best_point);
    out.value = res.best_value;
    out.lower = std::min(res.alpha_low, res.best_value);
    out.iterations = res.iterations;
    out.level_queries = res.level_queries;
    for (const auto it : res.query_iterations) {
        out.max_query_iterations = std::max(out.max_query_iterations, it);
    }
    out.status = res.status;
    return out;
}

}  // namespace ellcut
