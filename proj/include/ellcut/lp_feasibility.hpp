#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "ellcut/error.hpp"
#include "ellcut/metastep.hpp"
#include "ellcut/oracles.hpp"
#include "ellcut/programs.hpp"

namespace ellcut {

/// The inequality system A x + b <= 0 (row-wise).
struct LinearSystem {
    Matrix A;
    Vector b;

    LinearSystem(Matrix a, Vector offsets) : A(std::move(a)), b(std::move(offsets)) {
        if (A.rows() != b.size()) {
            throw Error(ErrorKind::DimensionMismatch, "A has m rows but b does not have m entries");
        }
        if (!A.allFinite() || !b.allFinite()) {
            throw Error(ErrorKind::InvalidArgument, "system coefficients must be finite");
        }
    }

    Eigen::Index rows() const { return A.rows(); }
    Eigen::Index cols() const { return A.cols(); }

    /// f(x) = max_k (A_k^T x + b_k); f(x) <= 0 exactly on the feasible set.
    MaxAffineFunction as_function() const { return {A, b}; }

    double max_violation(const Vector& x) const { return (A * x + b).maxCoeff(); }
};

/**
 * @brief Row-normalized copy of a system plus the bookkeeping to map
 * multipliers back to the original rows.
 */
struct NormalizedSystem {
    LinearSystem system;
    std::vector<Eigen::Index> source_rows;  // normalized row i came from original row source_rows[i]
    Vector scales;                          // normalized row i = scales[i] * original row
    Eigen::Index original_rows = 0;

    /// Multipliers for the original system equivalent to `q` for the normalized one.
    Vector to_original(const Vector& q) const {
        Vector out = Vector::Zero(original_rows);
        for (std::size_t i = 0; i < source_rows.size(); ++i) {
            out[source_rows[i]] = q[static_cast<Eigen::Index>(i)] * scales[static_cast<Eigen::Index>(i)];
        }
        return out;
    }
};

/**
 * @brief Scales each row to ||(A_k, b_k)|| = 1.
 *
 * Rows with A_k = 0 and b_k <= 0 hold everywhere and are dropped. Rows with
 * A_k = 0 and b_k > 0 are kept (as (0 | 1)); decide_feasibility turns them
 * into an immediate infeasibility certificate. Throws EmptySystem when no
 * rows remain, in which case every point is feasible.
 */
inline NormalizedSystem normalize(const LinearSystem& sys) {
    std::vector<Eigen::Index> keep;
    std::vector<double> scale;
    for (Eigen::Index k = 0; k < sys.rows(); ++k) {
        const double a_norm = sys.A.row(k).norm();
        if (a_norm == 0.0 && sys.b[k] <= 0.0) {
            continue;
        }
        keep.push_back(k);
        scale.push_back(1.0 / std::hypot(a_norm, sys.b[k]));
    }
    if (keep.empty()) {
        throw Error(ErrorKind::EmptySystem, "every row is vacuous; the system is trivially feasible");
    }
    const auto m = static_cast<Eigen::Index>(keep.size());
    Matrix A(m, sys.cols());
    Vector b(m);
    Vector scales(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto k = keep[static_cast<std::size_t>(i)];
        scales[i] = scale[static_cast<std::size_t>(i)];
        A.row(i) = sys.A.row(k) * scales[i];
        b[i] = sys.b[k] * scales[i];
    }
    return {LinearSystem(std::move(A), std::move(b)), std::move(keep), std::move(scales), sys.rows()};
}

enum class FeasibilityVerdict { Feasible, InfeasibleNonStrict, InfeasibleStrictOnly };

inline const char* to_string(FeasibilityVerdict verdict) {
    switch (verdict) {
        case FeasibilityVerdict::Feasible: return "feasible";
        case FeasibilityVerdict::InfeasibleNonStrict: return "infeasible";
        case FeasibilityVerdict::InfeasibleStrictOnly: return "infeasible_strict_only";
    }
    return "unknown";
}

struct FeasibilityDecision {
    FeasibilityVerdict verdict = FeasibilityVerdict::Feasible;
    std::optional<Vector> certificate;  // present for infeasible verdicts
    std::optional<double> d_star;       // absent when the multiplier band is empty
    bool band_empty = false;
    std::size_t phase1_iterations = 0;
    std::size_t iterations = 0;
    std::size_t level_queries = 0;
    std::size_t max_query_iterations = 0;
};

struct DecisionSettings {
    double tol = 1e-7;
    double eps = 1e-10;
    CutMode cut_mode = CutMode::DeepWithPatternSearch;
};

/// q ⪰ -tol, ||q^T A|| <= tol (1 + ||q||) and B^T q > tol.
inline bool validate_certificate(const LinearSystem& sys, const Vector& q, double tol) {
    if (q.size() != sys.rows() || !q.allFinite()) {
        return false;
    }
    if (q.size() > 0 && q.minCoeff() < -tol) {
        return false;
    }
    return (sys.A.transpose() * q).norm() <= tol * (1.0 + q.norm()) && sys.b.dot(q) > tol;
}

namespace detail {

// Snap an approximate multiplier q (q >= 0, A^T q ~ 0) onto an exact one by
// projecting its support onto null(A_S^T); indices that go negative are
// dropped from the support and the projection repeated.
inline std::optional<Vector> polish_multiplier(const Matrix& A, const Vector& q_approx) {
    const Eigen::Index m = A.rows();
    const Vector q0 = q_approx.cwiseMax(0.0);
    const double top = q0.size() > 0 ? q0.maxCoeff() : 0.0;
    if (!(top > 0.0)) {
        return std::nullopt;
    }
    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (q0[i] > 1e-9 * top) {
            support.push_back(i);
        }
    }
    while (!support.empty()) {
        const auto s = static_cast<Eigen::Index>(support.size());
        Matrix AsT(A.cols(), s);
        Vector qs(s);
        for (Eigen::Index j = 0; j < s; ++j) {
            AsT.col(j) = A.row(support[static_cast<std::size_t>(j)]).transpose();
            qs[j] = q0[support[static_cast<std::size_t>(j)]];
        }
        const Vector correction = AsT.completeOrthogonalDecomposition().solve(AsT * qs);
        const Vector projected = qs - correction;
        Eigen::Index worst = 0;
        const double lowest = projected.minCoeff(&worst);
        const double scale = projected.maxCoeff();
        if (scale > 0.0 && lowest >= -1e-12 * scale) {
            Vector q = Vector::Zero(m);
            for (Eigen::Index j = 0; j < s; ++j) {
                q[support[static_cast<std::size_t>(j)]] = std::max(projected[j], 0.0);
            }
            return q / q.sum();
        }
        support.erase(support.begin() + worst);
    }
    return std::nullopt;
}

inline void require_rows(const LinearSystem& sys) {
    if (sys.rows() == 0) {
        throw Error(ErrorKind::EmptySystem, "system has no rows");
    }
}

inline double max_row_norm_sq(const LinearSystem& sys) {
    return sys.A.rowwise().squaredNorm().maxCoeff();
}

}  // namespace detail

/**
 * @brief Decides A x + b <= 0 through the Farkas multiplier program
 *
 *   d* = min q^T A A^T q  s.t.  q >= 0, b^T q >= 0, 1 <= 1^T q <= 2.
 *
 * d* > tol means feasible. Otherwise the minimizer is polished into an exact
 * multiplier: b^T q > tol gives InfeasibleNonStrict, b^T q ~ 0 gives
 * InfeasibleStrictOnly. An empty multiplier band also means feasible.
 * Expects a normalized system.
 */
inline FeasibilityDecision decide_feasibility(const LinearSystem& sys, const DecisionSettings& settings = {}) {
    detail::require_rows(sys);
    const Eigen::Index m = sys.rows();
    FeasibilityDecision out;

    for (Eigen::Index k = 0; k < m; ++k) {
        if (sys.A.row(k).norm() == 0.0 && sys.b[k] > 0.0) {
            Vector q = Vector::Zero(m);
            q[k] = 1.0;
            out.verdict = FeasibilityVerdict::InfeasibleNonStrict;
            out.certificate = q;
            out.d_star = 0.0;
            return out;
        }
    }

    // q >= 0, b^T q >= 0, 1^T q >= 1, 1^T q <= 2 as rows of C q + e <= 0
    Matrix C = Matrix::Zero(m + 3, m);
    Vector e = Vector::Zero(m + 3);
    C.topRows(m) = -Matrix::Identity(m, m);
    C.row(m) = -sys.b.transpose();
    C.row(m + 1).setConstant(-1.0);
    e[m + 1] = 1.0;
    C.row(m + 2).setConstant(1.0);
    e[m + 2] = -2.0;

    ProgramSettings ps;
    ps.eps = settings.eps;
    ps.tol = settings.tol;
    ps.cut_mode = settings.cut_mode;
    ps.norm_bound = 2.0;
    ps.value_span = 4.0 * detail::max_row_norm_sq(sys);

    const QuadraticForm objective(sys.A * sys.A.transpose());
    const auto program = minimize_program(objective, Matrix(0, m), Vector(0), LinearConstraintSet(C, e), ps);
    out.phase1_iterations = program.phase1_iterations;
    out.iterations = program.iterations;
    out.level_queries = program.level_queries;
    out.max_query_iterations = program.max_query_iterations;

    if (program.empty) {
        out.band_empty = true;
        out.verdict = FeasibilityVerdict::Feasible;
        return out;
    }
    out.d_star = program.value;
    if (program.value > settings.tol) {
        out.verdict = FeasibilityVerdict::Feasible;
        return out;
    }

    const auto q = detail::polish_multiplier(sys.A, program.point);
    if (q && validate_certificate(sys, *q, settings.tol)) {
        out.verdict = FeasibilityVerdict::InfeasibleNonStrict;
        out.certificate = q;
        out.d_star = objective.eval(*q);
        return out;
    }
    if (q && (sys.A.transpose() * *q).norm() <= settings.tol * (1.0 + q->norm()) &&
        std::abs(sys.b.dot(*q)) <= settings.tol) {
        out.verdict = FeasibilityVerdict::InfeasibleStrictOnly;
        out.certificate = q;
        out.d_star = objective.eval(*q);
        return out;
    }
    throw Error(ErrorKind::SolverBudgetExceeded,
                "multiplier program reached d* <= tol but no exact Farkas multiplier could be recovered");
}

struct SubgradientBound {
    double d_lower;  // sqrt of the certified lower bracket
    double value;    // best objective found (upper estimate of d(X)^2)
    Vector lambda;
};

/**
 * @brief Lower bound on the norm of every subgradient of f at x (f(x) >= 0):
 *
 *   d(X)^2 = min L^T A A^T L  s.t.  1^T L = 1, L >= 0, L^T (A x + b) >= 0.
 */
inline SubgradientBound subgradient_lower_bound_at(const LinearSystem& sys, const Vector& x,
                                                   const DecisionSettings& settings = {}) {
    detail::require_rows(sys);
    if (x.size() != sys.cols()) {
        throw Error(ErrorKind::DimensionMismatch, "point dimension differs from system");
    }
    const Vector residual = sys.A * x + sys.b;
    if (residual.maxCoeff() < 0.0) {
        throw Error(ErrorKind::PreconditionViolated, "f(x) < 0: x is strictly feasible");
    }
    const Eigen::Index m = sys.rows();
    Matrix C(m + 1, m);
    C.topRows(m) = -Matrix::Identity(m, m);
    C.row(m) = -residual.transpose();

    ProgramSettings ps;
    ps.eps = settings.eps;
    ps.tol = settings.tol;
    ps.cut_mode = settings.cut_mode;
    ps.norm_bound = 1.0;
    ps.value_span = detail::max_row_norm_sq(sys);

    const auto program = minimize_program(QuadraticForm(sys.A * sys.A.transpose()), Matrix::Ones(1, m),
                                          Vector::Ones(1), LinearConstraintSet(C, Vector::Zero(m + 1)), ps);
    if (program.empty) {
        throw Error(ErrorKind::SolverBudgetExceeded, "subgradient program reported an empty feasible set");
    }
    return {std::sqrt(std::max(program.lower, 0.0)), program.value, program.point};
}

enum class RadiusMethod { GlobalC, EpsilonShift, Halving };

inline const char* to_string(RadiusMethod method) {
    switch (method) {
        case RadiusMethod::GlobalC: return "global_c";
        case RadiusMethod::EpsilonShift: return "epsilon_shift";
        case RadiusMethod::Halving: return "halving";
    }
    return "unknown";
}

/// sqrt(m) * sqrt((d^2 + 1) / d^2)
inline double radius_from_subgradient_floor(Eigen::Index m, double d_lower) {
    return std::sqrt(static_cast<double>(m)) * std::sqrt((d_lower * d_lower + 1.0) / (d_lower * d_lower));
}

struct RadiusBound {
    double d_lower = 0.0;
    double radius = 0.0;
    RadiusMethod method = RadiusMethod::GlobalC;
    double epsilon = 0.0;  // eps_shift for EpsilonShift, current eps for Halving
    double c_lower = 0.0;
    std::optional<double> b_bar;
    std::optional<double> a_bar;
    std::optional<double> a_lower;  // diagnostic only; expected <= tol
};

/**
 * @brief Search radius for a strictly feasible normalized system.
 *
 * c = min over the simplex of ||A^T L||^2. If c > tol the floor is sqrt(c).
 * Otherwise b_bar = max b^T L over {simplex, A^T L = 0} must be negative and
 * the floor becomes sqrt(a_bar), a_bar = min ||A^T L||^2 over
 * {simplex, b^T L >= -|b_bar| + eps_shift}. The floor from that second route
 * is not proven to bound every infeasible point and is flagged EpsilonShift.
 * When the shifted program is empty the result has method Halving and no
 * radius; find_feasible_point then uses the halving schedule.
 */
inline RadiusBound global_radius(const LinearSystem& sys, std::optional<double> eps_shift = std::nullopt,
                                 const DecisionSettings& settings = {}) {
    detail::require_rows(sys);
    const Eigen::Index m = sys.rows();
    const Eigen::Index n = sys.cols();
    const QuadraticForm gram(sys.A * sys.A.transpose());
    const LinearConstraintSet nonneg(-Matrix::Identity(m, m), Vector::Zero(m));
    const Matrix simplex_row = Matrix::Ones(1, m);
    const Vector one = Vector::Ones(1);

    ProgramSettings ps;
    ps.eps = settings.eps;
    ps.tol = settings.tol;
    ps.cut_mode = settings.cut_mode;
    ps.norm_bound = 1.0;
    ps.value_span = detail::max_row_norm_sq(sys);

    RadiusBound out;
    const auto c_program = minimize_program(gram, simplex_row, one, nonneg, ps);
    out.c_lower = std::max(c_program.lower, 0.0);
    if (out.c_lower > settings.tol) {
        out.method = RadiusMethod::GlobalC;
        out.d_lower = std::sqrt(out.c_lower);
        out.radius = radius_from_subgradient_floor(m, out.d_lower);
        return out;
    }

    // b_bar: max b^T L over {simplex, A^T L = 0}, as min of -b^T L
    Matrix eq(n + 1, m);
    eq.topRows(n) = sys.A.transpose();
    eq.row(n).setOnes();
    Vector rhs = Vector::Zero(n + 1);
    rhs[n] = 1.0;
    ProgramSettings linear_ps = ps;
    linear_ps.value_span = 2.0 * sys.b.cwiseAbs().maxCoeff();
    const auto b_program =
        minimize_program(QuadraticForm(Matrix::Zero(m, m), -sys.b, 0.0), eq, rhs, nonneg, linear_ps);
    if (b_program.empty) {
        throw Error(ErrorKind::StrictFeasibilityViolated,
                    "no simplex multiplier annihilates A although min ||A^T L||^2 <= tol");
    }
    const double b_upper = -b_program.lower;
    const double b_bar = -b_program.value;
    out.b_bar = b_bar;
    if (!(b_upper < -settings.tol)) {
        throw Error(ErrorKind::StrictFeasibilityViolated, "b_bar >= -tol: the system is not strictly feasible");
    }
    out.epsilon = eps_shift ? *eps_shift : std::max(1e-3 * std::abs(b_bar), 1e-9);

    // a_bar: b^T L >= -|b_bar| + eps  <=>  -b^T L - |b_bar| + eps <= 0
    Matrix C(m + 1, m);
    C.topRows(m) = -Matrix::Identity(m, m);
    C.row(m) = -sys.b.transpose();
    Vector e = Vector::Zero(m + 1);
    e[m] = -std::abs(b_bar) + out.epsilon;
    const auto a_program = minimize_program(gram, simplex_row, one, LinearConstraintSet(C, e), ps);
    if (a_program.empty || !(a_program.lower > 0.0)) {
        // b^T L never rises above b_bar (or the floor is not positive): no radius from this route
        out.method = RadiusMethod::Halving;
        return out;
    }
    out.a_bar = a_program.lower;

    // a_lower: b^T L <= -|b_bar|
    C.row(m) = sys.b.transpose();
    e[m] = std::abs(b_bar);
    const auto a_low_program = minimize_program(gram, simplex_row, one, LinearConstraintSet(C, e), ps);
    if (!a_low_program.empty) {
        out.a_lower = a_low_program.value;
    }

    out.method = RadiusMethod::EpsilonShift;
    out.d_lower = std::sqrt(*out.a_bar);
    out.radius = radius_from_subgradient_floor(m, out.d_lower);
    return out;
}

enum class SearchOutcome { FeasiblePointFound, InfeasibleProven, Undecided };

inline const char* to_string(SearchOutcome outcome) {
    switch (outcome) {
        case SearchOutcome::FeasiblePointFound: return "feasible_point_found";
        case SearchOutcome::InfeasibleProven: return "infeasible_proven";
        case SearchOutcome::Undecided: return "undecided";
    }
    return "unknown";
}

struct SearchSettings {
    double tol_feas = 1e-7;
    double eps = 1e-6;
    CutMode cut_mode = CutMode::DeepWithPatternSearch;
    std::size_t max_metasteps = 16;
    double radius_growth = 1.0;
    std::size_t max_halvings = 40;
    TraceSink trace;
};

struct PointSearchResult {
    std::optional<Vector> point;
    double f_value = std::numeric_limits<double>::infinity();
    SearchOutcome outcome = SearchOutcome::Undecided;
    MetastepResult metastep_report;
    double radius_used = 0.0;
    std::size_t attempts = 0;
    std::size_t iterations = 0;
    std::size_t level_queries = 0;
};

/**
 * @brief Minimizes f = max_k (A_k^T x + b_k) from x0 = 0, stopping at the
 * first point with f <= tol_feas.
 *
 * With a bound the search uses its radius. Without one (or with a Halving
 * bound) it tries radius 2 sqrt(m) / eps for eps = 1, 1/2, 1/4, ... up to
 * `max_halvings` times.
 * A certified minimum above tol_feas proves infeasibility.
 */
inline PointSearchResult find_feasible_point(const LinearSystem& sys, const std::optional<RadiusBound>& bound,
                                             const SearchSettings& settings = {}) {
    detail::require_rows(sys);
    const MaxAffineFunction f = sys.as_function();
    const Vector x0 = Vector::Zero(sys.cols());
    PointSearchResult out;

    auto attempt = [&](double radius) {
        MetastepConfig cfg;
        cfg.radius = radius;
        cfg.level_tolerance = settings.eps;
        cfg.cut_mode = settings.cut_mode;
        cfg.max_metasteps = settings.max_metasteps;
        cfg.radius_growth = settings.radius_growth;
        cfg.stop_at_value = settings.tol_feas;
        auto res = run_metasteps(f, x0, cfg, nullptr, settings.trace);
        ++out.attempts;
        out.iterations += res.iterations;
        out.level_queries += res.level_queries;
        out.radius_used = radius;
        if (res.best_value < out.f_value) {
            out.f_value = res.best_value;
            out.point = res.best_point;
        }
        if (res.target_reached) {
            out.outcome = SearchOutcome::FeasiblePointFound;
        } else if (res.status == MetastepStatus::GlobalOptimumCertified && res.alpha_low > settings.tol_feas) {
            out.outcome = SearchOutcome::InfeasibleProven;
        }
        out.metastep_report = std::move(res);
        return out.outcome != SearchOutcome::Undecided;
    };

    if (bound && bound->method != RadiusMethod::Halving) {
        if (!(bound->radius > 0.0)) {
            throw Error(ErrorKind::InvalidArgument, "search radius must be positive");
        }
        attempt(bound->radius);
        return out;
    }
    const double base = 2.0 * std::sqrt(static_cast<double>(sys.rows()));
    double eps = 1.0;
    for (std::size_t h = 0; h <= settings.max_halvings; ++h, eps *= 0.5) {
        if (attempt(base / eps)) {
            return out;
        }
    }
    return out;
}

}  // namespace ellcut
