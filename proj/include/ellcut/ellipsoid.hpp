#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>

#include "ellcut/error.hpp"

namespace ellcut {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Smallest factorization pivot accepted before the shape matrix is declared degenerate.
inline constexpr double kMinShapePivot = 1e-300;

/**
 * @brief Ellipsoid in R^d stored as center and inverse shape matrix.
 *
 *  E = {x | (x - center)^T P^-1 (x - center) <= 1}
 *
 * P is the inverse of A^T A for the factor form {x | ||A (x - c)|| <= 1}.
 * P is kept together with its lower Cholesky factor L (P = L L^T); cuts update
 * L, so P stays positive definite even when E becomes very elongated.
 * `log_volume_ratio` is ln(vol(E) / vol(E_0)) for the ellipsoid this one
 * descends from.
 */
class Ellipsoid {
  public:
    Ellipsoid(Vector center, Matrix shape_inv, double log_volume_ratio = 0.0)
        : center_(std::move(center)), log_volume_ratio_(log_volume_ratio) {
        if (center_.size() == 0 || shape_inv.rows() != center_.size() || shape_inv.cols() != center_.size()) {
            throw Error(ErrorKind::DimensionMismatch, "shape matrix must be d x d with d = |center| > 0");
        }
        const Matrix sym = 0.5 * (shape_inv + shape_inv.transpose());
        const Eigen::LLT<Matrix> llt(sym);
        if (llt.info() != Eigen::Success) {
            throw Error(ErrorKind::DegenerateShape, "shape matrix is not positive definite");
        }
        factor_ = llt.matrixL();
        finish();
    }

    /// Ellipsoid with P = factor * factor^T; `factor` must be lower triangular.
    static Ellipsoid from_factor(Vector center, Matrix factor, double log_volume_ratio) {
        return Ellipsoid(std::move(center), std::move(factor), log_volume_ratio, FactorTag{});
    }

    /// Ball B(center, radius).
    static Ellipsoid ball(const Vector& center, double radius) {
        if (!(radius > 0.0)) {
            throw Error(ErrorKind::InvalidArgument, "ball radius must be positive");
        }
        const auto d = center.size();
        return Ellipsoid(center, Matrix::Identity(d, d) * (radius * radius));
    }

    Eigen::Index dim() const { return center_.size(); }
    const Vector& center() const { return center_; }
    const Matrix& shape_inv() const { return shape_inv_; }
    const Matrix& factor() const { return factor_; }
    double log_volume_ratio() const { return log_volume_ratio_; }

    /// (x - c)^T P^-1 (x - c)
    double quadratic_form(const Vector& x) const {
        if (x.size() != dim()) {
            throw Error(ErrorKind::DimensionMismatch, "point dimension differs from ellipsoid");
        }
        return factor_.triangularView<Eigen::Lower>().solve(x - center_).squaredNorm();
    }

    /// Smallest pivot of the symmetric factorization of P.
    double min_pivot() const { return factor_.diagonal().cwiseAbs2().minCoeff(); }

  private:
    struct FactorTag {};

    Ellipsoid(Vector center, Matrix factor, double log_volume_ratio, FactorTag)
        : center_(std::move(center)), factor_(std::move(factor)), log_volume_ratio_(log_volume_ratio) {
        if (center_.size() == 0 || factor_.rows() != center_.size() || factor_.cols() != center_.size()) {
            throw Error(ErrorKind::DimensionMismatch, "factor must be d x d with d = |center| > 0");
        }
        finish();
    }

    void finish() {
        if (!factor_.allFinite() || !center_.allFinite() || !(min_pivot() > kMinShapePivot)) {
            throw Error(ErrorKind::DegenerateShape, "shape matrix lost positive definiteness");
        }
        shape_inv_ = factor_ * factor_.transpose();
        shape_inv_ = 0.5 * (shape_inv_ + shape_inv_.transpose()).eval();
    }

    Vector center_;
    Matrix factor_;
    Matrix shape_inv_;
    double log_volume_ratio_;
};

/// {X | normal^T (X - anchor) <= 0}
struct Halfspace {
    Vector normal;
    Vector anchor;

    Halfspace(Vector n, Vector a) : normal(std::move(n)), anchor(std::move(a)) {
        if (normal.size() != anchor.size()) {
            throw Error(ErrorKind::DimensionMismatch, "halfspace normal and anchor differ in length");
        }
        if (!(normal.norm() > 0.0)) {
            throw Error(ErrorKind::InvalidArgument, "halfspace normal must be nonzero");
        }
    }

    /// normal^T (x - anchor); positive means x violates the halfspace.
    double signed_value(const Vector& x) const { return normal.dot(x - anchor); }
};

enum class CutKind { Updated, EmptyIntersection, NoCut };

struct CutOutcome {
    CutKind kind;
    std::optional<Ellipsoid> ellipsoid;  // set iff kind == Updated
    double depth_used;                    // normalized depth alpha

    bool updated() const { return kind == CutKind::Updated; }
};

namespace detail {

inline void check_dims(const Ellipsoid& e, const Vector& v) {
    if (v.size() != e.dim()) {
        throw Error(ErrorKind::DimensionMismatch, "vector dimension differs from ellipsoid");
    }
}

// Minimum-volume ellipsoid containing E ∩ {x | H^T (x - c) + gamma <= 0}.
// alpha = gamma / sqrt(H^T P H) must lie in (-1/d, 1) for a proper update.
inline CutOutcome apply_cut(const Ellipsoid& e, const Vector& normal, double gamma) {
    check_dims(e, normal);
    const Matrix& L = e.factor();
    const Vector g = L.transpose() * normal;
    const double s = g.squaredNorm();  // H^T P H
    if (!(s > std::numeric_limits<double>::min()) || !std::isfinite(s)) {
        throw Error(ErrorKind::DegenerateShape, "H^T P H is not positive");
    }
    const double root = std::sqrt(s);
    const double alpha = gamma / root;
    const double d = static_cast<double>(e.dim());

    if (alpha >= 1.0) {
        return {CutKind::EmptyIntersection, std::nullopt, alpha};
    }
    if (alpha <= -1.0 / d) {
        return {CutKind::NoCut, std::nullopt, alpha};
    }

    const Vector PH = L * g;
    if (e.dim() == 1) {
        // interval: keep [c - r, c + r] ∩ cut, which is again an interval
        const double half = 0.5 * (1.0 - alpha);
        Vector center = e.center() - (0.5 * (1.0 + alpha) / root) * PH;
        return {CutKind::Updated,
                Ellipsoid::from_factor(std::move(center), L * half, e.log_volume_ratio() + std::log(half)), alpha};
    }

    const double tau = (1.0 + d * alpha) / (d + 1.0);
    const double sigma = 2.0 * (1.0 + d * alpha) / ((d + 1.0) * (1.0 + alpha));
    const double delta = d * d * (1.0 - alpha * alpha) / (d * d - 1.0);

    Vector center = e.center() - (tau / root) * PH;

    // P' = delta (P - sigma PH PH^T / s) = M M^T with M = sqrt(delta) L (I - c u u^T),
    // u = L^T H / ||L^T H||, (1 - c)^2 = 1 - sigma; M is brought back to lower
    // triangular form through a QR factorization of M^T.
    const double c = 1.0 - std::sqrt(1.0 - sigma);
    const Vector u = g / root;
    const Matrix M = std::sqrt(delta) * (L - c * (L * u) * u.transpose());
    const Eigen::HouseholderQR<Matrix> qr(M.transpose());
    Matrix next = qr.matrixQR().triangularView<Eigen::Upper>().toDenseMatrix().transpose();
    for (Eigen::Index j = 0; j < next.cols(); ++j) {
        if (next(j, j) < 0.0) next.col(j) = -next.col(j);
    }

    // det(P') / det(P) = delta^d (1 - sigma)
    const double log_step = 0.5 * d * std::log(delta) + 0.5 * std::log1p(-sigma);
    return {CutKind::Updated,
            Ellipsoid::from_factor(std::move(center), std::move(next), e.log_volume_ratio() + log_step), alpha};
}

}  // namespace detail

/**
 * @brief Central cut: smallest ellipsoid containing E ∩ {x | H^T (x - c) <= 0}.
 *
 * The halfspace must be anchored at the ellipsoid center.
 */
inline CutOutcome central_cut(const Ellipsoid& e, const Halfspace& h) {
    detail::check_dims(e, h.anchor);
    const double scale = 1.0 + e.center().lpNorm<Eigen::Infinity>();
    if ((h.anchor - e.center()).lpNorm<Eigen::Infinity>() > 1e-12 * scale) {
        throw Error(ErrorKind::InvalidArgument, "central cut must pass through the ellipsoid center");
    }
    return detail::apply_cut(e, h.normal, 0.0);
}

/**
 * @brief Deep cut against {x | H^T (x - c) + slack <= 0}.
 *
 * alpha = slack / sqrt(H^T P H). alpha >= 1 certifies an empty intersection,
 * alpha <= -1/d leaves the ellipsoid untouched (NoCut). slack = 0 is the
 * central cut.
 */
inline CutOutcome deep_cut(const Ellipsoid& e, const Halfspace& h, double slack) {
    detail::check_dims(e, h.anchor);
    return detail::apply_cut(e, h.normal, slack);
}

/// Cut with an arbitrarily anchored halfspace; its offset from the center becomes the depth.
inline CutOutcome cut_with(const Ellipsoid& e, const Halfspace& h) {
    detail::check_dims(e, h.anchor);
    return detail::apply_cut(e, h.normal, h.signed_value(e.center()));
}

/// True iff E ∩ {x | H^T (x - X0) <= 0} is nonempty (strict test when the center is outside).
inline bool intersects_halfspace(const Ellipsoid& e, const Halfspace& h) {
    detail::check_dims(e, h.anchor);
    const double v = h.signed_value(e.center());
    if (v <= 0.0) {
        return true;
    }
    return v * v < h.normal.dot(e.shape_inv() * h.normal);
}

inline bool contains(const Ellipsoid& e, const Vector& x) {
    return e.quadratic_form(x) <= 1.0 + 1e-9;
}

}  // namespace ellcut
