#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "ellcut/ellipsoid.hpp"
#include "ellcut/error.hpp"

namespace ellcut {

/// Gap below the maximum within which an affine piece still counts as active.
inline constexpr double kActiveTolerance = 1e-12;

/**
 * @brief Value + subgradient oracle for a finite convex function on R^n.
 *
 * `subgradient` returns one deterministic element of the subdifferential.
 */
class ConvexOracle {
  public:
    virtual ~ConvexOracle() = default;

    virtual Eigen::Index dim() const = 0;
    virtual double eval(const Vector& x) const = 0;
    virtual Vector subgradient(const Vector& x) const = 0;
};

/// f(x) = max_k (A_k^T x + b_k)
class MaxAffineFunction final : public ConvexOracle {
  public:
    struct Evaluation {
        double value;
        Eigen::Index active_index;
    };

    MaxAffineFunction(Matrix rows, Vector offsets) : rows_(std::move(rows)), offsets_(std::move(offsets)) {
        if (rows_.rows() == 0 || rows_.rows() != offsets_.size()) {
            throw Error(ErrorKind::DimensionMismatch, "max-affine needs m >= 1 rows and m offsets");
        }
    }

    const Matrix& rows() const { return rows_; }
    const Vector& offsets() const { return offsets_; }
    Eigen::Index pieces() const { return rows_.rows(); }
    Eigen::Index dim() const override { return rows_.cols(); }

    /// Value and the smallest index whose piece is within kActiveTolerance of the max.
    Evaluation evaluate(const Vector& x) const {
        check(x);
        const Vector values = rows_ * x + offsets_;
        const double top = values.maxCoeff();
        for (Eigen::Index k = 0; k < values.size(); ++k) {
            if (values[k] >= top - kActiveTolerance) {
                return {top, k};
            }
        }
        return {top, 0};  // unreachable for finite input
    }

    double eval(const Vector& x) const override { return evaluate(x).value; }

    Vector subgradient(const Vector& x) const override { return rows_.row(evaluate(x).active_index).transpose(); }

  private:
    void check(const Vector& x) const {
        if (x.size() != dim()) {
            throw Error(ErrorKind::DimensionMismatch, "point dimension differs from max-affine function");
        }
    }

    Matrix rows_;
    Vector offsets_;
};

/**
 * @brief q^T M q + c^T q + k with M symmetric PSD.
 *
 * The linear and constant terms default to zero; they appear once a
 * quadratic is restricted to an affine subspace.
 */
class QuadraticForm final : public ConvexOracle {
  public:
    explicit QuadraticForm(Matrix gram) : QuadraticForm(std::move(gram), Vector(), 0.0) {}

    QuadraticForm(Matrix gram, Vector linear, double constant)
        : gram_(std::move(gram)), linear_(std::move(linear)), constant_(constant) {
        if (gram_.rows() != gram_.cols() || gram_.rows() == 0) {
            throw Error(ErrorKind::DimensionMismatch, "gram matrix must be square and nonempty");
        }
        gram_ = 0.5 * (gram_ + gram_.transpose()).eval();
        if (linear_.size() == 0) {
            linear_ = Vector::Zero(gram_.rows());
        } else if (linear_.size() != gram_.rows()) {
            throw Error(ErrorKind::DimensionMismatch, "linear term length differs from gram size");
        }
    }

    const Matrix& gram() const { return gram_; }
    const Vector& linear() const { return linear_; }
    double constant() const { return constant_; }
    Eigen::Index dim() const override { return gram_.rows(); }

    double eval(const Vector& q) const override {
        check(q);
        return q.dot(gram_ * q) + linear_.dot(q) + constant_;
    }

    Vector subgradient(const Vector& q) const override {
        check(q);
        return 2.0 * (gram_ * q) + linear_;
    }

  private:
    void check(const Vector& q) const {
        if (q.size() != dim()) {
            throw Error(ErrorKind::DimensionMismatch, "point dimension differs from quadratic form");
        }
    }

    Matrix gram_;
    Vector linear_;
    double constant_;
};

/// A point (x, y) of R^{n+1}; it lies in epi(f) iff f(x) <= y.
struct EpigraphPoint {
    Vector x;
    double y = 0.0;

    Vector lifted() const {
        Vector z(x.size() + 1);
        z << x, y;
        return z;
    }

    static EpigraphPoint split(const Vector& z) {
        return {z.head(z.size() - 1), z[z.size() - 1]};
    }
};

/**
 * @brief Separating halfspace for epi(f) at p, or nullopt when p is already inside.
 *
 * The halfspace has normal (g, -1), g a subgradient at p.x, and is anchored at
 * (p.x, f(p.x)); it contains all of epi(f).
 */
inline std::optional<Halfspace> epigraph_separator(const ConvexOracle& f, const EpigraphPoint& p) {
    if (p.x.size() != f.dim()) {
        throw Error(ErrorKind::DimensionMismatch, "epigraph point dimension differs from oracle");
    }
    const double fx = f.eval(p.x);
    if (fx <= p.y) {
        return std::nullopt;
    }
    const auto n = p.x.size();
    Vector normal(n + 1);
    normal << f.subgradient(p.x), -1.0;
    Vector anchor(n + 1);
    anchor << p.x, fx;
    return Halfspace(std::move(normal), std::move(anchor));
}

/// {z | C z + e <= 0}
class LinearConstraintSet {
  public:
    struct Violation {
        double value;  // max_k (C_k^T z + e_k); <= 0 inside
        Eigen::Index row;
    };

    LinearConstraintSet(Matrix rows, Vector offsets) : rows_(std::move(rows)), offsets_(std::move(offsets)) {
        if (rows_.rows() != offsets_.size()) {
            throw Error(ErrorKind::DimensionMismatch, "constraint rows and offsets differ in count");
        }
    }

    const Matrix& rows() const { return rows_; }
    const Vector& offsets() const { return offsets_; }
    Eigen::Index size() const { return rows_.rows(); }
    Eigen::Index dim() const { return rows_.cols(); }

    Violation violation(const Vector& z) const {
        if (z.size() != dim()) {
            throw Error(ErrorKind::DimensionMismatch, "point dimension differs from constraint set");
        }
        if (size() == 0) {
            return {-std::numeric_limits<double>::infinity(), -1};
        }
        return {(rows_ * z + offsets_).maxCoeff(), argmax(rows_ * z + offsets_)};
    }

    bool contains(const Vector& z, double tolerance = 0.0) const { return violation(z).value <= tolerance; }

    /// Rows scaled to unit normals. Zero rows are dropped when vacuous and kept as constants otherwise.
    LinearConstraintSet normalized() const {
        std::vector<Eigen::Index> keep;
        Vector scale(size());
        for (Eigen::Index k = 0; k < size(); ++k) {
            const double norm = rows_.row(k).norm();
            if (norm > 0.0) {
                scale[k] = 1.0 / norm;
                keep.push_back(k);
            } else if (offsets_[k] > 0.0) {
                scale[k] = 1.0;
                keep.push_back(k);
            }
        }
        Matrix rows(static_cast<Eigen::Index>(keep.size()), dim());
        Vector offsets(static_cast<Eigen::Index>(keep.size()));
        for (std::size_t i = 0; i < keep.size(); ++i) {
            const auto k = keep[i];
            rows.row(static_cast<Eigen::Index>(i)) = rows_.row(k) * scale[k];
            offsets[static_cast<Eigen::Index>(i)] = offsets_[k] * scale[k];
        }
        return {std::move(rows), std::move(offsets)};
    }

    /// The violation function max_k (C_k^T z + e_k) as an oracle.
    MaxAffineFunction as_max_affine() const { return {rows_, offsets_}; }

  private:
    static Eigen::Index argmax(const Vector& v) {
        Eigen::Index best = 0;
        v.maxCoeff(&best);
        return best;
    }

    Matrix rows_;
    Vector offsets_;
};

}  // namespace ellcut
