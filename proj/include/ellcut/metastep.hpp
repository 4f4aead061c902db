#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ellcut/ellipsoid.hpp"
#include "ellcut/error.hpp"
#include "ellcut/oracles.hpp"

namespace ellcut {

enum class CutMode { Central, Deep, DeepWithPatternSearch };

inline const char* to_string(CutMode mode) {
    switch (mode) {
        case CutMode::Central: return "central";
        case CutMode::Deep: return "deep";
        case CutMode::DeepWithPatternSearch: return "deep+ps";
    }
    return "unknown";
}

/**
 * @brief Parameters of one metastep and of the outer metastep loop.
 *
 * `radius` is the radius of the lifted ball B((x0, f(x0)), R) in R^{n+1}.
 * `constraint_tolerance` is the slack allowed on the optional extra linear
 * constraints (their rows are normalized to unit normals first).
 * `stop_at_value` ends the whole run as soon as any evaluated point that
 * satisfies the extra constraints reaches that value.
 */
struct MetastepConfig {
    double radius = 1.0;
    double level_tolerance = 1e-6;
    std::optional<std::size_t> max_ellipsoid_iters;
    CutMode cut_mode = CutMode::DeepWithPatternSearch;
    std::optional<double> pattern_beta;
    std::size_t max_metasteps = 1;
    double radius_growth = 1.0;
    double constraint_tolerance = 0.0;
    std::optional<double> stop_at_value;
    bool record_trace = false;

    void validate() const {
        if (!(radius > 0.0) || !std::isfinite(radius)) {
            throw Error(ErrorKind::InvalidArgument, "radius must be positive and finite");
        }
        if (!(level_tolerance > 0.0) || !(level_tolerance < radius)) {
            throw Error(ErrorKind::InvalidArgument, "level tolerance must satisfy 0 < eps < R");
        }
        if (max_ellipsoid_iters && *max_ellipsoid_iters == 0) {
            throw Error(ErrorKind::InvalidArgument, "ellipsoid iteration cap must be positive");
        }
        if (pattern_beta && !(*pattern_beta > 0.0)) {
            throw Error(ErrorKind::InvalidArgument, "pattern step must be positive");
        }
        if (max_metasteps == 0) {
            throw Error(ErrorKind::InvalidArgument, "at least one metastep is required");
        }
        if (!(radius_growth >= 1.0)) {
            throw Error(ErrorKind::InvalidArgument, "radius growth must be >= 1");
        }
        if (!(constraint_tolerance >= 0.0)) {
            throw Error(ErrorKind::InvalidArgument, "constraint tolerance must be nonnegative");
        }
    }

    /// ceil(2 (d+1)(d+2) ln(R/eps)) with d = n + 1 the lifted dimension.
    static std::size_t budget_formula(Eigen::Index n, double radius, double eps) {
        const double d = static_cast<double>(n + 1);
        const double k = 2.0 * (d + 1.0) * (d + 2.0) * std::log(radius / eps);
        return static_cast<std::size_t>(std::max(1.0, std::ceil(k)));
    }

    std::size_t iteration_budget(Eigen::Index n) const {
        return max_ellipsoid_iters ? *max_ellipsoid_iters : budget_formula(n, radius, level_tolerance);
    }

    /// ln of the smallest volume ratio worth shrinking to: (n+1) ln(eps/R).
    double volume_floor(Eigen::Index n) const {
        return static_cast<double>(n + 1) * std::log(level_tolerance / radius);
    }

    /// ceil(log2(2R / eps)): the number of bisection queries needed to close [f(x0)-R, f(x0)+R].
    std::size_t query_bound() const {
        return static_cast<std::size_t>(std::ceil(std::log2(2.0 * radius / level_tolerance)));
    }
};

enum class MetastepStatus { GlobalOptimumCertified, BoundaryReached, BudgetExhausted };

inline const char* to_string(MetastepStatus status) {
    switch (status) {
        case MetastepStatus::GlobalOptimumCertified: return "global_optimum_certified";
        case MetastepStatus::BoundaryReached: return "boundary_reached";
        case MetastepStatus::BudgetExhausted: return "budget_exhausted";
    }
    return "unknown";
}

/// Which separator produced a cut.
enum class CutSource { Level, Objective, Epigraph, Ball, Constraint };

inline const char* to_string(CutSource source) {
    switch (source) {
        case CutSource::Level: return "level";
        case CutSource::Objective: return "objective";
        case CutSource::Epigraph: return "epigraph";
        case CutSource::Ball: return "ball";
        case CutSource::Constraint: return "constraint";
    }
    return "unknown";
}

struct TraceRecord {
    std::size_t metastep = 0;
    std::size_t level_query = 0;
    std::size_t iteration = 0;
    double level = 0.0;
    Vector center;  // lifted center (x, y) before the cut
    double f_value = 0.0;
    CutSource cut = CutSource::Level;
    double gamma = 0.0;
    double log_volume = 0.0;  // after the cut
};

using TraceSink = std::function<void(const TraceRecord&)>;

enum class LevelVerdict { FeasibleWitness, Infeasible, EpsilonFeasible };

inline const char* to_string(LevelVerdict verdict) {
    switch (verdict) {
        case LevelVerdict::FeasibleWitness: return "feasible_witness";
        case LevelVerdict::Infeasible: return "infeasible";
        case LevelVerdict::EpsilonFeasible: return "epsilon_feasible";
    }
    return "unknown";
}

struct LevelFeasibility {
    LevelVerdict verdict = LevelVerdict::Infeasible;
    std::optional<EpigraphPoint> witness;
    std::size_t iterations = 0;
    bool budget_hit = false;      // ran out of iterations rather than proving anything
    bool target_reached = false;  // stop_at_value fired during this query

    bool feasible() const { return verdict != LevelVerdict::Infeasible; }
};

struct MetastepResult {
    Vector best_point;
    double best_value = 0.0;
    MetastepStatus status = MetastepStatus::BoundaryReached;
    std::size_t iterations = 0;
    std::size_t level_queries = 0;
    std::vector<std::size_t> query_iterations;  // one entry per level query, all metasteps
    std::size_t metasteps = 0;
    double alpha_low = 0.0;  // last metastep's bracket
    double alpha_high = 0.0;
    double final_radius = 0.0;
    bool target_reached = false;
    std::vector<TraceRecord> trace;  // filled when record_trace is set
};

/// Deep-cut slack f(center) - f_best, clamped at zero.
inline double choose_cut_depth(double f_center, double f_best) { return std::max(0.0, f_center - f_best); }

inline double choose_cut_depth(const ConvexOracle& f, double f_best, const Vector& center) {
    return choose_cut_depth(f.eval(center), f_best);
}

struct ProbeResult {
    double best_value;
    std::optional<Vector> best_point;  // set only when a probe beat the incumbent
    std::size_t evaluations = 0;
};

/**
 * @brief Exploratory moves x ± beta e_p along every coordinate axis.
 *
 * Returns the lowest probe value if it beats `f_best`, otherwise `f_best`
 * unchanged. The optional `visit` callback sees every probe and its value.
 */
inline ProbeResult pattern_probe(const ConvexOracle& f, const Vector& center, double beta, double f_best,
                                 const std::function<void(const Vector&, double)>& visit = {}) {
    if (!(beta > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "pattern step must be positive");
    }
    ProbeResult out{f_best, std::nullopt, 0};
    Vector probe = center;
    for (Eigen::Index p = 0; p < center.size(); ++p) {
        for (const double sign : {1.0, -1.0}) {
            probe[p] = center[p] + sign * beta;
            const double value = f.eval(probe);
            ++out.evaluations;
            if (visit) {
                visit(probe, value);
            }
            if (value < out.best_value) {
                out.best_value = value;
                out.best_point = probe;
            }
            probe[p] = center[p];
        }
    }
    return out;
}

namespace detail {

// Shared state of one metastep: the lifted ball, incumbent and pattern step.
class MetastepSearch {
  public:
    MetastepSearch(const ConvexOracle& f, const MetastepConfig& cfg, const LinearConstraintSet* extra,
                   const TraceSink& sink, std::vector<TraceRecord>* trace)
        : f_(f), cfg_(cfg), sink_(sink), trace_(trace) {
        if (extra) {
            if (extra->dim() != f.dim()) {
                throw Error(ErrorKind::DimensionMismatch, "constraint set dimension differs from oracle");
            }
            extra_ = extra->normalized();
        }
    }

    void start(const Vector& x0, double radius, std::size_t metastep) {
        if (x0.size() != f_.dim()) {
            throw Error(ErrorKind::DimensionMismatch, "start point dimension differs from oracle");
        }
        x0_ = x0;
        fx0_ = f_.eval(x0);
        if (!std::isfinite(fx0_)) {
            throw Error(ErrorKind::InvalidArgument, "f(x0) is not finite");
        }
        z0_.resize(x0.size() + 1);
        z0_ << x0, fx0_;
        radius_ = radius;
        metastep_ = metastep;
        query_ = 0;
        beta_ = cfg_.pattern_beta ? *cfg_.pattern_beta : radius / 4.0;
        incumbent_.reset();
        best_level_ = std::numeric_limits<double>::infinity();
        observe(x0_, fx0_);
    }

    double fx0() const { return fx0_; }
    const Vector& z0() const { return z0_; }
    double radius() const { return radius_; }
    double best_level() const { return best_level_; }
    bool target_reached() const { return target_.has_value(); }
    const std::optional<std::pair<Vector, double>>& target() const { return target_; }
    const std::optional<std::pair<Vector, double>>& incumbent() const { return incumbent_; }

    LevelFeasibility query(double alpha);

  private:
    struct Candidate {
        Vector normal;
        double gamma;
        CutSource source;
    };

    bool in_extra(const Vector& x) const {
        return !extra_ || extra_->violation(x).value <= cfg_.constraint_tolerance;
    }

    // Lowest y with (x, y) in the lifted ball and y >= fx, if any.
    std::optional<double> lowest_lift(const Vector& x, double fx) const {
        const double planar = (x - x0_).squaredNorm();
        const double r2 = radius_ * radius_;
        if (planar > r2) {
            return std::nullopt;
        }
        const double y = std::max(fx, fx0_ - std::sqrt(r2 - planar));
        if (y > fx0_ + std::sqrt(r2 - planar)) {
            return std::nullopt;
        }
        return y;
    }

    void observe(const Vector& x, double fx) {
        if (!in_extra(x)) {
            return;
        }
        if (cfg_.stop_at_value && fx <= *cfg_.stop_at_value && !target_) {
            target_ = std::make_pair(x, fx);
        }
        const auto lift = lowest_lift(x, fx);
        if (!lift) {
            return;
        }
        best_level_ = std::min(best_level_, *lift);
        // the incumbent must itself lie in the lifted ball, not below it
        if (*lift == fx && (!incumbent_ || fx < incumbent_->second)) {
            incumbent_ = std::make_pair(x, fx);
        }
    }

    void emit(std::size_t iteration, double alpha, const Vector& center, double fx, const Candidate& cut,
              double log_volume) {
        if (!sink_ && !trace_) {
            return;
        }
        TraceRecord rec{metastep_, query_, iteration, alpha, center, fx, cut.source, cut.gamma, log_volume};
        if (sink_) {
            sink_(rec);
        }
        if (trace_) {
            trace_->push_back(std::move(rec));
        }
    }

    const ConvexOracle& f_;
    const MetastepConfig& cfg_;
    std::optional<LinearConstraintSet> extra_;
    const TraceSink& sink_;
    std::vector<TraceRecord>* trace_;

    Vector x0_;
    double fx0_ = 0.0;
    Vector z0_;
    double radius_ = 0.0;
    std::size_t metastep_ = 0;
    std::size_t query_ = 0;
    double beta_ = 0.0;
    double best_level_ = 0.0;
    std::optional<std::pair<Vector, double>> incumbent_;
    std::optional<std::pair<Vector, double>> target_;
};

inline LevelFeasibility MetastepSearch::query(double alpha) {
    const Eigen::Index n = f_.dim();
    const Eigen::Index d = n + 1;
    const double eps = cfg_.level_tolerance;
    const bool deep = cfg_.cut_mode != CutMode::Central;
    const bool probing = cfg_.cut_mode == CutMode::DeepWithPatternSearch;

    MetastepConfig local = cfg_;
    local.radius = radius_;
    const std::size_t budget = local.iteration_budget(n);
    const double floor = local.volume_floor(n);

    Vector level_normal = Vector::Zero(d);
    level_normal[n] = 1.0;
    Vector level_anchor = z0_;
    level_anchor[n] = alpha;
    const Halfspace below_level(level_normal, level_anchor);

    Ellipsoid ell = Ellipsoid::ball(z0_, radius_);
    LevelFeasibility out;

    auto finish = [&](LevelVerdict verdict, std::optional<EpigraphPoint> witness, std::size_t iterations) {
        out.verdict = verdict;
        out.witness = std::move(witness);
        out.iterations = iterations;
        out.target_reached = target_reached();
        ++query_;
        return out;
    };

    for (std::size_t k = 0; k < budget; ++k) {
        const Vector center = ell.center();
        const Vector x = center.head(n);
        const double y = center[n];
        const double fx = f_.eval(x);
        observe(x, fx);
        if (target_reached()) {
            return finish(fx <= alpha ? LevelVerdict::FeasibleWitness : LevelVerdict::Infeasible,
                          EpigraphPoint{x, fx}, k);
        }

        const auto extra_violation =
            extra_ ? extra_->violation(x) : LinearConstraintSet::Violation{-std::numeric_limits<double>::infinity(), -1};
        const bool x_ok = extra_violation.value <= cfg_.constraint_tolerance;
        const Vector offset = center - z0_;
        const double offset_norm = offset.norm();
        const double ball_gap = offset_norm - radius_;
        const bool in_domain = fx <= y && ball_gap <= 0.0 && x_ok;

        if (in_domain) {
            if (y <= alpha) {
                return finish(LevelVerdict::FeasibleWitness, EpigraphPoint{x, y}, k);
            }
            if (y - alpha <= eps) {
                return finish(LevelVerdict::EpsilonFeasible, EpigraphPoint{x, y}, k);
            }
        }
        if (deep && x_ok && fx <= alpha) {
            if (const auto lift = lowest_lift(x, fx); lift && *lift <= alpha) {
                return finish(LevelVerdict::FeasibleWitness, EpigraphPoint{x, *lift}, k);
            }
        }
        if (probing) {
            std::optional<EpigraphPoint> hit;
            const double before = incumbent_ ? incumbent_->second : std::numeric_limits<double>::infinity();
            const auto probe = pattern_probe(f_, x, beta_, before, [&](const Vector& p, double fp) {
                observe(p, fp);
                if (!hit && fp <= alpha && in_extra(p)) {
                    if (const auto lift = lowest_lift(p, fp); lift && *lift <= alpha) {
                        hit = EpigraphPoint{p, *lift};
                    }
                }
            });
            if (target_reached()) {
                const auto& [tx, tf] = *target_;
                return finish(tf <= alpha ? LevelVerdict::FeasibleWitness : LevelVerdict::Infeasible,
                              EpigraphPoint{tx, tf}, k);
            }
            if (hit) {
                return finish(LevelVerdict::FeasibleWitness, std::move(hit), k);
            }
            if (!probe.best_point) {
                beta_ = std::max(0.5 * beta_, eps);
            }
        }

        const Vector g = f_.subgradient(x);
        std::vector<Candidate> candidates;
        if (in_domain) {
            // center feasible but above the level: cut horizontally
            candidates.push_back({level_normal, deep ? y - alpha : 0.0, CutSource::Level});
        } else {
            const double epi_violation = fx > y ? (fx - y) / std::sqrt(g.squaredNorm() + 1.0) : -1.0;
            const double ball_violation = ball_gap > 0.0 ? ball_gap : -1.0;
            const double extra_value = x_ok ? -1.0 : extra_violation.value;
            if (epi_violation > 0.0 && epi_violation >= ball_violation && epi_violation >= extra_value) {
                Vector normal(d);
                normal << g, -1.0;
                candidates.push_back({std::move(normal), deep ? fx - y : 0.0, CutSource::Epigraph});
            } else if (ball_violation > 0.0 && ball_violation >= extra_value) {
                candidates.push_back({offset, deep ? offset_norm * ball_gap : 0.0, CutSource::Ball});
            } else {
                Vector normal = Vector::Zero(d);
                normal.head(n) = extra_->rows().row(extra_violation.row).transpose();
                candidates.push_back({std::move(normal), deep ? extra_violation.value : 0.0, CutSource::Constraint});
            }
        }
        if (deep && fx > alpha && g.squaredNorm() > 0.0) {
            // every point of S(alpha) has f <= alpha, so g^T (x' - x) + f(x) - alpha <= 0
            Vector normal = Vector::Zero(d);
            normal.head(n) = g;
            candidates.push_back({std::move(normal), choose_cut_depth(fx, alpha), CutSource::Objective});
        }

        const Matrix& P = ell.shape_inv();
        const Candidate* chosen = &candidates.front();
        double chosen_depth = chosen->gamma / std::sqrt(chosen->normal.dot(P * chosen->normal));
        for (const auto& c : candidates) {
            const double depth = c.gamma / std::sqrt(c.normal.dot(P * c.normal));
            if (depth > chosen_depth) {
                chosen = &c;
                chosen_depth = depth;
            }
        }

        auto outcome = detail::apply_cut(ell, chosen->normal, chosen->gamma);
        if (outcome.kind == CutKind::EmptyIntersection) {
            emit(k, alpha, center, fx, *chosen, ell.log_volume_ratio());
            return finish(LevelVerdict::Infeasible, std::nullopt, k + 1);
        }
        if (outcome.kind == CutKind::NoCut) {
            outcome = detail::apply_cut(ell, chosen->normal, 0.0);
        }
        ell = std::move(*outcome.ellipsoid);
        emit(k, alpha, center, fx, *chosen, ell.log_volume_ratio());

        if (!intersects_halfspace(ell, below_level) || ell.log_volume_ratio() < floor) {
            return finish(LevelVerdict::Infeasible, std::nullopt, k + 1);
        }
    }
    out.budget_hit = true;
    return finish(LevelVerdict::Infeasible, std::nullopt, budget);
}

inline void check_level(double alpha, double fx0, double radius) {
    const double slack = 1e-12 * (1.0 + std::abs(fx0) + radius);
    if (!(alpha >= fx0 - radius - slack && alpha <= fx0 + radius + slack)) {
        throw Error(ErrorKind::InvalidBracket, "level must lie in [f(x0) - R, f(x0) + R]");
    }
}

// One metastep: bisection of [f(x0) - R, f(x0) + R] driven by level queries.
inline MetastepResult bisect(MetastepSearch& search, const MetastepConfig& cfg) {
    MetastepResult res;
    const double eps = cfg.level_tolerance;
    const double radius = search.radius();
    double lo = search.fx0() - radius;
    double hi = std::min(search.fx0() + radius, search.best_level());
    bool budget_hit = false;

    while (hi - lo > eps && !search.target_reached()) {
        const double mid = 0.5 * (lo + hi);
        const auto level = search.query(mid);
        ++res.level_queries;
        res.iterations += level.iterations;
        res.query_iterations.push_back(level.iterations);
        budget_hit = budget_hit || level.budget_hit;
        if (level.target_reached) {
            break;
        }
        if (level.feasible()) {
            hi = mid;
        } else {
            lo = mid;
        }
        hi = std::min(hi, search.best_level());
        lo = std::min(lo, hi);
    }

    res.alpha_low = lo;
    res.alpha_high = hi;
    res.final_radius = radius;
    res.metasteps = 1;
    if (search.target_reached()) {
        res.target_reached = true;
        res.best_point = search.target()->first;
        res.best_value = search.target()->second;
    } else if (search.incumbent()) {
        res.best_point = search.incumbent()->first;
        res.best_value = search.incumbent()->second;
    } else {
        res.best_point = search.z0().head(search.z0().size() - 1);
        res.best_value = search.fx0();
        res.status = MetastepStatus::BudgetExhausted;
        return res;
    }

    Vector lifted(res.best_point.size() + 1);
    lifted << res.best_point, res.best_value;
    const double boundary_margin = 10.0 * eps;
    if (budget_hit) {
        res.status = MetastepStatus::BudgetExhausted;
    } else if ((lifted - search.z0()).norm() < radius - boundary_margin) {
        res.status = MetastepStatus::GlobalOptimumCertified;
    } else {
        res.status = MetastepStatus::BoundaryReached;
    }
    return res;
}

}  // namespace detail

/**
 * @brief Decides whether S(alpha) = B((x0, f(x0)), R) ∩ epi(f) ∩ {y <= alpha} is nonempty.
 *
 * Runs the ellipsoid method in R^{n+1} from the lifted ball. `extra`, when
 * given, further restricts x to a polyhedron.
 */
inline LevelFeasibility level_set_feasible(const ConvexOracle& f, const Vector& x0, const MetastepConfig& cfg,
                                           double alpha, const LinearConstraintSet* extra = nullptr,
                                           const TraceSink& sink = {}) {
    cfg.validate();
    detail::MetastepSearch search(f, cfg, extra, sink, nullptr);
    search.start(x0, cfg.radius, 0);
    detail::check_level(alpha, search.fx0(), cfg.radius);
    return search.query(alpha);
}

/// One metastep: bisection over the level from x0 with radius cfg.radius.
inline MetastepResult bisect_level(const ConvexOracle& f, const Vector& x0, const MetastepConfig& cfg,
                                   const LinearConstraintSet* extra = nullptr, const TraceSink& sink = {}) {
    cfg.validate();
    std::vector<TraceRecord> trace;
    detail::MetastepSearch search(f, cfg, extra, sink, cfg.record_trace ? &trace : nullptr);
    search.start(x0, cfg.radius, 0);
    auto res = detail::bisect(search, cfg);
    res.trace = std::move(trace);
    return res;
}

/**
 * @brief Outer loop: repeats metasteps, recentering at the best point while
 * the previous one ended on the ball boundary.
 *
 * Stops on a certified optimum, a reached target, exhausted metasteps, or
 * a metastep that failed to lower the best value.
 */
inline MetastepResult run_metasteps(const ConvexOracle& f, const Vector& x0, const MetastepConfig& cfg,
                                    const LinearConstraintSet* extra = nullptr, const TraceSink& sink = {}) {
    cfg.validate();
    std::vector<TraceRecord> trace;
    detail::MetastepSearch search(f, cfg, extra, sink, cfg.record_trace ? &trace : nullptr);

    MetastepResult total;
    Vector center = x0;
    double radius = cfg.radius;
    for (std::size_t step = 0; step < cfg.max_metasteps; ++step) {
        search.start(center, radius, step);
        auto res = detail::bisect(search, cfg);

        const bool improved = step == 0 || res.best_value < total.best_value;
        total.iterations += res.iterations;
        total.level_queries += res.level_queries;
        total.query_iterations.insert(total.query_iterations.end(), res.query_iterations.begin(),
                                      res.query_iterations.end());
        total.metasteps = step + 1;
        if (improved) {
            total.best_point = res.best_point;
            total.best_value = res.best_value;
        }
        total.status = res.status;
        total.alpha_low = res.alpha_low;
        total.alpha_high = res.alpha_high;
        total.final_radius = res.final_radius;
        total.target_reached = res.target_reached;

        if (res.target_reached || res.status != MetastepStatus::BoundaryReached || !improved) {
            break;
        }
        center = res.best_point;
        radius *= cfg.radius_growth;
    }
    total.trace = std::move(trace);
    return total;
}

}  // namespace ellcut
