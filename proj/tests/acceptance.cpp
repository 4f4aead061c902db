// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fail.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ellcut/ellcut.hpp"
#include "ellcut/reference_oracles.hpp"

using namespace ellcut;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

Vector gaussian(std::mt19937& rng, Eigen::Index d) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vector v(d);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = g(rng);
    return v;
}

Vector unit(std::mt19937& rng, Eigen::Index d) {
    const Vector v = gaussian(rng, d);
    return v / v.norm();
}

Vector uniform_in_ball(std::mt19937& rng, Eigen::Index d) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return unit(rng, d) * std::pow(u(rng), 1.0 / static_cast<double>(d));
}

Ellipsoid random_ellipsoid(std::mt19937& rng, Eigen::Index d) {
    Matrix L(d, d);
    for (Eigen::Index j = 0; j < d; ++j) L.col(j) = gaussian(rng, d);
    return Ellipsoid(gaussian(rng, d), L * L.transpose() + 0.25 * Matrix::Identity(d, d));
}

// (x - c)^T P^-1 (x - c) computed from P alone.
double form(const Ellipsoid& e, const Vector& x) {
    const Vector diff = x - e.center();
    return diff.dot(e.shape_inv().llt().solve(diff));
}

Matrix sqrt_factor(const Ellipsoid& e) { return e.shape_inv().llt().matrixL(); }

// Uniform sample of E ∩ {h^T (x - c) + alpha sqrt(h^T P h) <= 0} in whitened coordinates.
Vector sample_kept_part(std::mt19937& rng, const Ellipsoid& e, const Matrix& L, const Vector& h, double alpha) {
    const auto d = e.dim();
    const Vector g = (L.transpose() * h).normalized();
    // orthonormal basis with g as first column
    Matrix basis = Matrix::Identity(d, d);
    basis.col(0) = g;
    const Eigen::HouseholderQR<Matrix> qr(basis);
    const Matrix Q = qr.householderQ();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double r = std::sqrt(std::max(0.0, 1.0 - alpha * alpha));
    for (;;) {
        const double t = -1.0 + (1.0 - alpha) * u(rng);
        Vector w(d - 1);
        for (Eigen::Index i = 0; i + 1 < d; ++i) w[i] = r * (2.0 * u(rng) - 1.0);
        if (t * t + w.squaredNorm() > 1.0) continue;
        Vector coords(d);
        coords << t, w;
        // Q's first column is +-g; flip t so the sample is on the kept side
        const double sign = Q.col(0).dot(g) > 0.0 ? 1.0 : -1.0;
        coords[0] *= sign;
        return e.center() + L * (Q * coords);
    }
}

// ---------------------------------------------------------------- criteria

Outcome volume_law() {
    const auto start = Clock::now();
    std::ostringstream msg;
    bool ok = true;
    std::mt19937 rng(101);
    for (const Eigen::Index d : {2, 3, 5, 8}) {
        const double dd = static_cast<double>(d);
        const double closed = dd / (dd + 1.0) * std::pow(dd / std::sqrt(dd * dd - 1.0), dd - 1.0);
        for (int rep = 0; rep < 5; ++rep) {
            const Ellipsoid e = rep == 0 ? Ellipsoid::ball(Vector::Zero(d), 1.0) : random_ellipsoid(rng, d);
            const auto out = central_cut(e, Halfspace(unit(rng, d), e.center()));
            if (!out.updated()) return {false, "central cut did not update"};
            const double tracked = std::exp(out.ellipsoid->log_volume_ratio() - e.log_volume_ratio());
            const double measured =
                std::sqrt(out.ellipsoid->shape_inv().determinant() / e.shape_inv().determinant());
            ok = ok && std::abs(tracked - closed) <= 1e-9 * closed && std::abs(measured - closed) <= 1e-9 * closed &&
                 closed <= std::exp(-1.0 / (2.0 * (dd + 1.0)));
        }
        msg << "d=" << d << " ratio=" << closed << " ";
    }
    const double t = seconds_since(start);
    msg << "time=" << t << "s";
    return {ok && t < 1.0, msg.str()};
}

Outcome unit_case_center() {
    const Ellipsoid e = Ellipsoid::ball(Vector::Zero(2), 1.0);
    Vector h(2);
    h << -1.0, 0.0;  // keep x1 >= 0
    const auto out = central_cut(e, Halfspace(h, Vector::Zero(2)));
    if (!out.updated()) return {false, "no update"};
    const Vector& c = out.ellipsoid->center();
    const double err = std::max(std::abs(c[0] - 1.0 / 3.0), std::abs(c[1]));
    std::ostringstream msg;
    msg << "center=(" << c[0] << ", " << c[1] << ") err=" << err;
    return {err <= 1e-12, msg.str()};
}

Outcome containment() {
    const auto start = Clock::now();
    std::mt19937 rng(202);
    std::uniform_real_distribution<double> depth(0.0, 1.0);
    std::size_t violations = 0;
    std::size_t samples = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index d = 1 + trial % 5;
        const Ellipsoid e = random_ellipsoid(rng, d);
        const Vector h = unit(rng, d);
        const double alpha = depth(rng);
        const double gamma = alpha * std::sqrt(h.dot(e.shape_inv() * h));
        const auto out = deep_cut(e, Halfspace(h, e.center()), gamma);
        if (!out.updated()) return {false, "cut with alpha in [0,1) did not update"};
        const Matrix L = sqrt_factor(e);
        for (int s = 0; s < 1000; ++s) {
            const Vector x = sample_kept_part(rng, e, L, h, alpha);
            ++samples;
            if (form(*out.ellipsoid, x) > 1.0 + 1e-9) ++violations;
        }
    }
    const double t = seconds_since(start);
    std::ostringstream msg;
    msg << samples << " samples, " << violations << " violations, time=" << t << "s";
    return {violations == 0 && t < 10.0, msg.str()};
}

Outcome intersection_test() {
    std::mt19937 rng(303);
    std::normal_distribution<double> g(0.0, 1.5);
    int agree = 0;
    const int total = 1000;
    for (int trial = 0; trial < total; ++trial) {
        const Eigen::Index d = 1 + trial % 5;
        const Ellipsoid e = random_ellipsoid(rng, d);
        const Vector h = unit(rng, d);
        Vector anchor = e.center();
        for (Eigen::Index i = 0; i < d; ++i) anchor[i] += g(rng);
        const double support_min = h.dot(e.center()) - std::sqrt(h.dot(e.shape_inv() * h));
        const bool analytic = h.dot(anchor) > support_min;
        if (intersects_halfspace(e, Halfspace(h, anchor)) == analytic) ++agree;
    }
    std::ostringstream msg;
    msg << agree << "/" << total << " agree";
    return {agree == total, msg.str()};
}

// f(x) = f* + max_k slope_k u_k^T (x - x*), directions spread around the circle.
struct KnownMinimum {
    MaxAffineFunction f;
    Vector argmin;
    double value;
};

KnownMinimum random_known_minimum(std::mt19937& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int pieces = 3 + static_cast<int>(u(rng) * 4.0);
    const double phase = 2.0 * M_PI * u(rng);
    Vector x_star(2);
    x_star << 4.0 * u(rng) - 2.0, 4.0 * u(rng) - 2.0;
    const double f_star = 4.0 * u(rng) - 2.0;
    Matrix A(pieces, 2);
    Vector b(pieces);
    for (int k = 0; k < pieces; ++k) {
        const double angle = phase + 2.0 * M_PI * (k + 0.3 * (u(rng) - 0.5)) / pieces;
        const double slope = 0.5 + u(rng);
        A(k, 0) = slope * std::cos(angle);
        A(k, 1) = slope * std::sin(angle);
        b[k] = f_star - A.row(k).dot(x_star);
    }
    return {MaxAffineFunction(A, b), x_star, f_star};
}

std::vector<KnownMinimum> minimization_corpus() {
    std::mt19937 rng(404);
    std::vector<KnownMinimum> out;
    for (int i = 0; i < 30; ++i) out.push_back(random_known_minimum(rng));
    return out;
}

Vector start_near(const Vector& x_star, double radius, int index) {
    std::mt19937 rng(500 + index);
    return x_star + 0.5 * radius * uniform_in_ball(rng, 2);
}

constexpr CutMode kModes[] = {CutMode::Central, CutMode::Deep, CutMode::DeepWithPatternSearch};

Outcome minimization_accuracy() {
    const auto start = Clock::now();
    const auto corpus = minimization_corpus();
    const double radius = 2.0;
    double worst = 0.0;
    int good = 0;
    int total = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        for (const auto mode : kModes) {
            MetastepConfig cfg;
            cfg.radius = radius;
            cfg.level_tolerance = 1e-4;
            cfg.cut_mode = mode;
            cfg.max_metasteps = 4;
            const auto res = run_metasteps(corpus[i].f, start_near(corpus[i].argmin, radius, static_cast<int>(i)), cfg);
            const double err = std::abs(res.best_value - corpus[i].value);
            worst = std::max(worst, err);
            ++total;
            if (err <= 1e-4) ++good;
        }
    }
    const double t = seconds_since(start);
    std::ostringstream msg;
    msg << good << "/" << total << " within 1e-4 (30 functions x 3 cut modes), worst=" << worst << ", time=" << t
        << "s";
    return {good == total && t < 60.0, msg.str()};
}

Outcome iteration_budget() {
    const auto corpus = minimization_corpus();
    const double radius = 2.0;
    const double eps = 1e-4;
    std::size_t queries = 0;
    std::size_t worst_iters = 0;
    std::size_t worst_queries = 0;
    bool ok = true;
    const std::size_t iter_bound = MetastepConfig::budget_formula(2, radius, eps) + 5;
    MetastepConfig probe;
    probe.radius = radius;
    probe.level_tolerance = eps;
    const std::size_t query_bound = probe.query_bound();
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        for (const auto mode : kModes) {
            MetastepConfig cfg = probe;
            cfg.cut_mode = mode;
            cfg.max_metasteps = 4;
            cfg.record_trace = true;
            const auto res = run_metasteps(corpus[i].f, start_near(corpus[i].argmin, radius, static_cast<int>(i)), cfg);
            for (const auto it : res.query_iterations) {
                worst_iters = std::max(worst_iters, it);
                ok = ok && it <= iter_bound;
            }
            queries += res.query_iterations.size();
            // queries per metastep, from the trace's (metastep, level_query) indices
            std::vector<std::size_t> per_step(res.metasteps, 0);
            for (const auto& r : res.trace) per_step[r.metastep] = std::max(per_step[r.metastep], r.level_query + 1);
            for (const auto q : per_step) worst_queries = std::max(worst_queries, q);
            ok = ok && res.level_queries <= res.metasteps * query_bound;
        }
    }
    ok = ok && worst_queries <= query_bound;
    std::ostringstream msg;
    msg << queries << " level queries; max iterations/query " << worst_iters << " <= " << iter_bound
        << "; max queries/metastep " << worst_queries << " <= " << query_bound;
    return {ok, msg.str()};
}

LinearSystem random_system(std::mt19937& rng) {
    std::uniform_int_distribution<int> n_dist(1, 3);
    std::uniform_int_distribution<int> m_dist(1, 8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Eigen::Index n = n_dist(rng);
    const Eigen::Index m = m_dist(rng);
    Matrix A(m, n);
    Vector b(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) A(i, j) = u(rng);
        b[i] = u(rng);
    }
    return normalize(LinearSystem(A, b)).system;
}

std::vector<LinearSystem> decision_corpus() {
    std::mt19937 rng(606);
    std::vector<LinearSystem> out;
    for (int i = 0; i < 200; ++i) out.push_back(random_system(rng));
    return out;
}

Outcome decision_equivalence() {
    const auto start = Clock::now();
    const auto corpus = decision_corpus();
    int agree = 0;
    int infeasible = 0;
    int certified = 0;
    for (const auto& sys : corpus) {
        const auto d = decide_feasibility(sys);
        const auto oracle = reference::vertex_enumerate_feasible(sys);
        const bool says_feasible = d.verdict != FeasibilityVerdict::InfeasibleNonStrict;
        if (says_feasible == oracle.feasible) ++agree;
        if (!says_feasible) {
            ++infeasible;
            if (d.certificate && validate_certificate(sys, *d.certificate, 1e-7)) ++certified;
        }
    }
    const double t = seconds_since(start);
    std::ostringstream msg;
    msg << agree << "/200 agree with vertex enumeration; " << certified << "/" << infeasible
        << " infeasible verdicts carry a valid certificate; time=" << t << "s";
    return {agree == 200 && certified == infeasible && t < 300.0, msg.str()};
}

Outcome never_both() {
    const auto corpus = decision_corpus();
    int both = 0;
    int points = 0;
    int certificates = 0;
    for (const auto& sys : corpus) {
        const auto d = decide_feasibility(sys);
        const bool has_cert = d.certificate && validate_certificate(sys, *d.certificate, 1e-7);
        RadiusBound rb;
        rb.radius = 20.0;
        SearchSettings ss;
        ss.max_metasteps = 4;
        ss.tol_feas = -1e-7;  // ask for a strictly feasible point
        const auto res = find_feasible_point(sys, rb, ss);
        const bool has_point = res.point && sys.max_violation(*res.point) <= -1e-7;
        points += has_point;
        certificates += has_cert;
        both += has_point && has_cert;
    }
    std::ostringstream msg;
    msg << points << " strict points, " << certificates << " certificates, " << both << " instances with both";
    return {both == 0, msg.str()};
}

Outcome subgradient_bound() {
    std::mt19937 rng(707);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    int sound = 0;
    double worst_gap = std::numeric_limits<double>::infinity();
    while (checked < 50) {
        const Eigen::Index n = 2 + checked % 2;
        const Eigen::Index m = 4 + checked % 4;
        const int active = 1 + checked % 4;
        const double level = 0.05 + 0.5 * u(rng);  // f(0) = level >= 0
        Matrix A(m, n);
        Vector b(m);
        for (Eigen::Index k = 0; k < m; ++k) {
            const bool tie = k < active;
            const double offset = tie ? level : level - 0.1 - 0.8 * u(rng);
            // normalized row: ||A_k||^2 + b_k^2 = 1
            const double clipped = std::max(offset, -0.95);
            A.row(k) = unit(rng, n).transpose() * std::sqrt(1.0 - clipped * clipped);
            b[k] = clipped;
        }
        const LinearSystem sys(A, b);
        const Vector x = Vector::Zero(n);
        const auto bound = subgradient_lower_bound_at(sys, x);
        const double sampled = reference::sample_subgradient_norms(sys, x, 200);
        worst_gap = std::min(worst_gap, sampled - bound.d_lower);
        if (sampled >= bound.d_lower - 1e-6) ++sound;
        ++checked;
    }
    std::ostringstream msg;
    msg << sound << "/50 pairs with lattice min norm >= lower bound - 1e-6 (smallest margin " << worst_gap << ")";
    return {sound == 50, msg.str()};
}

Outcome radius_soundness() {
    std::mt19937 rng(808);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int instances = 0;
    int contained = 0;
    int attempts = 0;
    std::ostringstream msg;
    while (instances < 30 && attempts < 200) {
        ++attempts;
        const Eigen::Index n = 1 + attempts % 3;
        const Eigen::Index m = 2 + attempts % 6;
        Matrix A(m, n);
        Vector b(m);
        for (Eigen::Index k = 0; k < m; ++k) {
            A(k, 0) = 0.2 + 0.4 * (u(rng) + 1.0);  // every row points along +x1: -t e1 is feasible for large t
            for (Eigen::Index j = 1; j < n; ++j) A(k, j) = u(rng);
            b[k] = u(rng);
        }
        const auto sys = normalize(LinearSystem(A, b)).system;
        const auto rb = global_radius(sys);
        if (rb.method != RadiusMethod::GlobalC) continue;
        ++instances;
        const auto oracle = reference::vertex_enumerate_feasible(sys);
        if (oracle.feasible && oracle.witness->norm() <= rb.radius) ++contained;
    }
    msg << contained << "/" << instances << " balls B(0,R) contain the oracle's min-norm feasible point";
    return {instances == 30 && contained == 30, msg.str()};
}

Outcome deep_cut_consistency() {
    std::mt19937 rng(909);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index d = 1 + trial % 6;
        const Ellipsoid e = random_ellipsoid(rng, d);
        const Halfspace h(unit(rng, d), e.center());
        const auto a = central_cut(e, h);
        const auto b = deep_cut(e, h, 0.0);
        const double dc = (a.ellipsoid->center() - b.ellipsoid->center()).norm() /
                          std::max(1.0, a.ellipsoid->center().norm());
        const double dp = (a.ellipsoid->shape_inv() - b.ellipsoid->shape_inv()).norm() /
                          a.ellipsoid->shape_inv().norm();
        worst = std::max({worst, dc, dp});
    }

    // objective cuts at depth f(c) - f_best keep every sampled point with f <= f_best
    std::size_t checked = 0;
    std::size_t excluded = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index d = 2 + trial % 3;
        Matrix A(5, d);
        Vector b(5);
        for (Eigen::Index k = 0; k < 5; ++k) {
            for (Eigen::Index j = 0; j < d; ++j) A(k, j) = u(rng);
            b[k] = u(rng);
        }
        const MaxAffineFunction f(A, b);
        const Ellipsoid e = random_ellipsoid(rng, d);
        const Matrix L = sqrt_factor(e);
        double f_best = f.eval(e.center());
        for (int s = 0; s < 10; ++s) f_best = std::min(f_best, f.eval(e.center() + L * uniform_in_ball(rng, d)));
        const double gamma = choose_cut_depth(f, f_best, e.center());
        const auto out = deep_cut(e, Halfspace(f.subgradient(e.center()), e.center()), gamma);
        if (out.kind == CutKind::EmptyIntersection) return {false, "objective cut claimed an empty intersection"};
        if (!out.updated()) continue;
        for (int s = 0; s < 1000; ++s) {
            const Vector z = e.center() + L * uniform_in_ball(rng, d);
            if (f.eval(z) > f_best) continue;
            ++checked;
            if (form(*out.ellipsoid, z) > 1.0 + 1e-9) ++excluded;
        }
    }
    std::ostringstream msg;
    msg << "zero-depth vs central max rel diff " << worst << "; " << excluded << " of " << checked
        << " sampled points with f <= f_best excluded";
    return {worst <= 1e-14 && excluded == 0 && checked > 0, msg.str()};
}

struct CliRun {
    int code;
    std::string output;
};

CliRun run_cli(const std::string& args) {
    const std::string cmd = std::string(ELLCUT_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return {-1, ""};
    std::string out;
    char buf[4096];
    std::size_t n = 0;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) out.append(buf, n);
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

Outcome cli_contract() {
    const std::string dir = ELLCUT_PROBLEMS_DIR;
    const std::pair<const char*, int> cases[] = {
        {"unit_box.json", 0}, {"contradictory_pair.json", 1}, {"malformed.json", 64}};
    bool ok = true;
    std::ostringstream msg;
    for (const auto& [file, expected] : cases) {
        const auto first = run_cli("decide " + dir + "/" + file);
        const auto second = run_cli("decide " + dir + "/" + file);
        const bool same = first.output == second.output && first.code == second.code;
        ok = ok && same && first.code == expected;
        msg << file << " exit " << first.code << (same ? " identical" : " DIFFERENT") << "; ";
    }
    return {ok, msg.str()};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"1 ellipsoid volume law", volume_law},
        {"2 unit-case center", unit_case_center},
        {"3 containment", containment},
        {"4 intersection test", intersection_test},
        {"5 iteration budget", iteration_budget},
        {"6 minimization accuracy", minimization_accuracy},
        {"7 LP decision equivalence", decision_equivalence},
        {"8 never both point and certificate", never_both},
        {"9 subgradient bound soundness", subgradient_bound},
        {"10 radius soundness", radius_soundness},
        {"11 deep-cut consistency", deep_cut_consistency},
        {"12 CLI determinism and exit codes", cli_contract},
    };
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o{false, ""};
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << name << "]  " << o.detail << std::endl;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
