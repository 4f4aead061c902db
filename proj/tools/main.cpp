#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ellcut/ellcut.hpp"
#include "ellcut/io.hpp"

using namespace ellcut;
using io::Json;

namespace {

constexpr int kExitFeasible = 0;
constexpr int kExitInfeasible = 1;
constexpr int kExitStrictOnly = 2;
constexpr int kExitUndecided = 3;
constexpr int kExitUsage = 64;

struct Options {
    std::string path;
    double eps = 1e-6;
    double tol = 1e-7;
    std::optional<double> radius;
    std::size_t metasteps = 16;
    std::string cut = "deep+ps";
    std::optional<std::string> trace;
    std::optional<std::string> x0;
    double radius_growth = 1.0;
    bool eps_halving = false;
    bool timing = false;
};

CutMode parse_cut(const std::string& s) {
    if (s == "central") return CutMode::Central;
    if (s == "deep") return CutMode::Deep;
    if (s == "deep+ps") return CutMode::DeepWithPatternSearch;
    throw Error(ErrorKind::InvalidArgument, "unknown cut mode " + s);
}

Vector parse_csv(const std::string& text, Eigen::Index n) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size() || !std::isfinite(v)) {
            throw Error(ErrorKind::InvalidArgument, "--x0 entries must be finite numbers");
        }
        values.push_back(v);
    }
    if (static_cast<Eigen::Index>(values.size()) != n) {
        throw Error(ErrorKind::DimensionMismatch, "--x0 must have one entry per column of A");
    }
    return Eigen::Map<Vector>(values.data(), n);
}

void validate(const Options& o) {
    if (!(o.eps > 0.0) || !(o.tol > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "--eps and --tol must be positive");
    }
    if (o.radius && !(*o.radius > 0.0 && std::isfinite(*o.radius))) {
        throw Error(ErrorKind::InvalidArgument, "--radius must be positive and finite");
    }
    if (o.metasteps == 0) {
        throw Error(ErrorKind::InvalidArgument, "--metasteps must be at least 1");
    }
    if (!(o.radius_growth >= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "--radius-growth must be >= 1");
    }
    parse_cut(o.cut);
}

Json config_echo(const Options& o, const char* command) {
    Json c;
    c["command"] = command;
    c["eps"] = o.eps;
    c["tol"] = o.tol;
    c["radius"] = o.radius ? Json(*o.radius) : Json(nullptr);
    c["metasteps"] = o.metasteps;
    c["cut"] = o.cut;
    c["radius_growth"] = o.radius_growth;
    c["eps_halving"] = o.eps_halving;
    if (o.x0) c["x0"] = *o.x0;
    return c;
}

class TraceFile {
  public:
    explicit TraceFile(const std::optional<std::string>& path) {
        if (path) {
            out_.open(*path);
            if (!out_) throw Error(ErrorKind::InvalidArgument, "cannot write trace file " + *path);
        }
    }

    TraceSink sink() {
        if (!out_.is_open()) return {};
        return [this](const TraceRecord& r) { out_ << io::trace_line(r).dump() << '\n'; };
    }

  private:
    std::ofstream out_;
};

// Certificate multipliers for the original rows, scaled to sum to one.
Json certificate_json(const NormalizedSystem& ns, const Vector& q) {
    Vector original = ns.to_original(q);
    original /= original.sum();
    return io::to_json(original);
}

struct DecideOutcome {
    Json report;
    int exit_code = kExitUndecided;
};

DecideOutcome run_decide(const io::ProblemFile& problem, const Options& o) {
    DecideOutcome out;
    Json& r = out.report;
    r["problem"] = problem.name;
    r["n"] = problem.A.cols();
    r["m"] = problem.A.rows();
    NormalizedSystem ns = [&] {
        try {
            return normalize(problem.system());
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::EmptySystem) throw;
            return NormalizedSystem{LinearSystem(Matrix(0, problem.A.cols()), Vector(0)), {}, Vector(), 0};
        }
    }();
    if (ns.system.rows() == 0) {
        r["verdict"] = to_string(FeasibilityVerdict::Feasible);
        r["note"] = "every row is vacuous";
        out.exit_code = kExitFeasible;
        return out;
    }
    DecisionSettings ds;
    ds.tol = o.tol;
    ds.cut_mode = parse_cut(o.cut);
    try {
        const auto d = decide_feasibility(ns.system, ds);
        r["verdict"] = to_string(d.verdict);
        r["d_star"] = d.d_star ? io::number(*d.d_star) : Json(nullptr);
        r["multiplier_band_empty"] = d.band_empty;
        if (d.certificate) r["certificate"] = certificate_json(ns, *d.certificate);
        r["iterations"] = {{"phase1", d.phase1_iterations},
                           {"main", d.iterations},
                           {"level_queries", d.level_queries},
                           {"max_query_iterations", d.max_query_iterations}};
        switch (d.verdict) {
            case FeasibilityVerdict::Feasible: out.exit_code = kExitFeasible; break;
            case FeasibilityVerdict::InfeasibleNonStrict: out.exit_code = kExitInfeasible; break;
            case FeasibilityVerdict::InfeasibleStrictOnly: out.exit_code = kExitStrictOnly; break;
        }
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::SolverBudgetExceeded) throw;
        r["verdict"] = "undecided";
        r["reason"] = e.what();
        out.exit_code = kExitUndecided;
    }
    return out;
}

struct PointOutcome {
    Json report;
    int exit_code = kExitUndecided;
    std::string verdict = "undecided";
    std::size_t level_queries = 0;
    std::size_t max_query_iterations = 0;
    double radius = 0.0;
};

PointOutcome run_find_point(const io::ProblemFile& problem, const Options& o, const TraceSink& trace) {
    PointOutcome out;
    Json& r = out.report;
    r["problem"] = problem.name;
    r["n"] = problem.A.cols();
    r["m"] = problem.A.rows();
    const CutMode mode = parse_cut(o.cut);

    NormalizedSystem ns = [&] {
        try {
            return normalize(problem.system());
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::EmptySystem) throw;
            return NormalizedSystem{LinearSystem(Matrix(0, problem.A.cols()), Vector(0)), {}, Vector(), 0};
        }
    }();
    if (ns.system.rows() == 0) {
        out.verdict = to_string(SearchOutcome::FeasiblePointFound);
        r["verdict"] = out.verdict;
        r["point"] = io::to_json(Vector::Zero(problem.A.cols()));
        out.exit_code = kExitFeasible;
        return out;
    }

    DecisionSettings ds;
    ds.tol = o.tol;
    ds.cut_mode = mode;
    // a Halving bound makes the search try its own radius schedule
    RadiusBound bound;
    bound.method = RadiusMethod::Halving;
    if (o.radius) {
        bound.method = RadiusMethod::GlobalC;
        bound.radius = *o.radius;
        r["radius_source"] = "flag";
    } else if (o.eps_halving) {
        r["radius_source"] = to_string(RadiusMethod::Halving);
    } else {
        try {
            bound = global_radius(ns.system, std::nullopt, ds);
            r["radius_source"] = to_string(bound.method);
            r["c_lower"] = io::number(bound.c_lower);
            if (bound.b_bar) r["b_bar"] = io::number(*bound.b_bar);
            if (bound.a_bar) r["a_bar"] = io::number(*bound.a_bar);
            if (bound.method != RadiusMethod::Halving) r["d_lower"] = io::number(bound.d_lower);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::StrictFeasibilityViolated) throw;
            // no strictly feasible point: settle with the multiplier program
            const auto d = decide_feasibility(ns.system, ds);
            if (d.verdict == FeasibilityVerdict::InfeasibleNonStrict) {
                out.verdict = to_string(SearchOutcome::InfeasibleProven);
                r["verdict"] = out.verdict;
                r["certificate"] = certificate_json(ns, *d.certificate);
                r["d_star"] = io::number(*d.d_star);
                out.exit_code = kExitInfeasible;
                return out;
            }
            r["radius_source"] = to_string(RadiusMethod::Halving);
        }
    }

    SearchSettings ss;
    ss.tol_feas = o.tol;
    ss.eps = o.eps;
    ss.cut_mode = mode;
    ss.max_metasteps = o.metasteps;
    ss.radius_growth = o.radius_growth;
    ss.trace = trace;
    const auto res = find_feasible_point(ns.system, bound, ss);

    out.verdict = to_string(res.outcome);
    out.radius = res.radius_used;
    out.level_queries = res.level_queries;
    for (const auto it : res.metastep_report.query_iterations) {
        out.max_query_iterations = std::max(out.max_query_iterations, it);
    }
    r["verdict"] = out.verdict;
    r["radius"] = io::number(res.radius_used);
    if (res.point) {
        r["point"] = io::to_json(*res.point);
        r["max_violation"] = io::number(problem.system().max_violation(*res.point));
    }
    r["f_value"] = io::number(res.f_value);
    r["attempts"] = res.attempts;
    r["iterations"] = {{"ellipsoid", res.iterations},
                       {"level_queries", res.level_queries},
                       {"max_query_iterations_last_attempt", out.max_query_iterations}};
    r["last_attempt"] = io::metastep_json(res.metastep_report);
    switch (res.outcome) {
        case SearchOutcome::FeasiblePointFound: out.exit_code = kExitFeasible; break;
        case SearchOutcome::InfeasibleProven: out.exit_code = kExitInfeasible; break;
        case SearchOutcome::Undecided: out.exit_code = kExitUndecided; break;
    }
    return out;
}

int emit(Json report, const Options& o, const char* command, double wall_ms, int code) {
    report["config"] = config_echo(o, command);
    if (o.trace) report["trace"] = *o.trace;
    if (o.timing) report["wall_ms"] = wall_ms;
    report["exit_code"] = code;
    std::cout << report.dump(2) << '\n';
    return code;
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

int cmd_decide(const Options& o) {
    const auto start = std::chrono::steady_clock::now();
    const auto problem = io::load_problem(o.path);
    auto out = run_decide(problem, o);
    return emit(std::move(out.report), o, "decide", elapsed_ms(start), out.exit_code);
}

int cmd_find_point(const Options& o) {
    const auto start = std::chrono::steady_clock::now();
    const auto problem = io::load_problem(o.path);
    TraceFile trace(o.trace);
    auto out = run_find_point(problem, o, trace.sink());
    return emit(std::move(out.report), o, "find-point", elapsed_ms(start), out.exit_code);
}

int cmd_minimize(const Options& o) {
    const auto start = std::chrono::steady_clock::now();
    const auto problem = io::load_problem(o.path);
    const MaxAffineFunction f(problem.A, problem.b);
    const Vector x0 = o.x0 ? parse_csv(*o.x0, problem.A.cols()) : Vector::Zero(problem.A.cols());
    TraceFile trace(o.trace);

    MetastepConfig cfg;
    cfg.radius = o.radius.value_or(1.0);
    cfg.level_tolerance = o.eps;
    cfg.cut_mode = parse_cut(o.cut);
    cfg.max_metasteps = o.metasteps;
    cfg.radius_growth = o.radius_growth;
    const auto res = run_metasteps(f, x0, cfg, nullptr, trace.sink());

    Json r;
    r["problem"] = problem.name;
    r["n"] = problem.A.cols();
    r["m"] = problem.A.rows();
    r["verdict"] = to_string(res.status);
    Json body = io::metastep_json(res);
    for (auto it = body.begin(); it != body.end(); ++it) r[it.key()] = it.value();
    r["iteration_budget_per_query"] = cfg.iteration_budget(problem.A.cols());
    const int code = res.status == MetastepStatus::BudgetExhausted ? kExitUndecided : 0;
    return emit(std::move(r), o, "minimize", elapsed_ms(start), code);
}

int cmd_bench(const Options& o) {
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    std::error_code ec;
    for (fs::directory_iterator it(o.path, ec), end; !ec && it != end; it.increment(ec)) {
        if (it->path().extension() == ".json") files.push_back(it->path());
    }
    if (ec) {
        throw Error(ErrorKind::InvalidArgument, "cannot list directory " + o.path);
    }
    std::sort(files.begin(), files.end());

    std::cout << "name,n,m,mode,verdict,level_queries,ellipsoid_iters,wall_ms\n";
    for (const auto& file : files) {
        std::optional<io::ProblemFile> problem;
        try {
            problem = io::load_problem(file.string());
        } catch (const Error& e) {
            std::cerr << "warning: skipping " << file.string() << ": " << e.what() << '\n';
            continue;
        }
        for (const char* mode : {"central", "deep", "deep+ps"}) {
            Options per = o;
            per.cut = mode;
            const auto start = std::chrono::steady_clock::now();
            PointOutcome out;
            try {
                out = run_find_point(*problem, per, {});
            } catch (const Error& e) {
                out.verdict = std::string("error:") + to_string(e.kind());
            }
            std::ostringstream wall;
            wall.setf(std::ios::fixed);
            wall.precision(3);
            wall << elapsed_ms(start);
            std::cout << problem->name << ',' << problem->A.cols() << ',' << problem->A.rows() << ',' << mode << ','
                      << out.verdict << ',' << out.level_queries << ',' << out.max_query_iterations << ','
                      << wall.str() << '\n';
        }
    }
    return 0;
}

void add_common(CLI::App* sub, Options& o, bool search_flags) {
    sub->add_option("--eps", o.eps, "level tolerance of the bisection")->capture_default_str();
    sub->add_option("--tol", o.tol, "feasibility / certificate tolerance")->capture_default_str();
    sub->add_option("--cut", o.cut, "central | deep | deep+ps")->capture_default_str();
    sub->add_flag("--timing", o.timing, "include wall time in the report");
    if (search_flags) {
        sub->add_option("--radius", o.radius, "search radius (skips the radius computation)");
        sub->add_option("--metasteps", o.metasteps, "maximum number of metasteps")->capture_default_str();
        sub->add_option("--radius-growth", o.radius_growth, "radius multiplier between metasteps")
            ->capture_default_str();
        sub->add_option("--trace", o.trace, "write one JSON line per ellipsoid iteration");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ellipsoid-method solver for convex minimization and linear feasibility"};
    app.require_subcommand(1);
    Options o;

    auto* decide = app.add_subcommand("decide", "decide feasibility of A x + b <= 0");
    decide->add_option("problem", o.path, "problem JSON file")->required();
    add_common(decide, o, false);

    auto* find = app.add_subcommand("find-point", "find x with A x + b <= tol");
    find->add_option("problem", o.path, "problem JSON file")->required();
    add_common(find, o, true);
    find->add_flag("--eps-halving", o.eps_halving, "use the radius-halving fallback instead of a computed radius");

    auto* minimize = app.add_subcommand("minimize", "minimize max_k (A_k x + b_k)");
    minimize->add_option("problem", o.path, "problem JSON file")->required();
    add_common(minimize, o, true);
    minimize->add_option("--x0", o.x0, "start point as comma-separated values (default 0)");

    auto* bench = app.add_subcommand("bench", "run find-point on every *.json in a directory under each cut mode");
    bench->add_option("dir", o.path, "problem directory")->required();
    add_common(bench, o, true);
    bench->add_flag("--eps-halving", o.eps_halving, "use the radius-halving fallback");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        validate(o);
        if (decide->parsed()) return cmd_decide(o);
        if (find->parsed()) return cmd_find_point(o);
        if (minimize->parsed()) return cmd_minimize(o);
        return cmd_bench(o);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        if (e.kind() == ErrorKind::SolverBudgetExceeded) return kExitUndecided;
        return kExitUsage;
    }
}
