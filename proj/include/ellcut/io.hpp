#pragma once

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "ellcut/error.hpp"
#include "ellcut/lp_feasibility.hpp"
#include "ellcut/metastep.hpp"

namespace ellcut::io {

using Json = nlohmann::ordered_json;

struct ProblemFile {
    std::string name;
    Matrix A;
    Vector b;

    LinearSystem system() const { return {A, b}; }
};

namespace detail {

inline double finite_number(const Json& v, const char* what) {
    if (!v.is_number()) {
        throw Error(ErrorKind::InvalidArgument, std::string(what) + " must contain only numbers");
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
        throw Error(ErrorKind::InvalidArgument, std::string(what) + " contains a non-finite number");
    }
    return x;
}

}  // namespace detail

/// Parses {"A": [[...], ...], "b": [...], "name"?: "..."}; A must be rectangular with m >= 1, n >= 1.
inline ProblemFile parse_problem(const std::string& text, const std::string& fallback_name = "") {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("A") || !doc.contains("b")) {
        throw Error(ErrorKind::InvalidArgument, "problem must be an object with \"A\" and \"b\"");
    }
    const Json& a = doc["A"];
    const Json& b = doc["b"];
    if (!a.is_array() || a.empty() || !b.is_array()) {
        throw Error(ErrorKind::InvalidArgument, "\"A\" must be a nonempty array of rows and \"b\" an array");
    }
    const auto m = static_cast<Eigen::Index>(a.size());
    if (!a[0].is_array() || a[0].empty()) {
        throw Error(ErrorKind::InvalidArgument, "rows of \"A\" must be nonempty arrays");
    }
    const auto n = static_cast<Eigen::Index>(a[0].size());
    if (static_cast<Eigen::Index>(b.size()) != m) {
        throw Error(ErrorKind::DimensionMismatch, "\"b\" must have one entry per row of \"A\"");
    }
    ProblemFile out;
    out.A.resize(m, n);
    out.b.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Json& row = a[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
            throw Error(ErrorKind::DimensionMismatch, "\"A\" is not rectangular");
        }
        for (Eigen::Index j = 0; j < n; ++j) {
            out.A(i, j) = detail::finite_number(row[static_cast<std::size_t>(j)], "\"A\"");
        }
        out.b[i] = detail::finite_number(b[static_cast<std::size_t>(i)], "\"b\"");
    }
    out.name = fallback_name;
    if (doc.contains("name")) {
        if (!doc["name"].is_string()) {
            throw Error(ErrorKind::InvalidArgument, "\"name\" must be a string");
        }
        out.name = doc["name"].get<std::string>();
    }
    return out;
}

inline ProblemFile load_problem(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::InvalidArgument, "cannot read " + path);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    std::string stem = path;
    if (const auto slash = stem.find_last_of('/'); slash != std::string::npos) stem = stem.substr(slash + 1);
    if (const auto dot = stem.find_last_of('.'); dot != std::string::npos) stem = stem.substr(0, dot);
    return parse_problem(buffer.str(), stem);
}

inline Json to_json(const Vector& v) {
    Json arr = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

/// Doubles are written in shortest round-trip form; NaN and infinities become null.
inline Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline Json trace_line(const TraceRecord& r) {
    Json j;
    j["metastep"] = r.metastep;
    j["level_query"] = r.level_query;
    j["iteration"] = r.iteration;
    j["level"] = number(r.level);
    j["center"] = to_json(r.center);
    j["f_value"] = number(r.f_value);
    j["cut"] = to_string(r.cut);
    j["gamma"] = number(r.gamma);
    j["log_volume"] = number(r.log_volume);
    return j;
}

inline Json metastep_json(const MetastepResult& r) {
    Json j;
    j["status"] = to_string(r.status);
    j["best_point"] = to_json(r.best_point);
    j["best_value"] = number(r.best_value);
    j["alpha_low"] = number(r.alpha_low);
    j["alpha_high"] = number(r.alpha_high);
    j["metasteps"] = r.metasteps;
    j["level_queries"] = r.level_queries;
    j["ellipsoid_iterations"] = r.iterations;
    std::size_t worst = 0;
    for (const auto it : r.query_iterations) worst = std::max(worst, it);
    j["max_query_iterations"] = worst;
    j["final_radius"] = number(r.final_radius);
    return j;
}

}  // namespace ellcut::io
