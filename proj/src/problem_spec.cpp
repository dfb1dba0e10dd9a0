#include "rspde/problem_spec.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "rspde/expression.hpp"

namespace rspde {
namespace {

using nlohmann::json;

void require_keys(const json& j, const std::string& where,
                  std::initializer_list<const char*> allowed) {
    if (!j.is_object())
        throw ValidationError("config: " + where + " must be an object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw ValidationError("config: unknown key \"" + item.key() + "\" in " +
                                  where);
    }
}

double get_num(const json& j, const std::string& where, const char* key,
               double fallback, bool required = false) {
    if (!j.contains(key)) {
        if (required)
            throw ValidationError("config: missing key \"" + std::string(key) +
                                  "\" in " + where);
        return fallback;
    }
    if (!j[key].is_number())
        throw ValidationError("config: \"" + std::string(key) + "\" in " + where +
                              " must be a number");
    return j[key].get<double>();
}

int get_int(const json& j, const std::string& where, const char* key, int fallback,
            bool required = false) {
    if (!j.contains(key)) {
        if (required)
            throw ValidationError("config: missing key \"" + std::string(key) +
                                  "\" in " + where);
        return fallback;
    }
    if (!j[key].is_number_integer())
        throw ValidationError("config: \"" + std::string(key) + "\" in " + where +
                              " must be an integer");
    return j[key].get<int>();
}

std::string get_str(const json& j, const std::string& where, const char* key,
                    const std::string& fallback, bool required = false) {
    if (!j.contains(key)) {
        if (required)
            throw ValidationError("config: missing key \"" + std::string(key) +
                                  "\" in " + where);
        return fallback;
    }
    if (!j[key].is_string())
        throw ValidationError("config: \"" + std::string(key) + "\" in " + where +
                              " must be a string");
    return j[key].get<std::string>();
}

std::vector<std::string> space_vars(int dim) {
    return dim == 1 ? std::vector<std::string>{"x"}
                    : std::vector<std::string>{"x", "y"};
}

std::vector<std::string> state_vars(int dim) {
    auto vars = space_vars(dim);
    vars.push_back("u");
    return vars;
}

// Eager syntax check; the evaluator is rebuilt by the make_* helpers.
void check_expression(const std::string& text, const std::vector<std::string>& vars,
                      const std::string& where) {
    try {
        Expression::parse(text, vars);
    } catch (const ParseError& e) {
        throw ParseError("config " + where + ": " + e.what(), e.position());
    }
}

std::function<double(Point)> spatial_fn(const std::string& text, int dim) {
    Expression expr = Expression::parse(text, space_vars(dim));
    if (dim == 1)
        return [expr](Point p) { return expr(std::span<const double>(&p.x, 1)); };
    return [expr](Point p) {
        const double args[2] = {p.x, p.y};
        return expr(std::span<const double>(args, 2));
    };
}

SpatialStateFn spatial_state_fn(const std::string& text, int dim) {
    Expression expr = Expression::parse(text, state_vars(dim));
    if (dim == 1)
        return [expr](Point p, double s) {
            const double args[2] = {p.x, s};
            return expr(std::span<const double>(args, 2));
        };
    return [expr](Point p, double s) {
        const double args[3] = {p.x, p.y, s};
        return expr(std::span<const double>(args, 3));
    };
}

void validate_walls_spec(const json& spec, int dim) {
    require_keys(spec, "walls", {"kind", "values"});
    const std::string kind = get_str(spec, "walls", "kind", "", true);
    if (!spec.contains("values") || !spec["values"].is_array() ||
        spec["values"].size() != 2)
        throw ValidationError(
            "config: walls.values must be an array [lower, upper]");
    if (kind == "constant") {
        for (const auto& w : spec["values"])
            if (!w.is_number())
                throw ValidationError("config: constant walls need numeric values");
    } else if (kind == "expression") {
        for (const auto& w : spec["values"]) {
            if (!w.is_string())
                throw ValidationError("config: expression walls need string values");
            check_expression(w.get<std::string>(), space_vars(dim), "walls");
        }
    } else {
        throw ValidationError("config: walls.kind must be constant or expression");
    }
}

void validate_drift_spec(const json& spec, int dim) {
    require_keys(spec, "drift", {"kind", "params"});
    const std::string kind = get_str(spec, "drift", "kind", "", true);
    const json params = spec.value("params", json::object());
    if (kind == "zero") {
        require_keys(params, "drift.params", {});
    } else if (kind == "linear") {
        require_keys(params, "drift.params", {"c0", "c1"});
        if (get_num(params, "drift.params", "c1", 0.0) < 0.0)
            throw ValidationError("config: drift c1 must be >= 0 (monotone drift)");
    } else if (kind == "cubic") {
        require_keys(params, "drift.params", {"c0", "c1", "c3"});
        if (get_num(params, "drift.params", "c1", 0.0) < 0.0 ||
            get_num(params, "drift.params", "c3", 0.0) < 0.0)
            throw ValidationError(
                "config: drift c1 and c3 must be >= 0 (monotone drift)");
    } else if (kind == "expression") {
        require_keys(params, "drift.params", {"expr"});
        check_expression(get_str(params, "drift.params", "expr", "", true),
                         state_vars(dim), "drift");
    } else {
        throw ValidationError(
            "config: drift.kind must be zero, linear, cubic or expression");
    }
}

void validate_diffusion_spec(const json& spec, int dim) {
    require_keys(spec, "diffusion", {"kind", "params"});
    const std::string kind = get_str(spec, "diffusion", "kind", "", true);
    const json params = spec.value("params", json::object());
    if (kind == "constant") {
        require_keys(params, "diffusion.params", {"value"});
        get_num(params, "diffusion.params", "value", 0.0, true);
    } else if (kind == "linear") {
        require_keys(params, "diffusion.params", {"c0", "c1"});
    } else if (kind == "expression") {
        require_keys(params, "diffusion.params", {"expr", "lipschitz"});
        check_expression(get_str(params, "diffusion.params", "expr", "", true),
                         state_vars(dim), "diffusion");
        if (!(get_num(params, "diffusion.params", "lipschitz", 0.0, true) >= 0.0))
            throw ValidationError("config: diffusion lipschitz must be >= 0");
    } else {
        throw ValidationError(
            "config: diffusion.kind must be constant, linear or expression");
    }
}

void validate_v_spec(const json& spec, int dim) {
    require_keys(spec, "v", {"kind", "expr", "path"});
    const std::string kind = get_str(spec, "v", "kind", "", true);
    if (kind == "expression") {
        check_expression(get_str(spec, "v", "expr", "", true), space_vars(dim), "v");
        if (spec.contains("path"))
            throw ValidationError("config: v expression must not carry a path");
    } else if (kind == "file") {
        get_str(spec, "v", "path", "", true);
        if (spec.contains("expr"))
            throw ValidationError("config: v file must not carry an expr");
    } else {
        throw ValidationError("config: v.kind must be expression or file");
    }
}

}  // namespace

ProblemSpec ProblemSpec::from_json(const json& j) {
    require_keys(j, "top level",
                 {"dim", "n", "walls", "drift", "diffusion", "v", "penalty", "tol",
                  "seed", "out", "picard", "condition"});

    ProblemSpec spec;
    spec.dim = get_int(j, "top level", "dim", 0, true);
    spec.n = get_int(j, "top level", "n", 0, true);
    if (spec.dim != 1 && spec.dim != 2)
        throw ValidationError("config: dim must be 1 or 2");
    if (spec.n < 2) throw ValidationError("config: n must be at least 2");

    if (!j.contains("walls"))
        throw ValidationError("config: missing key \"walls\"");
    spec.walls_spec = j["walls"];
    validate_walls_spec(spec.walls_spec, spec.dim);

    spec.drift_spec = j.value("drift", json{{"kind", "zero"}});
    validate_drift_spec(spec.drift_spec, spec.dim);

    if (j.contains("diffusion")) {
        spec.diffusion_spec = j["diffusion"];
        validate_diffusion_spec(spec.diffusion_spec, spec.dim);
    }
    if (j.contains("v")) {
        spec.v_spec = j["v"];
        validate_v_spec(spec.v_spec, spec.dim);
    }

    const json penalty = j.value("penalty", json::object());
    require_keys(penalty, "penalty", {"epsilon0", "rho", "stages"});
    spec.penalty.epsilon = get_num(penalty, "penalty", "epsilon0", 1e-2);
    spec.penalty.delta = 1e-2 * spec.penalty.epsilon;
    spec.penalty.rho = get_num(penalty, "penalty", "rho", 0.25);
    spec.penalty.stages = get_int(penalty, "penalty", "stages", 8);
    spec.penalty.validate();

    spec.tol = get_num(j, "top level", "tol", 1e-10);
    if (!(spec.tol > 0.0)) throw ValidationError("config: tol must be positive");

    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
            throw ValidationError("config: seed must be a nonnegative integer");
        const auto s = j["seed"].get<std::int64_t>();
        if (s < 0) throw ValidationError("config: seed must be nonnegative");
        spec.seed = j["seed"].get<std::uint64_t>();
    }
    spec.out_dir = get_str(j, "top level", "out", "out");

    const json picard = j.value("picard", json::object());
    require_keys(picard, "picard", {"max_iterations", "tol"});
    spec.picard_max_iterations = get_int(picard, "picard", "max_iterations", 50);
    spec.picard_tol = get_num(picard, "picard", "tol", 1e-8);
    if (spec.picard_max_iterations < 1)
        throw ValidationError("config: picard.max_iterations must be >= 1");
    if (!(spec.picard_tol > 0.0))
        throw ValidationError("config: picard.tol must be positive");

    const json cond = j.value("condition", json::object());
    require_keys(cond, "condition", {"p", "lambda", "a", "B", "cp"});
    spec.cond_p = get_num(cond, "condition", "p", 0.0);
    spec.cond_lambda = get_num(cond, "condition", "lambda", 0.0);
    spec.cond_a = get_num(cond, "condition", "a", 1.0);
    spec.cond_b = get_num(cond, "condition", "B", 1.0);
    spec.cond_cp = get_num(cond, "condition", "cp", 0.0);

    return spec;
}

json ProblemSpec::echo() const {
    json j;
    j["dim"] = dim;
    j["n"] = n;
    j["walls"] = walls_spec;
    j["drift"] = drift_spec;
    if (has_diffusion()) j["diffusion"] = diffusion_spec;
    if (has_v()) j["v"] = v_spec;
    j["penalty"] = {{"epsilon0", penalty.epsilon},
                    {"rho", penalty.rho},
                    {"stages", penalty.stages}};
    j["tol"] = tol;
    j["seed"] = seed;
    j["picard"] = {{"max_iterations", picard_max_iterations}, {"tol", picard_tol}};
    const ContractionInputs ci = make_condition_inputs();
    j["condition"] = {{"p", ci.p},
                      {"lambda", ci.lambda},
                      {"a", ci.a},
                      {"B", ci.b_holder},
                      {"cp", ci.c_p}};
    return j;
}

Grid ProblemSpec::make_grid() const { return Grid(dim, n); }

WallPair ProblemSpec::make_walls(const Grid& grid) const {
    const std::string kind = walls_spec["kind"].get<std::string>();
    if (kind == "constant") {
        const double lo = walls_spec["values"][0].get<double>();
        const double hi = walls_spec["values"][1].get<double>();
        return WallPair::from_functions(
            grid, [lo](Point) { return lo; }, [hi](Point) { return hi; });
    }
    return WallPair::from_functions(
        grid, spatial_fn(walls_spec["values"][0].get<std::string>(), dim),
        spatial_fn(walls_spec["values"][1].get<std::string>(), dim));
}

Drift ProblemSpec::make_drift() const {
    const std::string kind = drift_spec["kind"].get<std::string>();
    const json params = drift_spec.value("params", json::object());
    if (kind == "zero") return Drift::zero();
    if (kind == "linear") {
        const double c0 = params.value("c0", 0.0);
        const double c1 = params.value("c1", 0.0);
        return Drift([c0, c1](Point, double s) { return c0 + c1 * s; });
    }
    if (kind == "cubic") {
        const double c0 = params.value("c0", 0.0);
        const double c1 = params.value("c1", 0.0);
        const double c3 = params.value("c3", 0.0);
        return Drift([c0, c1, c3](Point, double s) { return c0 + c1 * s + c3 * s * s * s; });
    }
    return Drift(spatial_state_fn(params["expr"].get<std::string>(), dim));
}

Diffusion ProblemSpec::make_diffusion() const {
    if (!has_diffusion())
        throw ValidationError("config: this run requires a diffusion block");
    const std::string kind = diffusion_spec["kind"].get<std::string>();
    const json params = diffusion_spec.value("params", json::object());
    if (kind == "constant")
        return Diffusion::constant(params["value"].get<double>());
    if (kind == "linear") {
        const double c0 = params.value("c0", 0.0);
        const double c1 = params.value("c1", 0.0);
        return Diffusion([c0, c1](Point, double s) { return c0 + c1 * s; },
                         std::abs(c1));
    }
    return Diffusion(spatial_state_fn(params["expr"].get<std::string>(), dim),
                     params["lipschitz"].get<double>());
}

ScalarField ProblemSpec::make_v(const Grid& grid) const {
    if (!has_v()) throw ValidationError("config: this run requires a v block");
    const std::string kind = v_spec["kind"].get<std::string>();
    if (kind == "expression") {
        auto fn = spatial_fn(v_spec["expr"].get<std::string>(), dim);
        ScalarField v = ScalarField::from_function(grid, fn);
        require_finite(v, "config v expression");
        return v;
    }

    std::string path = v_spec["path"].get<std::string>();
    if (!path.empty() && path[0] != '/' && !config_dir.empty())
        path = config_dir + "/" + path;
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open v file " + path);
    ScalarField v(grid);
    std::vector<bool> seen(grid.node_count(), false);
    std::string line;
    std::size_t filled = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("i,", 0) == 0) continue;
        std::istringstream row(line);
        std::string idx_str, val_str;
        if (!std::getline(row, idx_str, ',') || !std::getline(row, val_str))
            throw ParseError("v file: malformed row \"" + line + "\"");
        std::size_t idx = 0;
        double val = 0.0;
        try {
            idx = std::stoul(idx_str);
            val = std::stod(val_str);
        } catch (const std::exception&) {
            throw ParseError("v file: malformed row \"" + line + "\"");
        }
        if (idx >= grid.node_count())
            throw ValidationError("v file: node index out of range");
        if (seen[idx]) throw ValidationError("v file: duplicate node index");
        seen[idx] = true;
        v.values[idx] = val;
        ++filled;
    }
    if (filled != grid.node_count())
        throw ValidationError("v file: expected one value per interior node");
    require_finite(v, "config v file");
    return v;
}

ContractionInputs ProblemSpec::make_condition_inputs() const {
    ContractionInputs ci;
    ci.dim = dim;
    ci.p = cond_p > 0.0 ? cond_p : (dim == 1 ? 2.0 : 3.0);
    ci.lambda = cond_lambda > 0.0 ? cond_lambda : (dim == 1 ? 1.0 : 0.9);
    ci.a = cond_a;
    ci.b_holder = cond_b;
    ci.c_p = cond_cp;
    return ci;
}

ProblemSpec load_problem_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("config: " + std::string(e.what()), e.byte);
    }
    ProblemSpec spec = ProblemSpec::from_json(j);
    const auto slash = path.find_last_of('/');
    spec.config_dir = slash == std::string::npos ? "." : path.substr(0, slash);
    return spec;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t config_hash(const json& echoed) {
    json identity = echoed;
    identity.erase("seed");  // the hash names the problem, not the realization
    return fnv1a64(identity.dump());
}

std::string hash_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

}  // namespace rspde
