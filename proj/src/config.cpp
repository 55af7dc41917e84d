#include "nlh/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "nlh/errors.hpp"

namespace nlh {

using nlohmann::json;

const std::vector<std::string>& task_names() {
    static const std::vector<std::string> names{"theta",           "correctors", "resolvent-study",
                                                "semigroup-study", "simulate",   "full-report"};
    return names;
}

namespace {

// Reads one JSON object, remembering which keys were consumed so the rest can
// be rejected as unknown.
class ObjectReader {
public:
    ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError(where() + " must be an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return obj_.contains(key);
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return obj_.at(key);
    }

    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    template <class T>
    void read(const std::string& key, T& out) {
        if (!has(key)) return;
        const json& v = obj_.at(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError("");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError("");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) throw ConfigError("");
                if constexpr (std::is_unsigned_v<T>) {
                    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
                        throw ConfigError("");
                }
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw ConfigError("");
            }
            out = v.get<T>();
        } catch (const std::exception&) {
            throw ConfigError(child(key) + ": wrong type (" + std::string(v.type_name()) + ")");
        }
    }

    void read(const std::string& key, std::vector<double>& out) {
        if (!has(key)) return;
        const json& v = obj_.at(key);
        if (!v.is_array()) throw ConfigError(child(key) + " must be an array of numbers");
        out.clear();
        for (const auto& x : v) {
            if (!x.is_number()) throw ConfigError(child(key) + " must be an array of numbers");
            out.push_back(x.get<double>());
        }
    }

    void finish() const {
        std::vector<std::string> unknown;
        for (auto it = obj_.begin(); it != obj_.end(); ++it)
            if (!seen_.count(it.key())) unknown.push_back(it.key());
        if (!unknown.empty()) {
            std::string msg = "unknown key";
            msg += unknown.size() > 1 ? "s" : "";
            for (std::size_t i = 0; i < unknown.size(); ++i) msg += (i ? ", " : " ") + child(unknown[i]);
            throw ConfigError(msg);
        }
    }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

void require_positive(double x, const std::string& key) { require(x > 0.0 && std::isfinite(x), key + " must be positive"); }

void require_eps_list(const std::vector<double>& eps, const std::string& key) {
    require(!eps.empty(), key + " must not be empty");
    for (std::size_t i = 0; i < eps.size(); ++i) {
        require_positive(eps[i], key);
        if (i > 0) require(eps[i] < eps[i - 1], key + " must be strictly decreasing");
    }
}

void parse_kernel(const json& j, KernelConfig& k, const std::string& path) {
    ObjectReader r(j, path);
    r.read("family", k.family);
    r.read("sigma", k.sigma);
    r.read("radius", k.radius);
    r.read("scale", k.scale);
    r.read("file", k.file);
    r.finish();
    require(k.family == "gaussian" || k.family == "compact_bump" || k.family == "tabulated",
            path + ".family must be gaussian, compact_bump or tabulated");
    require_positive(k.scale, path + ".scale");
    if (k.family == "gaussian") require_positive(k.sigma, path + ".sigma");
    if (k.family == "compact_bump") require_positive(k.radius, path + ".radius");
    if (k.family == "tabulated") require(!k.file.empty(), path + ".file is required for tabulated kernels");
}

void parse_coefficient(const json& j, CoefficientConfig& c, int dim, const std::string& path) {
    if (j.is_number()) {
        c = CoefficientConfig{j.get<double>(), {}, {}};
    } else {
        ObjectReader r(j, path);
        r.read("mean", c.mean);
        r.read("file", c.file);
        if (r.has("terms")) {
            const json& terms = r.raw("terms");
            require(terms.is_array(), path + ".terms must be an array");
            c.terms.clear();
            for (std::size_t t = 0; t < terms.size(); ++t) {
                const std::string tp = path + ".terms[" + std::to_string(t) + "]";
                ObjectReader tr(terms[t], tp);
                TrigTerm term;
                std::vector<double> k;
                tr.read("k", k);
                tr.read("cos", term.cos_amp);
                tr.read("sin", term.sin_amp);
                tr.finish();
                require(static_cast<int>(k.size()) == dim, tp + ".k must have one entry per dimension");
                for (int d = 0; d < dim; ++d) {
                    require(k[static_cast<std::size_t>(d)] == std::round(k[static_cast<std::size_t>(d)]),
                            tp + ".k must be integers");
                    term.k[static_cast<std::size_t>(d)] = static_cast<int>(k[static_cast<std::size_t>(d)]);
                }
                c.terms.push_back(term);
            }
        }
        r.finish();
    }
    if (c.file.empty()) {
        double lo = c.mean;
        for (const auto& t : c.terms) lo -= std::hypot(t.cos_amp, t.sin_amp);
        require(lo > 0.0, path + " must be bounded below by a positive constant");
    }
}

void parse_source(ObjectReader& parent, SourceConfig& s, const std::string& path) {
    if (!parent.has("source")) return;
    ObjectReader r(parent.raw("source"), path);
    r.read("amplitude", s.amplitude);
    r.read("width", s.width);
    r.finish();
    require(std::isfinite(s.amplitude), path + ".amplitude must be finite");
    require_positive(s.width, path + ".width");
}

json coefficient_json(const CoefficientConfig& c, int dim) {
    if (!c.file.empty()) return json{{"file", c.file}};
    json terms = json::array();
    for (const auto& t : c.terms) {
        json k = json::array();
        for (int d = 0; d < dim; ++d) k.push_back(t.k[static_cast<std::size_t>(d)]);
        terms.push_back({{"k", k}, {"cos", t.cos_amp}, {"sin", t.sin_amp}});
    }
    return json{{"mean", c.mean}, {"terms", terms}};
}

json source_json(const SourceConfig& s) { return json{{"amplitude", s.amplitude}, {"width", s.width}}; }

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& file) {
    const std::filesystem::path p(file);
    return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

RunConfig parse_config(const json& raw, const std::filesystem::path& base_dir) {
    RunConfig c;
    c.base_dir = base_dir;
    ObjectReader top(raw, "");
    int version = kSchemaVersion;
    top.read("schema_version", version);
    require(version == kSchemaVersion, "schema_version must be " + std::to_string(kSchemaVersion));
    top.read("task", c.task);
    require(std::find(task_names().begin(), task_names().end(), c.task) != task_names().end(),
            "task '" + c.task + "' is not a known command");

    require(top.has("problem"), "problem block is required");
    {
        ObjectReader p(top.raw("problem"), "problem");
        p.read("dim", c.dim);
        require(c.dim >= 1 && c.dim <= kMaxDim, "problem.dim must be 1, 2 or 3");
        if (p.has("kernel")) parse_kernel(p.raw("kernel"), c.kernel, "problem.kernel");
        if (p.has("lambda")) parse_coefficient(p.raw("lambda"), c.lambda, c.dim, "problem.lambda");
        if (p.has("mu")) parse_coefficient(p.raw("mu"), c.mu, c.dim, "problem.mu");
        p.finish();
    }

    if (top.has("numeric")) {
        ObjectReader num(top.raw("numeric"), "numeric");
        num.read("seed", c.seed);
        if (num.has("cell")) {
            ObjectReader r(num.raw("cell"), "numeric.cell");
            CellConfig& x = c.cell;
            r.read("n", x.n);
            r.read("backend", x.backend);
            r.read("tail_tol", x.tail_tol);
            r.read("solvability_rel_tol", x.solvability_rel_tol);
            r.read("residual_rel_tol", x.residual_rel_tol);
            r.read("max_iterations", x.max_iterations);
            r.read("refinement_check", x.refinement_check);
            r.read("refinement_rel_tol", x.refinement_rel_tol);
            r.read("memory_cap_mib", x.memory_cap_mib);
            r.read("dirichlet_rel_tol", x.dirichlet_rel_tol);
            r.finish();
        }
        if (num.has("resolvent")) {
            ObjectReader r(num.raw("resolvent"), "numeric.resolvent");
            ResolventConfig& x = c.resolvent;
            r.read("eps", x.eps);
            r.read("shift", x.shift);
            r.read("half_width", x.half_width);
            r.read("nodes_per_cell", x.nodes_per_cell);
            r.read("tail_mass", x.tail_mass);
            parse_source(r, x.source, "numeric.resolvent.source");
            r.read("final_ratio_max", x.final_ratio_max);
            r.read("step_ratio_max", x.step_ratio_max);
            r.finish();
        }
        if (num.has("semigroup")) {
            ObjectReader r(num.raw("semigroup"), "numeric.semigroup");
            SemigroupConfig& x = c.semigroup;
            r.read("eps", x.eps);
            r.read("horizon", x.horizon);
            r.read("dt", x.dt);
            r.read("mass_tol", x.mass_tol);
            r.read("half_width", x.half_width);
            r.read("nodes_per_cell", x.nodes_per_cell);
            r.read("tail_mass", x.tail_mass);
            parse_source(r, x.source, "numeric.semigroup.source");
            r.finish();
        }
        if (num.has("simulate")) {
            ObjectReader r(num.raw("simulate"), "numeric.simulate");
            SimulateConfig& x = c.simulate;
            r.read("eps", x.eps);
            r.read("kurtosis_eps", x.kurtosis_eps);
            r.read("horizon", x.horizon);
            r.read("times", x.times);
            r.read("paths", x.paths);
            r.read("proposal_budget", x.proposal_budget);
            r.read("keep_paths", x.keep_paths);
            r.read("envelope", x.envelope);
            r.finish();
        }
        num.finish();
    }

    if (top.has("output")) {
        ObjectReader r(top.raw("output"), "output");
        r.read("directory", c.output_directory);
        r.read("csv", c.output.csv);
        r.read("svg", c.output.svg);
        r.finish();
    }
    top.finish();

    // Semantic checks.
    const CellConfig& cell = c.cell;
    require(cell.n >= 4, "numeric.cell.n must be at least 4");
    parse_backend(cell.backend);
    require_positive(cell.tail_tol, "numeric.cell.tail_tol");
    require_positive(cell.solvability_rel_tol, "numeric.cell.solvability_rel_tol");
    require_positive(cell.residual_rel_tol, "numeric.cell.residual_rel_tol");
    require(cell.max_iterations >= 1, "numeric.cell.max_iterations must be at least 1");
    require_positive(cell.refinement_rel_tol, "numeric.cell.refinement_rel_tol");
    require_positive(cell.memory_cap_mib, "numeric.cell.memory_cap_mib");
    require_positive(cell.dirichlet_rel_tol, "numeric.cell.dirichlet_rel_tol");

    const ResolventConfig& res = c.resolvent;
    require_eps_list(res.eps, "numeric.resolvent.eps");
    require_positive(res.shift, "numeric.resolvent.shift");
    require_positive(res.half_width, "numeric.resolvent.half_width");
    require(res.nodes_per_cell >= 8, "numeric.resolvent.nodes_per_cell must be at least 8");
    require_positive(res.tail_mass, "numeric.resolvent.tail_mass");
    require_positive(res.final_ratio_max, "numeric.resolvent.final_ratio_max");
    require_positive(res.step_ratio_max, "numeric.resolvent.step_ratio_max");

    const SemigroupConfig& sg = c.semigroup;
    require_eps_list(sg.eps, "numeric.semigroup.eps");
    require_positive(sg.horizon, "numeric.semigroup.horizon");
    require_positive(sg.dt, "numeric.semigroup.dt");
    const double steps = sg.horizon / sg.dt;
    require(std::abs(steps - std::round(steps)) < 1e-9 * std::max(1.0, steps),
            "numeric.semigroup.horizon must be a multiple of dt");
    require_positive(sg.mass_tol, "numeric.semigroup.mass_tol");
    require_positive(sg.half_width, "numeric.semigroup.half_width");
    require(sg.nodes_per_cell >= 8, "numeric.semigroup.nodes_per_cell must be at least 8");
    require_positive(sg.tail_mass, "numeric.semigroup.tail_mass");

    const SimulateConfig& sim = c.simulate;
    require_positive(sim.eps, "numeric.simulate.eps");
    require(sim.kurtosis_eps.empty() || sim.kurtosis_eps.size() >= 2,
            "numeric.simulate.kurtosis_eps needs at least two values (or none)");
    if (!sim.kurtosis_eps.empty()) require_eps_list(sim.kurtosis_eps, "numeric.simulate.kurtosis_eps");
    require_positive(sim.horizon, "numeric.simulate.horizon");
    require(!sim.times.empty(), "numeric.simulate.times must not be empty");
    for (std::size_t k = 0; k < sim.times.size(); ++k) {
        require(sim.times[k] > 0.0 && sim.times[k] <= sim.horizon,
                "numeric.simulate.times must lie in (0, horizon]");
        if (k > 0) require(sim.times[k] > sim.times[k - 1], "numeric.simulate.times must be strictly increasing");
    }
    require(sim.paths >= 2, "numeric.simulate.paths must be at least 2");
    require_positive(sim.proposal_budget, "numeric.simulate.proposal_budget");
    require(sim.envelope >= 0.0, "numeric.simulate.envelope must be nonnegative");
    return c;
}

json load_config_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    try {
        return json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
}

void apply_override(json& raw, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' must be key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &raw;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) {
        if (part.empty()) throw ConfigError("override key '" + key + "' has an empty segment");
        parts.push_back(part);
    }
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->is_object()) throw ConfigError("override key '" + key + "' does not name an object path");
        node = &(*node)[parts[i]];
        if (node->is_null()) *node = json::object();
    }
    if (!node->is_object()) throw ConfigError("override key '" + key + "' does not name an object path");
    (*node)[parts.back()] = value;
}

json effective_config(const RunConfig& c) {
    json kernel{{"family", c.kernel.family}, {"scale", c.kernel.scale}};
    if (c.kernel.family == "gaussian") kernel["sigma"] = c.kernel.sigma;
    if (c.kernel.family == "compact_bump") kernel["radius"] = c.kernel.radius;
    if (c.kernel.family == "tabulated") kernel["file"] = c.kernel.file;
    const CellConfig& cl = c.cell;
    const ResolventConfig& rs = c.resolvent;
    const SemigroupConfig& sg = c.semigroup;
    const SimulateConfig& sm = c.simulate;
    return json{
        {"schema_version", kSchemaVersion},
        {"task", c.task},
        {"problem",
         {{"dim", c.dim}, {"kernel", kernel}, {"lambda", coefficient_json(c.lambda, c.dim)},
          {"mu", coefficient_json(c.mu, c.dim)}}},
        {"numeric",
         {{"seed", c.seed},
          {"cell",
           {{"n", cl.n},
            {"backend", cl.backend},
            {"tail_tol", cl.tail_tol},
            {"solvability_rel_tol", cl.solvability_rel_tol},
            {"residual_rel_tol", cl.residual_rel_tol},
            {"max_iterations", cl.max_iterations},
            {"refinement_check", cl.refinement_check},
            {"refinement_rel_tol", cl.refinement_rel_tol},
            {"memory_cap_mib", cl.memory_cap_mib},
            {"dirichlet_rel_tol", cl.dirichlet_rel_tol}}},
          {"resolvent",
           {{"eps", rs.eps},
            {"shift", rs.shift},
            {"half_width", rs.half_width},
            {"nodes_per_cell", rs.nodes_per_cell},
            {"tail_mass", rs.tail_mass},
            {"source", source_json(rs.source)},
            {"final_ratio_max", rs.final_ratio_max},
            {"step_ratio_max", rs.step_ratio_max}}},
          {"semigroup",
           {{"eps", sg.eps},
            {"horizon", sg.horizon},
            {"dt", sg.dt},
            {"mass_tol", sg.mass_tol},
            {"half_width", sg.half_width},
            {"nodes_per_cell", sg.nodes_per_cell},
            {"tail_mass", sg.tail_mass},
            {"source", source_json(sg.source)}}},
          {"simulate",
           {{"eps", sm.eps},
            {"kurtosis_eps", sm.kurtosis_eps},
            {"horizon", sm.horizon},
            {"times", sm.times},
            {"paths", sm.paths},
            {"proposal_budget", sm.proposal_budget},
            {"keep_paths", sm.keep_paths},
            {"envelope", sm.envelope}}}}},
        {"output", {{"csv", c.output.csv}, {"svg", c.output.svg}}}};
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::string config_hash(const RunConfig& config) { return sha256_hex(effective_config(config).dump()); }

Kernel make_kernel(const RunConfig& c) {
    const KernelConfig& k = c.kernel;
    if (k.family == "gaussian") return Kernel::gaussian(c.dim, k.sigma, k.scale);
    if (k.family == "compact_bump") return Kernel::compact_bump(c.dim, k.radius, k.scale);
    return Kernel::from_table_file(c.dim, resolve(c.base_dir, k.file), k.scale);
}

CoefficientSpec make_coefficient(const CoefficientConfig& c, int dim, const std::filesystem::path& base_dir) {
    if (!c.file.empty()) return CoefficientSpec::from_file(dim, resolve(base_dir, c.file));
    return CoefficientSpec::trig(dim, c.mean, c.terms);
}

CellProblem make_cell_problem(const RunConfig& c) {
    SolverOptions opts;
    opts.solvability_rel_tol = c.cell.solvability_rel_tol;
    opts.residual_rel_tol = c.cell.residual_rel_tol;
    opts.max_iterations = c.cell.max_iterations;
    return CellProblem{make_kernel(c),
                       make_coefficient(c.lambda, c.dim, c.base_dir),
                       make_coefficient(c.mu, c.dim, c.base_dir),
                       c.cell.n,
                       parse_backend(c.cell.backend),
                       c.cell.tail_tol,
                       static_cast<std::size_t>(c.cell.memory_cap_mib * 1024.0 * 1024.0),
                       opts,
                       c.cell.refinement_check,
                       c.cell.refinement_rel_tol};
}

HomogProblem make_resolvent_problem(const RunConfig& c) {
    const ResolventConfig& r = c.resolvent;
    return HomogProblem{make_kernel(c),
                        make_coefficient(c.lambda, c.dim, c.base_dir),
                        make_coefficient(c.mu, c.dim, c.base_dir),
                        r.half_width,
                        r.nodes_per_cell,
                        r.shift,
                        GaussianSource{r.source.amplitude, r.source.width},
                        r.tail_mass};
}

HomogProblem make_semigroup_problem(const RunConfig& c) {
    const SemigroupConfig& s = c.semigroup;
    return HomogProblem{make_kernel(c),
                        make_coefficient(c.lambda, c.dim, c.base_dir),
                        make_coefficient(c.mu, c.dim, c.base_dir),
                        s.half_width,
                        s.nodes_per_cell,
                        1.0,
                        GaussianSource{s.source.amplitude, s.source.width},
                        s.tail_mass};
}

}  // namespace nlh
