#include "sdhnn/cli.hpp"

#include "sdhnn/attractor.hpp"
#include "sdhnn/conditions.hpp"
#include "sdhnn/csv.hpp"
#include "sdhnn/errors.hpp"
#include "sdhnn/grid.hpp"
#include "sdhnn/linear_flow.hpp"
#include "sdhnn/noise.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace sdhnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- parsing

[[noreturn]] void bad(const std::string& field, const std::string& what) {
    throw ConfigError(fmt::format("config field '{}': {}", field, what));
}

double get_real(const json& v, const std::string& field) {
    if (!v.is_number()) bad(field, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) bad(field, "must be finite");
    return x;
}

std::int64_t get_int(const json& v, const std::string& field) {
    if (!v.is_number_integer()) bad(field, "expected an integer");
    return v.get<std::int64_t>();
}

std::vector<double> get_reals(const json& v, const std::string& field) {
    if (!v.is_array()) bad(field, "expected a list of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get_real(v[i], fmt::format("{}[{}]", field, i)));
    return out;
}

// A list of rows, or a flat list read as the diagonal.
Matrix get_matrix(const json& v, const std::string& field) {
    if (!v.is_array() || v.empty()) bad(field, "expected a non-empty list");
    if (!v.front().is_array()) {
        const std::vector<double> d = get_reals(v, field);
        return Eigen::Map<const Vector>(d.data(), static_cast<Eigen::Index>(d.size())).asDiagonal();
    }
    const std::size_t rows = v.size();
    const std::size_t cols = v.front().size();
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::string name = fmt::format("{}[{}]", field, r);
        const std::vector<double> row = get_reals(v[r], name);
        if (row.size() != cols) bad(name, "rows have different lengths");
        for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
    return m;
}

ActivationTable get_table(const json& v, const std::string& field) {
    if (!v.is_object() || !v.contains("x") || !v.contains("y")) bad(field, "expected {\"x\": [...], \"y\": [...]}");
    ActivationTable t{get_reals(v["x"], field + ".x"), get_reals(v["y"], field + ".y")};
    if (t.x.size() != t.y.size() || t.x.size() < 2) bad(field, "x and y need the same length, at least 2");
    for (std::size_t i = 1; i < t.x.size(); ++i) {
        if (!(t.x[i] > t.x[i - 1])) bad(field + ".x", "must be strictly increasing");
    }
    return t;
}

ActivationSpec get_activation(const json& v, std::size_t n) {
    if (v.is_null()) return ActivationSpec::tanh(n);
    if (!v.is_object() || !v.contains("kind") || !v["kind"].is_string()) bad("params.activation", "needs a \"kind\"");
    const std::string kind = v["kind"].get<std::string>();
    if (kind == "tanh") return ActivationSpec::tanh(n);
    if (kind != "table") bad("params.activation.kind", fmt::format("unknown kind '{}'", kind));
    for (const char* key : {"f", "g", "lipschitz_f", "lipschitz_g", "bound"}) {
        if (!v.contains(key)) bad(fmt::format("params.activation.{}", key), "missing");
    }
    std::optional<Matrix> linear;
    if (v.contains("linear_part")) linear = get_matrix(v["linear_part"], "params.activation.linear_part");
    return ActivationSpec::table(get_table(v["f"], "params.activation.f"), get_table(v["g"], "params.activation.g"),
                                 get_real(v["lipschitz_f"], "params.activation.lipschitz_f"),
                                 get_real(v["lipschitz_g"], "params.activation.lipschitz_g"),
                                 get_real(v["bound"], "params.activation.bound"), n, linear ? &*linear : nullptr);
}

NetworkParams get_params(const json& v) {
    if (!v.is_object()) bad("params", "expected an object");
    for (const char* key : {"C", "H", "B", "Sigma", "delays"}) {
        if (!v.contains(key)) bad(fmt::format("params.{}", key), "missing");
    }
    NetworkParams p;
    p.C = get_matrix(v["C"], "params.C");
    p.H = get_matrix(v["H"], "params.H");
    p.B = get_matrix(v["B"], "params.B");
    p.Sigma = get_matrix(v["Sigma"], "params.Sigma");
    const std::size_t n = p.n();
    if (v["delays"].is_number()) {
        p.delays.assign(n, get_real(v["delays"], "params.delays"));
    } else {
        p.delays = get_reals(v["delays"], "params.delays");
    }
    p.activation = get_activation(v.contains("activation") ? v["activation"] : json(), n);
    return p;
}

InitialSpec get_initial(const json& v, const std::string& field) {
    InitialSpec s;
    if (v.is_array()) {
        const std::vector<double> head = get_reals(v, field);
        s.constant = Eigen::Map<const Vector>(head.data(), static_cast<Eigen::Index>(head.size()));
        return s;
    }
    if (!v.is_object() || !v.contains("values")) bad(field, "expected a constant head [..] or {\"values\": [[..], ..]}");
    const json& rows = v["values"];
    if (!rows.is_array() || rows.empty()) bad(field + ".values", "expected a list of node values");
    // One row per node, oldest first; stored transposed (n x nodes).
    s.nodes = get_matrix(rows.front().is_array() ? rows : json::array({rows}), field + ".values").transpose();
    return s;
}

Route get_route(const std::string& name) {
    if (name == "direct") return Route::Direct;
    if (name == "conjugated") return Route::Conjugated;
    if (name == "wong-zakai") return Route::WongZakai;
    bad("route", fmt::format("unknown route '{}' (direct, conjugated, wong-zakai)", name));
}

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t col = 1;
    const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

// ---------------------------------------------------------------- output

fs::path prepare_output_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw ConfigError(fmt::format("cannot create output directory '{}': {}", dir.string(), ec.message()));
    }
    const fs::path probe = dir / ".sdhnn-write-probe";
    {
        std::ofstream out(probe);
        if (!out) throw ConfigError(fmt::format("output directory '{}' is not writable", dir.string()));
    }
    fs::remove(probe, ec);
    return dir;
}

std::ofstream open_output(const fs::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw ConfigError(fmt::format("cannot open '{}' for writing", file.string()));
    return out;
}

void write_json(const fs::path& file, const json& doc) {
    std::ofstream out = open_output(file);
    out << doc.dump(2) << '\n';
}

std::string seed_text(const std::optional<std::uint64_t>& seed) { return seed ? std::to_string(*seed) : std::string(); }

std::vector<std::string> header_with(std::initializer_list<const char*> head, std::size_t n, const char* prefix,
                                     bool seed) {
    std::vector<std::string> out(head.begin(), head.end());
    for (std::size_t j = 1; j <= n; ++j) out.push_back(fmt::format("{}{}", prefix, j));
    if (seed) out.emplace_back("seed");
    return out;
}

// ---------------------------------------------------------------- helpers

std::uint64_t require_seed(const RunConfig& cfg) {
    if (!cfg.seed) throw ConfigError("config field 'seed': missing (pass --seed or set it in the config)");
    return *cfg.seed;
}

double aligned_up(double t, double dt) { return std::ceil(t / dt - 1e-9) * dt; }

BrownianPath path_on(const RunConfig& cfg, double t_min, double t_max) {
    return sample_path(cfg.params.n(), cfg.dt, -aligned_up(-t_min, cfg.dt), aligned_up(t_max, cfg.dt),
                       require_seed(cfg));
}

SearchBox box_of(const RunConfig& cfg) { return cfg.search_box ? *cfg.search_box : default_search_box(cfg.params); }

// Roots plus decay constants; throws UnstableLinearizationError when rho >= 0.
SpectralResult stable_spectrum(const RunConfig& cfg, SpectralResult& roots_only) {
    const SearchBox box = box_of(cfg);
    roots_only = dominant_roots(cfg.params, box);
    // Any root with Re >= 0 has |lambda| <= |C| + |K|; probe the part of that
    // half disc the box leaves out so instability is never missed.
    const double reach = spectral_norm(cfg.params.C) + spectral_norm(cfg.params.B * cfg.params.activation.linear_part());
    if (reach > box.re_max) {
        try {
            const SpectralResult right =
                dominant_roots(cfg.params, SearchBox{std::max(0.0, box.re_max), reach, 0.0, reach});
            roots_only.roots.insert(roots_only.roots.end(), right.roots.begin(), right.roots.end());
            roots_only.abscissa = std::max(roots_only.abscissa, right.abscissa);
        } catch (const EmptySpectrumError&) {
        }
    }
    const double rho = roots_only.abscissa;
    if (!(rho < 0.0)) {
        throw UnstableLinearizationError(
            fmt::format("spectral abscissa {} >= 0: the linearization is not exponentially stable", rho));
    }
    const double horizon = aligned_up(std::max(10.0, 12.0 / (-rho)), cfg.dt);
    const FundamentalSolution S = fundamental_solution(cfg.params, horizon, cfg.dt);
    SpectralResult full = roots_only;
    attach(full, decay_constants(rho, S, cfg.gamma_fraction));
    return full;
}

ConditionReport condition_report(const RunConfig& cfg, SpectralResult* spectrum_out, LinearFlow* flow_out) {
    SpectralResult roots;
    const SpectralResult spectral = stable_spectrum(cfg, roots);
    std::pair<double, double> window;
    if (cfg.flow_horizon) {
        window = *cfg.flow_horizon;
    } else {
        window = cfg.params.sigma_is_diagonal() ? std::pair{-20.0, 20.0} : std::pair{0.0, 20.0};
    }
    const BrownianPath path = path_on(cfg, window.first, window.second);
    const LinearFlow flow = build_flow(cfg.params, path, path.t_min(), path.t_max());
    ConditionOptions options;
    options.use_paper_lgtilde = cfg.use_paper_lgtilde;
    ConditionReport report = compute_constants(cfg.params, spectral, flow, cfg.dt, options);
    if (spectrum_out != nullptr) *spectrum_out = spectral;
    if (flow_out != nullptr) *flow_out = flow;
    return report;
}

Trajectory simulate(const RunConfig& cfg, const HistorySegment& phi) {
    switch (cfg.route) {
        case Route::Direct:
            return integrate_direct(cfg.params, path_on(cfg, 0.0, cfg.horizon), phi, cfg.dt, cfg.horizon);
        case Route::Conjugated: {
            const BrownianPath path = path_on(cfg, 0.0, cfg.horizon);
            const LinearFlow flow = build_flow(cfg.params, path, 0.0, path.t_max());
            return integrate_conjugated(cfg.params, flow, phi, cfg.dt, cfg.horizon);
        }
        case Route::WongZakai: {
            const double knot = 1.0 / static_cast<double>(*cfg.k);
            const BrownianPath path = path_on(cfg, 0.0, aligned_up(cfg.horizon, knot));
            return integrate_wong_zakai(cfg.params, path, *cfg.k, phi, cfg.dt, cfg.horizon);
        }
    }
    throw ConfigError("unknown route");
}

void check_mesh(std::int64_t k, double dt, const std::string& field) {
    if (k < 1) bad(field, "must be positive");
    if (!grid_count(1.0 / static_cast<double>(k), dt)) {
        bad(field, fmt::format("mesh 1/{} is not a multiple of dt = {}", k, dt));
    }
}

double max_of(const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }

void write_trajectory_file(const fs::path& file, const Trajectory& traj, std::int64_t stride) {
    std::ofstream out = open_output(file);
    write_trajectory_csv(traj, out, stride);
}

} // namespace

// ---------------------------------------------------------------- config

RunConfig parse_config(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    static const std::vector<std::string> known{
        "params",         "dt",           "horizon",         "seed",           "route",
        "k",              "pullback_times", "initial_segments", "output_dir",   "stride",
        "search_box",     "gamma_fraction", "use_paper_lgtilde", "cocycle_pairs", "wong_zakai_ks",
        "stationary_times", "flow_horizon"};
    for (const auto& item : doc.items()) {
        if (std::find(known.begin(), known.end(), item.key()) == known.end()) bad(item.key(), "unknown field");
    }
    if (!doc.contains("params")) bad("params", "missing");

    RunConfig cfg;
    cfg.params = get_params(doc["params"]);
    if (doc.contains("dt")) cfg.dt = get_real(doc["dt"], "dt");
    if (doc.contains("horizon")) cfg.horizon = get_real(doc["horizon"], "horizon");
    if (doc.contains("seed")) {
        const json& v = doc["seed"];
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
            bad("seed", "expected a non-negative integer");
        }
        cfg.seed = doc["seed"].get<std::uint64_t>();
    }
    if (doc.contains("route")) {
        if (!doc["route"].is_string()) bad("route", "expected a string");
        cfg.route = get_route(doc["route"].get<std::string>());
    }
    if (doc.contains("k") && !doc["k"].is_null()) cfg.k = get_int(doc["k"], "k");
    if (doc.contains("pullback_times")) cfg.pullback_times = get_reals(doc["pullback_times"], "pullback_times");
    if (doc.contains("initial_segments")) {
        const json& segs = doc["initial_segments"];
        if (!segs.is_array()) bad("initial_segments", "expected a list");
        for (std::size_t i = 0; i < segs.size(); ++i) {
            cfg.initial_segments.push_back(get_initial(segs[i], fmt::format("initial_segments[{}]", i)));
        }
    }
    if (doc.contains("output_dir")) {
        if (!doc["output_dir"].is_string()) bad("output_dir", "expected a string");
        cfg.output_dir = doc["output_dir"].get<std::string>();
    }
    if (doc.contains("stride")) cfg.stride = get_int(doc["stride"], "stride");
    if (doc.contains("search_box")) {
        const json& b = doc["search_box"];
        if (!b.is_object()) bad("search_box", "expected {re_min, re_max, im_min, im_max}");
        SearchBox box;
        for (auto [key, slot] : {std::pair{"re_min", &box.re_min}, std::pair{"re_max", &box.re_max},
                                 std::pair{"im_min", &box.im_min}, std::pair{"im_max", &box.im_max}}) {
            if (!b.contains(key)) bad(fmt::format("search_box.{}", key), "missing");
            *slot = get_real(b[key], fmt::format("search_box.{}", key));
        }
        if (!(box.re_min < box.re_max) || !(box.im_min < box.im_max)) bad("search_box", "empty rectangle");
        cfg.search_box = box;
    }
    if (doc.contains("gamma_fraction")) cfg.gamma_fraction = get_real(doc["gamma_fraction"], "gamma_fraction");
    if (doc.contains("use_paper_lgtilde")) {
        if (!doc["use_paper_lgtilde"].is_boolean()) bad("use_paper_lgtilde", "expected true or false");
        cfg.use_paper_lgtilde = doc["use_paper_lgtilde"].get<bool>();
    }
    if (doc.contains("cocycle_pairs")) {
        const json& pairs = doc["cocycle_pairs"];
        if (!pairs.is_array()) bad("cocycle_pairs", "expected a list of [t1, t2]");
        cfg.cocycle_pairs.clear();
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const std::string name = fmt::format("cocycle_pairs[{}]", i);
            const std::vector<double> p = get_reals(pairs[i], name);
            if (p.size() != 2) bad(name, "expected [t1, t2]");
            cfg.cocycle_pairs.emplace_back(p[0], p[1]);
        }
    }
    if (doc.contains("wong_zakai_ks")) {
        const json& ks = doc["wong_zakai_ks"];
        if (!ks.is_array()) bad("wong_zakai_ks", "expected a list of integers");
        cfg.wong_zakai_ks.clear();
        for (std::size_t i = 0; i < ks.size(); ++i) {
            cfg.wong_zakai_ks.push_back(get_int(ks[i], fmt::format("wong_zakai_ks[{}]", i)));
        }
    }
    if (doc.contains("stationary_times")) cfg.stationary_times = get_reals(doc["stationary_times"], "stationary_times");
    if (doc.contains("flow_horizon")) {
        const std::vector<double> w = get_reals(doc["flow_horizon"], "flow_horizon");
        if (w.size() != 2 || !(w[0] <= 0.0 && w[1] > 0.0)) bad("flow_horizon", "expected [t_min <= 0, t_max > 0]");
        cfg.flow_horizon = std::pair{w[0], w[1]};
    }
    return cfg;
}

RunConfig load_config(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError(fmt::format("cannot read config '{}'", file.string()));
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte);
        throw ConfigError(fmt::format("{}:{}:{}: malformed JSON", file.string(), line, col));
    }
    return parse_config(doc);
}

json benchmark_config_json() {
    return json{
        {"params",
         {{"C", {5.0, 5.0}},
          {"H", {{0.2, 0.1}, {0.3, 0.1}}},
          {"B", {{-0.3, 0.2}, {0.1, 0.3}}},
          {"Sigma", {0.01, 0.02}},
          {"delays", {0.1, 0.1}},
          {"activation", {{"kind", "tanh"}}}}},
        {"dt", 1e-3},
        {"horizon", 5.0},
        {"seed", 1},
        {"route", "direct"},
        {"initial_segments", {{0.1, 0.2}, {10.0, 20.0}}},
        {"pullback_times", {2.0, 4.0, 6.0, 8.0}},
        {"output_dir", "."},
    };
}

void validate_config(const RunConfig& cfg) {
    if (!(cfg.dt > 0.0)) bad("dt", "must be positive");
    if (!(cfg.horizon > 0.0)) bad("horizon", "must be positive");
    require_valid(cfg.params, cfg.dt);
    if (!grid_count(cfg.horizon, cfg.dt)) bad("horizon", fmt::format("{} is not a multiple of dt = {}", cfg.horizon, cfg.dt));
    if (cfg.stride < 1) bad("stride", "must be at least 1");
    if (!(cfg.gamma_fraction > 0.0 && cfg.gamma_fraction < 1.0)) bad("gamma_fraction", "must lie in (0, 1)");
    if (cfg.route == Route::WongZakai) {
        if (!cfg.k) bad("k", "required when route = wong-zakai");
        check_mesh(*cfg.k, cfg.dt, "k");
    }
    for (std::size_t i = 0; i < cfg.initial_segments.size(); ++i) {
        const InitialSpec& s = cfg.initial_segments[i];
        const std::size_t dim = s.constant ? static_cast<std::size_t>(s.constant->size())
                                           : static_cast<std::size_t>(s.nodes.rows());
        if (dim != cfg.params.n()) bad(fmt::format("initial_segments[{}]", i), "dimension does not match n");
    }
}

std::vector<HistorySegment> initial_segments(const RunConfig& cfg) {
    std::vector<HistorySegment> out;
    for (std::size_t i = 0; i < cfg.initial_segments.size(); ++i) {
        const InitialSpec& s = cfg.initial_segments[i];
        if (s.constant) {
            out.push_back(HistorySegment::constant(*s.constant, cfg.params.tau(), cfg.dt));
            continue;
        }
        const auto nodes = grid_count(cfg.params.tau(), cfg.dt);
        if (!nodes || s.nodes.cols() != *nodes + 1) {
            bad(fmt::format("initial_segments[{}].values", i),
                fmt::format("needs tau/dt + 1 = {} nodes, got {}", nodes ? *nodes + 1 : 0, s.nodes.cols()));
        }
        out.emplace_back(cfg.dt, s.nodes);
    }
    return out;
}

// ---------------------------------------------------------------- commands

int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
    const std::vector<HistorySegment> segs = initial_segments(cfg);
    if (segs.empty()) bad("initial_segments", "simulate needs at least one initial segment");
    const fs::path dir = prepare_output_dir(cfg.output_dir);
    const Trajectory traj = simulate(cfg, segs.front());
    write_trajectory_file(dir / "trajectory.csv", traj, cfg.stride);
    log << fmt::format("simulate: route {}, {} nodes, |u(T)| = {}\n", route_name(cfg.route), traj.node_count(),
                       format_real(traj.states.col(traj.node_count() - 1).norm()));
    return kOk;
}

int cmd_spectrum(const RunConfig& cfg, std::ostream& log) {
    const fs::path dir = prepare_output_dir(cfg.output_dir);
    SpectralResult roots;
    try {
        const SpectralResult full = stable_spectrum(cfg, roots);
        write_json(dir / "spectrum.json", to_json(full));
        log << fmt::format("spectrum: {} roots, rho = {}\n", full.roots.size(), format_real(full.abscissa));
        return kOk;
    } catch (const EmptySpectrumError& e) {
        log << e.what() << "\nhint: widen search_box (re_min / im_max) in the config\n";
        return kAnalysis;
    } catch (const UnstableLinearizationError& e) {
        write_json(dir / "spectrum.json", to_json(roots));
        log << e.what() << '\n';
        return kAnalysis;
    }
}

int cmd_check(const RunConfig& cfg, std::ostream& log) {
    const fs::path dir = prepare_output_dir(cfg.output_dir);
    const ConditionReport report = condition_report(cfg, nullptr, nullptr);
    write_json(dir / "report.json", to_json(report));
    log << fmt::format("check: rho = {}, lemma6_ok = {}, theorem6_ok = {}\n", format_real(report.rho),
                       report.lemma6_ok, report.theorem6_ok);
    return kOk;
}

int cmd_pullback(const RunConfig& cfg, std::ostream& log) {
    const std::vector<HistorySegment> segs = initial_segments(cfg);
    if (segs.empty()) bad("initial_segments", "pullback needs at least one initial segment");
    if (cfg.pullback_times.empty()) bad("pullback_times", "must not be empty");
    const fs::path dir = prepare_output_dir(cfg.output_dir);
    const BrownianPath path = path_on(cfg, -max_of(cfg.pullback_times) - cfg.params.tau(), 0.0);
    const PullbackRun run = pullback_endpoints(cfg.params, path, cfg.pullback_times, segs, cfg.dt);
    std::ofstream out = open_output(dir / "pullback.csv");
    write_csv_row(out, {"t_n", "diameter", "seed"});
    for (std::size_t i = 0; i < run.pullback_times.size(); ++i) {
        write_csv_row(out, {format_real(run.pullback_times[i]), format_real(run.diameters[i]), seed_text(run.seed)});
    }
    log << fmt::format("pullback: diameter {} at t_n = {}\n", format_real(run.diameters.back()),
                       format_real(run.pullback_times.back()));
    return kOk;
}

int cmd_cocycle(const RunConfig& cfg, std::ostream& log) {
    const std::vector<HistorySegment> segs = initial_segments(cfg);
    if (segs.empty()) bad("initial_segments", "cocycle needs at least one initial segment");
    const fs::path dir = prepare_output_dir(cfg.output_dir);
    double reach = 0.0;
    for (const auto& [t1, t2] : cfg.cocycle_pairs) reach = std::max(reach, t1 + t2);
    const BrownianPath path = path_on(cfg, 0.0, reach);
    std::ofstream out = open_output(dir / "cocycle.csv");
    write_csv_row(out, {"t1", "t2", "residual", "seed"});
    double worst = 0.0;
    for (const auto& [t1, t2] : cfg.cocycle_pairs) {
        double residual = 0.0;
        for (const auto& phi : segs) residual = std::max(residual, cocycle_residual(cfg.params, path, t1, t2, phi, cfg.dt));
        worst = std::max(worst, residual);
        write_csv_row(out, {format_real(t1), format_real(t2), format_real(residual), seed_text(cfg.seed)});
    }
    log << fmt::format("cocycle: max residual {}\n", format_real(worst));
    return kOk;
}

int cmd_wongzakai(const RunConfig& cfg, std::ostream& log) {
    const std::vector<HistorySegment> segs = initial_segments(cfg);
    if (segs.empty()) bad("initial_segments", "wongzakai needs at least one initial segment");
    for (std::size_t i = 0; i < cfg.wong_zakai_ks.size(); ++i) {
        check_mesh(cfg.wong_zakai_ks[i], cfg.dt, fmt::format("wong_zakai_ks[{}]", i));
    }
    const fs::path dir = prepare_output_dir(cfg.output_dir);
    const BrownianPath path = path_on(cfg, 0.0, cfg.horizon + 1.0);
    const std::vector<WongZakaiGap> gaps = wong_zakai_gap(cfg.params, path, cfg.wong_zakai_ks, cfg.horizon, segs, cfg.dt);
    std::ofstream out = open_output(dir / "wongzakai.csv");
    write_csv_row(out, {"k", "gap", "seed"});
    for (const auto& g : gaps) write_csv_row(out, {std::to_string(g.k), format_real(g.gap), seed_text(cfg.seed)});
    log << fmt::format("wongzakai: {} rows\n", gaps.size());
    return kOk;
}

int cmd_stationary(const RunConfig& cfg, std::ostream& log) {
    if (cfg.stationary_times.empty()) bad("stationary_times", "must not be empty");
    const fs::path dir = prepare_output_dir(cfg.output_dir);
    const std::vector<HistorySegment> segs = initial_segments(cfg);
    const BrownianPath path = path_on(cfg, -max_of(cfg.stationary_times) - cfg.params.tau(), 0.0);
    const StationaryEstimate est =
        stationary_point(cfg.params, path, cfg.stationary_times, cfg.dt, segs.empty() ? nullptr : &segs.front());

    const std::size_t n = cfg.params.n();
    {
        std::ofstream out = open_output(dir / "stationary.csv");
        write_csv_row(out, header_with({"s"}, n, "u_", true));
        const HistorySegment& seg = est.estimate;
        for (std::size_t k = 0; k < seg.node_count(); ++k) {
            std::vector<std::string> row{format_real(-seg.span() + static_cast<double>(k) * seg.step())};
            if (k + 1 == seg.node_count()) row.front() = format_real(0.0);
            for (std::size_t j = 0; j < n; ++j) row.push_back(format_real(seg.values()(j, k)));
            row.push_back(seed_text(cfg.seed));
            write_csv_row(out, row);
        }
    }
    std::ofstream out = open_output(dir / "stationary_residuals.csv");
    write_csv_row(out, {"t_prev", "t", "residual", "seed"});
    for (std::size_t i = 0; i < est.cauchy_residuals.size(); ++i) {
        write_csv_row(out, {format_real(est.times[i]), format_real(est.times[i + 1]), format_real(est.cauchy_residuals[i]),
                            seed_text(cfg.seed)});
    }
    for (const auto& w : est.warnings) log << "warning: " << w << '\n';
    log << fmt::format("stationary: {} residuals\n", est.cauchy_residuals.size());
    return kOk;
}

int cmd_rate(const RunConfig& cfg, std::ostream& log) {
    const std::vector<HistorySegment> segs = initial_segments(cfg);
    if (segs.size() < 2) bad("initial_segments", "rate needs two initial segments");
    const fs::path dir = prepare_output_dir(cfg.output_dir);
    const BrownianPath path = path_on(cfg, 0.0, cfg.horizon);
    const AttractionRate rate = attraction_rate(cfg.params, path, segs[0], segs[1], cfg.horizon, cfg.dt);
    std::ofstream out = open_output(dir / "rate.csv");
    write_csv_row(out, {"t", "log_distance", "seed"});
    for (std::size_t i = 0; i < rate.times.size(); ++i) {
        write_csv_row(out, {format_real(rate.times[i]), format_real(rate.log_distances[i]), seed_text(cfg.seed)});
    }
    if (rate.identical) {
        log << "rate: initial segments coincide; no slope\n";
    } else if (rate.slope) {
        log << fmt::format("rate: slope {}, R^2 {}, {} points up to t = {}\n", format_real(*rate.slope),
                           format_real(rate.r_squared), rate.points, format_real(rate.fit_end));
    } else {
        log << "rate: too few points for a fit\n";
    }
    return kOk;
}

int cmd_reproduce(const fs::path& output_dir, std::ostream& log) {
    const fs::path dir = prepare_output_dir(output_dir);
    RunConfig cfg = parse_config(benchmark_config_json());
    cfg.output_dir = dir;
    validate_config(cfg);
    const std::vector<HistorySegment> segs = initial_segments(cfg);

    json assertions = json::array();
    bool all_ok = true;
    const auto record = [&](const std::string& name, bool ok, double value, double threshold) {
        assertions.push_back({{"name", name}, {"ok", ok}, {"value", value}, {"threshold", threshold}});
        all_ok = all_ok && ok;
        log << fmt::format("[{}] {} (value {}, threshold {})\n", ok ? "PASS" : "FAIL", name, format_real(value),
                           format_real(threshold));
    };

    // Trajectories from (0.1, 0.2) and (10, 20) on seed 1.
    const std::vector<std::string> traj_files{"trajectory_small.csv", "trajectory_large.csv"};
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const Trajectory traj = simulate(cfg, segs[i]);
        write_trajectory_file(dir / traj_files[i], traj, 1);
        const double last = traj.states.col(traj.node_count() - 1).cwiseAbs().maxCoeff();
        record(fmt::format("{}: max_j |u_j(5)| < 1e-2", traj_files[i]), last < 1e-2, last, 1e-2);
    }

    SpectralResult spectral;
    LinearFlow flow;
    const ConditionReport report = condition_report(cfg, &spectral, &flow);
    write_json(dir / "spectrum.json", to_json(spectral));
    write_json(dir / "report.json", to_json(report));
    record("spectrum.json: rho < 0", spectral.abscissa < 0.0, spectral.abscissa, 0.0);
    record("report.json: lemma6_ok", report.lemma6_ok, report.lemma6_margins.second, 0.0);
    record("report.json: theorem6_ok", report.theorem6_ok, report.theorem6_value, 0.0);
    {
        std::ofstream out = open_output(dir / "flow_diagnostics.csv");
        write_flow_diagnostics_csv(flow, out);
    }
    record("flow_diagnostics.csv: L_v finite", std::isfinite(flow.bound_estimate()), flow.bound_estimate(), 0.0);

    // Pullback diameters for the two benchmark segments, on seeds 1 and 2.
    {
        std::ofstream out = open_output(dir / "pullback.csv");
        write_csv_row(out, {"t_n", "diameter", "seed"});
        for (std::uint64_t seed : {1u, 2u}) {
            RunConfig local = cfg;
            local.seed = seed;
            const BrownianPath path = path_on(local, -max_of(cfg.pullback_times) - cfg.params.tau(), 0.0);
            const PullbackRun run = pullback_endpoints(cfg.params, path, cfg.pullback_times, segs, cfg.dt);
            for (std::size_t i = 0; i < run.pullback_times.size(); ++i) {
                write_csv_row(out, {format_real(run.pullback_times[i]), format_real(run.diameters[i]), seed_text(run.seed)});
            }
            record(fmt::format("pullback.csv: seed {} diameter at t_n = 8 < 1e-6", seed), run.diameters.back() < 1e-6,
                   run.diameters.back(), 1e-6);
        }
    }

    const json manifest{
        {"files",
         {{{"path", traj_files[0]}, {"kind", "trajectory"}, {"seed", 1}, {"initial", {0.1, 0.2}}},
          {{"path", traj_files[1]}, {"kind", "trajectory"}, {"seed", 1}, {"initial", {10.0, 20.0}}},
          {{"path", "spectrum.json"}, {"kind", "spectrum"}},
          {{"path", "report.json"}, {"kind", "report"}, {"seed", 1}},
          {{"path", "pullback.csv"}, {"kind", "pullback"}, {"seeds", {1, 2}}},
          {{"path", "flow_diagnostics.csv"}, {"kind", "flow"}, {"seed", 1}}}},
        {"panels",
         {{{"csv", traj_files[0]}, {"title", "phi = (0.1, 0.2), seed 1"}, {"xlabel", "t"}, {"ylabel", "u"}},
          {{"csv", traj_files[1]}, {"title", "phi = (10, 20), seed 1"}, {"xlabel", "t"}, {"ylabel", "u"}}}},
        {"config", benchmark_config_json()},
        {"assertions", assertions},
        {"all_ok", all_ok},
    };
    write_json(dir / "manifest.json", manifest);
    return all_ok ? kOk : kAnalysis;
}

// ---------------------------------------------------------------- entry

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stochastic delayed Hopfield network simulator and analysis toolkit", "sdhnn"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::optional<double> dt;
    std::string route;
    std::optional<std::int64_t> k;
    app.add_option("--config", config_path, "Run configuration (JSON); defaults to the two-neuron benchmark");
    app.add_option("--seed", seed, "Noise seed (overrides the config)");
    app.add_option("--out", out_dir, "Output directory (overrides the config)");
    app.add_option("--dt", dt, "Time step (overrides the config)");
    app.add_option("--route", route, "direct | conjugated | wong-zakai");
    app.add_option("--k", k, "Wong-Zakai mesh parameter");

    using Command = int (*)(const RunConfig&, std::ostream&);
    const std::vector<std::tuple<const char*, const char*, Command>> commands{
        {"simulate", "Integrate the first initial segment; writes trajectory.csv", cmd_simulate},
        {"spectrum", "Characteristic roots and decay constants; writes spectrum.json", cmd_spectrum},
        {"check", "Absorbing-set and contraction constants; writes report.json", cmd_check},
        {"pullback", "Pullback diameters of the initial set; writes pullback.csv", cmd_pullback},
        {"cocycle", "Cocycle residuals; writes cocycle.csv", cmd_cocycle},
        {"wongzakai", "Wong-Zakai gap table; writes wongzakai.csv", cmd_wongzakai},
        {"stationary", "Random fixed point estimate; writes stationary.csv", cmd_stationary},
        {"rate", "Exponential attraction rate; writes rate.csv", cmd_rate},
    };
    std::vector<CLI::App*> subs;
    for (const auto& [name, help, fn] : commands) subs.push_back(app.add_subcommand(name, help)->fallthrough());
    CLI::App* reproduce = app.add_subcommand("reproduce", "Benchmark bundle with manifest and assertions")->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (reproduce->parsed()) return cmd_reproduce(out_dir.empty() ? fs::path(".") : fs::path(out_dir), out);

        RunConfig cfg = config_path.empty() ? parse_config(benchmark_config_json()) : load_config(config_path);
        if (seed) cfg.seed = seed;
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (dt) cfg.dt = *dt;
        if (!route.empty()) cfg.route = get_route(route);
        if (k) cfg.k = k;
        validate_config(cfg);
        for (std::size_t i = 0; i < subs.size(); ++i) {
            if (subs[i]->parsed()) return std::get<2>(commands[i])(cfg, out);
        }
        return kInternal;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const DivergenceError& e) {
        err << "divergence: " << e.what() << '\n';
        return kDivergence;
    } catch (const AnalysisError& e) {
        err << "analysis error: " << e.what() << '\n';
        return kAnalysis;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kInternal;
    }
}

} // namespace sdhnn::cli
