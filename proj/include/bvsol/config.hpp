#pragma once

// Experiment configuration: a flat INI-style format (sections, key = value,
// '#' comments) with named presets and dotted-path overrides.

#include "bvsol/dissipation.hpp"
#include "bvsol/energy.hpp"
#include "bvsol/errors.hpp"
#include "bvsol/solver.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace bvsol {

/// Parsed key-value tree with deterministic iteration order.
class IniConfig {
public:
    void set(const std::string& section, const std::string& key, const std::string& value) {
        auto& sec = find_or_add(section);
        for (auto& kv : sec.second)
            if (kv.first == key) {
                kv.second = value;
                return;
            }
        sec.second.emplace_back(key, value);
    }

    [[nodiscard]] bool has(const std::string& section, const std::string& key) const {
        for (const auto& sec : sections_)
            if (sec.first == section)
                for (const auto& kv : sec.second)
                    if (kv.first == key) return true;
        return false;
    }

    [[nodiscard]] std::string get(const std::string& section, const std::string& key,
                                  const std::string& fallback = "") const {
        for (const auto& sec : sections_)
            if (sec.first == section)
                for (const auto& kv : sec.second)
                    if (kv.first == key) return kv.second;
        return fallback;
    }

    [[nodiscard]] double get_num(const std::string& section, const std::string& key,
                                 double fallback) const {
        const std::string s = get(section, key);
        if (s.empty()) return fallback;
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw config_error("config: field [" + section + "] " + key +
                               " is not a number: '" + s + "'");
        }
    }

    [[nodiscard]] std::vector<double> get_list(const std::string& section,
                                               const std::string& key) const {
        std::vector<double> out;
        std::stringstream ss(get(section, key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item.empty()) continue;
            try {
                out.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw config_error("config: field [" + section + "] " + key +
                                   " has a non-numeric entry: '" + item + "'");
            }
        }
        return out;
    }

    /// Parse "a.b=c" style overrides.
    void apply_override(const std::string& text) {
        const auto eq = text.find('=');
        const auto dotpos = text.find('.');
        if (eq == std::string::npos || dotpos == std::string::npos || dotpos > eq)
            throw config_error("override must look like section.key=value: '" + text + "'");
        set(trim(text.substr(0, dotpos)), trim(text.substr(dotpos + 1, eq - dotpos - 1)),
            trim(text.substr(eq + 1)));
    }

    /// Merge other on top of this (other wins).
    void merge_from(const IniConfig& other) {
        for (const auto& sec : other.sections_)
            for (const auto& kv : sec.second) set(sec.first, kv.first, kv.second);
    }

    [[nodiscard]] std::string to_text() const {
        std::ostringstream os;
        for (const auto& sec : sections_) {
            os << "[" << sec.first << "]\n";
            for (const auto& kv : sec.second) os << kv.first << " = " << kv.second << "\n";
            os << "\n";
        }
        return os.str();
    }

    static IniConfig parse_text(const std::string& text, const std::string& origin = "<text>") {
        IniConfig cfg;
        std::istringstream is(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const auto hash = line.find_first_of("#;");
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw config_error(origin + ":" + std::to_string(lineno) +
                                       ": malformed section header");
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos || section.empty())
                throw config_error(origin + ":" + std::to_string(lineno) +
                                   ": expected 'key = value' inside a section");
            cfg.set(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
        return cfg;
    }

    static IniConfig parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw config_error("config: cannot open '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_text(ss.str(), path);
    }

private:
    static std::string trim(std::string s) {
        const auto notspace = [](unsigned char c) { return !std::isspace(c); };
        s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
        s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
        return s;
    }
    std::pair<std::string, std::vector<std::pair<std::string, std::string>>>& find_or_add(
        const std::string& section) {
        for (auto& sec : sections_)
            if (sec.first == section) return sec;
        sections_.emplace_back(section, std::vector<std::pair<std::string, std::string>>{});
        return sections_.back();
    }
    std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> sections_;
};

/// Named presets for the four benchmark models.
[[nodiscard]] inline std::string preset_text(const std::string& name) {
    if (name == "moving_interface")
        return R"([model]
grad_term = tv
tv_delta = 1.0
well = indicator
grid_l = 4.0
grid_n = 256
loading_a = 1.0
loading_b = -1.0
loading_c = 2.0

[dissipation]
weight = 1.0
F = quadratic

[scheme]
eps = 1e-2
tau = 1e-4
T = 1.0

[sweep]
eps_list = 1e-1,3e-2,1e-2
tau_rule_c = 1.0
tau_rule_a = 2.0

[init]
kind = indicator
front = 1.0

[run]
diagnostics = balance,front,defect,reparam
level = 0.5
)";
    if (name == "double_well_wave")
        return R"([model]
grad_term = none
well = double_well
grid_l = 1.0
grid_n = 64
loading_a = 1.0
loading_b = 1.0
loading_c = 0.0

[dissipation]
weight = 1.0
F = quadratic

[scheme]
eps = 0.02
tau = 1e-4
T = 6.0

[sweep]
eps_list = 0.1,0.05,0.02
tau_rule_c = 0.25
tau_rule_a = 2.0

[init]
kind = constant
value = -4.0

[run]
diagnostics = balance,stability,defect,reparam
)";
    if (name == "tv_double_well")
        return R"([model]
grad_term = tv
tv_delta = 1.0
well = double_well
grid_l = 4.0
grid_n = 64
loading_a = 0.0
loading_b = 0.0
loading_c = 2.0

[dissipation]
weight = 1.0
F = quadratic

[scheme]
eps = 0.05
tau = 2e-3
T = 1.0

[init]
kind = two_phase
front = 1.0
hi = 6.0
lo = -2.0

[run]
diagnostics = balance,energy_line
)";
    if (name == "dirichlet_well")
        return R"([model]
grad_term = dirichlet
well = quadratic
well_lambda = 1.0
well_center = 0.0
grid_l = 1.0
grid_n = 64
loading_a = 3.0
loading_b = 0.5
loading_c = 0.0

[dissipation]
weight = 1.0
F = quadratic

[scheme]
eps = 0.1
tau = 0.025
T = 1.0
require_stable_init = true

[sweep]
eps_list = 0.1,0.05,0.025
tau_factors = 1.0,0.5
mode = grid

[init]
kind = constant
value = 0.0

[run]
diagnostics = balance,stability
)";
    throw config_error("unknown preset '" + name + "'");
}

/// Fully resolved experiment: model, dissipation, scheme, initial state, run flags.
struct ExperimentConfig {
    EnergyModel model;
    DissipationPair diss;
    SchemeParams scheme;
    GridFunction u0;
    // sweep
    enum class SweepMode { refinement, grid };
    SweepMode sweep_mode = SweepMode::refinement;
    std::vector<double> sweep_eps; // refinement: tau = c * eps^a; grid: x tau_factors
    double tau_rule_c = 1.0, tau_rule_a = 2.0;
    std::vector<double> tau_factors;
    int workers = 1;
    // run
    std::vector<std::string> diagnostics;
    double jump_threshold = -1.0;
    double stability_tol = 1e-6;
    double level = 0.5;
    int export_stride = 0;
    int samples = 129;
    IniConfig raw;

    [[nodiscard]] bool wants(const std::string& diag) const {
        for (const auto& d : diagnostics)
            if (d == diag) return true;
        return false;
    }
};

[[nodiscard]] inline ExperimentConfig resolve_config(const IniConfig& cfg) {
    ExperimentConfig out;
    out.raw = cfg;

    // model
    const std::string grad = cfg.get("model", "grad_term", "none");
    if (grad == "none")
        out.model.grad_term = GradTerm::none;
    else if (grad == "dirichlet")
        out.model.grad_term = GradTerm::dirichlet;
    else if (grad == "tv")
        out.model.grad_term = GradTerm::tv;
    else
        throw config_error("config: [model] grad_term must be none|dirichlet|tv, got '" + grad +
                           "'");
    out.model.tv_delta = cfg.get_num("model", "tv_delta", 1.0);
    if (out.model.grad_term == GradTerm::tv && !(out.model.tv_delta > 0.0))
        throw config_error("config: [model] tv_delta must be positive for TV models");

    const std::string well = cfg.get("model", "well", "quadratic");
    if (well == "quadratic")
        out.model.well = Well::quadratic(cfg.get_num("model", "well_lambda", 1.0),
                                         cfg.get_num("model", "well_center", 0.0));
    else if (well == "quartic")
        out.model.well = Well::quartic();
    else if (well == "double_well")
        out.model.well = Well::double_well();
    else if (well == "indicator")
        out.model.well = Well::indicator01();
    else
        throw config_error("config: [model] well must be quadratic|quartic|double_well|indicator");

    const double l = cfg.get_num("model", "grid_l", 1.0);
    const double n = cfg.get_num("model", "grid_n", 64);
    if (!(l > 0.0) || n < 2 || n != std::floor(n))
        throw config_error("config: [model] grid_l must be positive and grid_n an integer >= 2");
    out.model.grid = Grid1D(l, static_cast<int>(n));
    out.model.loading = Loading::affine_tx(cfg.get_num("model", "loading_a", 0.0),
                                           cfg.get_num("model", "loading_b", 0.0),
                                           cfg.get_num("model", "loading_c", 0.0));

    // dissipation
    const int nc = out.model.grid.n_cells();
    const double w = cfg.get_num("dissipation", "weight", 1.0);
    if (!(w > 0.0)) throw config_error("config: [dissipation] weight must be positive");
    if (cfg.has("dissipation", "weight_minus")) {
        const double wm = cfg.get_num("dissipation", "weight_minus", w);
        out.diss.gauge = Gauge::asymmetric(std::vector<double>(static_cast<std::size_t>(nc), w),
                                           std::vector<double>(static_cast<std::size_t>(nc), wm));
    } else {
        out.diss.gauge = Gauge::uniform(nc, w);
    }
    const std::string F = cfg.get("dissipation", "F", "quadratic");
    if (F == "quadratic")
        out.diss.viscous = ViscousPotential::quadratic();
    else if (F == "power")
        out.diss.viscous = ViscousPotential::power(cfg.get_num("dissipation", "F_nu", 1.0),
                                                   cfg.get_num("dissipation", "F_p", 2.0));
    else
        throw config_error("config: [dissipation] F must be quadratic|power");

    // scheme
    out.scheme.eps = cfg.get_num("scheme", "eps", 1e-2);
    out.scheme.tau = cfg.get_num("scheme", "tau", 1e-4);
    out.scheme.T = cfg.get_num("scheme", "T", 1.0);
    if (!(out.scheme.eps > 0.0) || !(out.scheme.tau > 0.0) || !(out.scheme.T > 0.0))
        throw config_error("config: [scheme] eps, tau, T must be positive");
    if (cfg.get("scheme", "tol_inner") == "auto" || !cfg.has("scheme", "tol_inner")) {
        out.scheme.tol_inner = -1.0;
    } else {
        out.scheme.tol_inner = cfg.get_num("scheme", "tol_inner", -1.0);
        if (out.scheme.tol_inner <= 0.0)
            throw config_error("config: [scheme] tol_inner must be positive or 'auto'");
    }
    out.scheme.max_inner_iter =
        static_cast<int>(cfg.get_num("scheme", "max_inner_iter", 400000));
    const std::string init = cfg.get("scheme", "init", "previous_step");
    if (init == "previous_step")
        out.scheme.init = SchemeParams::Init::previous_step;
    else if (init == "grid_search_scalar")
        out.scheme.init = SchemeParams::Init::grid_search_scalar;
    else
        throw config_error("config: [scheme] init must be previous_step|grid_search_scalar");
    out.scheme.require_stable_init =
        cfg.get("scheme", "require_stable_init", "false") == "true";
    out.scheme.competitor_stride =
        static_cast<int>(cfg.get_num("scheme", "competitor_stride", 0));
    out.scheme.seed = static_cast<std::uint64_t>(cfg.get_num("run", "seed", 20240915));

    // sweep
    out.sweep_eps = cfg.get_list("sweep", "eps_list");
    out.tau_rule_c = cfg.get_num("sweep", "tau_rule_c", 1.0);
    out.tau_rule_a = cfg.get_num("sweep", "tau_rule_a", 2.0);
    out.tau_factors = cfg.get_list("sweep", "tau_factors");
    out.workers = static_cast<int>(cfg.get_num("sweep", "workers", 1));
    const std::string mode = cfg.get("sweep", "mode", "refinement");
    if (mode == "refinement")
        out.sweep_mode = ExperimentConfig::SweepMode::refinement;
    else if (mode == "grid")
        out.sweep_mode = ExperimentConfig::SweepMode::grid;
    else
        throw config_error("config: [sweep] mode must be refinement|grid");
    if (out.sweep_mode == ExperimentConfig::SweepMode::refinement && !(out.tau_rule_a > 1.0))
        throw config_error("config: [sweep] tau_rule_a must exceed 1 (tau_k/eps_k must vanish)");

    // initial state
    const std::string kind = cfg.get("init", "kind", "constant");
    if (kind == "constant") {
        out.u0 = GridFunction(out.model.grid, cfg.get_num("init", "value", 0.0));
    } else if (kind == "indicator") {
        const double front = cfg.get_num("init", "front", 1.0);
        out.u0 = sample(out.model.grid, [&](double x) { return x < front ? 1.0 : 0.0; });
    } else if (kind == "two_phase") {
        const double front = cfg.get_num("init", "front", 1.0);
        const double hi = cfg.get_num("init", "hi", 1.0);
        const double lo = cfg.get_num("init", "lo", 0.0);
        out.u0 = sample(out.model.grid, [&](double x) { return x < front ? hi : lo; });
    } else {
        throw config_error("config: [init] kind must be constant|indicator|two_phase");
    }
    if (!out.model.admissible(out.u0))
        throw config_error("config: initial state is inadmissible for the chosen well");

    // run
    {
        std::stringstream ss(cfg.get("run", "diagnostics", "balance"));
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) out.diagnostics.push_back(item);
    }
    out.jump_threshold = cfg.get_num("run", "jump_threshold", -1.0);
    out.stability_tol = cfg.get_num("run", "stability_tol", 1e-6);
    out.level = cfg.get_num("run", "level", 0.5);
    out.export_stride = static_cast<int>(cfg.get_num("run", "export_stride", 0));
    out.samples = static_cast<int>(cfg.get_num("run", "samples", 129));
    return out;
}

/// Load a preset, optionally merged with a config file and overrides.
[[nodiscard]] inline ExperimentConfig load_config(const std::string& preset,
                                                  const std::string& config_path,
                                                  const std::vector<std::string>& overrides) {
    IniConfig cfg;
    if (!preset.empty()) cfg = IniConfig::parse_text(preset_text(preset), "preset:" + preset);
    if (!config_path.empty()) {
        IniConfig file = IniConfig::parse_file(config_path);
        if (file.has("model", "preset")) {
            IniConfig base =
                IniConfig::parse_text(preset_text(file.get("model", "preset")), "preset");
            base.merge_from(file);
            file = base;
        }
        cfg.merge_from(file);
    }
    for (const auto& o : overrides) cfg.apply_override(o);
    return resolve_config(cfg);
}

} // namespace bvsol
