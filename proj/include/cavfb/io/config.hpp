#ifndef CAVFB_IO_CONFIG_HPP
#define CAVFB_IO_CONFIG_HPP

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cavfb/core_response.hpp"
#include "cavfb/error.hpp"
#include "cavfb/optomech.hpp"
#include "cavfb/spectrum.hpp"
#include "cavfb/squeezing.hpp"
#include "cavfb/thermal.hpp"
#include "cavfb/units.hpp"

namespace cavfb::io
{
// FNV-1a, 64 bit. Identifies the exact config bytes a file was produced from.
inline std::uint64_t fnv1a64(std::string_view bytes) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hash_string(std::uint64_t h)
{
    std::ostringstream os;
    os << "fnv1a64:" << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

// How the operating point is chosen. Either n_c is given directly (with the
// detuning as delta_bar or as a target effective detuning at Omega_m), or the
// input flux is given and the steady state is solved for.
struct DriveConfig
{
    std::optional<double> n_c;
    std::optional<double> delta_bar;           // rad/s
    std::optional<double> effective_detuning;  // rad/s, needs mechanics
    std::optional<double> input_flux;          // photons/s
    Branch branch = Branch::lower;
};

struct ThermalSolverConfig
{
    MaterialProps material;
    double outer_radius = 0.0;  // m
    double mode_radius = 0.0;   // m
    std::size_t cells = 400;
    OuterBoundary boundary = OuterBoundary::fixed_temperature;
    double absorbed_power = 1.0;  // W
    std::size_t fit_poles = 0;    // 0: no fit
    std::optional<double> optical_frequency;  // rad/s, for per-photon gains
};

struct FitConfig
{
    CoherentModel model = CoherentModel::bare;
    std::string label;
    std::size_t anchor_index = 0;
    std::optional<double> n_th_anchor;
};

struct RunConfig
{
    std::string path;
    std::uint64_t hash = 0;

    std::optional<CavityParams> cavity;
    ThermalResponseModel thermal;
    bool has_thermal = false;
    std::optional<MechanicalMode> mech;
    std::optional<KerrParams> kerr;
    DetectionSetup detection;
    std::optional<double> theta;
    DriveConfig drive;
    double temperature = 0.0;
    std::optional<GridSpec> sweep;  // rad/s
    std::optional<ThermalSolverConfig> thermal_solver;
    FitConfig fit;
};

namespace detail
{
// Collects every violation before failing so one run reports them all.
class Reader
{
public:
    std::vector<std::string> issues;

    static std::string where(const YAML::Node& n, const std::string& path)
    {
        const auto m = n.Mark();
        if (m.line < 0) return path;
        return path + " (line " + std::to_string(m.line + 1) + ")";
    }

    void issue(const YAML::Node& n, const std::string& path, const std::string& what)
    {
        issues.push_back(where(n, path) + ": " + what);
    }

    // Returns the node only if it is a map; flags unknown keys.
    bool map(const YAML::Node& n, const std::string& path, const std::set<std::string>& allowed)
    {
        if (!n.IsMap()) {
            issue(n, path, "expected a mapping");
            return false;
        }
        for (const auto& kv : n) {
            const auto key = kv.first.as<std::string>();
            if (!allowed.count(key)) issue(kv.first, path + "." + key, "unknown key");
        }
        return true;
    }

    std::optional<double> number(const YAML::Node& parent, const std::string& key, const std::string& path)
    {
        const auto n = parent[key];
        if (!n) return std::nullopt;
        const std::string full = path + "." + key;
        try {
            const double v = n.as<double>();
            if (!std::isfinite(v)) {
                issue(n, full, "must be finite");
                return std::nullopt;
            }
            return v;
        } catch (const YAML::Exception&) {
            issue(n, full, "expected a number");
            return std::nullopt;
        }
    }

    std::optional<double> required(const YAML::Node& parent, const std::string& key, const std::string& path)
    {
        if (!parent[key]) {
            issue(parent, path + "." + key, "required key is missing");
            return std::nullopt;
        }
        return number(parent, key, path);
    }

    double non_negative(const YAML::Node& parent, const std::string& key, const std::string& path, double fallback,
                        bool must_exist = false)
    {
        auto v = must_exist ? required(parent, key, path) : number(parent, key, path);
        if (!v) return fallback;
        if (*v < 0.0) issue(parent[key], path + "." + key, "must be non-negative");
        return *v;
    }

    double positive(const YAML::Node& parent, const std::string& key, const std::string& path, double fallback,
                    bool must_exist = true)
    {
        auto v = must_exist ? required(parent, key, path) : number(parent, key, path);
        if (!v) return fallback;
        if (!(*v > 0.0)) issue(parent[key], path + "." + key, "must be positive");
        return *v;
    }

    std::optional<std::string> text(const YAML::Node& parent, const std::string& key, const std::string& path,
                                    const std::set<std::string>& choices = {})
    {
        const auto n = parent[key];
        if (!n) return std::nullopt;
        if (!n.IsScalar()) {
            issue(n, path + "." + key, "expected a string");
            return std::nullopt;
        }
        const auto s = n.as<std::string>();
        if (!choices.empty() && !choices.count(s)) {
            std::string list;
            for (const auto& c : choices) list += (list.empty() ? "" : ", ") + c;
            issue(n, path + "." + key, "must be one of {" + list + "}, got '" + s + "'");
            return std::nullopt;
        }
        return s;
    }

    std::optional<std::size_t> count(const YAML::Node& parent, const std::string& key, const std::string& path)
    {
        const auto n = parent[key];
        if (!n) return std::nullopt;
        try {
            const long long v = n.as<long long>();
            if (v < 0) {
                issue(n, path + "." + key, "must be a non-negative integer");
                return std::nullopt;
            }
            return static_cast<std::size_t>(v);
        } catch (const YAML::Exception&) {
            issue(n, path + "." + key, "expected an integer");
            return std::nullopt;
        }
    }

    std::optional<bool> flag(const YAML::Node& parent, const std::string& key, const std::string& path)
    {
        const auto n = parent[key];
        if (!n) return std::nullopt;
        try {
            return n.as<bool>();
        } catch (const YAML::Exception&) {
            issue(n, path + "." + key, "expected true or false");
            return std::nullopt;
        }
    }
};

// Thermal rates above this are almost certainly a unit slip (rad/s vs Hz, or kHz vs Hz).
inline constexpr double max_thermal_rate_hz = 100e9;

inline MaterialProps read_material(Reader& r, const YAML::Node& n, const std::string& path)
{
    if (n.IsScalar()) {
        const auto name = n.as<std::string>();
        if (name == "silicon") return materials::silicon();
        if (name == "silica") return materials::silica();
        if (name == "silicon_nitride") return materials::silicon_nitride();
        r.issue(n, path, "unknown material '" + name + "' (silicon, silica, silicon_nitride or a mapping)");
        return {};
    }
    MaterialProps m;
    if (!r.map(n, path, {"density", "heat_capacity", "conductivity", "n0", "dn_dt"})) return m;
    m.density = r.positive(n, "density", path, 1.0);
    m.heat_capacity = r.positive(n, "heat_capacity", path, 1.0);
    m.conductivity = r.positive(n, "conductivity", path, 1.0);
    m.n0 = r.positive(n, "n0", path, 1.0);
    m.dn_dt = r.number(n, "dn_dt", path).value_or(0.0);
    return m;
}
}  // namespace detail

inline RunConfig parse_config_text(const std::string& text, const std::string& path = "<config>")
{
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        fail(ErrorCategory::config, path + ": " + e.what());
    }
    RunConfig cfg;
    cfg.path = path;
    cfg.hash = fnv1a64(text);
    detail::Reader r;
    if (!root || root.IsNull()) fail(ErrorCategory::config, path + ": empty configuration");
    if (!r.map(root, "", {"cavity", "thermal", "mechanics", "kerr", "detection", "drive", "sweep",
                          "thermal_solver", "fit", "temperature_k"}))
        fail(ErrorCategory::config, path + ": " + r.issues.front());

    if (auto n = root["cavity"]; n && r.map(n, "cavity", {"kappa_ex_hz", "kappa_s_hz", "kappa_a_hz", "detuning_hz",
                                                          "resonance_hz"})) {
        CavityParams c;
        c.kappa_ex = hz_to_rad(r.non_negative(n, "kappa_ex_hz", "cavity", 0.0, true));
        c.kappa_s = hz_to_rad(r.non_negative(n, "kappa_s_hz", "cavity", 0.0));
        c.kappa_a = hz_to_rad(r.non_negative(n, "kappa_a_hz", "cavity", 0.0));
        c.detuning = hz_to_rad(r.number(n, "detuning_hz", "cavity").value_or(0.0));
        if (auto f = r.number(n, "resonance_hz", "cavity")) c.resonance = hz_to_rad(*f);
        if (!(c.total_kappa() > 0.0) && r.issues.empty()) r.issue(n, "cavity", "total linewidth must be positive");
        cfg.cavity = c;
    }

    if (auto n = root["mechanics"]; n && r.map(n, "mechanics", {"omega_m_hz", "gamma_m_hz", "g0_hz", "x_zpf",
                                                                "n_th0", "bath_temperature_k", "heating_per_photon"})) {
        MechanicalMode m;
        m.omega_m = hz_to_rad(r.positive(n, "omega_m_hz", "mechanics", 1.0));
        m.gamma_m = hz_to_rad(r.positive(n, "gamma_m_hz", "mechanics", 1.0));
        m.g0 = hz_to_rad(r.non_negative(n, "g0_hz", "mechanics", 0.0, true));
        m.x_zpf = r.positive(n, "x_zpf", "mechanics", 1.0, false);
        const auto n_th0 = r.number(n, "n_th0", "mechanics");
        const auto t_bath = r.number(n, "bath_temperature_k", "mechanics");
        if (n_th0 && t_bath) r.issue(n, "mechanics", "give either n_th0 or bath_temperature_k, not both");
        if (n_th0) {
            if (*n_th0 < 0.0) r.issue(n["n_th0"], "mechanics.n_th0", "must be non-negative");
            m.bath.n_th0 = *n_th0;
        } else if (t_bath) {
            if (!(*t_bath > 0.0)) r.issue(n["bath_temperature_k"], "mechanics.bath_temperature_k", "must be positive");
            else m.bath.n_th0 = bose_occupancy(m.omega_m, *t_bath);
        }
        m.bath.heating_per_photon = r.non_negative(n, "heating_per_photon", "mechanics", 0.0);
        cfg.mech = m;
    }

    if (auto n = root["thermal"]; n && r.map(n, "thermal", {"poles", "loss_slope_hz", "gamma_hz"})) {
        cfg.has_thermal = true;
        const bool poles = static_cast<bool>(n["poles"]);
        const bool slope = static_cast<bool>(n["loss_slope_hz"]);
        if (poles == slope) r.issue(n, "thermal", "give exactly one of 'poles' or 'loss_slope_hz'");
        if (poles) {
            std::vector<ThermalPole> list;
            const auto p = n["poles"];
            if (!p.IsSequence() || p.size() == 0) r.issue(p, "thermal.poles", "expected a non-empty list");
            else
                for (std::size_t i = 0; i < p.size(); ++i) {
                    const std::string at = "thermal.poles[" + std::to_string(i) + "]";
                    if (!r.map(p[i], at, {"gain_hz", "gamma_hz"})) continue;
                    const double gain = r.required(p[i], "gain_hz", at).value_or(0.0);
                    const double gamma = r.positive(p[i], "gamma_hz", at, 1.0);
                    if (gamma > detail::max_thermal_rate_hz)
                        r.issue(p[i]["gamma_hz"], at + ".gamma_hz", "implausibly fast thermal rate (> 100 GHz); check units");
                    list.push_back({hz_to_rad(gain), hz_to_rad(gamma)});
                }
            if (!list.empty()) cfg.thermal = ThermalResponseModel(list);
        } else if (slope) {
            const double s = r.required(n, "loss_slope_hz", "thermal").value_or(0.0);
            const double gamma = r.positive(n, "gamma_hz", "thermal", 1.0);
            if (gamma > detail::max_thermal_rate_hz)
                r.issue(n["gamma_hz"], "thermal.gamma_hz", "implausibly fast thermal rate (> 100 GHz); check units");
            if (!cfg.mech || !cfg.cavity || !(cfg.cavity->kappa_a > 0.0))
                r.issue(n, "thermal.loss_slope_hz", "needs cavity.kappa_a_hz > 0 and a mechanics section");
            else
                cfg.thermal = ThermalResponseModel::from_loss_slope(cfg.cavity->kappa_a, hz_to_rad(s), cfg.mech->omega_m,
                                                                    hz_to_rad(gamma));
        }
    }

    if (auto n = root["kerr"]; n && r.map(n, "kerr", {"g_kerr_hz", "n2", "n0", "mode_volume"})) {
        KerrParams k;
        if (auto g = r.number(n, "g_kerr_hz", "kerr")) {
            k.g_kerr = hz_to_rad(*g);
        } else if (n["n2"]) {
            const double n2 = r.non_negative(n, "n2", "kerr", 0.0, true);
            const double n0 = r.positive(n, "n0", "kerr", 1.0);
            const double v = r.positive(n, "mode_volume", "kerr", 1.0);
            k.n2 = n2;
            k.n0 = n0;
            k.v_mode = v;
            if (!cfg.cavity || !cfg.cavity->resonance)
                r.issue(n, "kerr.n2", "estimating g_kerr needs cavity.resonance_hz");
            else if (r.issues.empty())
                k.g_kerr = kerr_coupling_estimate(*cfg.cavity->resonance, n0, n2, v);
        } else {
            r.issue(n, "kerr", "give g_kerr_hz or n2/n0/mode_volume");
        }
        cfg.kerr = k;
    }

    if (auto n = root["detection"]; n && r.map(n, "detection", {"eta_ex", "lo_offset_hz", "theta_rad"})) {
        cfg.detection.eta_ex = r.non_negative(n, "eta_ex", "detection", 1.0);
        if (cfg.detection.eta_ex > 1.0) r.issue(n["eta_ex"], "detection.eta_ex", "must not exceed 1");
        cfg.detection.delta_lo = hz_to_rad(r.positive(n, "lo_offset_hz", "detection", 0.0, false));
        if (auto t = r.number(n, "theta_rad", "detection")) {
            cfg.theta = *t;
            cfg.detection.theta = *t;
        }
    }

    if (auto n = root["drive"]; n && r.map(n, "drive", {"n_c", "delta_bar_hz", "effective_detuning_hz", "input_flux",
                                                        "branch"})) {
        auto& d = cfg.drive;
        if (n["n_c"]) d.n_c = r.non_negative(n, "n_c", "drive", 0.0);
        if (auto v = r.number(n, "delta_bar_hz", "drive")) d.delta_bar = hz_to_rad(*v);
        if (auto v = r.number(n, "effective_detuning_hz", "drive")) d.effective_detuning = hz_to_rad(*v);
        if (n["input_flux"]) d.input_flux = r.non_negative(n, "input_flux", "drive", 0.0);
        if (d.delta_bar && d.effective_detuning)
            r.issue(n, "drive", "give delta_bar_hz or effective_detuning_hz, not both");
        if (d.n_c && d.input_flux) r.issue(n, "drive", "give n_c or input_flux, not both");
        if (!d.n_c && !d.input_flux) r.issue(n, "drive", "one of n_c or input_flux is required");
        if (d.input_flux && (d.delta_bar || d.effective_detuning))
            r.issue(n, "drive", "with input_flux the detuning comes from cavity.detuning_hz");
        if (d.effective_detuning && !cfg.mech)
            r.issue(n, "drive.effective_detuning_hz", "needs a mechanics section (evaluated at omega_m)");
        if (auto b = r.text(n, "branch", "drive", {"lower", "unstable", "upper"}))
            d.branch = *b == "lower" ? Branch::lower : *b == "upper" ? Branch::upper : Branch::unstable;
    }

    if (root["temperature_k"]) cfg.temperature = r.non_negative(root, "temperature_k", "", 0.0);

    if (auto n = root["sweep"]; n && r.map(n, "sweep", {"start_hz", "stop_hz", "points", "log"})) {
        GridSpec g;
        g.start = hz_to_rad(r.required(n, "start_hz", "sweep").value_or(0.0));
        g.stop = hz_to_rad(r.required(n, "stop_hz", "sweep").value_or(0.0));
        g.points = r.count(n, "points", "sweep").value_or(0);
        g.log = r.flag(n, "log", "sweep").value_or(false);
        if (g.points < 1) r.issue(n, "sweep.points", "at least one point is required");
        else if (g.points > 1 && !(g.stop > g.start)) r.issue(n, "sweep", "stop_hz must exceed start_hz");
        if (g.log && !(g.start > 0.0)) r.issue(n, "sweep.start_hz", "log sweep needs a positive start");
        cfg.sweep = g;
    }

    if (auto n = root["thermal_solver"];
        n && r.map(n, "thermal_solver", {"material", "outer_radius_m", "mode_radius_m", "cells", "boundary",
                                         "absorbed_power_w", "fit_poles", "optical_frequency_hz"})) {
        ThermalSolverConfig t;
        if (!n["material"]) r.issue(n, "thermal_solver.material", "required key is missing");
        else t.material = detail::read_material(r, n["material"], "thermal_solver.material");
        t.outer_radius = r.positive(n, "outer_radius_m", "thermal_solver", 1.0);
        t.mode_radius = r.positive(n, "mode_radius_m", "thermal_solver", 1.0);
        if (t.mode_radius >= t.outer_radius)
            r.issue(n, "thermal_solver.mode_radius_m", "must be smaller than outer_radius_m");
        t.cells = r.count(n, "cells", "thermal_solver").value_or(400);
        if (t.cells < 2) r.issue(n, "thermal_solver.cells", "at least two cells are required");
        if (auto b = r.text(n, "boundary", "thermal_solver", {"fixed", "insulating"}))
            t.boundary = *b == "fixed" ? OuterBoundary::fixed_temperature : OuterBoundary::insulating;
        t.absorbed_power = r.positive(n, "absorbed_power_w", "thermal_solver", 1.0, false);
        t.fit_poles = r.count(n, "fit_poles", "thermal_solver").value_or(0);
        if (auto f = r.number(n, "optical_frequency_hz", "thermal_solver")) {
            if (!(*f > 0.0)) r.issue(n["optical_frequency_hz"], "thermal_solver.optical_frequency_hz", "must be positive");
            t.optical_frequency = hz_to_rad(*f);
        }
        cfg.thermal_solver = t;
    }

    if (auto n = root["fit"]; n && r.map(n, "fit", {"model", "label", "anchor_index", "n_th_anchor"})) {
        if (auto m = r.text(n, "model", "fit", {"bare", "with_mechanics"}))
            cfg.fit.model = *m == "bare" ? CoherentModel::bare : CoherentModel::with_mechanics;
        if (auto l = r.text(n, "label", "fit")) cfg.fit.label = *l;
        cfg.fit.anchor_index = r.count(n, "anchor_index", "fit").value_or(0);
        if (auto a = r.number(n, "n_th_anchor", "fit")) {
            if (*a < 0.0) r.issue(n["n_th_anchor"], "fit.n_th_anchor", "must be non-negative");
            cfg.fit.n_th_anchor = *a;
        }
    }

    if (!r.issues.empty()) {
        std::string msg = path + ": " + std::to_string(r.issues.size()) + " configuration error(s)";
        for (const auto& s : r.issues) msg += "\n  " + s;
        fail(ErrorCategory::config, msg);
    }
    return cfg;
}

inline RunConfig parse_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCategory::io, "cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

// Resolves the operating point described by the drive section.
inline MeanField resolve_mean_field(const RunConfig& cfg)
{
    if (!cfg.cavity) fail(ErrorCategory::config, "a cavity section is required");
    const auto& d = cfg.drive;
    const double kerr = cfg.kerr ? cfg.kerr->g_kerr : 0.0;
    if (d.input_flux) {
        const auto roots = steady_state(*cfg.cavity, cfg.thermal, *d.input_flux, kerr);
        for (const auto& m : roots)
            if (m.branch == d.branch) return m;
        fail(ErrorCategory::config, "requested steady-state branch does not exist at this input flux");
    }
    const double n = d.n_c.value_or(0.0);
    if (d.effective_detuning)
        return MeanField::at(n, delta_bar_for_effective(*cfg.cavity, cfg.thermal, n, *d.effective_detuning,
                                                        cfg.mech->omega_m));
    return MeanField::at(n, d.delta_bar.value_or(cfg.cavity->detuning));
}

inline OptomechSystem optomech_system(const RunConfig& cfg)
{
    if (!cfg.cavity || !cfg.mech) fail(ErrorCategory::config, "this command needs cavity and mechanics sections");
    OptomechSystem s;
    s.cavity = *cfg.cavity;
    s.thermal = cfg.thermal;
    s.mech = *cfg.mech;
    s.detection = cfg.detection;
    s.mf = resolve_mean_field(cfg);
    s.temperature = cfg.temperature;
    return s;
}

inline Geometry1D thermal_geometry(const ThermalSolverConfig& t)
{
    return Geometry1D::gaussian_mode(t.outer_radius, t.mode_radius, t.cells, t.boundary);
}

}  // namespace cavfb::io

#endif  // CAVFB_IO_CONFIG_HPP
