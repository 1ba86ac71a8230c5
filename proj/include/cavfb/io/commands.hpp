#ifndef CAVFB_IO_COMMANDS_HPP
#define CAVFB_IO_COMMANDS_HPP

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cavfb/core_response.hpp"
#include "cavfb/fitting.hpp"
#include "cavfb/io/config.hpp"
#include "cavfb/io/spectrum_file.hpp"
#include "cavfb/io/svg_plot.hpp"
#include "cavfb/optomech.hpp"
#include "cavfb/oracle.hpp"
#include "cavfb/squeezing.hpp"
#include "cavfb/thermal.hpp"

namespace cavfb::io
{
// Bad command line: unknown command, malformed flag values, missing inputs.
class UsageError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

enum ExitCode : int
{
    exit_ok = 0,
    exit_unexpected = 1,
    exit_usage = 2,
    exit_invalid_argument = 3,
    exit_config = 4,
    exit_numeric = 5,
    exit_fit = 6,
    exit_unsupported = 7,
    exit_io = 8,
};

constexpr int exit_code(ErrorCategory c) noexcept
{
    switch (c) {
    case ErrorCategory::invalid_argument: return exit_invalid_argument;
    case ErrorCategory::config: return exit_config;
    case ErrorCategory::numeric_instability: return exit_numeric;
    case ErrorCategory::fit_nonconvergence: return exit_fit;
    case ErrorCategory::unsupported: return exit_unsupported;
    case ErrorCategory::io: return exit_io;
    }
    return exit_unexpected;
}

inline const std::vector<std::string>& command_names()
{
    static const std::vector<std::string> names{
        "cavity-response", "heterodyne", "mech-psd", "cooling-report", "squeezing", "thermal-response",
        "fit-response", "fit-linewidth-series", "fit-mech", "thermometry", "oracle-check", "plot"};
    return names;
}

struct RunOptions
{
    std::string command;
    std::optional<std::string> config_path;
    std::string out_dir = ".";
    std::optional<GridSpec> grid;  // rad/s
    bool metadata = true;
    unsigned jobs = 1;
    std::vector<std::string> inputs;
    PlotStyle plot;
};

struct RunResult
{
    std::vector<std::string> written;
    std::vector<std::string> warnings;
    std::vector<std::string> notes;  // one-line summaries for the terminal
};

// "start,stop,points[,log]" in Hz.
inline GridSpec parse_grid(const std::string& text)
{
    const auto parts = split_commas(text);
    if (parts.size() < 3 || parts.size() > 4) throw UsageError("--grid expects start,stop,points[,log]");
    GridSpec g;
    try {
        g.start = hz_to_rad(parse_double(parts[0], "--grid"));
        g.stop = hz_to_rad(parse_double(parts[1], "--grid"));
        const double n = parse_double(parts[2], "--grid");
        if (!(n >= 1.0) || n != std::floor(n)) throw UsageError("--grid points must be a positive integer");
        g.points = static_cast<std::size_t>(n);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    if (parts.size() == 4) {
        if (parts[3] == "log") g.log = true;
        else if (parts[3] == "lin") g.log = false;
        else throw UsageError("--grid spacing must be 'log' or 'lin'");
    }
    return g;
}

namespace detail
{
// Runs body(i) for i in [0, n) on up to `jobs` threads. Results are written by
// index, so the output does not depend on scheduling; the first failure by
// index is rethrown.
inline void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& body)
{
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t)
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += jobs) {
                try {
                    body(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// Evaluates a whole-grid function on contiguous chunks and concatenates.
inline Spectrum chunked(const std::vector<double>& grid, unsigned jobs,
                        const std::function<Spectrum(const std::vector<double>&)>& f)
{
    if (jobs <= 1 || grid.size() < 2 * jobs) return f(grid);
    const std::size_t n = grid.size(), per = (n + jobs - 1) / jobs;
    std::vector<Spectrum> parts((n + per - 1) / per);
    parallel_for(parts.size(), jobs, [&](std::size_t k) {
        const auto lo = grid.begin() + static_cast<std::ptrdiff_t>(k * per);
        const auto hi = grid.begin() + static_cast<std::ptrdiff_t>(std::min(n, (k + 1) * per));
        parts[k] = f(std::vector<double>(lo, hi));
    });
    Spectrum out = parts.front();
    for (std::size_t k = 1; k < parts.size(); ++k) {
        out.omega.insert(out.omega.end(), parts[k].omega.begin(), parts[k].omega.end());
        for (std::size_t c = 0; c < out.channels.size(); ++c) {
            auto& dst = out.channels[c].values;
            dst.insert(dst.end(), parts[k].channels[c].values.begin(), parts[k].channels[c].values.end());
        }
        for (const auto& w : parts[k].warnings)
            if (std::find(out.warnings.begin(), out.warnings.end(), w) == out.warnings.end()) out.warnings.push_back(w);
    }
    return out;
}

inline Spectrum pointwise(const std::vector<double>& grid, unsigned jobs, const std::vector<std::string>& labels,
                          const std::function<std::vector<double>(double)>& f)
{
    std::vector<std::vector<double>> rows(grid.size());
    parallel_for(grid.size(), jobs, [&](std::size_t i) { rows[i] = f(grid[i]); });
    Spectrum s;
    s.omega = grid;
    for (std::size_t c = 0; c < labels.size(); ++c) {
        std::vector<double> v(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) v[i] = rows[i][c];
        s.add_channel(labels[c], std::move(v));
    }
    return s;
}

struct Context
{
    const RunOptions& opt;
    std::optional<RunConfig> cfg;
    RunResult result;

    const RunConfig& config() const
    {
        if (!cfg) throw UsageError("command '" + opt.command + "' needs --config");
        return *cfg;
    }

    std::vector<double> grid() const
    {
        if (opt.grid) return make_grid(*opt.grid);
        if (cfg && cfg->sweep) return make_grid(*cfg->sweep);
        fail(ErrorCategory::config, "no frequency grid: give --grid or a sweep section");
    }

    const std::string& input(std::size_t i = 0) const
    {
        if (opt.inputs.size() <= i) throw UsageError("command '" + opt.command + "' needs --input <file>");
        return opt.inputs[i];
    }

    Metadata metadata(const Metadata& extra = {}) const
    {
        Metadata m{{"tool", "cavfb " + std::string(tool_version)},
                   {"command", opt.command},
                   {"config_hash", cfg ? hash_string(cfg->hash) : std::string("none")}};
        m.insert(m.end(), extra.begin(), extra.end());
        return m;
    }

    std::string path(const std::string& name) const
    {
        return (std::filesystem::path(opt.out_dir) / name).string();
    }

    void emit(const std::string& name, const Table& t)
    {
        write_file(path(name), write_table_text(t, opt.metadata));
        result.written.push_back(path(name));
    }

    void emit_spectrum(const std::string& name, const Spectrum& s, const Metadata& extra = {})
    {
        for (const auto& w : s.warnings) result.warnings.push_back(w);
        emit(name, spectrum_to_table(s, metadata(extra)));
    }

    // Key-value report: "key,value" rows, numbers in shortest round-trip form.
    void emit_report(const std::string& name, const std::vector<std::pair<std::string, double>>& rows,
                     const Metadata& extra = {})
    {
        std::string text;
        if (opt.metadata)
            for (const auto& [k, v] : metadata(extra)) text += "# " + k + ": " + v + "\n";
        text += "key,value\n";
        for (const auto& [k, v] : rows) text += k + "," + format_double(v) + "\n";
        write_file(path(name), text);
        result.written.push_back(path(name));
    }
};

inline Metadata input_metadata(const std::string& path, const std::string& text)
{
    return {{"input", std::filesystem::path(path).filename().string()}, {"input_hash", hash_string(fnv1a64(text))}};
}

inline void cavity_response(Context& cx)
{
    const auto& cfg = cx.config();
    if (!cfg.cavity) fail(ErrorCategory::config, "cavity-response needs a cavity section");
    const auto cav = *cfg.cavity;
    const auto thermal = cfg.thermal;
    const auto mf = resolve_mean_field(cfg);
    const auto s = pointwise(cx.grid(), cx.opt.jobs, {"R", "chi_re", "chi_im", "S_inloop"}, [&](double w) {
        const complex chi = chi_c_eff(cav, thermal, mf, w);
        return std::vector<double>{std::norm(1.0 - cav.kappa_ex * chi), chi.real(), chi.imag(),
                                   inloop_flux_psd(cav, thermal, mf, w)};
    });
    cx.emit_spectrum("cavity-response.csv", s);
}

inline void heterodyne(Context& cx)
{
    const auto sys = optomech_system(cx.config());
    cx.emit_spectrum("heterodyne.csv",
                     chunked(cx.grid(), cx.opt.jobs, [&](const std::vector<double>& g) { return heterodyne_psd(sys, g); }));
}

inline void mech_psd(Context& cx)
{
    const auto sys = optomech_system(cx.config());
    cx.emit_spectrum("mech-psd.csv",
                     chunked(cx.grid(), cx.opt.jobs, [&](const std::vector<double>& g) { return mechanical_psd(sys, g); }));
}

inline void cooling(Context& cx)
{
    const auto sys = optomech_system(cx.config());
    const auto r = cooling_report(sys);
    cx.emit_report("cooling-report.csv", {{"n_c", sys.mf.n_c},
                                          {"delta_bar_hz", rad_to_hz(sys.mf.delta_bar)},
                                          {"kappa_eff_hz", rad_to_hz(r.kappa_eff)},
                                          {"delta_bar_eff_hz", rad_to_hz(r.delta_bar_eff)},
                                          {"gamma_opt_hz", rad_to_hz(r.gamma_opt)},
                                          {"gamma_eff_hz", rad_to_hz(r.gamma_eff)},
                                          {"n_th", r.n_th},
                                          {"n_l", r.n_l},
                                          {"n_f", r.n_f},
                                          {"bg_excess", r.bg_excess},
                                          {"snr", r.snr}});
    cx.result.notes.push_back("n_f = " + format_double(r.n_f) + ", n_l = " + format_double(r.n_l) +
                              ", kappa_eff/2pi = " + format_double(rad_to_hz(r.kappa_eff)) + " Hz");
}

// Total quadrature PSD at the configured angle, or at the per-frequency
// optimum when detection.theta_rad is absent, next to the Kerr-only minimum.
inline void squeezing(Context& cx)
{
    const auto& cfg = cx.config();
    if (!cfg.cavity || !cfg.kerr) fail(ErrorCategory::config, "squeezing needs cavity and kerr sections");
    const auto cav = *cfg.cavity;
    const auto kerr = *cfg.kerr;
    const auto mf = resolve_mean_field(cfg);
    const auto det = cfg.detection;
    const auto thermal = cfg.thermal;
    const auto fixed = cfg.theta;
    const auto s = pointwise(cx.grid(), cx.opt.jobs,
                             {"total", "kerr_only", "theta", "kerr_part", "excess_absorption", "excess_coherent"},
                             [&](double w) {
                                 const double th =
                                     fixed ? *fixed : combined_optimal_angle(cav, thermal, kerr, mf, w).theta;
                                 const auto p = homodyne_psd(cav, thermal, kerr, det, mf, th, w);
                                 const auto k = kerr_min_and_angle(cav, kerr, det, mf.n_c, w);
                                 return std::vector<double>{p.total, k.s_min, th, p.kerr_part, p.excess_absorption,
                                                            p.excess_coherent};
                             });
    cx.emit_spectrum("squeezing.csv", s, {{"angle", fixed ? "fixed" : "optimal"}});
}

inline void thermal_response(Context& cx)
{
    const auto& cfg = cx.config();
    if (!cfg.thermal_solver) fail(ErrorCategory::config, "thermal-response needs a thermal_solver section");
    const auto& ts = *cfg.thermal_solver;
    const auto geo = thermal_geometry(ts);
    auto s = chunked(cx.grid(), cx.opt.jobs, [&](const std::vector<double>& g) {
        return heat_response(geo, ts.material, g, ts.absorbed_power);
    });
    if (ts.fit_poles == 0) {
        cx.emit_spectrum("thermal-response.csv", s);
        return;
    }
    // Fit the response per watt so amplitudes are independent of the drive power.
    Spectrum per_watt = s;
    for (auto& c : per_watt.channels)
        for (double& v : c.values) v /= ts.absorbed_power;
    const double scale = ts.optical_frequency ? photon_gain_scale(*ts.optical_frequency) : 1.0;
    const auto fit = fit_poles(per_watt, ts.fit_poles, scale);
    std::vector<double> fre, fim;
    for (double w : s.omega) {
        complex v{};
        for (std::size_t j = 0; j < fit.gammas.size(); ++j) v += fit.amplitudes[j] / complex(fit.gammas[j], -w);
        fre.push_back(v.real() * ts.absorbed_power);
        fim.push_back(v.imag() * ts.absorbed_power);
    }
    s.add_channel("fit_re", fre);
    s.add_channel("fit_im", fim);
    cx.emit_spectrum("thermal-response.csv", s);
    std::vector<std::pair<std::string, double>> rows{{"n_poles", static_cast<double>(fit.gammas.size())},
                                                     {"residual", fit.residual}};
    for (std::size_t j = 0; j < fit.gammas.size(); ++j) {
        const std::string p = "pole" + std::to_string(j + 1) + "_";
        rows.emplace_back(p + "gamma_hz", rad_to_hz(fit.gammas[j]));
        rows.emplace_back(p + "amplitude_per_w", fit.amplitudes[j]);
        if (ts.optical_frequency) rows.emplace_back(p + "gain_hz", rad_to_hz(fit.model.poles()[j].gain));
    }
    cx.emit_report("thermal-poles.csv", rows);
}

inline void fit_response(Context& cx)
{
    const auto& in = cx.input();
    const auto text = read_file(in);
    const auto data = table_to_spectrum(read_table_text(text, in), in);
    const auto model = cx.cfg ? cx.cfg->fit.model : CoherentModel::bare;
    const std::string label = cx.cfg && !cx.cfg->fit.label.empty() ? cx.cfg->fit.label : "R";
    const auto fit = fit_coherent_response(data, model, {}, label);
    if (fit.status != FitStatus::converged)
        fail(ErrorCategory::fit_nonconvergence,
             "coherent response fit ended with status " + std::string(to_string(fit.status)));
    std::vector<std::pair<std::string, double>> rows;
    for (std::size_t i = 0; i < fit.names.size(); ++i) {
        const auto& n = fit.names[i];
        const double f = n == "g2" ? 1.0 / (two_pi * two_pi) : 1.0 / two_pi;
        const std::string key = n == "g2" ? "g2_hz2" : n + "_hz";
        rows.emplace_back(key, fit.values[i] * f);
        rows.emplace_back("sigma_" + key, fit.errors[i] * f);
    }
    rows.emplace_back("residual_norm", fit.residual_norm);
    Eigen::VectorXd p(static_cast<Eigen::Index>(fit.values.size()));
    for (std::size_t i = 0; i < fit.values.size(); ++i) p[static_cast<Eigen::Index>(i)] = fit.values[i];
    Spectrum out;
    out.omega = data.omega;
    out.add_channel(label, data.channel(label).values);
    std::vector<double> m;
    for (double w : data.omega) m.push_back(coherent_model(p, w));
    out.add_channel("model", m);
    const auto meta = input_metadata(in, text);
    cx.emit_report("fit-response.csv", rows, meta);
    cx.emit_spectrum("fit-response-model.csv", out, meta);
}

// Columns: n_c, kappa_eff_hz, sigma_kappa_eff_hz and optionally gamma_eff_hz,
// sigma_gamma_eff_hz, which add the damping line (gamma_m and g0).
inline void fit_linewidth(Context& cx)
{
    const auto& in = cx.input();
    const auto text = read_file(in);
    const auto t = read_table_text(text, in);
    if (t.header.empty() || t.header.front() != "n_c") fail(ErrorCategory::io, in + ": first column must be n_c");
    const auto& n = t.column("n_c");
    const auto& k = t.column("kappa_eff_hz");
    const auto& ks = t.column("sigma_kappa_eff_hz");
    PowerSeries series;
    for (std::size_t i = 0; i < n.size(); ++i) series.push_back({n[i], hz_to_rad(k[i]), hz_to_rad(ks[i])});
    const auto lw = fit_linewidth_series(series);
    std::vector<std::pair<std::string, double>> rows{
        {"kappa_hz", rad_to_hz(lw.value("kappa"))},
        {"sigma_kappa_hz", rad_to_hz(lw.error("kappa"))},
        {"slope_hz", rad_to_hz(lw.value("slope"))},
        {"sigma_slope_hz", rad_to_hz(lw.error("slope"))},
        {"kappa_a_sigma0_hz", rad_to_hz(lw.value("kappa_a_sigma0"))},
        {"sigma_kappa_a_sigma0_hz", rad_to_hz(lw.error("kappa_a_sigma0"))},
        {"chi2", lw.residual_norm * lw.residual_norm},
    };
    if (t.find("gamma_eff_hz") >= 0) {
        const auto& g = t.column("gamma_eff_hz");
        const auto& gs = t.column("sigma_gamma_eff_hz");
        std::vector<DampingPoint> d;
        for (std::size_t i = 0; i < n.size(); ++i)
            d.push_back({n[i], hz_to_rad(k[i]), hz_to_rad(g[i]), hz_to_rad(gs[i])});
        const auto df = fit_damping_series(d);
        rows.emplace_back("gamma_m_hz", rad_to_hz(df.value("gamma_m")));
        rows.emplace_back("sigma_gamma_m_hz", rad_to_hz(df.error("gamma_m")));
        rows.emplace_back("g0_hz", rad_to_hz(df.value("g0")));
        rows.emplace_back("sigma_g0_hz", rad_to_hz(df.error("g0")));
    }
    cx.emit_report("fit-linewidth-series.csv", rows, input_metadata(in, text));
}

inline void fit_mech(Context& cx)
{
    const auto& in = cx.input();
    const auto text = read_file(in);
    const auto data = table_to_spectrum(read_table_text(text, in), in);
    const std::string label = cx.cfg && !cx.cfg->fit.label.empty() ? cx.cfg->fit.label : "S_I";
    const auto fit = fit_mech_spectrum(data, label);
    if (fit.status != FitStatus::converged)
        fail(ErrorCategory::fit_nonconvergence,
             "mechanical spectrum fit ended with status " + std::string(to_string(fit.status)));
    const double f = 1.0 / two_pi;
    const auto meta = input_metadata(in, text);
    cx.emit_report("fit-mech.csv",
                   {{"gamma_eff_hz", fit.value("gamma_eff") * f},
                    {"sigma_gamma_eff_hz", fit.error("gamma_eff") * f},
                    {"center_hz", fit.value("center") * f},
                    {"sigma_center_hz", fit.error("center") * f},
                    {"area_hz", fit.value("area") * f},
                    {"sigma_area_hz", fit.error("area") * f},
                    {"floor", fit.value("floor")},
                    {"sigma_floor", fit.error("floor")},
                    {"residual_norm", fit.residual_norm}},
                   meta);
}

// Columns: n_c, kappa_eff_hz, n_l, area_hz, sigma_area_hz, floor. Areas are
// integrals of (S - floor) over frequency in Hz, as reported by fit-mech.
inline void thermometry_cmd(Context& cx)
{
    const auto& cfg = cx.config();
    if (!cfg.cavity || !cfg.mech) fail(ErrorCategory::config, "thermometry needs cavity and mechanics sections");
    const auto& in = cx.input();
    const auto text = read_file(in);
    const auto t = read_table_text(text, in);
    if (t.header.empty() || t.header.front() != "n_c") fail(ErrorCategory::io, in + ": first column must be n_c");
    std::vector<ThermometryPoint> series;
    const auto& n = t.column("n_c");
    for (std::size_t i = 0; i < t.rows(); ++i)
        series.push_back({n[i], hz_to_rad(t.column("kappa_eff_hz")[i]), t.column("n_l")[i],
                          hz_to_rad(t.column("area_hz")[i]), hz_to_rad(t.column("sigma_area_hz")[i]),
                          t.column("floor")[i]});
    const auto anchor = cfg.fit.anchor_index;
    if (anchor >= series.size()) fail(ErrorCategory::config, "fit.anchor_index is outside the series");
    ThermometryModel m{cfg.cavity->kappa_ex, cfg.mech->g0, cfg.mech->gamma_m,
                       cfg.fit.n_th_anchor.value_or(cfg.mech->bath.n_th(series[anchor].n_c))};
    const auto r = thermometry(series, anchor, m);
    Table out;
    out.metadata = cx.metadata(input_metadata(in, text));
    out.header = {"n_c", "n_f", "sigma_n_f"};
    out.columns = {n, r.n_f, r.n_f_sigma};
    cx.emit("thermometry.csv", out);
    cx.emit_report("thermometry-report.csv",
                   {{"eta_ex", r.eta_ex},
                    {"sigma_eta_ex", r.eta_ex_sigma},
                    {"calibration", r.calibration},
                    {"n_th_anchor", m.n_th_anchor},
                    {"min_n_f", *std::min_element(r.n_f.begin(), r.n_f.end())}},
                   input_metadata(in, text));
}

inline constexpr double oracle_tolerance = 1e-6;

// Closed form versus the linear-system oracle on the same grid. Configs with
// a kerr section compare the homodyne PSD (second order in the thermal gain);
// otherwise the heterodyne PSD at the resolved-sideband level. With --input,
// the closed-form column is read from a file written for the same config.
inline void oracle_check(Context& cx)
{
    const auto& cfg = cx.config();
    std::vector<double> grid;
    std::optional<std::vector<double>> given;
    if (!cx.opt.inputs.empty()) {
        const auto& in = cx.input();
        const auto t = read_table(in);
        const auto* h = t.meta("config_hash");
        if (!h) fail(ErrorCategory::config, in + ": file carries no config hash; cannot verify its origin");
        if (*h != hash_string(cfg.hash))
            fail(ErrorCategory::config, in + ": config hash " + *h + " does not match " + hash_string(cfg.hash));
        const auto s = table_to_spectrum(t, in);
        grid = s.omega;
        given = s.channel(cfg.kerr ? "total" : "S_I").values;
    } else {
        grid = cx.grid();
    }

    Spectrum s;
    if (cfg.kerr) {
        if (!cfg.cavity) fail(ErrorCategory::config, "oracle-check needs a cavity section");
        oracle::Params p;
        p.cavity = *cfg.cavity;
        p.thermal = cfg.thermal;
        p.mf = resolve_mean_field(cfg);
        p.g_kerr = cfg.kerr->g_kerr;
        p.detection = cfg.detection;
        const auto kerr = *cfg.kerr;
        s = pointwise(grid, cx.opt.jobs, {"closed_form", "oracle"}, [&](double w) {
            const double th = cfg.theta ? *cfg.theta : combined_optimal_angle(p.cavity, p.thermal, kerr, p.mf, w).theta;
            return std::vector<double>{homodyne_psd(p.cavity, p.thermal, kerr, p.detection, p.mf, th, w).total,
                                       oracle::homodyne_psd_second_order(p, th, w)};
        });
    } else {
        const auto sys = optomech_system(cfg);
        const auto p = oracle::Params::from(sys);
        const auto closed = heterodyne_psd(sys, grid);
        const auto o = pointwise(grid, cx.opt.jobs, {"oracle"}, [&](double nu) {
            return std::vector<double>{oracle::heterodyne_psd(p, nu, oracle::Level::resolved_sideband)};
        });
        s.omega = grid;
        s.add_channel("closed_form", closed.channel("S_I").values);
        s.add_channel("oracle", o.channels[0].values);
        s.warnings = closed.warnings;
    }
    if (given) s.channels[0].values = *given;
    std::vector<double> rel;
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double c = s.channels[0].values[i], o = s.channels[1].values[i];
        rel.push_back(std::abs(c - o) / std::abs(o));
        worst = std::max(worst, rel.back());
    }
    s.add_channel("rel_err", rel);
    cx.emit_spectrum("oracle-check.csv", s, {{"max_rel_err", format_double(worst)}});
    cx.result.notes.push_back("max rel_err = " + format_double(worst));
    if (!(worst < oracle_tolerance))
        fail(ErrorCategory::numeric_instability,
             "closed form and oracle disagree: max rel_err " + format_double(worst) + " >= 1e-6");
}

inline void plot(Context& cx)
{
    const auto& in = cx.input();
    const auto t = read_table(in);
    const auto name = std::filesystem::path(in).stem().string() + ".svg";
    write_file(cx.path(name), render_svg(t, cx.opt.plot));
    cx.result.written.push_back(cx.path(name));
}
}  // namespace detail

inline RunResult run(const RunOptions& opt)
{
    const auto& names = command_names();
    if (std::find(names.begin(), names.end(), opt.command) == names.end())
        throw UsageError("unknown command '" + opt.command + "'");
    if (opt.jobs == 0) throw UsageError("--jobs must be at least 1");
    detail::Context cx{opt, std::nullopt, {}};
    if (opt.config_path) cx.cfg = parse_config(*opt.config_path);
    std::error_code ec;
    std::filesystem::create_directories(opt.out_dir, ec);
    if (ec) fail(ErrorCategory::io, "cannot create output directory '" + opt.out_dir + "': " + ec.message());

    const auto& c = opt.command;
    if (c == "cavity-response") detail::cavity_response(cx);
    else if (c == "heterodyne") detail::heterodyne(cx);
    else if (c == "mech-psd") detail::mech_psd(cx);
    else if (c == "cooling-report") detail::cooling(cx);
    else if (c == "squeezing") detail::squeezing(cx);
    else if (c == "thermal-response") detail::thermal_response(cx);
    else if (c == "fit-response") detail::fit_response(cx);
    else if (c == "fit-linewidth-series") detail::fit_linewidth(cx);
    else if (c == "fit-mech") detail::fit_mech(cx);
    else if (c == "thermometry") detail::thermometry_cmd(cx);
    else if (c == "oracle-check") detail::oracle_check(cx);
    else detail::plot(cx);
    return cx.result;
}

// Machine-readable failure record written next to the outputs.
inline std::string error_record(const std::string& command, const std::string& category, int code,
                                const std::string& message)
{
    nlohmann::ordered_json j;
    j["command"] = command;
    j["category"] = category;
    j["exit_code"] = code;
    j["message"] = message;
    return j.dump(2) + "\n";
}

}  // namespace cavfb::io

#endif  // CAVFB_IO_COMMANDS_HPP
