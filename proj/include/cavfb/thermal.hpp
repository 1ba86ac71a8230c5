#ifndef CAVFB_THERMAL_HPP
#define CAVFB_THERMAL_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "cavfb/core_response.hpp"
#include "cavfb/error.hpp"
#include "cavfb/least_squares.hpp"
#include "cavfb/spectrum.hpp"
#include "cavfb/units.hpp"

namespace cavfb
{
struct MaterialProps
{
    double density = 0.0;        // kg/m^3
    double heat_capacity = 0.0;  // J/(kg K)
    double conductivity = 0.0;   // W/(m K)
    double n0 = 1.0;
    double dn_dt = 0.0;          // 1/K

    void validate() const
    {
        require(density > 0.0 && heat_capacity > 0.0 && conductivity > 0.0 && n0 > 0.0 && dn_dt > 0.0,
                "material properties must be positive");
    }
};

namespace materials
{
inline MaterialProps silicon_nitride() { return {3290.0, 800.0, 30.0, 2.00, 2.45e-5}; }
inline MaterialProps silicon() { return {2329.0, 700.0, 130.0, 3.48, 16.0e-5}; }
inline MaterialProps silica() { return {2203.0, 703.0, 1.38, 1.50, 1.29e-5}; }
}  // namespace materials

enum class OuterBoundary
{
    fixed_temperature,
    insulating,
};

// Spherically symmetric cells between consecutive edges. weights[i] is the mode
// intensity in cell i normalized so that sum(weights * volumes) = 1; the same
// profile is used as the heat source (absorption follows the energy density).
struct Geometry1D
{
    std::vector<double> edges;
    std::vector<double> weights;
    OuterBoundary boundary = OuterBoundary::fixed_temperature;

    std::size_t cells() const noexcept { return edges.empty() ? 0 : edges.size() - 1; }

    double volume(std::size_t i) const
    {
        return 4.0 * std::numbers::pi / 3.0 * (std::pow(edges[i + 1], 3) - std::pow(edges[i], 3));
    }

    double center(std::size_t i) const { return 0.5 * (edges[i] + edges[i + 1]); }

    void validate() const
    {
        require(edges.size() >= 2, "thermal geometry needs at least one cell");
        require(edges.front() >= 0.0, "radial grid must start at r >= 0");
        for (std::size_t i = 1; i < edges.size(); ++i)
            require(edges[i] > edges[i - 1], "radial grid must be strictly increasing");
        require(weights.size() == cells(), "one weight per radial cell is required");
        for (double w : weights) require(w >= 0.0 && std::isfinite(w), "mode weights must be non-negative");
    }

    // Cells on [0, outer_radius] (uniform in r) with weights sampled from a
    // radial profile at cell centers and normalized.
    static Geometry1D from_profile(double outer_radius, std::size_t n_cells, const std::function<double(double)>& profile,
                                   OuterBoundary boundary = OuterBoundary::fixed_temperature)
    {
        require(outer_radius > 0.0 && n_cells >= 1, "geometry needs a positive radius and at least one cell");
        Geometry1D g;
        g.boundary = boundary;
        g.edges = linspace(0.0, outer_radius, n_cells + 1);
        double norm = 0.0;
        for (std::size_t i = 0; i < n_cells; ++i) {
            g.weights.push_back(profile(g.center(i)));
            norm += g.weights.back() * g.volume(i);
        }
        require(norm > 0.0, "mode profile has no weight inside the geometry");
        for (double& w : g.weights) w /= norm;
        return g;
    }

    // Gaussian mode of 1/e radius mode_radius centered in a sphere.
    static Geometry1D gaussian_mode(double outer_radius, double mode_radius, std::size_t n_cells,
                                    OuterBoundary boundary = OuterBoundary::fixed_temperature)
    {
        require(mode_radius > 0.0, "mode radius must be positive");
        return from_profile(
            outer_radius, n_cells, [mode_radius](double r) { return std::exp(-(r * r) / (mode_radius * mode_radius)); },
            boundary);
    }
};

namespace detail
{
// Thomas algorithm for a complex tridiagonal system (lower, diag, upper).
inline std::vector<complex> solve_tridiagonal(std::vector<complex> lower, std::vector<complex> diag,
                                              std::vector<complex> upper, std::vector<complex> rhs)
{
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        if (diag[i - 1] == complex{}) fail(ErrorCategory::numeric_instability, "thermal discretization is singular");
        const complex m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    if (std::abs(diag[n - 1]) < 1e-300) fail(ErrorCategory::numeric_instability, "thermal discretization is singular");
    std::vector<complex> x(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
    return x;
}
}  // namespace detail

// Temperature field (per cell) for absorbed power P oscillating as e^{-i omega t}:
// -i omega rho C T = k lap T + P w. Finite volumes with exact spherical-shell
// conductances between cell centers.
inline std::vector<complex> temperature_field(const Geometry1D& geo, const MaterialProps& mat, double omega,
                                              double absorbed_power)
{
    geo.validate();
    mat.validate();
    if (geo.boundary == OuterBoundary::insulating && omega == 0.0)
        fail(ErrorCategory::numeric_instability, "insulating sphere has no static solution under constant heating");
    const std::size_t n = geo.cells();
    const double pi4k = 4.0 * std::numbers::pi * mat.conductivity;
    std::vector<complex> lower(n), diag(n), upper(n), rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = geo.volume(i);
        diag[i] = complex(0.0, -omega * mat.density * mat.heat_capacity * v);
        rhs[i] = absorbed_power * geo.weights[i] * v;
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double g = pi4k / (1.0 / geo.center(i) - 1.0 / geo.center(i + 1));
        diag[i] += g;
        diag[i + 1] += g;
        upper[i] -= g;
        lower[i + 1] -= g;
    }
    if (geo.boundary == OuterBoundary::fixed_temperature) {
        const double g = pi4k / (1.0 / geo.center(n - 1) - 1.0 / geo.edges.back());
        diag[n - 1] += g;
    }
    return detail::solve_tridiagonal(lower, diag, upper, rhs);
}

// Relative cavity shift d(omega_c)/omega_c = -(dn/dT / n0) sum T w V.
inline complex relative_shift(const Geometry1D& geo, const MaterialProps& mat, const std::vector<complex>& t)
{
    complex overlap{};
    for (std::size_t i = 0; i < geo.cells(); ++i) overlap += t[i] * geo.weights[i] * geo.volume(i);
    return -(mat.dn_dt / mat.n0) * overlap;
}

// Channels "shift_re", "shift_im": relative cavity shift for the given power.
inline Spectrum heat_response(const Geometry1D& geo, const MaterialProps& mat, const std::vector<double>& omega_grid,
                              double absorbed_power)
{
    Spectrum out;
    out.omega = omega_grid;
    std::vector<double> re(omega_grid.size()), im(omega_grid.size());
    for (std::size_t i = 0; i < omega_grid.size(); ++i) {
        require(omega_grid[i] >= 0.0, "thermal response is evaluated at non-negative frequencies");
        const complex s = relative_shift(geo, mat, temperature_field(geo, mat, omega_grid[i], absorbed_power));
        re[i] = s.real();
        im[i] = s.imag();
    }
    out.add_channel("shift_re", std::move(re));
    out.add_channel("shift_im", std::move(im));
    return out;
}

// Converts a relative shift per watt into a cavity frequency shift per absorbed
// photon per second: P = hbar omega_c * flux, d(omega_c) = omega_c * relative.
inline double photon_gain_scale(double omega_c) { return hbar * omega_c * omega_c; }

struct PoleFit
{
    ThermalResponseModel model;
    std::vector<double> amplitudes;  // c_j of R(omega) = sum c_j/(gamma_j - i omega)
    std::vector<double> gammas;
    double residual = 0.0;           // ||fit - data|| / ||data||
    FitStatus status = FitStatus::converged;
};

namespace detail
{
struct ProjectedFit
{
    Eigen::VectorXd c;
    Eigen::VectorXd residual;
};

inline ProjectedFit project_amplitudes(const std::vector<double>& omega, const std::vector<complex>& data,
                                       const Eigen::VectorXd& log_gamma)
{
    const Eigen::Index m = static_cast<Eigen::Index>(omega.size()), p = log_gamma.size();
    Eigen::MatrixXd a(2 * m, p);
    Eigen::VectorXd y(2 * m);
    for (Eigen::Index i = 0; i < m; ++i) {
        y[2 * i] = data[i].real();
        y[2 * i + 1] = data[i].imag();
        for (Eigen::Index j = 0; j < p; ++j) {
            const complex b = 1.0 / complex(std::exp(log_gamma[j]), -omega[i]);
            a(2 * i, j) = b.real();
            a(2 * i + 1, j) = b.imag();
        }
    }
    ProjectedFit out;
    out.c = a.completeOrthogonalDecomposition().solve(y);
    out.residual = a * out.c - y;
    return out;
}
}  // namespace detail

// Rational fit sum_j c_j/(gamma_j - i omega) with real c_j, gamma_j > 0, of a
// complex response given as channels "<prefix>_re"/"<prefix>_im". Amplitudes
// are solved linearly for each trial set of rates (variable projection); the
// rates are refined in log space by damped Gauss-Newton. Models with 1..n_poles
// poles are fitted in turn, each seeded from the previous one, and the
// smallest model reaching the best residual is returned. Gains are
// gain_scale * c_j (see photon_gain_scale).
inline PoleFit fit_poles(const Spectrum& response, std::size_t n_poles, double gain_scale = 1.0,
                         const std::string& prefix = "shift")
{
    response.validate();
    require(n_poles >= 1, "at least one pole is required");
    require(response.size() >= 3 * n_poles, "pole fit needs at least three samples per pole");
    const auto& re = response.channel(prefix + "_re").values;
    const auto& im = response.channel(prefix + "_im").values;
    std::vector<complex> data(re.size());
    double data_norm = 0.0;
    for (std::size_t i = 0; i < re.size(); ++i) {
        data[i] = complex(re[i], im[i]);
        data_norm += std::norm(data[i]);
    }
    data_norm = std::sqrt(data_norm);
    require(data_norm > 0.0, "cannot fit poles to an identically zero response");

    double w_lo = 0.0, w_hi = response.omega.back();
    for (double w : response.omega)
        if (w > 0.0) {
            w_lo = w;
            break;
        }
    require(w_hi > 0.0 && w_lo > 0.0, "pole fit needs positive frequencies");
    if (w_hi <= w_lo) w_hi = 10.0 * w_lo;

    std::vector<PoleFit> fits;
    Eigen::VectorXd best_log;
    for (std::size_t k = 1; k <= n_poles; ++k) {
        std::vector<Eigen::VectorXd> starts;
        Eigen::VectorXd spread(k);
        for (std::size_t j = 0; j < k; ++j) {
            const double t = k == 1 ? 0.5 : static_cast<double>(j) / static_cast<double>(k - 1);
            spread[j] = std::log(w_lo) + t * (std::log(w_hi) - std::log(w_lo));
        }
        starts.push_back(spread);
        if (k > 1) {
            // Previous optimum plus one new rate at each decade of the band.
            for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
                Eigen::VectorXd s(k);
                s.head(k - 1) = best_log;
                s[k - 1] = std::log(w_lo) + t * (std::log(w_hi) - std::log(w_lo)) + 0.1;
                starts.push_back(s);
            }
        }
        auto f = [&](const Eigen::VectorXd& lg) -> Eigen::VectorXd {
            return detail::project_amplitudes(response.omega, data, lg).residual / data_norm;
        };
        LmOptions opt;
        opt.x_scale = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(k));
        LmResult best;
        best.cost = std::numeric_limits<double>::infinity();
        for (const auto& s : starts) {
            auto r = levenberg_marquardt(f, s, opt);
            if (r.cost < best.cost) best = r;
        }
        if (!best.x.allFinite()) {
            std::ostringstream os;
            os << "pole fit with " << k << " poles did not converge (status " << to_string(best.status) << ")";
            fail(ErrorCategory::fit_nonconvergence, os.str());
        }
        best_log = best.x;
        const auto proj = detail::project_amplitudes(response.omega, data, best.x);
        PoleFit pf;
        std::vector<ThermalPole> poles;
        for (std::size_t j = 0; j < k; ++j) {
            const double gamma = std::exp(best.x[j]);
            if (!(gamma > 0.0) || !std::isfinite(gamma)) {
                std::ostringstream os;
                os << "pole fit produced an invalid rate gamma = " << gamma;
                fail(ErrorCategory::fit_nonconvergence, os.str());
            }
            pf.amplitudes.push_back(proj.c[j]);
            pf.gammas.push_back(gamma);
            poles.push_back(ThermalPole{gain_scale * proj.c[j], gamma});
        }
        std::vector<std::size_t> order(k);
        for (std::size_t j = 0; j < k; ++j) order[j] = j;
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return pf.gammas[a] < pf.gammas[b]; });
        std::vector<double> amps, gams;
        std::vector<ThermalPole> sorted;
        for (auto j : order) {
            amps.push_back(pf.amplitudes[j]);
            gams.push_back(pf.gammas[j]);
            sorted.push_back(poles[j]);
        }
        pf.amplitudes = amps;
        pf.gammas = gams;
        pf.model = ThermalResponseModel(sorted);
        pf.residual = proj.residual.norm() / data_norm;
        // A singular Jacobian with more than one pole means redundant poles.
        pf.status = best.status == FitStatus::singular && k == 1 ? FitStatus::singular : FitStatus::converged;
        fits.push_back(pf);
    }
    double best_res = std::numeric_limits<double>::infinity();
    for (const auto& f : fits) best_res = std::min(best_res, f.residual);
    for (const auto& f : fits)
        if (f.residual <= best_res * (1.0 + 1e-9) + 1e-15) return f;
    return fits.back();
}

}  // namespace cavfb

#endif  // CAVFB_THERMAL_HPP
