#ifndef CAVFB_FITTING_HPP
#define CAVFB_FITTING_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cavfb/error.hpp"
#include "cavfb/least_squares.hpp"
#include "cavfb/spectrum.hpp"
#include "cavfb/units.hpp"

namespace cavfb
{
struct FitResult
{
    std::vector<std::string> names;
    std::vector<double> values;
    std::vector<double> errors;
    double residual_norm = 0.0;
    double initial_residual_norm = 0.0;
    FitStatus status = FitStatus::converged;
    int iterations = 0;

    std::size_t index(const std::string& name) const
    {
        auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) fail(ErrorCategory::invalid_argument, "fit has no parameter '" + name + "'");
        return static_cast<std::size_t>(it - names.begin());
    }
    double value(const std::string& name) const { return values[index(name)]; }
    double error(const std::string& name) const { return errors[index(name)]; }
};

namespace detail
{
inline FitResult from_lm(std::vector<std::string> names, const LmResult& r)
{
    FitResult out;
    out.names = std::move(names);
    out.values.assign(r.x.data(), r.x.data() + r.x.size());
    out.errors.assign(r.errors.data(), r.errors.data() + r.errors.size());
    out.residual_norm = std::sqrt(r.cost);
    out.initial_residual_norm = std::sqrt(r.initial_cost);
    out.status = r.status;
    out.iterations = r.iterations;
    return out;
}

inline std::vector<double> inverse_sigma(const Channel& c)
{
    std::vector<double> w(c.values.size(), 1.0);
    if (!c.sigma.empty())
        for (std::size_t i = 0; i < w.size(); ++i) {
            require(c.sigma[i] > 0.0, "uncertainties must be positive");
            w[i] = 1.0 / c.sigma[i];
        }
    return w;
}

// Full width at half depth of a feature of height `depth` above `base` around
// index `peak` (values measured as |y - base|).
inline double half_width(const std::vector<double>& x, const std::vector<double>& y, std::size_t peak, double base)
{
    const double half = 0.5 * std::abs(y[peak] - base);
    std::size_t lo = peak, hi = peak;
    while (lo > 0 && std::abs(y[lo] - base) > half) --lo;
    while (hi + 1 < y.size() && std::abs(y[hi] - base) > half) ++hi;
    return std::max(x[hi] - x[lo], x.size() > 1 ? x[1] - x[0] : 1.0);
}

inline double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
}  // namespace detail

enum class CoherentModel
{
    bare,
    with_mechanics,
};

// Optional starting values; unset entries are seeded from the data.
struct CoherentGuess
{
    std::optional<double> kappa_eff;
    std::optional<double> delta_bar_eff;
    std::optional<double> kappa_ex;
    std::optional<double> g2;  // n_c g0^2
    std::optional<double> omega_m;
    std::optional<double> gamma_m;
};

// |r|^2 with r = 1 - kappa_ex chi and
// chi = 1/(kappa_eff/2 - i(Delta_eff + w) + G2/(gamma_m/2 - i(w - omega_m))).
inline double coherent_model(const Eigen::VectorXd& p, double w)
{
    std::complex<double> inv(0.5 * p[0], -(p[1] + w));
    if (p.size() > 3) inv += p[3] / std::complex<double>(0.5 * p[5], -(w - p[4]));
    return std::norm(1.0 - p[2] / inv);
}

// Fits the reflected power |r(w)|^2 in channel `label`; the grid is the probe
// offset from the pump (rad/s).
inline FitResult fit_coherent_response(const Spectrum& spectrum, CoherentModel model = CoherentModel::bare,
                                       const CoherentGuess& guess = {}, const std::string& label = "R")
{
    spectrum.validate();
    const auto& ch = spectrum.channel(label);
    const auto& w = spectrum.omega;
    const auto& y = ch.values;
    require(w.size() >= 8, "coherent response fit needs at least 8 samples");
    const auto inv_sigma = detail::inverse_sigma(ch);

    // Seeds: dip center and width, depth from the undercoupled branch.
    const double base = std::max(detail::median(y), *std::max_element(y.begin(), y.end()));
    const std::size_t imin = static_cast<std::size_t>(std::min_element(y.begin(), y.end()) - y.begin());
    const double kappa0 = guess.kappa_eff.value_or(detail::half_width(w, y, imin, base));
    const double delta0 = guess.delta_bar_eff.value_or(-w[imin]);
    const double depth = std::clamp(y[imin] / std::max(base, 1e-300), 0.0, 1.0);
    const double kex0 = guess.kappa_ex.value_or(0.5 * kappa0 * (1.0 - std::sqrt(depth)));

    auto bare_residual = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(static_cast<Eigen::Index>(w.size()));
        for (std::size_t i = 0; i < w.size(); ++i) r[i] = (coherent_model(p, w[i]) - y[i]) * inv_sigma[i];
        return r;
    };
    LmOptions opt;
    opt.x_scale = Eigen::Vector3d(kappa0, kappa0, kappa0);
    const LmResult bare = levenberg_marquardt(bare_residual, Eigen::Vector3d(kappa0, delta0, kex0), opt);
    if (model == CoherentModel::bare) return detail::from_lm({"kappa_eff", "delta_bar_eff", "kappa_ex"}, bare);

    // Mechanical seeds from the largest deviation from the bare fit.
    std::vector<double> dev(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) dev[i] = y[i] - coherent_model(bare.x, w[i]);
    std::size_t ipk = 0;
    for (std::size_t i = 1; i < w.size(); ++i)
        if (std::abs(dev[i]) > std::abs(dev[ipk])) ipk = i;
    const double wm0 = guess.omega_m.value_or(w[ipk]);
    const double gm0 = guess.gamma_m.value_or(detail::half_width(w, dev, ipk, 0.0));
    double g20 = 0.0;
    if (guess.g2) {
        g20 = *guess.g2;
    } else {
        // On the window center the mechanics adds 2 G2/gamma to the cavity
        // denominator; invert |r|^2 there using the bare fit.
        const double rpk = std::sqrt(std::max(y[ipk], 0.0));
        const std::complex<double> inv(0.5 * bare.x[0], -(bare.x[1] + w[ipk]));
        const double target = std::abs(bare.x[2] / std::max(1.0 - rpk, 1e-6));
        g20 = std::max(0.5 * gm0 * (target - std::abs(inv)), 0.01 * gm0 * bare.x[0]);
    }
    Eigen::VectorXd p0(6);
    p0 << bare.x[0], bare.x[1], bare.x[2], g20, wm0, gm0;
    auto full_residual = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(static_cast<Eigen::Index>(w.size()));
        for (std::size_t i = 0; i < w.size(); ++i) r[i] = (coherent_model(p, w[i]) - y[i]) * inv_sigma[i];
        return r;
    };
    LmOptions opt6;
    opt6.x_scale.resize(6);
    opt6.x_scale << kappa0, kappa0, kappa0, std::abs(g20) + gm0 * kappa0 * 1e-3, std::abs(wm0) + gm0, gm0;
    const LmResult full = levenberg_marquardt(full_residual, p0, opt6);
    return detail::from_lm({"kappa_eff", "delta_bar_eff", "kappa_ex", "g2", "omega_m", "gamma_m"}, full);
}

struct SeriesPoint
{
    double n_c = 0.0;
    double value = 0.0;
    double sigma = 0.0;
};

using PowerSeries = std::vector<SeriesPoint>;

inline void validate_series(const PowerSeries& s)
{
    for (std::size_t i = 0; i < s.size(); ++i) {
        require(s[i].sigma > 0.0, "series uncertainties must be positive");
        require(i == 0 || s[i].n_c > s[i - 1].n_c, "series photon numbers must be strictly increasing");
    }
}

struct LineFit
{
    double intercept = 0.0, slope = 0.0;
    double intercept_err = 0.0, slope_err = 0.0, covariance = 0.0;
    double chi2 = 0.0;
};

// Inverse-variance weighted straight line; uncertainties are taken as absolute.
inline LineFit weighted_line(const std::vector<double>& x, const std::vector<double>& y,
                             const std::vector<double>& sigma)
{
    double s = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double w = 1.0 / (sigma[i] * sigma[i]);
        s += w;
        sx += w * x[i];
        sy += w * y[i];
        sxx += w * x[i] * x[i];
        sxy += w * x[i] * y[i];
    }
    const double det = s * sxx - sx * sx;
    if (!(det > 1e-12 * s * sxx)) fail(ErrorCategory::invalid_argument, "line fit needs at least two distinct abscissae");
    LineFit f;
    f.slope = (s * sxy - sx * sy) / det;
    f.intercept = (sxx * sy - sx * sxy) / det;
    f.slope_err = std::sqrt(s / det);
    f.intercept_err = std::sqrt(sxx / det);
    f.covariance = -sx / det;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = (y[i] - f.intercept - f.slope * x[i]) / sigma[i];
        f.chi2 += r * r;
    }
    return f;
}

// kappa_eff(n_c) = kappa - 2 kappa_a sigma0(Omega_m) n_c. Reports kappa,
// slope and kappa_a_sigma0 = -slope/2.
inline FitResult fit_linewidth_series(const PowerSeries& series)
{
    validate_series(series);
    std::vector<double> x, y, s;
    for (const auto& p : series) {
        x.push_back(p.n_c);
        y.push_back(p.value);
        s.push_back(p.sigma);
    }
    const auto line = weighted_line(x, y, s);
    FitResult out;
    out.names = {"kappa", "slope", "kappa_a_sigma0"};
    out.values = {line.intercept, line.slope, -0.5 * line.slope};
    out.errors = {line.intercept_err, line.slope_err, 0.5 * line.slope_err};
    out.residual_norm = std::sqrt(line.chi2);
    out.initial_residual_norm = out.residual_norm;
    return out;
}

struct DampingPoint
{
    double n_c = 0.0;
    double kappa_eff = 0.0;
    double gamma_eff = 0.0;
    double sigma = 0.0;
};

// gamma_eff = gamma_m + g0^2 (4 n_c / kappa_eff) with kappa_eff given per point.
inline FitResult fit_damping_series(const std::vector<DampingPoint>& series)
{
    std::vector<double> x, y, s;
    for (const auto& p : series) {
        require(p.kappa_eff > 0.0 && p.sigma > 0.0, "damping series needs positive kappa_eff and uncertainties");
        x.push_back(4.0 * p.n_c / p.kappa_eff);
        y.push_back(p.gamma_eff);
        s.push_back(p.sigma);
    }
    const auto line = weighted_line(x, y, s);
    require(line.slope > 0.0, "damping series slope must be positive to extract g0");
    const double g0 = std::sqrt(line.slope);
    FitResult out;
    out.names = {"gamma_m", "g0"};
    out.values = {line.intercept, g0};
    out.errors = {line.intercept_err, 0.5 * line.slope_err / g0};
    out.residual_norm = std::sqrt(line.chi2);
    out.initial_residual_norm = out.residual_norm;
    return out;
}

inline double lorentzian_peak(const Eigen::VectorXd& p, double w)
{
    const double hw = 0.5 * p[0];
    const double d = w - p[1];
    return p[3] + p[2] * hw / std::numbers::pi / (d * d + hw * hw);
}

// floor + area (Gamma/2)/pi / ((w - center)^2 + (Gamma/2)^2). Parameters are
// gamma_eff, center, area (integral over w of S - floor) and floor.
inline FitResult fit_mech_spectrum(const Spectrum& spectrum, const std::string& label = "S_I")
{
    spectrum.validate();
    const auto& ch = spectrum.channel(label);
    const auto& w = spectrum.omega;
    const auto& y = ch.values;
    require(w.size() >= 5, "mechanical spectrum fit needs at least 5 samples");
    const auto inv_sigma = detail::inverse_sigma(ch);

    const double floor0 = detail::median(y);
    std::size_t ipk = 0;
    for (std::size_t i = 1; i < y.size(); ++i)
        if (std::abs(y[i] - floor0) > std::abs(y[ipk] - floor0)) ipk = i;
    const double gamma0 = detail::half_width(w, y, ipk, floor0);
    const double area0 = (y[ipk] - floor0) * std::numbers::pi * 0.5 * gamma0;

    auto residual = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(static_cast<Eigen::Index>(w.size()));
        for (std::size_t i = 0; i < w.size(); ++i) r[i] = (lorentzian_peak(p, w[i]) - y[i]) * inv_sigma[i];
        return r;
    };
    Eigen::Vector4d p0(gamma0, w[ipk], area0, floor0);
    LmOptions opt;
    const double span = w.back() - w.front();
    opt.x_scale = Eigen::Vector4d(gamma0, span, std::abs(area0) + 1e-300, std::abs(floor0) + 1e-300);
    auto r = levenberg_marquardt(residual, p0, opt);
    r.x[0] = std::abs(r.x[0]);
    return detail::from_lm({"gamma_eff", "center", "area", "floor"}, r);
}

// One spectrum of the thermometry series with the model inputs it needs.
struct ThermometryPoint
{
    double n_c = 0.0;
    double kappa_eff = 0.0;
    double n_l = 0.0;
    double area = 0.0;  // fitted sideband area, integral over w (rad/s) of S - floor
    double area_sigma = 0.0;
    double floor = 1.0;  // fitted floor, any common scale
};

struct ThermometryModel
{
    double kappa_ex = 0.0;
    double g0 = 0.0;
    double gamma_m = 0.0;
    double n_th_anchor = 0.0;
};

struct ThermometryResult
{
    double calibration = 0.0;
    double eta_ex = 0.0;
    double eta_ex_sigma = 0.0;
    std::vector<double> n_f;
    std::vector<double> n_f_sigma;
    int iterations = 0;
};

// Anchored noise thermometry. Areas are first expressed in shot-noise units
// (floor / (1 + 4 eta n_l kappa_ex / kappa_eff)); the anchor's modelled
// occupancy then fixes one calibration factor and eta_ex, solved together by
// fixed-point iteration because the floor correction depends on eta_ex.
inline ThermometryResult thermometry(const std::vector<ThermometryPoint>& series, std::size_t anchor,
                                     const ThermometryModel& model)
{
    require(anchor < series.size(), "thermometry anchor index out of range");
    for (const auto& p : series)
        require(p.n_c > 0.0 && p.kappa_eff > 0.0 && p.floor > 0.0 && p.n_l >= 0.0,
                "thermometry points need positive n_c, kappa_eff and floor");
    const auto& a = series[anchor];
    if (!(a.area_sigma >= 0.0) || a.area == 0.0 || a.area_sigma > 0.5 * std::abs(a.area)) {
        std::ostringstream os;
        os << "anchor sideband is too weak for calibration (area " << a.area << " +/- " << a.area_sigma << ")";
        fail(ErrorCategory::invalid_argument, os.str());
    }
    const double g0sq = model.g0 * model.g0;
    const double gamma_opt_a = 4.0 * a.n_c * g0sq / a.kappa_eff;
    const double n_f_anchor =
        (model.n_th_anchor * model.gamma_m + gamma_opt_a * a.n_l) / (model.gamma_m + gamma_opt_a);
    const double excess_a = n_f_anchor - 2.0 * a.n_l;
    require(excess_a != 0.0, "anchor occupancy equals the squashing point; calibration is undefined");

    auto shot = [&](const ThermometryPoint& p, double eta) {
        return p.floor / (1.0 + 4.0 * eta * p.n_l * model.kappa_ex / p.kappa_eff);
    };
    ThermometryResult out;
    double eta = 1.0;
    for (out.iterations = 1; out.iterations <= 500; ++out.iterations) {
        const double area_sn = a.area / shot(a, eta);
        const double next = area_sn / (two_pi * 4.0 * model.kappa_ex * a.n_c * g0sq /
                                       (a.kappa_eff * a.kappa_eff) * excess_a);
        if (!std::isfinite(next)) fail(ErrorCategory::numeric_instability, "eta_ex iteration diverged");
        const bool done = std::abs(next - eta) <= 1e-15 * std::abs(next);
        eta = next;
        if (done) break;
    }
    out.eta_ex = eta;
    out.eta_ex_sigma = eta * a.area_sigma / std::abs(a.area);
    const double area_a = a.area / shot(a, eta);
    out.calibration = area_a * a.kappa_eff * a.kappa_eff / (a.n_c * excess_a);
    const double rel_a = a.area_sigma / std::abs(a.area);
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& p = series[i];
        const double area = p.area / shot(p, eta);
        const double signal = area * p.kappa_eff * p.kappa_eff / (out.calibration * p.n_c);
        out.n_f.push_back(signal + 2.0 * p.n_l);
        const double rel = i == anchor ? 0.0 : std::hypot(p.area_sigma / std::abs(p.area), rel_a);
        out.n_f_sigma.push_back(std::abs(signal) * rel);
    }
    return out;
}

}  // namespace cavfb

#endif  // CAVFB_FITTING_HPP
