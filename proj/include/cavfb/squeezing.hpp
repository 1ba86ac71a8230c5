#ifndef CAVFB_SQUEEZING_HPP
#define CAVFB_SQUEEZING_HPP

#include <cmath>
#include <numbers>
#include <optional>

#include "cavfb/core_response.hpp"
#include "cavfb/error.hpp"
#include "cavfb/optomech.hpp"
#include "cavfb/units.hpp"

namespace cavfb
{
struct KerrParams
{
    double g_kerr = 0.0;  // rad/s per photon
    std::optional<double> n2;
    std::optional<double> n0;
    std::optional<double> v_mode;
};

// g_Kerr = -omega_c (n2/n0) hbar omega_c c / (V n0).
inline double kerr_coupling_estimate(double omega_c, double n0, double n2, double v_mode)
{
    require(omega_c > 0.0 && n0 > 0.0 && n2 >= 0.0 && v_mode > 0.0, "Kerr estimate needs positive inputs");
    return -omega_c * (n2 / n0) * (hbar * omega_c * speed_of_light) / (v_mode * n0);
}

struct QuadraturePoint
{
    double total = 1.0;
    double kerr_part = 1.0;
    double excess_absorption = 0.0;
    double excess_coherent = 0.0;
};

inline double normalize_angle(double theta)
{
    double t = std::fmod(theta, std::numbers::pi);
    if (t < 0.0) t += std::numbers::pi;
    if (t >= std::numbers::pi) t = 0.0;
    return t;
}

namespace detail
{
inline const ThermalPole& single_pole_of(const ThermalResponseModel& thermal)
{
    if (thermal.pole_count() != 1)
        fail(ErrorCategory::unsupported,
             "squeezing closed forms need a one-pole thermal model; use the oracle for multi-pole responses");
    return thermal.poles().front();
}

inline void require_resonant(const CavityParams& cavity, double delta_bar)
{
    if (std::abs(delta_bar) > 1e-12 * cavity.total_kappa())
        fail(ErrorCategory::unsupported,
             "squeezing closed forms assume zero mean detuning; use the oracle for detuned drives");
}

// Golden-section minimum of f on [a, b].
template <class F>
double golden_min(F&& f, double a, double b, double tol)
{
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}
}  // namespace detail

// Shot-noise-normalized homodyne PSD of the reflected field at mean detuning
// zero, split into the Kerr spectrum and the two thermal excess terms.
inline QuadraturePoint homodyne_psd(const CavityParams& cavity, const ThermalResponseModel& thermal,
                                    const KerrParams& kerr, const DetectionSetup& detection, const MeanField& mf,
                                    double theta, double omega)
{
    cavity.validate();
    detection.validate();
    detail::require_resonant(cavity, mf.delta_bar);
    const auto& pole = detail::single_pole_of(thermal);

    const double k = cavity.total_kappa();
    const double n = mf.n_c;
    const double eta = detection.eta_ex;
    const double eta_c = cavity.kappa_ex / k;
    const double eta_a = cavity.kappa_a / k;
    const double gk = kerr.g_kerr;
    const double g = pole.gain;
    const double gam = pole.gamma;
    const double lor = k * k + 4.0 * omega * omega;
    const double s = std::sin(theta), c = std::cos(theta);

    QuadraturePoint p;
    p.kerr_part = 1.0 - 16.0 * n * eta * eta_c * k * s * gk * (lor * c - 4.0 * n * k * s * gk) / (lor * lor);
    // The absorption term is quadratic in n_c, like the coherent term.
    p.excess_absorption =
        16.0 * n * n * eta * eta_a * eta_c * k * k * s * s * g * g / (lor * (omega * omega + gam * gam));
    p.excess_coherent = 64.0 * n * n * eta * eta_a * eta_c * k * k * g * gk * s * s * (k * gam - 2.0 * omega * omega) /
                        (lor * lor * (gam * gam + omega * omega));
    p.total = p.kerr_part + p.excess_absorption + p.excess_coherent;
    return p;
}

struct KerrMinimum
{
    double s_min = 1.0;
    double theta_opt = 0.0;
};

inline KerrMinimum kerr_min_and_angle(const CavityParams& cavity, const KerrParams& kerr,
                                      const DetectionSetup& detection, double n_c, double omega)
{
    if (kerr.g_kerr == 0.0 || n_c <= 0.0)
        fail(ErrorCategory::invalid_argument, "optimal Kerr angle is undefined without Kerr coupling and photons");
    const double k = cavity.total_kappa();
    const double x = (k * k + 4.0 * omega * omega) / (4.0 * n_c * k * kerr.g_kerr);
    const double eta_c = cavity.kappa_ex / k;
    return KerrMinimum{1.0 - 2.0 * detection.eta_ex * eta_c / (std::sqrt(x * x + 1.0) + 1.0),
                       normalize_angle(0.5 * std::atan(x))};
}

struct OptimalAngle
{
    double theta = 0.0;
    bool numeric_fallback = false;
    double a = 0.0;
    double b = 0.0;
};

// Angle minimizing the full PSD by direct search (coarse scan plus golden section).
inline double numeric_optimal_angle(const CavityParams& cavity, const ThermalResponseModel& thermal,
                                    const KerrParams& kerr, const DetectionSetup& detection, const MeanField& mf,
                                    double omega)
{
    auto f = [&](double th) { return homodyne_psd(cavity, thermal, kerr, detection, mf, th, omega).total; };
    constexpr int coarse = 720;
    const double step = std::numbers::pi / coarse;
    int best = 0;
    double fbest = f(0.0);
    for (int i = 1; i < coarse; ++i) {
        const double v = f(i * step);
        if (v < fbest) {
            fbest = v;
            best = i;
        }
    }
    const double th = detail::golden_min(f, (best - 1) * step, (best + 1) * step, 1e-12);
    return normalize_angle(th);
}

// Angle minimizing Kerr-plus-feedback PSD. A and B are the stationarity
// coefficients of the combined quadratic form; the branch is chosen so the
// stationary point is a minimum for either sign of g_Kerr.
inline OptimalAngle combined_optimal_angle(const CavityParams& cavity, const ThermalResponseModel& thermal,
                                           const KerrParams& kerr, const MeanField& mf, double omega)
{
    detail::require_resonant(cavity, mf.delta_bar);
    const auto& pole = detail::single_pole_of(thermal);
    if (kerr.g_kerr == 0.0 || mf.n_c <= 0.0)
        fail(ErrorCategory::invalid_argument, "optimal angle is undefined without Kerr coupling and photons");

    const double k = cavity.total_kappa();
    const double n = mf.n_c;
    const double eta_a = cavity.kappa_a / k;
    const double gk = kerr.g_kerr, g = pole.gain, gam = pole.gamma;
    const double w2 = omega * omega;
    const double lor = k * k + 4.0 * w2;

    OptimalAngle out;
    out.a = n * k *
            (4.0 * eta_a * g * gk * (2.0 * w2 - k * gam) - eta_a * g * g * lor - 4.0 * gk * gk * (gam * gam + w2)) /
            gk;
    out.b = lor * (gam * gam + w2);
    if (out.a == 0.0) {
        out.numeric_fallback = true;
        out.theta = numeric_optimal_angle(cavity, thermal, kerr, DetectionSetup{}, mf, omega);
        return out;
    }
    const double sg = gk > 0.0 ? 1.0 : -1.0;
    out.theta = normalize_angle(0.5 * std::atan2(sg * out.b, -sg * out.a));
    return out;
}

struct ImprovementPredicate
{
    bool paper_inequality = false;  // g (kappa^2 + 4 Omega^2) < g_Kerr (8 Omega^2 - 4 kappa gamma)
    bool numeric_sign = false;      // excess_absorption + excess_coherent < 0
};

inline ImprovementPredicate improvement_predicate(const CavityParams& cavity, const ThermalResponseModel& thermal,
                                                  const KerrParams& kerr, const MeanField& mf, double omega,
                                                  double theta)
{
    const auto& pole = detail::single_pole_of(thermal);
    const double k = cavity.total_kappa();
    const double w2 = omega * omega;
    ImprovementPredicate out;
    out.paper_inequality = pole.gain * (k * k + 4.0 * w2) < kerr.g_kerr * (8.0 * w2 - 4.0 * k * pole.gamma);
    const auto p = homodyne_psd(cavity, thermal, kerr, DetectionSetup{}, mf, theta, omega);
    out.numeric_sign = p.excess_absorption + p.excess_coherent < 0.0;
    return out;
}

}  // namespace cavfb

#endif  // CAVFB_SQUEEZING_HPP
