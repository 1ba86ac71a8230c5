#ifndef CAVFB_CORE_RESPONSE_HPP
#define CAVFB_CORE_RESPONSE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cavfb/error.hpp"
#include "cavfb/units.hpp"

namespace cavfb
{
// Loss rates and detuning of a single optical (or microwave) mode. The
// intrinsic loss is split into an absorbing channel (kappa_a, heats the
// cavity) and a scattering channel (kappa_s, does not).
struct CavityParams
{
    double kappa_ex = 0.0;
    double kappa_s = 0.0;
    double kappa_a = 0.0;
    double detuning = 0.0;             // Delta = omega_L - omega_c
    std::optional<double> resonance;   // omega_c, only needed for Kerr estimates

    double total_kappa() const noexcept { return kappa_ex + kappa_s + kappa_a; }

    void validate() const
    {
        require(kappa_ex >= 0.0 && kappa_s >= 0.0 && kappa_a >= 0.0, "cavity loss rates must be non-negative");
        require(total_kappa() > 0.0, "total cavity loss must be positive");
        require(std::isfinite(detuning), "detuning must be finite");
    }
};

inline double total_kappa(const CavityParams& cavity) noexcept { return cavity.total_kappa(); }

struct ThermalPole
{
    double gain = 0.0;   // g_a g_th for this pole, rad/s per absorbed photon/s
    double gamma = 1.0;  // pole rate, rad/s
};

// Photothermal transfer from absorbed photon flux to cavity frequency shift,
// as a sum of one-pole responses. sigma0(omega) = sum_j gain_j/(omega + i gamma_j).
class ThermalResponseModel
{
public:
    ThermalResponseModel() : poles_{ThermalPole{0.0, 1.0}} {}

    explicit ThermalResponseModel(std::vector<ThermalPole> poles) : poles_(std::move(poles))
    {
        require(!poles_.empty(), "thermal response needs at least one pole");
        for (const auto& p : poles_) {
            require(p.gamma > 0.0 && std::isfinite(p.gamma), "thermal pole rate must be positive");
            require(std::isfinite(p.gain), "thermal pole gain must be finite");
        }
    }

    static ThermalResponseModel single_pole(double gain, double gamma)
    {
        return ThermalResponseModel({ThermalPole{gain, gamma}});
    }

    // Single pole whose kappa_a * Re sigma0(omega) equals the given value. This
    // is how experiments quote the feedback strength (slope of kappa_eff).
    static ThermalResponseModel from_loss_slope(double kappa_a, double kappa_a_sigma0, double omega, double gamma)
    {
        require(kappa_a > 0.0 && omega != 0.0, "from_loss_slope needs kappa_a > 0 and omega != 0");
        const double gain = kappa_a_sigma0 * (omega * omega + gamma * gamma) / (kappa_a * omega);
        return single_pole(gain, gamma);
    }

    const std::vector<ThermalPole>& poles() const noexcept { return poles_; }
    std::size_t pole_count() const noexcept { return poles_.size(); }

    bool is_zero() const noexcept
    {
        return std::all_of(poles_.begin(), poles_.end(), [](const ThermalPole& p) { return p.gain == 0.0; });
    }

    complex sigma0(double omega) const noexcept
    {
        complex s{0.0, 0.0};
        for (const auto& p : poles_) s += p.gain / complex(omega, p.gamma);
        return s;
    }

    // Static shift per absorbed photon flux, sum_j gain_j / gamma_j.
    double static_shift() const noexcept
    {
        double s = 0.0;
        for (const auto& p : poles_) s += p.gain / p.gamma;
        return s;
    }

    ThermalResponseModel scaled(double factor) const
    {
        auto poles = poles_;
        for (auto& p : poles) p.gain *= factor;
        return ThermalResponseModel(std::move(poles));
    }

private:
    std::vector<ThermalPole> poles_;
};

enum class Branch
{
    lower,
    upper,
    unstable,
};

// Operating point of the driven cavity: mean photon number and the detuning
// including static thermal and Kerr shifts.
struct MeanField
{
    double n_c = 0.0;
    double delta_bar = 0.0;
    Branch branch = Branch::lower;

    static MeanField at(double n_c, double delta_bar) { return MeanField{n_c, delta_bar, Branch::lower}; }
};

// Instability threshold on |1 - chi_fb|.
inline constexpr double loop_instability_tolerance = 1e-9;

namespace detail
{
// Real roots of a3 x^3 + a2 x^2 + a1 x + a0 (a3 != 0), ascending.
inline std::vector<double> real_cubic_roots(double a3, double a2, double a1, double a0)
{
    const double b = a2 / a3, c = a1 / a3, d = a0 / a3;
    const double p = c - b * b / 3.0;
    const double q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    const double shift = -b / 3.0;
    const double disc = q * q / 4.0 + p * p * p / 27.0;
    std::vector<double> roots;
    if (disc > 0.0) {
        const double s = std::sqrt(disc);
        roots.push_back(std::cbrt(-q / 2.0 + s) + std::cbrt(-q / 2.0 - s) + shift);
    } else if (p == 0.0) {
        roots.push_back(shift);
    } else {
        const double m = 2.0 * std::sqrt(-p / 3.0);
        const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
        const double theta = std::acos(arg) / 3.0;
        for (int k = 0; k < 3; ++k) roots.push_back(m * std::cos(theta - two_pi * k / 3.0) + shift);
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

template <class F>
double bisect(F&& f, double lo, double hi)
{
    double flo = f(lo);
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return std::abs(f(lo)) < std::abs(f(hi)) ? lo : hi;
}
}  // namespace detail

// All non-negative fixed points of n (kappa^2/4 + Delta_bar(n)^2) = kappa_ex F
// with Delta_bar(n) = Delta - (S_dc kappa_a + g_kerr) n, sorted ascending.
// The caller selects the branch that matches its sweep direction.
inline std::vector<MeanField> steady_state(const CavityParams& cavity, const ThermalResponseModel& thermal,
                                           double input_flux, double kerr_shift_per_photon = 0.0)
{
    cavity.validate();
    require(input_flux >= 0.0 && std::isfinite(input_flux), "input flux must be non-negative");
    const double kappa = cavity.total_kappa();
    const double delta = cavity.detuning;
    const double c = thermal.static_shift() * cavity.kappa_a + kerr_shift_per_photon;
    const double drive = cavity.kappa_ex * input_flux;

    if (drive == 0.0) return {MeanField{0.0, delta, Branch::lower}};

    // Work in u = n / n_lin where n_lin is the unshifted solution, so that
    // g(u) = A3 u^3 + A2 u^2 + u - 1.
    const double lorentz = 0.25 * kappa * kappa + delta * delta;
    const double n_lin = drive / lorentz;
    const double a3 = c * c * n_lin * n_lin * n_lin / drive;
    const double a2 = -2.0 * delta * c * n_lin * n_lin / drive;

    auto residual = [&](double u) {
        const double n = u * n_lin;
        const double db = delta - c * n;
        return (n * (0.25 * kappa * kappa + db * db) - drive) / drive;
    };
    auto slope = [&](double u) { return 3.0 * a3 * u * u + 2.0 * a2 * u + 1.0; };

    std::vector<double> roots_u;
    if (a3 == 0.0) {
        roots_u.push_back(1.0);
    } else {
        const double u_max = 1.0 + 4.0 * delta * delta / (kappa * kappa);
        std::vector<double> edges{0.0};
        const double disc = 4.0 * a2 * a2 - 12.0 * a3;
        if (disc > 0.0) {
            const double s = std::sqrt(disc);
            for (double cp : {(-2.0 * a2 - s) / (6.0 * a3), (-2.0 * a2 + s) / (6.0 * a3)})
                if (cp > 0.0 && cp < u_max) edges.push_back(cp);
        }
        edges.push_back(u_max);
        std::sort(edges.begin(), edges.end());

        // Closed-form estimates, each polished by bisection inside the
        // monotone interval that contains it.
        const auto estimates = detail::real_cubic_roots(a3, a2, 1.0, -1.0);
        for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
            const double lo = edges[i], hi = edges[i + 1];
            const double flo = residual(lo), fhi = residual(hi);
            if (flo == 0.0) {
                roots_u.push_back(lo);
                continue;
            }
            if ((flo < 0.0) == (fhi < 0.0) && fhi != 0.0) continue;
            double a = lo, b = hi;
            for (double e : estimates) {
                if (e > lo && e < hi) {
                    const double w = 1e-6 * (hi - lo);
                    const double ea = std::max(lo, e - w), eb = std::min(hi, e + w);
                    if ((residual(ea) < 0.0) != (residual(eb) < 0.0)) {
                        a = ea;
                        b = eb;
                    }
                }
            }
            roots_u.push_back(detail::bisect(residual, a, b));
        }
        std::sort(roots_u.begin(), roots_u.end());
        roots_u.erase(std::unique(roots_u.begin(), roots_u.end()), roots_u.end());
    }

    std::vector<MeanField> out;
    for (double u : roots_u) {
        const double r = residual(u);
        if (!(std::abs(r) < 1e-12)) {
            std::ostringstream os;
            os << "steady state root polishing did not converge: n_c = " << u * n_lin
               << ", relative residual = " << r;
            fail(ErrorCategory::numeric_instability, os.str());
        }
        const double n = u * n_lin;
        out.push_back(MeanField{n, delta - c * n, slope(u) > 0.0 ? Branch::lower : Branch::unstable});
    }
    if (out.size() > 1) out.back().branch = Branch::upper;
    return out;
}

// Photon-number-enhanced dissipation coefficient sigma_d = n_c sigma0(omega).
inline complex sigma_d(const ThermalResponseModel& thermal, double n_c, double omega)
{
    require(n_c >= 0.0, "photon number must be non-negative");
    return n_c * thermal.sigma0(omega);
}

// Intrinsic susceptibility 1/(kappa/2 - i(omega + Delta_bar)).
inline complex chi_c0(const CavityParams& cavity, double delta_bar, double omega)
{
    return 1.0 / complex(0.5 * cavity.total_kappa(), -(omega + delta_bar));
}

// Open-loop gain sigma_d kappa_a (chi_c0(omega) - chi_c0*(-omega)).
inline complex chi_fb(const CavityParams& cavity, const ThermalResponseModel& thermal, const MeanField& mf,
                      double omega)
{
    const complex s = sigma_d(thermal, mf.n_c, omega);
    return s * cavity.kappa_a *
           (chi_c0(cavity, mf.delta_bar, omega) - std::conj(chi_c0(cavity, mf.delta_bar, -omega)));
}

namespace detail
{
inline complex loop_denominator(const CavityParams& cavity, const ThermalResponseModel& thermal, const MeanField& mf,
                                double omega)
{
    const complex d = 1.0 - chi_fb(cavity, thermal, mf, omega);
    if (!(std::abs(d) >= loop_instability_tolerance)) {
        std::ostringstream os;
        os << "feedback loop unstable at omega = " << omega << " rad/s: |1 - chi_fb| = " << std::abs(d);
        fail(ErrorCategory::numeric_instability, os.str());
    }
    return d;
}
}  // namespace detail

inline complex chi_c_eff(const CavityParams& cavity, const ThermalResponseModel& thermal, const MeanField& mf,
                         double omega)
{
    return chi_c0(cavity, mf.delta_bar, omega) / detail::loop_denominator(cavity, thermal, mf, omega);
}

struct EffectiveParams
{
    double kappa_eff = 0.0;
    double delta_bar_eff = 0.0;
};

// kappa_eff = kappa - 2 kappa_a Re sigma_d, Delta_eff = Delta_bar + kappa_a Im sigma_d,
// both at omega_eval (Omega_m in optomechanics).
inline EffectiveParams effective_params(const CavityParams& cavity, const ThermalResponseModel& thermal,
                                        const MeanField& mf, double omega_eval)
{
    const complex s = sigma_d(thermal, mf.n_c, omega_eval);
    EffectiveParams out{cavity.total_kappa() - 2.0 * cavity.kappa_a * s.real(),
                        mf.delta_bar + cavity.kappa_a * s.imag()};
    if (!(out.kappa_eff > 0.0)) {
        std::ostringstream os;
        os << "effective linewidth is not positive (kappa_eff = " << out.kappa_eff << " rad/s)";
        fail(ErrorCategory::numeric_instability, os.str());
    }
    return out;
}

// Lorentzian effective susceptibility with the feedback folded into kappa_eff
// and Delta_eff. Valid when the counter-rotating chi_c0*(-omega) is negligible.
inline complex chi_c_eff_lorentzian(const EffectiveParams& eff, double omega)
{
    return 1.0 / complex(0.5 * eff.kappa_eff, -(eff.delta_bar_eff + omega));
}

// Mean detuning Delta_bar that places Delta_eff at the requested value.
inline double delta_bar_for_effective(const CavityParams& cavity, const ThermalResponseModel& thermal, double n_c,
                                      double delta_bar_eff, double omega_eval)
{
    return delta_bar_eff - cavity.kappa_a * sigma_d(thermal, n_c, omega_eval).imag();
}

// In-loop absorbed flux PSD normalized to shot noise, |1 - chi_fb|^-2.
inline double inloop_flux_psd(const CavityParams& cavity, const ThermalResponseModel& thermal, const MeanField& mf,
                              double omega)
{
    return 1.0 / std::norm(detail::loop_denominator(cavity, thermal, mf, omega));
}

// Far-detuned approximation |1 - 2 n_c kappa_a (sum gain_j) / (omega kappa)|^-2.
inline double inloop_flux_psd_far_detuned(const CavityParams& cavity, const ThermalResponseModel& thermal, double n_c,
                                          double omega)
{
    double gain = 0.0;
    for (const auto& p : thermal.poles()) gain += p.gain;
    const double d = 1.0 - 2.0 * n_c * cavity.kappa_a * gain / (omega * cavity.total_kappa());
    return 1.0 / (d * d);
}

// Spectral densities of the effective dissipative reservoir at (omega, -omega).
struct ReservoirCorrelators
{
    complex nn;      // <a_d^dag(w) a_d(w')>
    complex n_nbar;  // <a_d(w) a_d^dag(w')>
    complex aa;      // <a_d(w) a_d(w')>
    complex adad;    // <a_d^dag(w) a_d^dag(w')>
};

inline ReservoirCorrelators reservoir_correlators(complex sigma_at_omega, complex sigma_at_omega_prime)
{
    const complex s = sigma_at_omega, sp = sigma_at_omega_prime;
    return ReservoirCorrelators{-s * sp, (1.0 - s) * (1.0 + sp), -(1.0 - s) * sp, s * (1.0 + sp)};
}

}  // namespace cavfb

#endif  // CAVFB_CORE_RESPONSE_HPP
