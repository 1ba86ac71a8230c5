#ifndef CAVFB_OPTOMECH_HPP
#define CAVFB_OPTOMECH_HPP

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "cavfb/core_response.hpp"
#include "cavfb/error.hpp"
#include "cavfb/spectrum.hpp"
#include "cavfb/units.hpp"

namespace cavfb
{
// Phonon bath: n_th(n_c) = n_th0 + heating_per_photon * n_c. The linear term is
// a phenomenological stand-in for absorption heating of the mechanical bath.
struct BathModel
{
    double n_th0 = 0.0;
    double heating_per_photon = 0.0;

    double n_th(double n_c) const noexcept { return n_th0 + heating_per_photon * n_c; }

    void validate() const
    {
        require(n_th0 >= 0.0 && heating_per_photon >= 0.0, "bath occupancy and heating must be non-negative");
    }
};

struct MechanicalMode
{
    double omega_m = 0.0;
    double gamma_m = 0.0;
    double g0 = 0.0;
    double x_zpf = 1.0;
    BathModel bath;

    void validate() const
    {
        require(omega_m > 0.0, "mechanical frequency must be positive");
        require(gamma_m > 0.0, "mechanical damping must be positive");
        require(g0 >= 0.0, "optomechanical coupling must be non-negative");
        require(x_zpf > 0.0, "zero-point amplitude must be positive");
        bath.validate();
    }
};

struct DetectionSetup
{
    double eta_ex = 1.0;
    double delta_lo = 0.0;  // heterodyne LO offset, > 0
    double theta = 0.0;     // homodyne angle

    void validate() const { require(eta_ex >= 0.0 && eta_ex <= 1.0, "detection efficiency must be in [0, 1]"); }
};

// Everything an optomechanical observable depends on.
struct OptomechSystem
{
    CavityParams cavity;
    ThermalResponseModel thermal;
    MechanicalMode mech;
    DetectionSetup detection;
    MeanField mf;
    double temperature = 0.0;  // bath temperature, only used by the SNR figure

    void validate() const
    {
        cavity.validate();
        mech.validate();
        detection.validate();
        require(mf.n_c >= 0.0, "photon number must be non-negative");
    }

    EffectiveParams effective() const { return effective_params(cavity, thermal, mf, mech.omega_m); }
};

inline complex chi_m(const MechanicalMode& mech, double omega)
{
    return 1.0 / complex(0.5 * mech.gamma_m, -(omega - mech.omega_m));
}

inline complex chi_m_eff(const MechanicalMode& mech, double gamma_eff, double omega)
{
    require(gamma_eff > 0.0, "effective mechanical damping must be positive");
    return 1.0 / complex(0.5 * gamma_eff, -(omega - mech.omega_m));
}

// Gamma_opt(omega) = kappa_eff n_c g0^2 |chi_c,eff(omega)|^2, with the
// effective cavity parameters taken at Omega_m.
inline double gamma_opt(const CavityParams& cavity, const ThermalResponseModel& thermal, const MechanicalMode& mech,
                        const MeanField& mf, double omega)
{
    const auto eff = effective_params(cavity, thermal, mf, mech.omega_m);
    return eff.kappa_eff * mf.n_c * mech.g0 * mech.g0 * std::norm(chi_c_eff_lorentzian(eff, omega));
}

struct OmitResponse
{
    complex chi;         // cavity susceptibility dressed by the mechanics
    complex reflection;  // 1 - kappa_ex chi
};

inline OmitResponse omit_response(const CavityParams& cavity, const ThermalResponseModel& thermal,
                                  const MechanicalMode& mech, const MeanField& mf, double omega)
{
    const auto eff = effective_params(cavity, thermal, mf, mech.omega_m);
    const complex chi = 1.0 / (complex(0.5 * eff.kappa_eff, -(eff.delta_bar_eff + omega)) +
                               mf.n_c * mech.g0 * mech.g0 * chi_m(mech, omega));
    return OmitResponse{chi, 1.0 - cavity.kappa_ex * chi};
}

// Backaction floor of sideband cooling set by the feedback-squashed absorbed
// flux, kappa_a n_c^2 |sigma0(Omega_m)|^2 / kappa_eff.
inline double cooling_limit(const CavityParams& cavity, const ThermalResponseModel& thermal, double n_c,
                            double kappa_eff, double omega_m)
{
    require(kappa_eff > 0.0, "kappa_eff must be positive");
    return cavity.kappa_a * n_c * n_c * std::norm(thermal.sigma0(omega_m)) / kappa_eff;
}

inline double final_occupancy(double n_th, double gamma_m, double gamma_opt_value, double n_l)
{
    const double gamma_eff = gamma_m + gamma_opt_value;
    require(gamma_eff > 0.0, "total mechanical damping must be positive");
    return (n_th * gamma_m + gamma_opt_value * n_l) / gamma_eff;
}

struct CoolingReport
{
    double gamma_opt = 0.0;
    double gamma_eff = 0.0;
    double n_th = 0.0;
    double n_l = 0.0;
    double n_f = 0.0;
    double kappa_eff = 0.0;
    double delta_bar_eff = 0.0;
    double bg_excess = 0.0;
    double snr = 0.0;
};

struct DetectionFigures
{
    double bg_excess = 0.0;
    double snr = 0.0;
};

// Excess floor BG_ex = 4 eta kappa_a kappa_ex n_c^2 |sigma0|^2 / kappa_eff^2 and
// the thermomechanical sideband SNR. SNR is zero when no temperature is set.
inline DetectionFigures detection_figures(const OptomechSystem& sys)
{
    const auto eff = sys.effective();
    const double n = sys.mf.n_c;
    const double s0 = std::norm(sys.thermal.sigma0(sys.mech.omega_m));
    DetectionFigures out;
    out.bg_excess = 4.0 * sys.detection.eta_ex * sys.cavity.kappa_a * sys.cavity.kappa_ex * n * n * s0 /
                    (eff.kappa_eff * eff.kappa_eff);
    if (sys.temperature > 0.0) {
        const double k = sys.cavity.total_kappa();
        out.snr = 16.0 * sys.detection.eta_ex * n * sys.mech.g0 * sys.mech.g0 * sys.cavity.kappa_ex * boltzmann *
                  sys.temperature / (k * k * sys.mech.gamma_m * hbar * sys.mech.omega_m);
    }
    return out;
}

inline CoolingReport cooling_report(const OptomechSystem& sys)
{
    sys.validate();
    const auto eff = sys.effective();
    CoolingReport r;
    r.kappa_eff = eff.kappa_eff;
    r.delta_bar_eff = eff.delta_bar_eff;
    r.gamma_opt = gamma_opt(sys.cavity, sys.thermal, sys.mech, sys.mf, sys.mech.omega_m);
    r.gamma_eff = sys.mech.gamma_m + r.gamma_opt;
    r.n_th = sys.mech.bath.n_th(sys.mf.n_c);
    r.n_l = cooling_limit(sys.cavity, sys.thermal, sys.mf.n_c, eff.kappa_eff, sys.mech.omega_m);
    r.n_f = final_occupancy(r.n_th, sys.mech.gamma_m, r.gamma_opt, r.n_l);
    const auto fig = detection_figures(sys);
    r.bg_excess = fig.bg_excess;
    r.snr = fig.snr;
    return r;
}

namespace detail
{
inline void warn_if_detuned(const OptomechSystem& sys, const EffectiveParams& eff, Spectrum& out)
{
    const double miss = std::abs(eff.delta_bar_eff + sys.mech.omega_m);
    if (miss > 0.01 * sys.cavity.total_kappa()) {
        std::ostringstream os;
        os << "effective detuning misses -Omega_m by " << rad_to_hz(miss)
           << " Hz; the resolved-sideband spectrum assumes optimal detuning";
        out.warnings.push_back(os.str());
    }
}
}  // namespace detail

// Shot-noise-normalized heterodyne photocurrent PSD around the LO offset. The
// grid is the photocurrent frequency; the sideband sits at delta_lo.
inline Spectrum heterodyne_psd(const OptomechSystem& sys, const std::vector<double>& grid)
{
    sys.validate();
    require(sys.detection.delta_lo > 0.0, "heterodyne LO offset must be positive");
    const auto eff = sys.effective();
    const double n = sys.mf.n_c;
    const double g0sq = sys.mech.g0 * sys.mech.g0;
    const double eta = sys.detection.eta_ex;
    const double gamma_eff = sys.mech.gamma_m + 4.0 * n * g0sq / eff.kappa_eff;
    const double n_l = cooling_limit(sys.cavity, sys.thermal, n, eff.kappa_eff, sys.mech.omega_m);
    const double n_f = final_occupancy(sys.mech.bath.n_th(n), sys.mech.gamma_m, gamma_eff - sys.mech.gamma_m, n_l);
    const double prefactor = eta * 4.0 * sys.cavity.kappa_ex * n * g0sq / (eff.kappa_eff * eff.kappa_eff);
    const double floor = 1.0 + 4.0 * eta * n_l * sys.cavity.kappa_ex / eff.kappa_eff;

    Spectrum out;
    out.omega = grid;
    std::vector<double> s(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double shifted = grid[i] - sys.detection.delta_lo + sys.mech.omega_m;
        s[i] = prefactor * gamma_eff * std::norm(chi_m_eff(sys.mech, gamma_eff, shifted)) * (n_f - 2.0 * n_l) + floor;
    }
    out.add_channel("S_I", std::move(s));
    detail::warn_if_detuned(sys, eff, out);
    return out;
}

// Mechanical displacement spectra: S_bb peaks at -Omega_m (weight n_f),
// S_bdb at +Omega_m (weight n_f + 1), S_xx/x_zpf^2 is their sum.
inline Spectrum mechanical_psd(const OptomechSystem& sys, const std::vector<double>& grid)
{
    sys.validate();
    const auto eff = sys.effective();
    const double n = sys.mf.n_c;
    const double g0sq = sys.mech.g0 * sys.mech.g0;
    const double chi_c_sq = std::norm(chi_c_eff_lorentzian(eff, sys.mech.omega_m));
    const double sd_sq = std::norm(sigma_d(sys.thermal, n, sys.mech.omega_m));
    const double ka = sys.cavity.kappa_a;
    const double gamma_plus = n * g0sq * chi_c_sq * ka * sd_sq;
    const double gamma_minus = n * g0sq * chi_c_sq * (eff.kappa_eff + ka * sd_sq);
    const double gamma_m = sys.mech.gamma_m;
    const double gamma_eff = gamma_m + gamma_minus - gamma_plus;
    const double n_th = sys.mech.bath.n_th(n);

    Spectrum out;
    out.omega = grid;
    std::vector<double> sbb(grid.size()), sbdb(grid.size()), sxx(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        sbb[i] = (n_th * gamma_m + gamma_plus) * std::norm(chi_m_eff(sys.mech, gamma_eff, -grid[i]));
        sbdb[i] = ((n_th + 1.0) * gamma_m + gamma_minus) * std::norm(chi_m_eff(sys.mech, gamma_eff, grid[i]));
        sxx[i] = sbb[i] + sbdb[i];
    }
    out.add_channel("S_bb", std::move(sbb));
    out.add_channel("S_bdb", std::move(sbdb));
    out.add_channel("S_xx", std::move(sxx));
    return out;
}

}  // namespace cavfb

#endif  // CAVFB_OPTOMECH_HPP
