#ifndef CAVFB_TESTS_SUPPORT_HPP
#define CAVFB_TESTS_SUPPORT_HPP

#include <cmath>
#include <random>
#include <vector>

#include "cavfb/core_response.hpp"
#include "cavfb/optomech.hpp"
#include "cavfb/squeezing.hpp"
#include "cavfb/units.hpp"

namespace cavfb::testing
{
inline double hz(double f) { return hz_to_rad(f); }

// Silicon optomechanical crystal at cryogenic temperature (device D1).
inline OptomechSystem device_d1(double n_c = 1200.0, double heating_per_photon = 0.0)
{
    OptomechSystem s;
    s.cavity.kappa_ex = hz(0.5e9);
    s.cavity.kappa_a = hz(100e6);
    s.cavity.kappa_s = hz(1.7e9) - s.cavity.kappa_ex - s.cavity.kappa_a;
    s.mech.omega_m = hz(5.3e9);
    s.mech.gamma_m = hz(81e3);
    s.mech.g0 = hz(829e3);
    s.mech.bath.n_th0 = bose_occupancy(s.mech.omega_m, 8.0);
    s.mech.bath.heating_per_photon = heating_per_photon;
    s.thermal = ThermalResponseModel::from_loss_slope(s.cavity.kappa_a, hz(44e3), s.mech.omega_m, hz(100e3));
    s.detection.eta_ex = 0.15;
    s.detection.delta_lo = hz(20e6);
    s.temperature = 8.0;
    s.mf.n_c = n_c;
    s.mf.delta_bar = delta_bar_for_effective(s.cavity, s.thermal, n_c, -s.mech.omega_m, s.mech.omega_m);
    return s;
}

// Device D2: narrower cavity, heavier damping, cooling sign of the feedback.
inline OptomechSystem device_d2(double n_c = 1110.0)
{
    OptomechSystem s;
    s.cavity.kappa_ex = hz(73e6);
    s.cavity.kappa_a = hz(1.5e6);
    s.cavity.kappa_s = hz(220e6) - s.cavity.kappa_ex - s.cavity.kappa_a;
    s.mech.omega_m = hz(5.14e9);
    s.mech.gamma_m = hz(2.56e6);
    s.mech.g0 = hz(1.12e6);
    s.mech.bath.n_th0 = bose_occupancy(s.mech.omega_m, 295.0);
    s.thermal = ThermalResponseModel::from_loss_slope(s.cavity.kappa_a, hz(-35e3), s.mech.omega_m, hz(50e3));
    s.detection.eta_ex = 0.3;
    s.detection.delta_lo = hz(40e6);
    s.temperature = 295.0;
    s.mf.n_c = n_c;
    s.mf.delta_bar = delta_bar_for_effective(s.cavity, s.thermal, n_c, -s.mech.omega_m, s.mech.omega_m);
    return s;
}

// Kerr cavity with coexisting absorption feedback.
struct KerrSet
{
    CavityParams cavity;
    ThermalResponseModel thermal;
    KerrParams kerr;
    DetectionSetup detection;
    MeanField mf;
};

inline KerrSet kerr_reference()
{
    KerrSet k;
    k.cavity.kappa_ex = hz(8e6);
    k.cavity.kappa_s = hz(1e6);
    k.cavity.kappa_a = hz(6e6);
    k.thermal = ThermalResponseModel::single_pole(hz(-0.05), hz(20e3));
    k.kerr.g_kerr = hz(-0.5);
    k.detection.eta_ex = 1.0;
    k.mf = MeanField::at(1e7, 0.0);
    return k;
}

}  // namespace cavfb::testing

#endif  // CAVFB_TESTS_SUPPORT_HPP
