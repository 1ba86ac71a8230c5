#ifndef CAVFB_UNITS_HPP
#define CAVFB_UNITS_HPP

#include <cmath>
#include <complex>
#include <numbers>

namespace cavfb
{
using complex = std::complex<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// CODATA 2018 exact values.
inline constexpr double hbar = 1.054571817e-34;         // J s
inline constexpr double boltzmann = 1.380649e-23;       // J/K
inline constexpr double speed_of_light = 299792458.0;   // m/s

// All rates and frequencies are angular (rad/s) inside the library. Files and
// configuration use ordinary frequency (Hz); convert only at that boundary.
constexpr double hz_to_rad(double hz) noexcept { return two_pi * hz; }
constexpr double rad_to_hz(double rad) noexcept { return rad / two_pi; }

// Bose-Einstein occupancy of a mode at angular frequency omega.
inline double bose_occupancy(double omega, double temperature)
{
    const double x = hbar * omega / (boltzmann * temperature);
    return 1.0 / std::expm1(x);
}

}  // namespace cavfb

#endif  // CAVFB_UNITS_HPP
