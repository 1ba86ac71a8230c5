#ifndef CAVFB_ORACLE_HPP
#define CAVFB_ORACLE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <sstream>

#include "cavfb/core_response.hpp"
#include "cavfb/error.hpp"
#include "cavfb/optomech.hpp"
#include "cavfb/units.hpp"

// Brute-force linear-response oracle. Builds the Fourier-domain Langevin system
// for (da, da^dag, db, db^dag) from the primitive equations of motion and
// computes detected spectra by propagating input correlations through a dense
// solve. No closed-form shortcut from the other modules is used.
namespace cavfb::oracle
{
// Inputs, in order: a_ex, a_ex^dag, a_s, a_s^dag, a_a, a_a^dag, b, b^dag,
// v, v^dag (v is the vacuum admitted by detection loss).
inline constexpr int n_inputs = 10;
enum Input : int
{
    in_ex = 0,
    in_ex_dag,
    in_s,
    in_s_dag,
    in_a,
    in_a_dag,
    in_b,
    in_b_dag,
    in_v,
    in_v_dag,
};

using Matrix4 = Eigen::Matrix<complex, 4, 4>;
using InputMatrix = Eigen::Matrix<complex, 4, n_inputs>;
using Row = Eigen::Matrix<complex, 1, n_inputs>;
using CorrelationMatrix = Eigen::Matrix<complex, n_inputs, n_inputs>;

struct Params
{
    CavityParams cavity;
    ThermalResponseModel thermal;
    MeanField mf;
    double g_kerr = 0.0;
    // Mechanics is decoupled when g0 = 0; gamma_m must still be positive.
    MechanicalMode mech{1.0, 1.0, 0.0, 1.0, {}};
    DetectionSetup detection;

    static Params from(const OptomechSystem& sys)
    {
        return Params{sys.cavity, sys.thermal, sys.mf, 0.0, sys.mech, sys.detection};
    }
};

enum class Level
{
    exact,
    // Rotating-wave couplings only, cavity coefficients frozen at +/-Omega_m
    // (the cavity follows adiabatically across the mechanical linewidth).
    resolved_sideband,
};

struct LinearSystem
{
    Matrix4 system;
    InputMatrix input;
};

// thermal_scale multiplies every thermal gain. The matrix entries are built
// without complex conjugation, so they are analytic in thermal_scale.
inline LinearSystem assemble(const Params& p, double omega, Level level = Level::exact,
                             complex thermal_scale = 1.0)
{
    const double kex = p.cavity.kappa_ex, ks = p.cavity.kappa_s, ka = p.cavity.kappa_a;
    const double k = p.cavity.total_kappa();
    const double n = p.mf.n_c;
    const double db = p.mf.delta_bar;
    const bool rwa = level == Level::resolved_sideband;
    const double wc = rwa ? (omega >= 0.0 ? p.mech.omega_m : -p.mech.omega_m) : omega;

    const complex s = thermal_scale * n * p.thermal.sigma0(wc);
    const complex i{0.0, 1.0};
    const complex l = s * ka - i * n * p.g_kerr;
    const complex lp = -s * ka + i * n * p.g_kerr;
    const complex lx = rwa ? complex{} : l;
    const complex lpx = rwa ? complex{} : lp;
    const double g = std::sqrt(n) * p.mech.g0;
    const complex gx = rwa ? complex{} : complex{g};
    const complex chi0_inv{0.5 * k, -(wc + db)};
    const complex chi0c_inv{0.5 * k, -(wc - db)};
    const double gm = p.mech.gamma_m;

    LinearSystem sys;
    auto& m = sys.system;
    m << chi0_inv - l, -lx, -i * g, -i * gx,
         -lpx, chi0c_inv - lp, i * gx, i * g,
         -i * g, -i * gx, complex(0.5 * gm, -(omega - p.mech.omega_m)), 0.0,
         i * gx, i * g, 0.0, complex(0.5 * gm, -(omega + p.mech.omega_m));

    auto& b = sys.input;
    b.setZero();
    const double rex = std::sqrt(kex), rs = std::sqrt(ks), ra = std::sqrt(ka);
    // Absorbed-channel input mixed by sigma_d as in the in-loop definition.
    b(0, in_ex) = rex;
    b(0, in_s) = rs;
    b(0, in_a) = ra * (1.0 - s);
    b(0, in_a_dag) = -ra * s;
    b(1, in_ex_dag) = rex;
    b(1, in_s_dag) = rs;
    b(1, in_a_dag) = ra * (1.0 + s);
    b(1, in_a) = ra * s;
    b(2, in_b) = std::sqrt(gm);
    b(3, in_b_dag) = std::sqrt(gm);
    return sys;
}

// <u_i(w) u_j(w')> = C_ij delta(w + w').
inline CorrelationMatrix input_correlations(double n_th)
{
    CorrelationMatrix c = CorrelationMatrix::Zero();
    c(in_ex, in_ex_dag) = 1.0;
    c(in_s, in_s_dag) = 1.0;
    c(in_a, in_a_dag) = 1.0;
    c(in_v, in_v_dag) = 1.0;
    c(in_b, in_b_dag) = n_th + 1.0;
    c(in_b_dag, in_b) = n_th;
    return c;
}

// Solution X with (da, da^dag, db, db^dag) = X * inputs.
inline InputMatrix solve(const LinearSystem& sys, double omega)
{
    Eigen::PartialPivLU<Matrix4> lu(sys.system);
    const double rcond = lu.rcond();
    if (!(rcond > 1e-14)) {
        std::ostringstream os;
        os << "oracle system is singular at omega = " << omega << " rad/s (condition number ~ " << 1.0 / rcond
           << ")";
        fail(ErrorCategory::numeric_instability, os.str());
    }
    return lu.solve(sys.input);
}

struct Outputs
{
    Row a_det;
    Row a_det_dag;
    Row inloop;  // absorbed-flux amplitude quadrature
    InputMatrix x;
};

inline Outputs outputs(const Params& p, double omega, Level level = Level::exact, complex thermal_scale = 1.0)
{
    Outputs o;
    o.x = solve(assemble(p, omega, level, thermal_scale), omega);
    const double eta = p.detection.eta_ex;
    const double rex = std::sqrt(p.cavity.kappa_ex);
    // a_out = a_ex - sqrt(kappa_ex) da, then a beam splitter of transmission eta.
    o.a_det = -rex * o.x.row(0);
    o.a_det(in_ex) += 1.0;
    o.a_det *= std::sqrt(eta);
    o.a_det(in_v) += std::sqrt(1.0 - eta);
    o.a_det_dag = -rex * o.x.row(1);
    o.a_det_dag(in_ex_dag) += 1.0;
    o.a_det_dag *= std::sqrt(eta);
    o.a_det_dag(in_v_dag) += std::sqrt(1.0 - eta);
    const double ra = std::sqrt(p.cavity.kappa_a);
    o.inloop = ra * (o.x.row(0) + o.x.row(1));
    o.inloop(in_a) -= 1.0;
    o.inloop(in_a_dag) -= 1.0;
    return o;
}

namespace detail
{
inline complex symmetrized(const Row& x_plus, const Row& x_minus, const CorrelationMatrix& c)
{
    return 0.5 * ((x_plus * c * x_minus.transpose())(0, 0) + (x_minus * c * x_plus.transpose())(0, 0));
}

inline complex homodyne_complex(const Params& p, double theta, double omega, Level level, complex scale)
{
    const complex e = std::polar(1.0, -theta);
    const auto plus = outputs(p, omega, level, scale);
    const auto minus = outputs(p, -omega, level, scale);
    const Row xp = e * plus.a_det + std::conj(e) * plus.a_det_dag;
    const Row xm = e * minus.a_det + std::conj(e) * minus.a_det_dag;
    return symmetrized(xp, xm, input_correlations(p.mech.bath.n_th(p.mf.n_c)));
}
}  // namespace detail

// Homodyne PSD of X = e^{-i theta} a_det + e^{i theta} a_det^dag, shot noise = 1.
inline double homodyne_psd(const Params& p, double theta, double omega, Level level = Level::exact)
{
    return detail::homodyne_complex(p, theta, omega, level, 1.0).real();
}

// Terms up to second order in the thermal gains of the exact homodyne PSD,
// extracted by a Cauchy contour in the gain scale.
inline double homodyne_psd_second_order(const Params& p, double theta, double omega)
{
    constexpr int n_nodes = 16;
    const double k = p.cavity.total_kappa();
    const double db = p.mf.delta_bar;
    const double sd = std::abs(p.mf.n_c * p.thermal.sigma0(omega));
    const double loop = sd * p.cavity.kappa_a *
                        (1.0 / std::abs(complex(0.5 * k, -(omega + db))) +
                         1.0 / std::abs(complex(0.5 * k, -(omega - db))));
    const double r = 0.05 / (1.0 + loop);
    complex c[3] = {};
    for (int j = 0; j < n_nodes; ++j) {
        const complex z = std::polar(1.0, two_pi * j / n_nodes);
        const complex f = detail::homodyne_complex(p, theta, omega, Level::exact, r * z);
        for (int m = 0; m < 3; ++m) c[m] += f * std::pow(z, -m);
    }
    double total = 0.0;
    for (int m = 0; m < 3; ++m) total += (c[m] / (n_nodes * std::pow(r, m))).real();
    return total;
}

// Single-sideband heterodyne PSD at photocurrent frequency nu (LO offset
// delta_lo), image band at vacuum: 1/2 <{a(s), a^dag(-s)}> + 1/2.
inline double heterodyne_psd(const Params& p, double nu, Level level = Level::exact)
{
    const double s = nu - p.detection.delta_lo + p.mech.omega_m;
    const auto plus = outputs(p, s, level);
    const auto minus = outputs(p, -s, level);
    const auto c = input_correlations(p.mech.bath.n_th(p.mf.n_c));
    const complex v = 0.5 * ((plus.a_det * c * minus.a_det_dag.transpose())(0, 0) +
                             (minus.a_det_dag * c * plus.a_det.transpose())(0, 0));
    return v.real() + 0.5;
}

// Symmetrized PSD of the absorbed photon flux, shot noise = 1.
inline double inloop_psd(const Params& p, double omega)
{
    const auto plus = outputs(p, omega);
    const auto minus = outputs(p, -omega);
    return detail::symmetrized(plus.inloop, minus.inloop, input_correlations(p.mech.bath.n_th(p.mf.n_c))).real();
}

// Determinant of the optical 2x2 block. Times chi_c0(w) chi_c0*(-w) it is the
// loop denominator 1 - chi_fb.
inline complex cavity_block_determinant(const Params& p, double omega)
{
    const auto m = assemble(p, omega).system;
    return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
}

// Loop gain from the closed- and open-loop response of the amplitude quadrature
// da + da^dag to the external drive: ratio = 1/(1 - chi_fb).
inline complex loop_gain(const Params& p, double omega)
{
    require(p.cavity.kappa_ex > 0.0, "loop gain extraction drives through the external port");
    Params open = p;
    open.thermal = p.thermal.scaled(0.0);
    auto quad = [&](const Params& q) {
        const auto x = solve(assemble(q, omega), omega);
        return x(0, in_ex) + x(1, in_ex);
    };
    return 1.0 - quad(open) / quad(p);
}

// Effective mechanical damping from the db/b_in transfer. At the resolved-
// sideband level its inverse is linear in omega; two solves pin the real part.
inline double mechanical_linewidth(const Params& p, Level level = Level::resolved_sideband)
{
    const double w1 = p.mech.omega_m, w2 = p.mech.omega_m + 0.1 * p.mech.gamma_m;
    const complex a1 = 1.0 / solve(assemble(p, w1, level), w1)(2, in_b);
    const complex a2 = 1.0 / solve(assemble(p, w2, level), w2)(2, in_b);
    const complex slope = (a2 - a1) / (w2 - w1);
    return 2.0 * a1.real() / (-slope).imag();
}

}  // namespace cavfb::oracle

#endif  // CAVFB_ORACLE_HPP
