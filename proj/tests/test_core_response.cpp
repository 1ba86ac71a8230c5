#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cavfb/core_response.hpp"
#include "support.hpp"

using namespace cavfb;
using cavfb::testing::hz;

TEST(TotalKappa, SumsTheThreeChannels)
{
    CavityParams d1{hz(0.5e9), hz(1.1e9), hz(0.1e9), 0.0, {}};
    EXPECT_NEAR(rad_to_hz(total_kappa(d1)), 1.7e9, 1e-3);
    CavityParams unit{1.0, 0.0, 0.0, 0.0, {}};
    EXPECT_EQ(total_kappa(unit), 1.0);
    EXPECT_NEAR(rad_to_hz(cavfb::testing::kerr_reference().cavity.total_kappa()), 15e6, 1e-6);
}

TEST(CavityParams, RejectsNegativeRates)
{
    CavityParams c{-1.0, 1.0, 1.0, 0.0, {}};
    EXPECT_THROW(c.validate(), Error);
    CavityParams zero{};
    EXPECT_THROW(zero.validate(), Error);
}

TEST(SteadyState, ZeroDriveGivesEmptyCavity)
{
    CavityParams c{1.0, 0.5, 0.5, -3.0, {}};
    auto roots = steady_state(c, ThermalResponseModel::single_pole(0.1, 1.0), 0.0);
    ASSERT_EQ(roots.size(), 1u);
    EXPECT_EQ(roots[0].n_c, 0.0);
    EXPECT_EQ(roots[0].delta_bar, -3.0);
}

TEST(SteadyState, LinearCavityMatchesLorentzian)
{
    CavityParams c{1.0, 0.5, 0.5, -3.0, {}};
    const double flux = 1e6;
    auto roots = steady_state(c, ThermalResponseModel{}, flux);
    ASSERT_EQ(roots.size(), 1u);
    const double k = c.total_kappa();
    EXPECT_NEAR(roots[0].n_c, c.kappa_ex * flux / (0.25 * k * k + 9.0), 1e-9 * roots[0].n_c);
    EXPECT_EQ(roots[0].branch, Branch::lower);
}

namespace
{
// Bistable red-detuned case: gain < 0 shifts the resonance toward the laser.
struct Bistable
{
    CavityParams cavity{0.5, 0.3, 0.2, -5.0, {}};
    ThermalResponseModel thermal = ThermalResponseModel::single_pole(-5e-3, 1.0);
    double flux = 1e4;

    double residual(double n) const
    {
        const double c = thermal.static_shift() * cavity.kappa_a;
        const double db = cavity.detuning - c * n;
        return n * (0.25 + db * db) - cavity.kappa_ex * flux;
    }
};
}  // namespace

TEST(SteadyState, ThreeRootsMiddleUnstableAgainstScan)
{
    Bistable b;
    const auto roots = steady_state(b.cavity, b.thermal, b.flux);
    ASSERT_EQ(roots.size(), 3u);

    // Independent bracket scan of the residual.
    std::vector<double> scanned;
    const double n_max = 4.0 * b.cavity.kappa_ex * b.flux / 1.0;
    const int steps = 2000000;
    double prev = b.residual(0.0);
    for (int i = 1; i <= steps; ++i) {
        const double n = n_max * i / steps;
        const double cur = b.residual(n);
        if ((prev < 0.0) != (cur < 0.0)) scanned.push_back(n - 0.5 * n_max / steps);
        prev = cur;
    }
    ASSERT_EQ(scanned.size(), 3u);
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(roots[i].n_c, scanned[i], n_max / steps);
        EXPECT_LT(std::abs(b.residual(roots[i].n_c)), 1e-12 * b.cavity.kappa_ex * b.flux);
        const double h = 1e-3;
        const double slope = b.residual(roots[i].n_c + h) - b.residual(roots[i].n_c - h);
        EXPECT_EQ(slope > 0.0, roots[i].branch != Branch::unstable) << i;
    }
    EXPECT_EQ(roots[0].branch, Branch::lower);
    EXPECT_EQ(roots[1].branch, Branch::unstable);
    EXPECT_EQ(roots[2].branch, Branch::upper);
    EXPECT_LT(roots[0].n_c, roots[1].n_c);
    EXPECT_LT(roots[1].n_c, roots[2].n_c);
}

TEST(SteadyState, KerrShiftEntersLikeStaticThermalShift)
{
    Bistable b;
    const double c = b.thermal.static_shift() * b.cavity.kappa_a;
    auto thermal_only = steady_state(b.cavity, b.thermal, b.flux);
    auto kerr_only = steady_state(b.cavity, ThermalResponseModel{}, b.flux, c);
    ASSERT_EQ(thermal_only.size(), kerr_only.size());
    for (std::size_t i = 0; i < kerr_only.size(); ++i)
        EXPECT_NEAR(thermal_only[i].n_c, kerr_only[i].n_c, 1e-9 * kerr_only[i].n_c);
}

TEST(SteadyState, RootCountIsOneOrThreeAndResidualsSmall)
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 300; ++t) {
        CavityParams c{0.2 + u(rng), 0.5 * u(rng), 0.1 + u(rng), -10.0 * u(rng), {}};
        auto th = ThermalResponseModel::single_pole(-1e-2 * u(rng), 0.5 + u(rng));
        const double flux = std::pow(10.0, 5.0 * u(rng));
        const auto roots = steady_state(c, th, flux);
        EXPECT_TRUE(roots.size() == 1 || roots.size() == 3);
        for (const auto& r : roots) {
            const double k = c.total_kappa();
            const double res = r.n_c * (0.25 * k * k + r.delta_bar * r.delta_bar) - c.kappa_ex * flux;
            EXPECT_LT(std::abs(res), 1e-12 * c.kappa_ex * flux);
        }
    }
}

TEST(SigmaD, VanishesWithoutPhotons)
{
    auto th = ThermalResponseModel::single_pole(3.0, 2.0);
    EXPECT_EQ(sigma_d(th, 0.0, 5.0), complex(0.0, 0.0));
}

TEST(SigmaD, AntisymmetryForRandomPoleSets)
{
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.01, 10.0);
    for (int t = 0; t < 200; ++t) {
        std::vector<ThermalPole> poles;
        const int n = 1 + t % 4;
        for (int j = 0; j < n; ++j) poles.push_back({g(rng), u(rng)});
        ThermalResponseModel th(poles);
        const double w = 20.0 * g(rng);
        const complex a = sigma_d(th, 37.0, w);
        const complex b = std::conj(sigma_d(th, 37.0, -w));
        EXPECT_NEAR(std::abs(a + b), 0.0, 1e-14 * std::abs(a));
    }
}

TEST(SigmaD, FastModulationIsNearlyReal)
{
    const double gain = 2.5, gamma = 1e3, omega = 1e7, n = 100.0;
    auto th = ThermalResponseModel::single_pole(gain, gamma);
    const complex s = sigma_d(th, n, omega);
    EXPECT_NEAR(s.real(), n * gain / omega, 1e-7 * n * gain / omega);
    // First-order imaginary part -n gain gamma / omega^2.
    EXPECT_NEAR(s.imag(), -n * gain * gamma / (omega * omega), 1e-7 * n * gain * gamma / (omega * omega));
}

TEST(ChiC0, ResonanceAndRolloff)
{
    CavityParams c{1.0, 1.0, 0.0, 0.0, {}};
    const complex r = chi_c0(c, 3.0, -3.0);
    EXPECT_DOUBLE_EQ(r.real(), 1.0);
    EXPECT_EQ(r.imag(), 0.0);
    EXPECT_LT(std::abs(chi_c0(c, 3.0, 1e9)), 1e-8);
    EXPECT_LT(std::abs(chi_c0(c, 3.0, -1e9)), 1e-8);

    const auto d2 = cavfb::testing::device_d2();
    const double k = d2.cavity.total_kappa();
    const complex v = chi_c0(d2.cavity, -d2.mech.omega_m, d2.mech.omega_m);
    EXPECT_NEAR(v.real(), 2.0 / k, 1e-15 / k);
    EXPECT_EQ(v.imag(), 0.0);
}

TEST(ChiFb, VanishesWithoutPhotonsOrAbsorption)
{
    auto d1 = cavfb::testing::device_d1();
    auto mf = d1.mf;
    mf.n_c = 0.0;
    EXPECT_EQ(chi_fb(d1.cavity, d1.thermal, mf, d1.mech.omega_m), complex(0.0, 0.0));
    auto c = d1.cavity;
    c.kappa_a = 0.0;
    EXPECT_EQ(chi_fb(c, d1.thermal, d1.mf, d1.mech.omega_m), complex(0.0, 0.0));
}

TEST(ChiCEff, ReducesToBareWithoutFeedback)
{
    auto d1 = cavfb::testing::device_d1();
    for (double n : {1e-3, 1e-6, 1e-9}) {
        MeanField mf{n, d1.mf.delta_bar, Branch::lower};
        const complex a = chi_c_eff(d1.cavity, d1.thermal, mf, d1.mech.omega_m);
        const complex b = chi_c0(d1.cavity, mf.delta_bar, d1.mech.omega_m);
        EXPECT_LT(std::abs(a - b), 1e-4 * n * std::abs(b));
    }
}

TEST(ChiCEff, FlagsLoopInstability)
{
    // Choose the gain so that chi_fb = 1 exactly at omega.
    CavityParams c{1.0, 0.0, 1.0, -1.0, {}};
    const double w = 3.0;
    const complex open = c.kappa_a * (chi_c0(c, c.detuning, w) - std::conj(chi_c0(c, c.detuning, -w)));
    const complex sigma_needed = 1.0 / open;
    // sigma0 = gain/(w + i gamma) with a single pole: gain = sigma (w + i gamma) must be real.
    const double gamma = -sigma_needed.imag() * w / sigma_needed.real();
    ASSERT_GT(gamma, 0.0);
    const double gain = (sigma_needed * complex(w, gamma)).real();
    auto th = ThermalResponseModel::single_pole(gain, gamma);
    const MeanField mf{1.0, c.detuning, Branch::lower};
    EXPECT_LT(std::abs(1.0 - chi_fb(c, th, mf, w)), 1e-12);
    try {
        (void)chi_c_eff(c, th, mf, w);
        FAIL() << "instability not flagged";
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::numeric_instability);
    }
    EXPECT_THROW((void)inloop_flux_psd(c, th, mf, w), Error);
}

TEST(ChiCEff, LorentzianMatchesFullFormFarDetuned)
{
    // |Delta| = 10 kappa and |sigma_d| <= 0.05 across the band.
    CavityParams c{0.4, 0.3, 0.3, 0.0, {}};
    const double k = c.total_kappa();
    const double db = -10.0 * k;
    const double w0 = -db;
    const double n = 1000.0;
    auto th = ThermalResponseModel::single_pole(0.045 * w0 / n, 1e-3);
    const MeanField mf{n, db, Branch::lower};
    const auto eff = effective_params(c, th, mf, w0);
    for (int i = 0; i <= 200; ++i) {
        const double w = w0 * (0.9 + 0.2 * i / 200.0);
        ASSERT_LE(std::abs(sigma_d(th, n, w)), 0.05);
        const double full = std::norm(chi_c_eff(c, th, mf, w));
        const double lor = std::norm(chi_c_eff_lorentzian(eff, w));
        EXPECT_NEAR(lor / full, 1.0, 0.01) << w;
    }
}

TEST(ChiCEff, FullFormWidthMatchesEffectiveLinewidthOnD1)
{
    auto d1 = cavfb::testing::device_d1(1190.0);
    const auto eff = d1.effective();
    const double wm = d1.mech.omega_m;
    // Dense scan of |chi_c,eff|^2; half maximum located by linear interpolation.
    const int n = 400001;
    const double lo = wm - 2.0 * eff.kappa_eff, hi = wm + 2.0 * eff.kappa_eff;
    std::vector<double> w(n), v(n);
    double vmax = 0.0;
    for (int i = 0; i < n; ++i) {
        w[i] = lo + (hi - lo) * i / (n - 1);
        v[i] = std::norm(chi_c_eff(d1.cavity, d1.thermal, d1.mf, w[i]));
        vmax = std::max(vmax, v[i]);
    }
    double left = 0.0, right = 0.0;
    for (int i = 1; i < n; ++i) {
        if (v[i - 1] < 0.5 * vmax && v[i] >= 0.5 * vmax)
            left = w[i - 1] + (0.5 * vmax - v[i - 1]) / (v[i] - v[i - 1]) * (w[i] - w[i - 1]);
        if (v[i - 1] >= 0.5 * vmax && v[i] < 0.5 * vmax)
            right = w[i - 1] + (v[i - 1] - 0.5 * vmax) / (v[i - 1] - v[i]) * (w[i] - w[i - 1]);
    }
    EXPECT_NEAR((right - left) / eff.kappa_eff, 1.0, 0.01);
}

TEST(EffectiveParams, NoPhotonsGivesBareValues)
{
    auto d1 = cavfb::testing::device_d1();
    MeanField mf{0.0, -2.0, Branch::lower};
    const auto eff = effective_params(d1.cavity, d1.thermal, mf, d1.mech.omega_m);
    EXPECT_EQ(eff.kappa_eff, d1.cavity.total_kappa());
    EXPECT_EQ(eff.delta_bar_eff, -2.0);
}

TEST(EffectiveParams, DeviceLinewidths)
{
    auto d1 = cavfb::testing::device_d1(1190.0);
    const double k1 = d1.effective().kappa_eff;
    EXPECT_NEAR(rad_to_hz(k1) / 1e9, 1.5953, 1e-4);
    const double reduction = 1.0 - k1 / d1.cavity.total_kappa();
    EXPECT_GT(reduction, 0.05);
    EXPECT_LT(reduction, 0.10);

    auto d2 = cavfb::testing::device_d2(1110.0);
    const double k2 = d2.effective().kappa_eff;
    EXPECT_NEAR(rad_to_hz(k2) / 1e6, 297.7, 0.05);
    EXPECT_GT(k2 / d2.cavity.total_kappa(), 1.3);
    EXPECT_LT(k2 / d2.cavity.total_kappa(), 1.5);
}

TEST(EffectiveParams, NonPositiveLinewidthIsAnError)
{
    CavityParams c{1.0, 0.0, 1.0, 0.0, {}};
    auto th = ThermalResponseModel::single_pole(10.0, 1e-6);
    EXPECT_THROW((void)effective_params(c, th, MeanField{1.0, 0.0, Branch::lower}, 1.0), Error);
}

TEST(EffectiveParams, DetuningTargetIsHit)
{
    auto d1 = cavfb::testing::device_d1();
    EXPECT_NEAR(d1.effective().delta_bar_eff, -d1.mech.omega_m, 1e-6);
}

TEST(InloopFlux, ShotNoiseWithoutFeedback)
{
    auto d1 = cavfb::testing::device_d1();
    MeanField mf{0.0, d1.mf.delta_bar, Branch::lower};
    EXPECT_EQ(inloop_flux_psd(d1.cavity, d1.thermal, mf, d1.mech.omega_m), 1.0);
    auto zero = d1.thermal.scaled(0.0);
    EXPECT_EQ(inloop_flux_psd(d1.cavity, zero, d1.mf, 0.3 * d1.mech.omega_m), 1.0);
}

TEST(InloopFlux, AntiSquashingForPositiveGainWhenCooling)
{
    auto d1 = cavfb::testing::device_d1();
    ASSERT_GT(d1.thermal.poles()[0].gain, 0.0);
    EXPECT_GT(inloop_flux_psd(d1.cavity, d1.thermal, d1.mf, d1.mech.omega_m), 1.0);
    auto d2 = cavfb::testing::device_d2();
    EXPECT_LT(inloop_flux_psd(d2.cavity, d2.thermal, d2.mf, d2.mech.omega_m), 1.0);
}

TEST(InloopFlux, FarDetunedApproximationWithinFivePercent)
{
    CavityParams c{0.5, 0.2, 0.3, 0.0, {}};
    const double k = c.total_kappa();
    const double db = -10.0 * k;
    const double w = -db;
    const double n = 100.0;
    for (double loop : {-0.3, -0.1, 0.1, 0.3}) {
        // loop ~ 2 n kappa_a gain / (w kappa)
        auto th = ThermalResponseModel::single_pole(loop * w * k / (2.0 * n * c.kappa_a), 1e-4);
        const MeanField mf{n, db, Branch::lower};
        const double exact = inloop_flux_psd(c, th, mf, w);
        const double approx = inloop_flux_psd_far_detuned(c, th, n, w);
        EXPECT_NEAR(approx / exact, 1.0, 0.05) << loop;
    }
}

TEST(ReservoirCorrelators, VacuumWithoutFeedback)
{
    const auto r = reservoir_correlators(0.0, 0.0);
    EXPECT_EQ(r.nn, complex(0.0));
    EXPECT_EQ(r.n_nbar, complex(1.0));
    EXPECT_EQ(r.aa, complex(0.0));
    EXPECT_EQ(r.adad, complex(0.0));
}

TEST(ReservoirCorrelators, SumRuleOnRandomValues)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 2.0);
    for (int t = 0; t < 500; ++t) {
        const complex s(g(rng), g(rng)), sp(g(rng), g(rng));
        const auto r = reservoir_correlators(s, sp);
        const complex sum = r.nn + r.n_nbar + r.aa + r.adad;
        EXPECT_NEAR(std::abs(sum - 1.0), 0.0, 1e-12 * (1.0 + std::norm(s) + std::norm(sp)));
    }
}

TEST(ReservoirCorrelators, SymmetricRealCase)
{
    const double s = 0.37;
    const auto r = reservoir_correlators(s, -s);
    EXPECT_NEAR(r.nn.real(), s * s, 1e-15);
    EXPECT_NEAR(r.n_nbar.real(), (1.0 - s) * (1.0 - s), 1e-15);
}
