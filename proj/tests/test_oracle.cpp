#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cavfb/oracle.hpp"
#include "cavfb/squeezing.hpp"
#include "support.hpp"

using namespace cavfb;
using cavfb::testing::hz;

namespace
{
oracle::Params kerr_oracle_params(bool with_kerr = true)
{
    const auto k = cavfb::testing::kerr_reference();
    oracle::Params p;
    p.cavity = k.cavity;
    p.thermal = k.thermal;
    p.mf = k.mf;
    p.g_kerr = with_kerr ? k.kerr.g_kerr : 0.0;
    p.detection = k.detection;
    return p;
}
}  // namespace

TEST(Oracle, VacuumIsShotNoise)
{
    auto p = kerr_oracle_params(false);
    p.thermal = p.thermal.scaled(0.0);
    for (double f : {1e3, 1e6, 1e9}) {
        EXPECT_NEAR(oracle::homodyne_psd(p, 0.4, hz(f)), 1.0, 1e-14);
        EXPECT_NEAR(oracle::heterodyne_psd(p, hz(f)), 1.0, 1e-14);
        EXPECT_NEAR(oracle::inloop_psd(p, hz(f)), 1.0, 1e-14);
    }
}

TEST(Oracle, DiagonalWithoutCouplings)
{
    auto p = kerr_oracle_params(false);
    p.thermal = p.thermal.scaled(0.0);
    p.mf.delta_bar = hz(3e6);
    const double w = hz(2e6);
    const auto m = oracle::assemble(p, w).system;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            if (r != c) EXPECT_EQ(m(r, c), complex(0.0));
    EXPECT_LT(std::abs(m(0, 0) * chi_c0(p.cavity, p.mf.delta_bar, w) - 1.0), 1e-14);
    EXPECT_LT(std::abs(m(1, 1) * std::conj(chi_c0(p.cavity, p.mf.delta_bar, -w)) - 1.0), 1e-14);
}

TEST(Oracle, ConjugateRowConsistency)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (int t = 0; t < 50; ++t) {
        oracle::Params p;
        p.cavity = CavityParams{u(rng), u(rng), u(rng), 0.0, {}};
        p.thermal = ThermalResponseModel({{u(rng) - 0.5, u(rng)}, {0.1 * (u(rng) - 0.5), 10.0 * u(rng)}});
        p.mf = MeanField::at(10.0 * u(rng), 3.0 * (u(rng) - 0.5));
        p.g_kerr = 0.01 * (u(rng) - 0.5);
        p.mech = MechanicalMode{5.0 * u(rng), 0.1 * u(rng), 0.1 * u(rng), 1.0, {}};
        const double w = 4.0 * (u(rng) - 0.5);
        for (auto level : {oracle::Level::exact, oracle::Level::resolved_sideband}) {
            const auto a = oracle::assemble(p, w, level);
            const auto b = oracle::assemble(p, -w, level);
            const int swap4[4] = {1, 0, 3, 2};
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 4; ++c)
                    EXPECT_LT(std::abs(a.system(swap4[r], swap4[c]) - std::conj(b.system(r, c))), 1e-12);
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < oracle::n_inputs; ++c)
                    EXPECT_LT(std::abs(a.input(swap4[r], c ^ 1) - std::conj(b.input(r, c))), 1e-12);
        }
    }
}

TEST(Oracle, CavityDeterminantIsLoopDenominator)
{
    for (double db : {0.0, hz(-3e6), hz(20e6)}) {
        auto p = kerr_oracle_params(false);
        p.mf.delta_bar = db;
        for (double f : {1e4, 1e6, 7e6, 3e7}) {
            const double w = hz(f);
            const complex lhs = oracle::cavity_block_determinant(p, w) * chi_c0(p.cavity, db, w) *
                                std::conj(chi_c0(p.cavity, db, -w));
            const complex rhs = 1.0 - chi_fb(p.cavity, p.thermal, p.mf, w);
            EXPECT_LT(std::abs(lhs - rhs), 1e-10 * std::abs(rhs));
        }
    }
}

TEST(Oracle, DeterminantZeroCoincidesWithFeedbackPole)
{
    // Coarse-grid minimum of |det| versus minimum of |1 - chi_fb| for a loop close to instability.
    CavityParams c{1.0, 0.0, 1.0, -1.0, {}};
    const double w0 = 3.0;
    const complex open = c.kappa_a * (chi_c0(c, c.detuning, w0) - std::conj(chi_c0(c, c.detuning, -w0)));
    const complex s = 0.98 / open;
    const double gamma = -s.imag() * w0 / s.real();
    oracle::Params p;
    p.cavity = c;
    p.thermal = ThermalResponseModel::single_pole((s * complex(w0, gamma)).real(), gamma);
    p.mf = MeanField::at(1.0, c.detuning);
    double best_det = 1e300, best_fb = 1e300, w_det = 0, w_fb = 0;
    for (int i = 0; i <= 4000; ++i) {
        const double w = 2.0 + 2.0 * i / 4000.0;
        const double d = std::abs(oracle::cavity_block_determinant(p, w) * chi_c0(c, c.detuning, w) *
                                  std::conj(chi_c0(c, c.detuning, -w)));
        const double f = std::abs(1.0 - chi_fb(p.cavity, p.thermal, p.mf, w));
        if (d < best_det) best_det = d, w_det = w;
        if (f < best_fb) best_fb = f, w_fb = w;
    }
    EXPECT_EQ(w_det, w_fb);
}

TEST(Oracle, LoopGainExtractionEqualsChiFb)
{
    // On resonance the absorption loop is open, so detune.
    auto p = kerr_oracle_params(false);
    p.mf.delta_bar = hz(-3e6);
    const double w = hz(1e6);
    const complex closed = chi_fb(p.cavity, p.thermal, p.mf, w);
    const complex extracted = oracle::loop_gain(p, w);
    EXPECT_LT(std::abs(extracted - closed), 1e-9 * std::abs(closed));
    EXPECT_GT(std::abs(closed), 1e-3);

    const auto d1 = cavfb::testing::device_d1();
    auto q = oracle::Params::from(d1);
    q.mech.g0 = 0.0;
    const complex c1 = chi_fb(d1.cavity, d1.thermal, d1.mf, d1.mech.omega_m);
    EXPECT_LT(std::abs(oracle::loop_gain(q, d1.mech.omega_m) - c1), 1e-9 * std::abs(c1));
}

TEST(Oracle, InloopFluxEqualsClosedLoopSquashing)
{
    for (auto sys : {cavfb::testing::device_d1(), cavfb::testing::device_d2()}) {
        auto p = oracle::Params::from(sys);
        p.mech.g0 = 0.0;
        for (double f : {0.3, 1.0, 1.4}) {
            const double w = f * sys.mech.omega_m;
            const double closed = inloop_flux_psd(sys.cavity, sys.thermal, sys.mf, w);
            EXPECT_NEAR(oracle::inloop_psd(p, w) / closed, 1.0, 1e-10);
        }
    }
}

TEST(Oracle, SingularSystemReportsCondition)
{
    CavityParams c{1.0, 0.0, 1.0, -1.0, {}};
    const double w = 3.0;
    const complex open = c.kappa_a * (chi_c0(c, c.detuning, w) - std::conj(chi_c0(c, c.detuning, -w)));
    const complex s = 1.0 / open;
    const double gamma = -s.imag() * w / s.real();
    oracle::Params p;
    p.cavity = c;
    p.thermal = ThermalResponseModel::single_pole((s * complex(w, gamma)).real(), gamma);
    p.mf = MeanField::at(1.0, c.detuning);
    try {
        (void)oracle::homodyne_psd(p, 0.3, w);
        FAIL() << "singular solve not reported";
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::numeric_instability);
        EXPECT_NE(std::string(e.what()).find("condition number"), std::string::npos);
    }
}

TEST(Oracle, HeterodyneMatchesClosedFormOnD1)
{
    auto d1 = cavfb::testing::device_d1(1200.0, 0.03);
    const auto p = oracle::Params::from(d1);
    const auto r = cooling_report(d1);
    const auto grid = linspace(d1.detection.delta_lo - 20.0 * r.gamma_eff, d1.detection.delta_lo + 20.0 * r.gamma_eff, 2001);
    const auto closed = heterodyne_psd(d1, grid).channel("S_I").values;
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double o = oracle::heterodyne_psd(p, grid[i], oracle::Level::resolved_sideband);
        worst = std::max(worst, std::abs(o / closed[i] - 1.0));
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(Oracle, ExactHeterodyneCloseToResolvedSideband)
{
    // The full system differs by counter-rotating and cavity-dispersion
    // corrections of a few kappa/Omega_m; check they stay small for D2.
    auto d2 = cavfb::testing::device_d2(1110.0);
    const auto p = oracle::Params::from(d2);
    for (double off : {-3.0, 0.0, 2.0}) {
        const double nu = d2.detection.delta_lo + off * hz(3e6);
        const double a = oracle::heterodyne_psd(p, nu, oracle::Level::exact);
        const double b = oracle::heterodyne_psd(p, nu, oracle::Level::resolved_sideband);
        EXPECT_NEAR(a / b, 1.0, 0.1);
    }
}

TEST(Oracle, HomodyneSecondOrderMatchesClosedFormOnKerrSet)
{
    const auto k = cavfb::testing::kerr_reference();
    const auto p = kerr_oracle_params(true);
    for (double eta : {1.0, 0.6}) {
        auto q = p;
        q.detection.eta_ex = eta;
        DetectionSetup det;
        det.eta_ex = eta;
        for (double th : {0.1, 0.7, 1.3}) {
            for (int i = 0; i <= 50; ++i) {
                const double w = hz(1e4 * std::pow(1e5, i / 50.0));
                const double closed = homodyne_psd(k.cavity, k.thermal, k.kerr, det, k.mf, th, w).total;
                const double o = oracle::homodyne_psd_second_order(q, th, w);
                EXPECT_NEAR(o / closed, 1.0, 1e-6) << th << " " << w;
            }
        }
    }
}

TEST(Oracle, KerrOnlyExactMatchesClosedForm)
{
    auto k = cavfb::testing::kerr_reference();
    k.thermal = k.thermal.scaled(0.0);
    auto p = kerr_oracle_params(true);
    p.thermal = k.thermal;
    for (double th : {0.2, 1.1, 2.9})
        for (double f : {1e4, 3e6, 1e8}) {
            const double closed = homodyne_psd(k.cavity, k.thermal, k.kerr, k.detection, k.mf, th, hz(f)).total;
            EXPECT_NEAR(oracle::homodyne_psd(p, th, hz(f)) / closed, 1.0, 1e-10);
        }
}

TEST(Oracle, PsdNonNegativeAndLinearInCorrelations)
{
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 40; ++t) {
        auto d = cavfb::testing::device_d2(200.0 + 2000.0 * u(rng));
        d.detection.eta_ex = u(rng);
        d.mech.bath.n_th0 = 100.0 * u(rng);
        const auto p = oracle::Params::from(d);
        const double nu = d.detection.delta_lo + hz(5e6) * (u(rng) - 0.5);
        EXPECT_GE(oracle::heterodyne_psd(p, nu), 0.0);
        EXPECT_GE(oracle::homodyne_psd(p, 3.0 * u(rng), nu), 0.0);

        const auto plus = oracle::outputs(p, nu);
        const auto minus = oracle::outputs(p, -nu);
        const auto c = oracle::input_correlations(d.mech.bath.n_th(d.mf.n_c));
        const complex one = oracle::detail::symmetrized(plus.a_det, minus.a_det_dag, c);
        const complex two = oracle::detail::symmetrized(plus.a_det, minus.a_det_dag, 2.0 * c);
        EXPECT_LT(std::abs(two - 2.0 * one), 1e-12 * std::abs(one));
        // Per-input contributions sum to the total.
        complex sum{};
        for (int i = 0; i < oracle::n_inputs; ++i) {
            oracle::CorrelationMatrix ci = oracle::CorrelationMatrix::Zero();
            ci.row(i) = c.row(i);
            sum += oracle::detail::symmetrized(plus.a_det, minus.a_det_dag, ci);
        }
        EXPECT_LT(std::abs(sum - one), 1e-12 * std::abs(one));
    }
}
