// Copyright 2026 The dlcz-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "dlcz/dynamics.hpp"
#include "support.hpp"

namespace dlcz {
namespace {

using testing::per_us;
using testing::relative;
using testing::Scenario;
using testing::us;

Scenario relaxation_free(double alpha) {
    Scenario sc;
    sc.alpha = alpha;
    sc.beta = 20.0;
    return sc;
}

TEST(MeanField, ZeroDriveStaysEmpty) {
    Scenario sc;
    sc.beta = 10.0;
    sc.gamma_c = 0.03;
    Trajectory traj = evolve_meanfield(testing::rectangular(sc));
    for (const auto &s : traj.samples) {
        EXPECT_EQ(s.nsp, 0.0);
        EXPECT_EQ(s.n1_out, 0.0);
        EXPECT_EQ(s.n2_out, 0.0);
        EXPECT_EQ(s.flux2, 0.0);
    }
}

TEST(MeanField, StokesCountForKnownGain) {
    // alpha T_W = 0.8 with nothing damping the write stage.
    Trajectory traj = evolve_meanfield(testing::rectangular(relaxation_free(0.5)));
    EXPECT_NEAR(traj.stokes_count(), 1.2255409284924679, 1e-9);
    EXPECT_NEAR(traj.at(us(1.6), true).nsp, 1.2255409284924679, 1e-9);
}

TEST(MeanField, LnFourGainGivesThreeStokesPhotons) {
    RateSchedule s = testing::rectangular(relaxation_free(std::log(4.0) / 1.6));
    Trajectory traj = evolve_meanfield(s);
    EXPECT_NEAR(traj.stokes_count(), 3.0, 1e-9);
    EXPECT_LE(stokes_spin_correspondence(traj).relative, 1e-12);
}

TEST(MeanField, CompleteRetrieval) {
    RateSchedule s = testing::rectangular(relaxation_free(std::log(4.0) / 1.6));
    Trajectory traj = evolve_meanfield(s);
    double ratio = traj.at(s.timeline().end()).n2_out / traj.stokes_count();
    EXPECT_NEAR(ratio, -std::expm1(-20.0), 1e-9);
    EXPECT_LT(traj.at(s.timeline().end()).nsp, 1e-8);
}

TEST(MeanField, MemoryDecayBetweenPulses) {
    Scenario sc = relaxation_free(0.5);
    sc.gamma_c = 0.3;
    sc.model = RelaxationModel::storage;
    Trajectory traj = evolve_meanfield(testing::trapezoid(sc));
    double ratio = traj.at(us(3.0), true).nsp / traj.at(us(1.6)).nsp;
    EXPECT_NEAR(ratio, 0.6570468198150567, 1e-9);
}

TEST(MeanField, InvariantsOnRandomEnvelopes) {
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> alpha(0.1, 2.0);
    std::uniform_real_distribution<double> beta(1.0, 30.0);
    std::uniform_real_distribution<double> relax(0.0, 0.5);
    for (int trial = 0; trial < 12; trial++) {
        Scenario sc;
        sc.alpha = alpha(rng);
        sc.beta = beta(rng);
        sc.gamma_c = relax(rng);
        sc.gamma1 = relax(rng);
        sc.gamma2 = relax(rng);
        RateSchedule s = testing::tabulated(sc, rng);
        Trajectory traj = evolve_meanfield(s);
        const TrajectorySample *prev = nullptr;
        for (const auto &x : traj.samples) {
            EXPECT_GE(x.nsp, 0.0);
            EXPECT_GE(x.s2, 0.0);
            EXPECT_GE(x.n1_in, 0.0);
            EXPECT_GE(x.n2_in, 0.0);
            EXPECT_LE(x.n1_in, 1e-3 * std::max(1.0, x.nsp + 1.0));
            if (prev) {
                EXPECT_GE(x.t, prev->t);
                EXPECT_GE(x.n1_out, prev->n1_out);
                EXPECT_GE(x.n2_out, prev->n2_out);
            }
            EXPECT_NEAR(x.flux1, 2.0 * traj.cavity_decay * x.n1_in, 1e-12 * (1.0 + x.flux1));
            prev = &x;
        }
    }
}

TEST(MeanField, FluxAreaMatchesPhotonCount) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 5; trial++) {
        Scenario sc = relaxation_free(0.3 + 0.3 * trial);
        sc.gamma_c = 0.03;
        RateSchedule s = testing::tabulated(sc, rng);
        Trajectory traj = evolve_meanfield(s);
        const Timeline &tl = s.timeline();
        double stokes = flux_area(traj, Mode::stokes, 0.0, tl.write);
        double anti = flux_area(traj, Mode::anti_stokes, tl.read_start(), tl.end());
        EXPECT_LE(relative(stokes, traj.stokes_count()), 1e-6);
        EXPECT_LE(relative(anti, traj.at(tl.end()).n2_out), 1e-6);
    }
}

TEST(Quadrature, RectangularIsExponential) {
    RateSchedule s = testing::rectangular(relaxation_free(0.5));
    EXPECT_NEAR(nsp_quadrature(s, us(1.6)), std::expm1(0.8), 1e-12);
    EXPECT_NEAR(nsp_quadrature(s, us(0.8)), std::expm1(0.4), 1e-12);
    EXPECT_EQ(nsp_quadrature(testing::rectangular(relaxation_free(0.0)), us(1.6)), 0.0);
}

TEST(Quadrature, AgreesWithOdeOnShapedPulses) {
    std::mt19937_64 rng(4242);
    std::vector<RateSchedule> cases;
    Scenario sc = relaxation_free(1.1);
    sc.gamma_c = 0.1;
    sc.gamma1 = 0.05;
    cases.push_back(testing::trapezoid(sc, 0.2));
    for (int k = 0; k < 4; k++) {
        cases.push_back(testing::tabulated(sc, rng));
    }
    for (const auto &s : cases) {
        std::vector<double> times = {us(0.4), us(1.0), us(1.6), us(2.5), us(3.0), us(3.4), us(4.0)};
        auto samples = sample_meanfield(s, times);
        for (const auto &x : samples) {
            EXPECT_LE(relative(nsp_quadrature(s, x.t), x.nsp), 1e-6) << "t = " << x.t;
        }
    }
}

TEST(ClosedForm, MatchesOdePointwise) {
    Scenario sc;
    sc.alpha = 1.0;
    sc.beta = 5.0;
    sc.gamma_c = 0.03;
    sc.gamma1 = 0.02;
    sc.gamma2 = 0.04;
    RateSchedule s = testing::rectangular(sc);
    std::vector<double> times;
    for (int k = 1; k <= 400; k++) {
        times.push_back(s.timeline().end() * 1.05 * k / 400);
    }
    auto samples = sample_meanfield(s, times);
    for (const auto &x : samples) {
        RectangularSolution cf = closed_forms_rectangular(s, x.t, x.window);
        EXPECT_LE(relative(x.nsp, cf.nsp), 1e-6) << x.t;
        EXPECT_LE(relative(x.n1_out, cf.n1_out), 1e-6) << x.t;
        if (cf.n2_out > 0.0) {
            EXPECT_LE(relative(x.n2_out, cf.n2_out), 1e-6) << x.t;
        } else {
            EXPECT_EQ(x.n2_out, 0.0);
        }
        if (cf.n1_in > 0.0) {
            EXPECT_LE(relative(x.n1_in, cf.n1_in), 1e-6) << x.t;
        }
        if (cf.n2_in > 0.0) {
            EXPECT_LE(relative(x.n2_in, cf.n2_in), 1e-6) << x.t;
        }
    }
}

TEST(ClosedForm, RetrievalLimitAndShapeCheck) {
    RateSchedule s = testing::rectangular(relaxation_free(std::log(4.0) / 1.6));
    RectangularSolution end = closed_forms_rectangular(s, s.timeline().end());
    EXPECT_NEAR(end.n2_out / 3.0, -std::expm1(-20.0), 1e-14);
    EXPECT_EQ(closed_forms_rectangular(s, s.timeline().read_start()).n2_out, 0.0);
    EXPECT_THROW(closed_forms_rectangular(testing::trapezoid(relaxation_free(1.0)), us(1.0)), InputError);
}

TEST(Correspondence, ResidualVanishesWithoutWriteRelaxation) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 8; trial++) {
        Scenario sc = relaxation_free(0.2 + 0.25 * trial);
        sc.gamma_c = 0.1;
        sc.model = RelaxationModel::storage;
        Trajectory traj = evolve_meanfield(testing::tabulated(sc, rng));
        EXPECT_LE(stokes_spin_correspondence(traj).relative, 1e-9);
    }
    EXPECT_EQ(stokes_spin_correspondence(evolve_meanfield(testing::rectangular(relaxation_free(0.0)))).absolute, 0.0);
}

TEST(Correspondence, DampingOpensTheGapByItsIntegral) {
    Scenario sc = relaxation_free(0.8);
    sc.gamma_c = 0.2;
    Trajectory traj = evolve_meanfield(testing::rectangular(sc));
    // n1_out - N_sp = gamma_c * int_0^t N_sp, largest at T_W.
    double integral = 0.0;
    for (size_t k = 1; k < traj.samples.size() && traj.samples[k].t <= traj.timeline.write; k++) {
        const auto &a = traj.samples[k - 1];
        const auto &b = traj.samples[k];
        integral += 0.5 * (b.t - a.t) * (a.nsp + b.nsp);
    }
    CorrespondenceResidual r = stokes_spin_correspondence(traj);
    EXPECT_GT(r.relative, 1e-3);
    EXPECT_LE(relative(r.absolute, per_us(0.2) * integral), 1e-6);
}

TEST(MeanField, PumpingPopulatesLevelTwo) {
    Scenario sc;
    sc.gamma1 = 0.5;
    sc.gamma_c = 0.1;
    RateSchedule s = testing::rectangular(sc);
    double atoms = s.peaks().atom_number;
    Trajectory traj = evolve_meanfield(s);
    // With alpha = 0: dS2/dt = Gamma1 N - gamma_c S2 during the write pulse.
    double g1 = per_us(0.5);
    double gc = per_us(0.1);
    double expected = g1 * atoms * -std::expm1(-gc * us(1.6)) / gc;
    EXPECT_LE(relative(traj.at(us(1.6), true).s2, expected), 1e-8);
    EXPECT_EQ(traj.at(us(1.6), true).nsp, 0.0);
}

TEST(MeanField, IncoherentSourceOption) {
    Scenario sc;
    sc.gamma1 = 0.5;
    sc.gamma_c = 0.1;
    IntegratorConfig cfg;
    cfg.incoherent_source = true;
    Trajectory traj = evolve_meanfield(testing::rectangular(sc), cfg);
    double total = per_us(0.6);
    double expected = per_us(0.5) / total * -std::expm1(-total * us(1.6));
    EXPECT_LE(relative(traj.at(us(1.6), true).nsp, expected), 1e-9);
}

TEST(MeanField, ExplicitCavityAgreesWithAdiabaticElimination) {
    RateSchedule s = testing::trapezoid(relaxation_free(1.0), 0.1);
    IntegratorConfig explicit_cfg;
    explicit_cfg.explicit_cavity = true;
    Trajectory a = evolve_meanfield(s);
    Trajectory b = evolve_meanfield(s, explicit_cfg);
    double end = s.timeline().end();
    EXPECT_LE(relative(b.at(end).n1_out, a.at(end).n1_out), 1e-4);
    EXPECT_LE(relative(b.at(end).n2_out, a.at(end).n2_out), 1e-4);
    // The intracavity field trails the source by about 1/2k, a relative lag of alpha/2k.
    double lag = s.peaks().stokes_gain / (2.0 * s.peaks().cavity_decay);
    EXPECT_LE(relative(b.at(us(1.5)).n1_in, a.at(us(1.5)).n1_in), 3.0 * lag);
}

TEST(MeanField, RefinementConverges) {
    IntegratorConfig cfg;
    cfg.refine = true;
    cfg.rate_step = 1e-2;
    cfg.min_steps = 50;
    Trajectory traj = evolve_meanfield(testing::rectangular(relaxation_free(std::log(4.0) / 1.6)), cfg);
    EXPECT_NEAR(traj.stokes_count(), 3.0, 1e-9);
}

TEST(MeanField, EdgeSamplesCarryBothLimits) {
    RateSchedule s = testing::rectangular(relaxation_free(0.5));
    Trajectory traj = evolve_meanfield(s);
    EXPECT_GT(traj.at(us(1.6), true).flux1, 0.0);
    EXPECT_EQ(traj.at(us(1.6)).flux1, 0.0);
    EXPECT_EQ(traj.at(us(1.6), true).nsp, traj.at(us(1.6)).nsp);
    EXPECT_THROW(traj.at(us(1.6) + 1e-9), InputError);
}

TEST(MeanField, SolveStokesGain) {
    RateSchedule s = testing::trapezoid(relaxation_free(0.0));
    for (double target : {0.01, 0.5, 3.0}) {
        double alpha = solve_stokes_gain(s, target);
        EXPECT_NEAR(stokes_count(s.with_stokes_gain(alpha)), target, 1e-10 * std::max(1.0, target));
    }
    EXPECT_NEAR(solve_stokes_gain(testing::rectangular(relaxation_free(0.0)), 3.0), per_us(std::log(4.0) / 1.6),
                1e-9 * per_us(1.0));
}

TEST(MeanField, ConfigValidation) {
    IntegratorConfig cfg;
    cfg.rate_step = 0.1;
    EXPECT_THROW(cfg.validate(), InputError);
    cfg = {};
    cfg.min_steps = 0;
    EXPECT_THROW(cfg.validate(), InputError);
}

TEST(MeanField, NonFiniteOrNegativeStateAborts) {
    detail::MeanFieldState y = detail::MeanFieldState::Zero();
    y[detail::kNsp] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(detail::check_meanfield(1e-6, y), NumericalError);
    y[detail::kNsp] = -1e-3;
    EXPECT_THROW(detail::check_meanfield(1e-6, y), NumericalError);
    Scenario sc = relaxation_free(625.0);  // alpha T_W = 1000 overflows
    EXPECT_THROW(evolve_meanfield(testing::rectangular(sc)), NumericalError);
}

}  // namespace
}  // namespace dlcz
