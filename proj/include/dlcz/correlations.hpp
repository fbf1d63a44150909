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

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "dlcz/dynamics.hpp"
#include "dlcz/errors.hpp"
#include "dlcz/integrate.hpp"
#include "dlcz/params.hpp"

namespace dlcz {

/// Single-time spin-wave moments. n = <b+ b>, f2 = <b+^2 b^2>, f3 = <b+^3 b^3>.
struct SpinMoments {
    double n = 0.0;
    double f2 = 0.0;
    double f3 = 0.0;

    /// <b b b+ b+>
    double phi1() const {
        return f2 + 4.0 * n + 2.0;
    }
    /// <b+ b+ b b>
    double phi2() const {
        return f2;
    }
    /// <b b+ b b+>
    double phi12() const {
        return f2 + 3.0 * n + 1.0;
    }
    /// <b b+ b+ b b b+>
    double phi122() const {
        return f3 + 5.0 * f2 + 4.0 * n;
    }
};

/// Moments of the conditioned operator sigma = b+ rho(t1) b propagated to t2.
struct RegressedMoments {
    double t1 = 0.0;
    double t2 = 0.0;
    double m0 = 0.0;  // Tr sigma = <b b+>(t1), conserved
    double m1 = 0.0;  // Tr(b+ b sigma(t2))
    double m2 = 0.0;  // Tr(b+^2 b^2 sigma(t2))
    double retrieval_integral = 0.0;  // int_{t1}^{t2} beta
    double damping_integral = 0.0;    // int_{t1}^{t2} Gamma_tot
};

namespace detail {

using Moments3 = Eigen::Vector3d;

/// Factorial-moment hierarchy under gain, retrieval and reset-type damping:
///   dF_m/dt = m alpha (F_m + m F_{m-1}) - m beta F_m - Gamma F_m,  F_0 = 1.
inline Moments3 hierarchy_rhs(const RateSchedule::Rates &r, const Moments3 &f) {
    const double d = r.total_damping();
    Moments3 out;
    out[0] = r.gain * (f[0] + 1.0) - (r.retrieval + d) * f[0];
    out[1] = 2.0 * r.gain * (f[1] + 2.0 * f[0]) - (2.0 * r.retrieval + d) * f[1];
    out[2] = 3.0 * r.gain * (f[2] + 3.0 * f[1]) - (3.0 * r.retrieval + d) * f[2];
    return out;
}

using Regression5 = Eigen::Matrix<double, 5, 1>;

/// (M0, M1, M2, int beta, int Gamma) for sigma = b+ rho b. The reset channel
/// feeds Tr(sigma) rho0 back, which leaves M0 fixed and has no weight on the
/// higher moments of the vacuum.
inline Regression5 regression_rhs(const RateSchedule::Rates &r, const Regression5 &m) {
    const double d = r.total_damping();
    Regression5 out;
    out[0] = 0.0;
    out[1] = r.gain * (m[1] + m[0]) - (r.retrieval + d) * m[1];
    out[2] = 2.0 * r.gain * (m[2] + 2.0 * m[1]) - (2.0 * r.retrieval + d) * m[2];
    out[3] = r.retrieval;
    out[4] = d;
    return out;
}

/// int_a^b of a rate chosen by `pick` over the schedule's kink-free pieces.
template <class Pick>
double rate_integral(const RateSchedule &sched, double a, double b, const Pick &pick) {
    using boost::math::quadrature::gauss_kronrod;
    double total = 0.0;
    for (const auto &seg : sched.segments(a, b)) {
        total += gauss_kronrod<double, 15>::integrate([&](double s) { return pick(sched.in(seg.window, s)); },
                                                      seg.begin, seg.end, 0);
    }
    return total;
}

}  // namespace detail

/// int_a^b Gamma_tot(t) dt: the exponent by which normally ordered moments lose
/// weight to relaxation alone.
inline double damping_integral(const RateSchedule &sched, double a, double b) {
    return detail::rate_integral(sched, a, b, [](const RateSchedule::Rates &r) { return r.total_damping(); });
}

inline double retrieval_integral(const RateSchedule &sched, double a, double b) {
    return detail::rate_integral(sched, a, b, [](const RateSchedule::Rates &r) { return r.retrieval; });
}

/// Propagated fourth- and sixth-order spin moments for arbitrary envelopes.
/// Single-time moments are checkpointed at every segment edge, so evaluating
/// at an arbitrary time costs at most one segment of integration.
class PhiFunctions {
   public:
    explicit PhiFunctions(RateSchedule sched, StepPolicy policy = {1e-3, 400, 3.0, 0.0})
        : sched_(std::move(sched)), policy_(policy) {
        auto rhs = [](const RateSchedule::Rates &r, const detail::Moments3 &f) { return detail::hierarchy_rhs(r, f); };
        auto observe = [&](double t, RateSchedule::Window, const detail::Moments3 &f, StepEvent ev) {
            if (ev == StepEvent::segment_start) {
                checkpoints_.push_back({t, f});
            }
            if (!f.allFinite()) {
                throw NumericalError("spin moment propagation produced non-finite values at t = " +
                                     detail::describe(t) + " s");
            }
        };
        detail::Moments3 last = propagate(sched_, 0.0, sched_.timeline().end(), detail::Moments3::Zero().eval(),
                                          policy_, rhs, observe);
        checkpoints_.push_back({sched_.timeline().end(), last});
    }

    const RateSchedule &schedule() const {
        return sched_;
    }

    SpinMoments moments(double t) const {
        detail::require(t >= 0.0 && std::isfinite(t), "moment time must be finite and >= 0");
        auto it = std::upper_bound(checkpoints_.begin(), checkpoints_.end(), t,
                                   [](double v, const Checkpoint &c) { return v < c.t; });
        const Checkpoint &c = *(it - 1);
        detail::Moments3 f = c.f;
        if (t > c.t) {
            auto rhs = [](const RateSchedule::Rates &r, const detail::Moments3 &y) {
                return detail::hierarchy_rhs(r, y);
            };
            f = propagate(sched_, c.t, t, f, policy_, rhs);
        }
        return {f[0], f[1], f[2]};
    }

    double phi1(double t) const {
        return moments(t).phi1();
    }
    double phi2(double t) const {
        return moments(t).phi2();
    }
    double phi12(double t1, double t2) const {
        return regress(t1, t2).m1;
    }
    double phi122(double t1, double t2) const {
        return regress(t1, t2).m2;
    }

    /// Quantum-regression propagation from a write-window time t1 to a
    /// read-side time t2.
    RegressedMoments regress(double t1, double t2) const {
        const Timeline &tl = sched_.timeline();
        detail::require(t1 >= 0.0 && t1 <= tl.write * (1.0 + 1e-12) && t2 >= tl.read_start() * (1.0 - 1e-12),
                        "regression needs 0 <= t1 <= T_W <= T2 <= t2");
        SpinMoments s = moments(t1);
        detail::Regression5 m;
        m << s.n + 1.0, s.phi12(), s.phi122(), 0.0, 0.0;
        auto rhs = [](const RateSchedule::Rates &r, const detail::Regression5 &y) {
            return detail::regression_rhs(r, y);
        };
        if (t2 > t1) {
            m = propagate(sched_, t1, t2, m, policy_, rhs);
        }
        if (!m.allFinite()) {
            throw NumericalError("regression propagation produced non-finite values");
        }
        return {t1, t2, m[0], m[1], m[2], m[3], m[4]};
    }

   private:
    struct Checkpoint {
        double t;
        detail::Moments3 f;
    };

    RateSchedule sched_;
    StepPolicy policy_;
    std::vector<Checkpoint> checkpoints_;
};

inline PhiFunctions propagate_phi(const RateSchedule &sched) {
    return PhiFunctions(sched);
}

/// Normalized auto-correlation of mode 1 (t in the write window) or mode 2
/// (t at or after the read onset). The alpha/2k, beta/2k prefactors of the
/// photon numbers cancel, so the ratio is taken on spin moments.
inline Estimate g_auto(const PhiFunctions &phi, double t, Mode mode) {
    const RateSchedule &sched = phi.schedule();
    const Timeline &tl = sched.timeline();
    if (mode == Mode::stokes) {
        detail::require(t >= 0.0 && t <= tl.write * (1.0 + 1e-12), "g11 needs t inside the write window");
        if (sched.peaks().stokes_gain == 0.0) {
            return Estimate::undefined();
        }
        SpinMoments s = phi.moments(t);
        return Estimate::ratio(s.phi1(), (s.n + 1.0) * (s.n + 1.0));
    }
    detail::require(t >= tl.read_start() * (1.0 - 1e-12), "g22 needs t at or after the read onset");
    if (sched.peaks().retrieval == 0.0) {
        return Estimate::undefined();
    }
    SpinMoments s = phi.moments(t);
    if (s.n == 0.0) {
        return Estimate::undefined();
    }
    return Estimate::ratio(s.phi2(), s.n * s.n);
}

/// g12(t1, t2) = G12 / (n1 n2), with t1 <= T_W <= T2 <= t2.
inline Estimate g_cross(const PhiFunctions &phi, double t1, double t2) {
    const RateSchedule &sched = phi.schedule();
    if (sched.peaks().stokes_gain == 0.0 || sched.peaks().retrieval == 0.0) {
        return Estimate::undefined();
    }
    RegressedMoments m = phi.regress(t1, t2);
    double n2 = phi.moments(t2).n;
    return Estimate::ratio(m.m1, m.m0 * n2);
}

/// R = g12^2 / (g11 g22), infinite or undefined when its pieces are.
inline Estimate cauchy_schwarz_ratio(const Estimate &g11, const Estimate &g22, const Estimate &g12) {
    if (g11.validity == Validity::undefined || g22.validity == Validity::undefined ||
        g12.validity == Validity::undefined) {
        return Estimate::undefined();
    }
    if (!g11.finite() || !g22.finite()) {
        return g12.finite() ? Estimate::of(0.0) : Estimate::undefined();
    }
    if (!g12.finite()) {
        return Estimate::infinite();
    }
    return Estimate::ratio(g12.value * g12.value, g11.value * g22.value);
}

struct ConditionalG3 {
    Estimate weak;  // P(1_1) P(1_1,1_2,1_2) / P(1_1,1_2)^2 with P(1_1,1_2) ~ P(1_1) P(1_2)
    Estimate full;  // same with the exact two-photon probability
};

/// Third-order conditional correlation of the anti-Stokes pulse, heralded by
/// a Stokes photon at t1 and sampled at t2.
inline ConditionalG3 g3_conditional(const PhiFunctions &phi, double t1, double t2) {
    const RateSchedule &sched = phi.schedule();
    if (sched.peaks().stokes_gain == 0.0 || sched.peaks().retrieval == 0.0) {
        return {Estimate::undefined(), Estimate::undefined()};
    }
    RegressedMoments m = phi.regress(t1, t2);
    double kappa = std::exp(-(m.retrieval_integral + m.damping_integral));
    return {Estimate::ratio(m.m2, m.m0 * kappa * kappa), Estimate::ratio(m.m0 * m.m2, m.m1 * m.m1)};
}

/// Closed forms for the relaxation-free write stage with a thermal spin wave
/// of mean occupation p, and relaxation exponent `memory` = int Gamma_tot
/// between the end of the write pulse and the anti-Stokes sampling time.
namespace closed_form {

inline Estimate g11() {
    return Estimate::of(2.0);
}
inline Estimate g22(double memory) {
    return Estimate::of(2.0 * std::exp(memory));
}
inline Estimate g12(double p) {
    if (p == 0.0) {
        return Estimate::infinite();
    }
    return Estimate::of(2.0 + 1.0 / p);
}
inline Estimate cauchy_schwarz(double p, double memory) {
    if (p == 0.0) {
        return Estimate::infinite();
    }
    double q = (1.0 + 2.0 * p) / (2.0 * p);
    return Estimate::of(q * q * std::exp(-memory));
}
inline Estimate g3(double p, double memory) {
    return Estimate::of(4.0 * p * (1.5 * p + 1.0) * std::exp(memory));
}
inline Estimate g3_full(double p, double memory) {
    double q = 2.0 * p + 1.0;
    return Estimate::of(4.0 * p * (1.5 * p + 1.0) / (q * q) * std::exp(memory));
}

}  // namespace closed_form

/// Stokes excitation p at which the weak-excitation g3 = 4p(3p/2 + 1)e^{memory}
/// reaches `target`.
inline double stokes_probability_for_g3(double target, double memory = 0.0) {
    detail::require(std::isfinite(target) && target > 0.0, "target g3 must be > 0");
    detail::require(std::isfinite(memory), "memory exponent must be finite");
    auto f = [&](double p) { return closed_form::g3(p, memory).value - target; };
    double hi = 1.0;
    while (f(hi) < 0.0) {
        hi *= 2.0;
    }
    std::uintmax_t iterations = 200;
    auto [a, b] = boost::math::tools::toms748_solve(f, 0.0, hi, -target, f(hi),
                                                    boost::math::tools::eps_tolerance<double>(52), iterations);
    return 0.5 * (a + b);
}

/// Identifies the scenario a report was computed for, so reports from
/// different inputs are never compared.
inline std::string scenario_fingerprint(const RateSchedule &sched, double t1, double t2) {
    auto f = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    auto envelope = [&](const PulseEnvelope &e) {
        std::string s = std::to_string(static_cast<int>(e.shape())) + ":" + f(e.duration()) + ":" + f(e.rise());
        for (const auto &p : e.samples()) {
            s += ":" + f(p.time) + "/" + f(p.value);
        }
        return s;
    };
    const PeakRates &p = sched.peaks();
    const Timeline &tl = sched.timeline();
    return f(p.stokes_gain) + "|" + f(p.retrieval) + "|" + f(p.decoherence) + "|" + f(p.write_pumping) + "|" +
           f(p.read_pumping) + "|" + f(p.cavity_decay) + "|" + f(tl.write) + "|" + f(tl.delay) + "|" + f(tl.read) +
           "|" + envelope(sched.write_envelope()) + "|" + envelope(sched.read_envelope()) + "|" +
           to_string(sched.model()) + "|" + f(t1) + "|" + f(t2);
}

enum class Provenance { closed_form, phi_propagation, oracle };

inline const char *to_string(Provenance p) {
    switch (p) {
        case Provenance::closed_form:
            return "closed_form";
        case Provenance::phi_propagation:
            return "phi_propagation";
        case Provenance::oracle:
            return "oracle";
    }
    return "?";
}

/// Headline statistics of one write/read cycle. g22, g12, R and g3 are
/// sampled at t2; the *_end variants at the end of the read pulse.
struct CorrelationReport {
    Provenance provenance = Provenance::closed_form;
    std::string scenario;  // see scenario_fingerprint
    double t1 = 0.0;
    double t2 = 0.0;
    double t_end = 0.0;
    double p = 0.0;  // Stokes photons emitted by t1
    Estimate g11;
    Estimate g22;
    Estimate g12;
    Estimate R;
    Estimate g3;
    Estimate g3_full;
    Estimate g22_end;
    Estimate g12_end;
    Estimate R_end;
    std::vector<std::string> warnings;

    struct Row {
        std::string quantity;
        double t1;
        double t2;
        Estimate value;
    };

    std::vector<Row> rows() const {
        return {
            {"p", t1, t1, Estimate::of(p)},
            {"g11", t1, t1, g11},
            {"g22", t2, t2, g22},
            {"g12", t1, t2, g12},
            {"R", t1, t2, R},
            {"g3", t1, t2, g3},
            {"g3_full", t1, t2, g3_full},
            {"g22_end", t_end, t_end, g22_end},
            {"g12_end", t1, t_end, g12_end},
            {"R_end", t1, t_end, R_end},
        };
    }
};

/// Sampling times for a report; t2 defaults to the read onset.
struct ReportTimes {
    std::optional<double> t1;
    std::optional<double> t2;

    std::pair<double, double> resolve(const Timeline &tl) const {
        double a = t1.value_or(tl.write);
        double b = t2.value_or(tl.read_start());
        detail::require(a >= 0.0 && a <= tl.write && b >= tl.read_start() && b <= tl.end(),
                        "report times need 0 <= t1 <= T_W and T2 <= t2 <= T2 + T_R");
        return {a, b};
    }
};

namespace detail {

inline void add_weak_excitation_warning(CorrelationReport &r) {
    if (r.p > 0.1) {
        r.warnings.push_back("p = " + describe(r.p) + " is not << 1; the weak-excitation g3 is only indicative");
    }
}

inline void check_relaxation_free_write(const RateSchedule &sched, CorrelationReport &r) {
    if (!sched.write_stage_relaxation_free()) {
        r.warnings.push_back("relaxation acts during the write pulse; closed forms are approximate");
    }
}

}  // namespace detail

/// Closed-form report with p = n1_out(t1) taken from the trajectory.
inline CorrelationReport closed_form_report(const RateSchedule &sched, const Trajectory &traj,
                                            const ReportTimes &times = {}) {
    const Timeline &tl = sched.timeline();
    auto [t1, t2] = times.resolve(tl);
    CorrelationReport r;
    r.provenance = Provenance::closed_form;
    r.scenario = scenario_fingerprint(sched, t1, t2);
    r.t1 = t1;
    r.t2 = t2;
    r.t_end = tl.end();
    r.p = traj.at(t1, true).n1_out;
    bool driven = sched.peaks().stokes_gain > 0.0;
    bool read = sched.peaks().retrieval > 0.0;
    double memory = damping_integral(sched, tl.write, t2);
    double memory_end = damping_integral(sched, tl.write, tl.end());
    r.g11 = driven ? closed_form::g11() : Estimate::undefined();
    r.g22 = driven && read ? closed_form::g22(memory) : Estimate::undefined();
    r.g22_end = driven && read ? closed_form::g22(memory_end) : Estimate::undefined();
    r.g12 = driven && read ? closed_form::g12(r.p) : Estimate::undefined();
    r.g12_end = r.g12;
    r.R = driven && read ? closed_form::cauchy_schwarz(r.p, memory) : Estimate::undefined();
    r.R_end = driven && read ? closed_form::cauchy_schwarz(r.p, memory_end) : Estimate::undefined();
    r.g3 = driven && read ? closed_form::g3(r.p, memory) : Estimate::undefined();
    r.g3_full = driven && read ? closed_form::g3_full(r.p, memory) : Estimate::undefined();
    detail::check_relaxation_free_write(sched, r);
    detail::add_weak_excitation_warning(r);
    return r;
}

/// Report assembled from propagated moments; valid for any envelopes.
inline CorrelationReport phi_report(const PhiFunctions &phi, const Trajectory &traj, const ReportTimes &times = {}) {
    const RateSchedule &sched = phi.schedule();
    const Timeline &tl = sched.timeline();
    auto [t1, t2] = times.resolve(tl);
    CorrelationReport r;
    r.provenance = Provenance::phi_propagation;
    r.scenario = scenario_fingerprint(sched, t1, t2);
    r.t1 = t1;
    r.t2 = t2;
    r.t_end = tl.end();
    r.p = traj.at(t1, true).n1_out;
    r.g11 = g_auto(phi, t1, Mode::stokes);
    r.g22 = g_auto(phi, t2, Mode::anti_stokes);
    r.g22_end = g_auto(phi, tl.end(), Mode::anti_stokes);
    r.g12 = g_cross(phi, t1, t2);
    r.g12_end = g_cross(phi, t1, tl.end());
    r.R = cauchy_schwarz_ratio(r.g11, r.g22, r.g12);
    r.R_end = cauchy_schwarz_ratio(r.g11, r.g22_end, r.g12_end);
    ConditionalG3 g3 = g3_conditional(phi, t1, t2);
    r.g3 = g3.weak;
    r.g3_full = g3.full;
    detail::add_weak_excitation_warning(r);
    return r;
}

}  // namespace dlcz
