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
#include <string>
#include <vector>

#include "dlcz/errors.hpp"
#include "dlcz/integrate.hpp"
#include "dlcz/params.hpp"

namespace dlcz {

struct IntegratorConfig {
    double rate_step = 1e-3;  // h * fastest active rate, must be <= 1e-2
    int min_steps = 400;      // per kink-free segment
    int output_stride = 1;    // keep every n-th step (segment edges are always kept)
    /// Adds the +Gamma1(t) incoherent source to the spin-wave equation.
    bool incoherent_source = false;
    /// Integrate the intracavity photon numbers with their 2k decay instead of
    /// eliminating them adiabatically. Debug aid for checking the kt >> 1 limit.
    bool explicit_cavity = false;
    double cavity_rate_step = 0.05;  // h * 2k when explicit_cavity is on
    /// Step-halving refinement until N_sp and photon counts at the window edges settle.
    bool refine = false;
    double refine_tolerance = 1e-10;
    int max_refinements = 6;

    void validate() const {
        detail::require(rate_step > 0.0 && rate_step <= 1e-2, "integrator rate_step must be in (0, 1e-2]");
        detail::require(min_steps >= 1, "integrator min_steps must be >= 1");
        detail::require(output_stride >= 1, "integrator output_stride must be >= 1");
        detail::require(cavity_rate_step > 0.0 && cavity_rate_step <= 0.5,
                        "cavity_rate_step must be in (0, 0.5]");
        detail::require(refine_tolerance > 0.0 && max_refinements >= 0, "bad refinement settings");
    }

    StepPolicy policy() const {
        return {rate_step, min_steps, 1.0, 0.0};
    }
};

struct TrajectorySample {
    double t = 0.0;
    RateSchedule::Window window = RateSchedule::Window::write;
    double write_envelope = 0.0;  // f_W
    double read_envelope = 0.0;   // f_R
    double nsp = 0.0;             // spin-wave excitation number
    double s2 = 0.0;              // atoms in |2>
    double n1_in = 0.0;
    double n2_in = 0.0;
    double n1_out = 0.0;
    double n2_out = 0.0;
    double flux1 = 0.0;  // dn1_out/dt [1/s]
    double flux2 = 0.0;  // dn2_out/dt [1/s]
};

/// Sampled mean-field solution. Window edges appear twice: once as the limit
/// from inside the earlier window and once from the later one, so rate-driven
/// columns (envelopes, fluxes, n_in) carry both one-sided values.
struct Trajectory {
    Timeline timeline;
    double cavity_decay = 0.0;
    std::vector<TrajectorySample> samples;

    /// Sample at exactly time t. With duplicates at an edge, `left_limit`
    /// selects the one belonging to the earlier window.
    const TrajectorySample &at(double t, bool left_limit = false) const {
        auto lo = std::lower_bound(samples.begin(), samples.end(), t,
                                   [](const TrajectorySample &s, double v) { return s.t < v; });
        if (lo == samples.end() || !detail::nearly_equal(lo->t, t, 1e-13)) {
            throw InputError("no trajectory sample at t = " + detail::describe(t) + " s");
        }
        if (left_limit) {
            return *lo;
        }
        auto hi = lo;
        while (hi + 1 != samples.end() && (hi + 1)->t == lo->t) {
            ++hi;
        }
        return *hi;
    }

    /// Stokes photons emitted by the end of the write pulse.
    double stokes_count() const {
        return at(timeline.write, true).n1_out;
    }
};

namespace detail {

using MeanFieldState = Eigen::Matrix<double, 6, 1>;
enum MeanFieldIndex { kNsp = 0, kS2, kN1Out, kN2Out, kN1In, kN2In };

inline MeanFieldState meanfield_rhs(const RateSchedule::Rates &r, const MeanFieldState &y, double cavity_decay,
                                    double atom_number, const IntegratorConfig &cfg) {
    double nsp = y[kNsp];
    double stokes = r.gain * (nsp + 1.0);
    double anti_stokes = r.retrieval * nsp;
    MeanFieldState d;
    d[kNsp] = stokes - anti_stokes - r.total_damping() * nsp + (cfg.incoherent_source ? r.write_pumping : 0.0);
    d[kS2] = stokes - anti_stokes + r.write_pumping * atom_number - (r.decoherence + r.read_pumping) * y[kS2];
    if (cfg.explicit_cavity) {
        d[kN1In] = stokes - 2.0 * cavity_decay * y[kN1In];
        d[kN2In] = anti_stokes - 2.0 * cavity_decay * y[kN2In];
        d[kN1Out] = 2.0 * cavity_decay * y[kN1In];
        d[kN2Out] = 2.0 * cavity_decay * y[kN2In];
    } else {
        d[kN1In] = 0.0;
        d[kN2In] = 0.0;
        d[kN1Out] = stokes;
        d[kN2Out] = anti_stokes;
    }
    return d;
}

inline void check_meanfield(double t, const MeanFieldState &y) {
    static const char *names[] = {"N_sp", "S2", "n1_out", "n2_out", "n1_in", "n2_in"};
    for (int i = 0; i < 6; i++) {
        if (!std::isfinite(y[i])) {
            throw NumericalError(std::string("mean-field integration produced a non-finite ") + names[i] +
                                 " at t = " + describe(t) + " s");
        }
        if (y[i] < -1e-9 * (1.0 + y.cwiseAbs().maxCoeff())) {
            throw NumericalError(std::string("mean-field integration drove ") + names[i] + " negative (" +
                                 describe(y[i]) + ") at t = " + describe(t) +
                                 " s; reduce integrator rate_step");
        }
    }
}

inline TrajectorySample make_sample(const RateSchedule &sched, const IntegratorConfig &cfg, double t,
                                   RateSchedule::Window w, const MeanFieldState &y) {
    const double k = sched.peaks().cavity_decay;
    RateSchedule::Rates r = sched.in(w, t);
    TrajectorySample s;
    s.t = t;
    s.window = w;
    s.write_envelope = w == RateSchedule::Window::write ? sched.write_envelope().profile(t) : 0.0;
    s.read_envelope = w == RateSchedule::Window::read
                          ? sched.read_envelope().profile(t - sched.timeline().read_start())
                          : 0.0;
    s.nsp = y[kNsp];
    s.s2 = y[kS2];
    s.n1_out = y[kN1Out];
    s.n2_out = y[kN2Out];
    if (cfg.explicit_cavity) {
        s.n1_in = y[kN1In];
        s.n2_in = y[kN2In];
        s.flux1 = 2.0 * k * s.n1_in;
        s.flux2 = 2.0 * k * s.n2_in;
    } else {
        s.flux1 = r.gain * (s.nsp + 1.0);
        s.flux2 = r.retrieval * s.nsp;
        s.n1_in = s.flux1 / (2.0 * k);
        s.n2_in = s.flux2 / (2.0 * k);
    }
    return s;
}

inline Trajectory evolve_once(const RateSchedule &sched, const IntegratorConfig &cfg) {
    const double k = sched.peaks().cavity_decay;
    const double atoms = sched.peaks().atom_number;
    StepPolicy policy = cfg.policy();
    if (cfg.explicit_cavity) {
        policy.extra_rate = 2.0 * k * cfg.rate_step / cfg.cavity_rate_step;
    }
    auto rhs = [&](const RateSchedule::Rates &r, const MeanFieldState &y) {
        return meanfield_rhs(r, y, k, atoms, cfg);
    };

    Trajectory traj;
    traj.timeline = sched.timeline();
    traj.cavity_decay = k;
    int counter = 0;
    auto observe = [&](double t, RateSchedule::Window w, const MeanFieldState &y, StepEvent ev) {
        check_meanfield(t, y);
        if (ev == StepEvent::step && (++counter % cfg.output_stride) != 0) {
            return;
        }
        if (ev != StepEvent::step) {
            counter = 0;
        }
        TrajectorySample s = make_sample(sched, cfg, t, w, y);
        traj.samples.push_back(s);
    };
    propagate(sched, 0.0, sched.timeline().end(), MeanFieldState::Zero().eval(), policy, rhs, observe);
    return traj;
}

inline double max_edge_change(const Trajectory &a, const Trajectory &b) {
    const Timeline &tl = a.timeline;
    double worst = 0.0;
    for (double t : {tl.write, tl.read_start(), tl.end()}) {
        const auto &x = a.at(t, true);
        const auto &y = b.at(t, true);
        for (auto [u, v] : {std::pair{x.nsp, y.nsp}, std::pair{x.n1_out, y.n1_out}, std::pair{x.n2_out, y.n2_out}}) {
            worst = std::max(worst, std::abs(u - v) / std::max(1.0, std::abs(v)));
        }
    }
    return worst;
}

}  // namespace detail

/// Integrates the mean-field equations
///   dN_sp/dt = alpha(t)(N_sp + 1) - beta(t) N_sp - Gamma_tot(t) N_sp [+ Gamma1(t)]
///   d<S2>/dt = alpha(t)(N_sp + 1) - beta(t) N_sp + Gamma1(t) N - (gamma_c + Gamma2(t)) <S2>
///   dn1_out/dt = alpha(t)(N_sp + 1),  dn2_out/dt = beta(t) N_sp
/// with the cavity eliminated adiabatically (n_i_in = flux_i / 2k) unless
/// cfg.explicit_cavity is set.
inline Trajectory evolve_meanfield(const RateSchedule &sched, const IntegratorConfig &cfg = {}) {
    cfg.validate();
    Trajectory traj = detail::evolve_once(sched, cfg);
    if (!cfg.refine) {
        return traj;
    }
    IntegratorConfig finer = cfg;
    for (int r = 0; r < cfg.max_refinements; r++) {
        finer.rate_step *= 0.5;
        finer.min_steps *= 2;
        finer.output_stride *= 2;
        Trajectory next = detail::evolve_once(sched, finer);
        double change = detail::max_edge_change(next, traj);
        traj = std::move(next);
        if (change <= cfg.refine_tolerance) {
            return traj;
        }
    }
    throw NumericalError("step refinement did not converge to " + detail::describe(cfg.refine_tolerance));
}

/// Mean-field samples at arbitrary ascending times, integrating exactly up to
/// each one. Each sample belongs to the window containing its time.
inline std::vector<TrajectorySample> sample_meanfield(const RateSchedule &sched, const std::vector<double> &times,
                                                      const IntegratorConfig &cfg = {}) {
    cfg.validate();
    detail::require(!cfg.explicit_cavity, "sample_meanfield uses the adiabatic cavity");
    auto rhs = [&](const RateSchedule::Rates &r, const detail::MeanFieldState &y) {
        return detail::meanfield_rhs(r, y, sched.peaks().cavity_decay, sched.peaks().atom_number, cfg);
    };
    std::vector<TrajectorySample> out;
    detail::MeanFieldState y = detail::MeanFieldState::Zero();
    double t = 0.0;
    for (double next : times) {
        detail::require(next >= t, "sample times must be ascending and >= 0");
        y = propagate(sched, t, next, y, cfg.policy(), rhs);
        detail::check_meanfield(next, y);
        t = next;
        out.push_back(detail::make_sample(sched, cfg, t, sched.window_at(t), y));
    }
    return out;
}

/// n1_out(T_W) without building a full trajectory.
inline double stokes_count(const RateSchedule &sched, const IntegratorConfig &cfg = {}) {
    cfg.validate();
    IntegratorConfig plain = cfg;
    plain.explicit_cavity = false;
    auto rhs = [&](const RateSchedule::Rates &r, const detail::MeanFieldState &y) {
        return detail::meanfield_rhs(r, y, sched.peaks().cavity_decay, 0.0, plain);
    };
    auto y = propagate(sched, 0.0, sched.timeline().write, detail::MeanFieldState::Zero().eval(), plain.policy(), rhs);
    return y[detail::kN1Out];
}

/// Peak Stokes gain for which the write pulse emits `target` Stokes photons.
inline double solve_stokes_gain(const RateSchedule &sched, double target, const IntegratorConfig &cfg = {}) {
    detail::require(std::isfinite(target) && target > 0.0, "target Stokes photon number must be > 0");
    auto residual = [&](double alpha) { return stokes_count(sched.with_stokes_gain(alpha), cfg) - target; };
    // Spontaneous limit n1 ~ alpha * area gives the starting bracket.
    double area = 0.0;
    for (const auto &seg : sched.segments(0.0, sched.timeline().write)) {
        area += 0.5 * (seg.end - seg.begin) *
                (sched.write_envelope().profile(seg.begin) + sched.write_envelope().profile(seg.end));
    }
    double hi = target / area;
    int guard = 0;
    while (residual(hi) < 0.0) {
        hi *= 2.0;
        if (++guard > 200) {
            throw NumericalError("could not bracket the Stokes gain for n1 = " + detail::describe(target));
        }
    }
    std::uintmax_t iterations = 200;
    auto [a, b] = boost::math::tools::toms748_solve(residual, 0.0, hi, -target, residual(hi),
                                                    boost::math::tools::eps_tolerance<double>(50), iterations);
    return 0.5 * (a + b);
}

/// Direct quadrature of the spin-wave number:
///   N_sp(t) = int_0^t dt' alpha(t') exp{ int_{t'}^t [alpha - beta - Gamma_tot](tau) dtau }.
/// Independent of the RK4 path; nested Gauss-Kronrod on kink-free pieces.
inline double nsp_quadrature(const RateSchedule &sched, double t, double tolerance = 1e-12) {
    detail::require(t >= 0.0, "nsp_quadrature needs t >= 0");
    if (t == 0.0) {
        return 0.0;
    }
    using boost::math::quadrature::gauss_kronrod;
    auto segs = sched.segments(0.0, t);
    auto exponent_rate = [&](RateSchedule::Window w, double s) {
        auto r = sched.in(w, s);
        return r.gain - r.retrieval - r.total_damping();
    };
    // Envelopes are linear on each piece, so the exponent integrand is too and
    // a fixed Gauss rule integrates it exactly.
    auto exponent = [&](const RateSchedule::Segment &seg, double a, double b) {
        if (b <= a) {
            return 0.0;
        }
        return gauss_kronrod<double, 15>::integrate([&](double s) { return exponent_rate(seg.window, s); }, a, b,
                                                    0);
    };
    // tail[j] = exponent integral from the start of segment j to t.
    std::vector<double> tail(segs.size() + 1, 0.0);
    for (size_t j = segs.size(); j-- > 0;) {
        tail[j] = tail[j + 1] + exponent(segs[j], segs[j].begin, segs[j].end);
    }
    double total = 0.0;
    for (size_t j = 0; j < segs.size(); j++) {
        const auto &seg = segs[j];
        if (seg.window != RateSchedule::Window::write) {
            continue;
        }
        // Integrate on the unit interval; the error estimate misbehaves on
        // microsecond-wide absolute intervals.
        const double width = seg.end - seg.begin;
        auto integrand = [&](double u) {
            double s = seg.begin + u * width;
            double gain = sched.in(seg.window, s).gain;
            if (gain == 0.0) {
                return 0.0;
            }
            return width * gain * std::exp(tail[j + 1] + exponent(seg, s, seg.end));
        };
        double error = 0.0;
        double piece = gauss_kronrod<double, 61>::integrate(integrand, 0.0, 1.0, 15, tolerance, &error);
        if (!(error <= 1e3 * tolerance * std::max(1.0, std::abs(piece))) || !std::isfinite(piece)) {
            throw NumericalError("spin-wave quadrature did not converge on [" + detail::describe(seg.begin) + ", " +
                                 detail::describe(seg.end) + "] (error estimate " + detail::describe(error) + ")");
        }
        total += piece;
    }
    return total;
}

/// Exact mean-field solution for rectangular pulses.
struct RectangularSolution {
    double nsp = 0.0;
    double n1_in = 0.0;
    double n1_out = 0.0;
    double n2_in = 0.0;
    double n2_out = 0.0;
};

namespace detail {

/// (e^x - 1 - x) / x^2, accurate near 0.
inline double expm1_quadratic(double x) {
    if (std::abs(x) < 1e-3) {
        return 0.5 + x / 6.0 + x * x / 24.0 + x * x * x / 120.0;
    }
    return (std::expm1(x) - x) / (x * x);
}

/// (e^x - 1) / x, accurate near 0.
inline double expm1_linear(double x) {
    if (std::abs(x) < 1e-8) {
        return 1.0 + 0.5 * x;
    }
    return std::expm1(x) / x;
}

}  // namespace detail

/// Piecewise closed form for rectangular write and read pulses:
///   write:  N_sp = alpha t E1(a t),  n1_out = alpha t + alpha^2 t^2 E2(a t),  a = alpha - Gamma_W
///   delay:  N_sp decays at gamma_c
///   read:   N_sp = N_sp(T2) e^{-lambda s},  n2_out = beta N_sp(T2) (1 - e^{-lambda s}) / lambda,
///           lambda = beta + Gamma_R,  s = t - T2
/// where Gamma_W, Gamma_R are the spin-wave damping rates active in each window
/// and E1(x) = (e^x - 1)/x, E2(x) = (e^x - 1 - x)/x^2. With relaxation off these
/// reduce to n1_out = e^{alpha t} - 1 and n2_out = n1_out(T_W)(1 - e^{-beta(t - T2)}).
/// The incoherent-source option of the integrator is not represented.
inline RectangularSolution closed_forms_rectangular(const RateSchedule &sched, double t, RateSchedule::Window window) {
    using W = RateSchedule::Window;
    detail::require(sched.write_envelope().shape() == PulseEnvelope::Shape::rectangular &&
                        sched.read_envelope().shape() == PulseEnvelope::Shape::rectangular,
                    "closed forms need rectangular write and read envelopes");
    const Timeline &tl = sched.timeline();
    const double k = sched.peaks().cavity_decay;
    const double alpha = sched.peaks().stokes_gain;
    const double beta = sched.peaks().retrieval;
    const double write_damping = sched.in(W::write, 0.0).total_damping();
    const double delay_damping = sched.in(W::delay, tl.write).total_damping();
    const double read_damping = sched.in(W::read, tl.read_start()).total_damping();
    const double after_damping = sched.in(W::after, tl.end()).total_damping();
    const double net = alpha - write_damping;

    auto write_nsp = [&](double s) { return alpha * s * detail::expm1_linear(net * s); };
    auto write_n1 = [&](double s) { return alpha * s + alpha * alpha * s * s * detail::expm1_quadratic(net * s); };

    RectangularSolution out;
    if (window == W::write) {
        out.nsp = write_nsp(t);
        out.n1_out = write_n1(t);
        out.n1_in = alpha * (out.nsp + 1.0) / (2.0 * k);
        return out;
    }
    double stored = write_nsp(tl.write);
    out.n1_out = write_n1(tl.write);
    double at_read = stored * std::exp(-delay_damping * tl.delay);
    if (window == W::delay) {
        out.nsp = stored * std::exp(-delay_damping * (t - tl.write));
        return out;
    }
    double lambda = beta + read_damping;
    if (window == W::read) {
        double s = t - tl.read_start();
        out.nsp = at_read * std::exp(-lambda * s);
        out.n2_out = beta * at_read * s * detail::expm1_linear(-lambda * s);
        out.n2_in = beta * out.nsp / (2.0 * k);
        return out;
    }
    double at_end = at_read * std::exp(-lambda * tl.read);
    out.n2_out = beta * at_read * tl.read * detail::expm1_linear(-lambda * tl.read);
    out.nsp = at_end * std::exp(-after_damping * (t - tl.end()));
    return out;
}

inline RectangularSolution closed_forms_rectangular(const RateSchedule &sched, double t) {
    return closed_forms_rectangular(sched, t, sched.window_at(t));
}

struct CorrespondenceResidual {
    double absolute = 0.0;
    double relative = 0.0;  // absolute / max N_sp over the write window
};

/// max |n1_out(t) - N_sp(t)| over the write window. Zero (to integration
/// error) whenever nothing damps the spin wave during the write pulse.
inline CorrespondenceResidual stokes_spin_correspondence(const Trajectory &traj) {
    CorrespondenceResidual r;
    double scale = 0.0;
    for (const auto &s : traj.samples) {
        if (s.t > traj.timeline.write) {
            break;
        }
        r.absolute = std::max(r.absolute, std::abs(s.n1_out - s.nsp));
        scale = std::max(scale, s.nsp);
    }
    r.relative = scale > 0.0 ? r.absolute / scale : 0.0;
    return r;
}

enum class Mode { stokes = 1, anti_stokes = 2 };

/// Trapezoid-rule integral of the photon flux of `mode` over [from, to].
inline double flux_area(const Trajectory &traj, Mode mode, double from, double to) {
    double area = 0.0;
    const TrajectorySample *prev = nullptr;
    for (const auto &s : traj.samples) {
        if (s.t < from) {
            continue;
        }
        if (s.t > to) {
            break;
        }
        if (prev != nullptr) {
            double a = mode == Mode::stokes ? prev->flux1 : prev->flux2;
            double b = mode == Mode::stokes ? s.flux1 : s.flux2;
            area += 0.5 * (s.t - prev->t) * (a + b);
        }
        prev = &s;
    }
    return area;
}

}  // namespace dlcz
