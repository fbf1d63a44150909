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

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dlcz/cli/config.hpp"
#include "dlcz/cli/runner.hpp"
#include "dlcz/correlations.hpp"
#include "dlcz/dynamics.hpp"
#include "dlcz/fockoracle.hpp"

namespace {

using namespace dlcz;
using namespace dlcz::cli;
using units::per_us;
using units::us;

namespace limits {
constexpr double c1_correspondence = 1e-9;
constexpr double c1_value = 1e-6;
constexpr double c1_seconds = 1.0;
constexpr int c2_grid_points = 1000;
constexpr double c2_relative = 1e-6;
constexpr double c2_seconds = 1.0;
constexpr double c3_margin = 1e-6;
constexpr double c3_seconds = 1.0;
constexpr int c4_truncation = 40;
constexpr double c4_population = 1e-6;
constexpr double c4_g11 = 1e-4;
constexpr double c4_seconds = 30.0;
constexpr double c5_relative = 1e-3;
constexpr double c5_seconds = 60.0;
constexpr double c6_slope = 0.01;  // relative to -2
constexpr double c6_R = 1e-4;
constexpr double c6_seconds = 120.0;
constexpr double c7_slope = 1e-3;  // relative to -gamma_c
constexpr double c7_ratio = 1e-6;
constexpr double c7_seconds = 60.0;
constexpr double c8_g3 = 1e-3;
constexpr double c8_root = 0.0726;
constexpr double c8_root_tolerance = 5e-5;
constexpr double c8_seconds = 60.0;
constexpr double c9_area = 1e-6;
constexpr double c9_residual_spin = 1e-3;
constexpr int c9_min_curves = 3;
}  // namespace limits

const Timeline kTimeline{us(1.6), us(1.4), us(1.0)};

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

RateSchedule rectangular(double alpha, double beta, double gamma_c, RelaxationModel model,
                         double delay = kTimeline.delay) {
    PeakRates p;
    p.stokes_gain = alpha;
    p.retrieval = beta;
    p.decoherence = gamma_c;
    Timeline tl = kTimeline;
    tl.delay = delay;
    return RateSchedule(p, PulseEnvelope::rectangular(tl.write), PulseEnvelope::rectangular(tl.read), tl, model);
}

/// Gain giving n1_out(T_W) = n for a rectangular write with no damping.
double gain_for(double n) {
    return std::log1p(n) / kTimeline.write;
}

double relative(double a, double b) {
    if (b == 0.0) {
        return a == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return std::abs(a - b) / std::abs(b);
}

int hardware_workers() {
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

Outcome check_stokes_spin_correspondence() {
    Trajectory traj = evolve_meanfield(rectangular(gain_for(3.0), per_us(20.0), 0.0, RelaxationModel::physical));
    double n1 = traj.stokes_count();
    double nsp = traj.at(kTimeline.write, true).nsp;
    double gap = std::abs(n1 - nsp) / nsp;
    bool ok = gap <= limits::c1_correspondence && std::abs(n1 - 3.0) <= limits::c1_value &&
              std::abs(nsp - 3.0) <= limits::c1_value;
    return {ok, "n1_out=" + format_double(n1) + " N_sp=" + format_double(nsp) + " gap=" + fmt(gap)};
}

Outcome check_closed_form_vs_ode() {
    double worst = 0.0;
    std::string where;
    for (double a : {0.5, 1.0, 1.5, 2.0}) {
        RateSchedule s = rectangular(per_us(a), per_us(10.0), per_us(0.03), RelaxationModel::physical);
        std::vector<double> times;
        for (int k = 0; k < limits::c2_grid_points; k++) {
            times.push_back(s.timeline().end() * (k + 0.5) / limits::c2_grid_points);
        }
        IntegratorConfig cfg;
        cfg.min_steps = 8;
        for (const auto &x : sample_meanfield(s, times, cfg)) {
            RectangularSolution c = closed_forms_rectangular(s, x.t, x.window);
            for (auto [name, ode, exact] : {std::tuple{"nsp", x.nsp, c.nsp}, std::tuple{"n1_out", x.n1_out, c.n1_out},
                                            std::tuple{"n2_out", x.n2_out, c.n2_out},
                                            std::tuple{"n1_in", x.n1_in, c.n1_in},
                                            std::tuple{"n2_in", x.n2_in, c.n2_in}}) {
                double e = relative(ode, exact);
                if (e > worst) {
                    worst = e;
                    where = std::string(name) + " at alpha=" + fmt(a) + "/us t=" + fmt(units::to_us(x.t)) + "us";
                }
            }
        }
    }
    return {worst <= limits::c2_relative, "max relative error " + fmt(worst) + " (" + where + ")"};
}

Outcome check_complete_retrieval() {
    RateSchedule s = rectangular(gain_for(3.0), per_us(20.0), 0.0, RelaxationModel::physical);
    Trajectory traj = evolve_meanfield(s);
    double ratio = traj.at(s.timeline().end(), true).n2_out / traj.stokes_count();
    double bound = 1.0 - limits::c3_margin - std::exp(-20.0);
    return {ratio >= bound, "n2_out/n1_out=" + format_double(ratio) + " bound=" + format_double(bound)};
}

Outcome check_gaussian_statistics() {
    RateSchedule s = rectangular(gain_for(3.0), per_us(20.0), 0.0, RelaxationModel::storage);
    OracleConfig cfg;
    cfg.truncation = limits::c4_truncation;
    auto measure = [&](const DensityMatrix &rho) {
        const double n = 3.0;
        double worst = 0.0;
        for (int k = 0; k < rho.dim(); k++) {
            double expected = std::pow(n, k) / std::pow(1.0 + n, k + 1);
            worst = std::max(worst, std::abs(rho.population(k) - expected));
        }
        double g11 = moment(rho, "b b b+ b+").real() / std::pow(moment(rho, "b b+").real(), 2);
        return std::pair{worst, g11};
    };
    try {
        DensityMatrix rho = evolve_fock(s, DensityMatrix::vacuum(cfg.truncation), 0.0, kTimeline.write, cfg);
        auto [pop, g11] = measure(rho);
        bool ok = pop <= limits::c4_population && std::abs(g11 - 2.0) <= limits::c4_g11;
        return {ok, "D=" + std::to_string(cfg.truncation) + " population error " + fmt(pop) + " g11=" +
                        format_double(g11)};
    } catch (const TruncationError &e) {
        OracleConfig loose = cfg;
        loose.leakage_guard = 0.5;
        DensityMatrix rho = evolve_fock(s, DensityMatrix::vacuum(cfg.truncation), 0.0, kTimeline.write, loose);
        auto [pop, g11] = measure(rho);
        return {false, std::string(e.what()) + " | with the guard lifted: population error " + fmt(pop) +
                           " g11=" + format_double(g11)};
    }
}

Outcome check_cross_correlation() {
    bool ok = true;
    std::string detail;
    for (double n : {0.05, 0.5, 3.0}) {
        OracleReport o = oracle_report(rectangular(gain_for(n), per_us(20.0), 0.0, RelaxationModel::storage));
        double g12 = o.correlations.g12.value;
        double e = o.correlations.g12.finite() ? relative(g12, 2.0 + 1.0 / n) : INFINITY;
        ok = ok && e <= limits::c5_relative;
        detail += "N=" + fmt(n) + ": g12=" + format_double(g12) + " err=" + fmt(e) + "; ";
    }
    return {ok, detail};
}

const char *kPSweep = R"(rates: {beta: 20, gamma_c: 0}
timeline: {T_W: 1.6, tau_d: 1.4, T_R: 1.0}
model: storage
sweep: {axis: p, from: 1.0e-3, to: 1.0e-1, points: 15, spacing: log}
)";

Outcome check_cauchy_schwarz_law() {
    RunConfig cfg = parse_config(kPSweep, "p-sweep");
    auto rows = evaluate_sweep(cfg, *cfg.sweep, hardware_workers());
    std::vector<double> x;
    std::vector<double> y;
    for (const auto &r : rows) {
        if (!r.summary || !r.summary->phi.R.finite()) {
            return {false, "sweep point p=" + fmt(r.value) + " failed: " + r.error};
        }
        x.push_back(std::log(r.value));
        y.push_back(std::log(r.summary->phi.R.value));
    }
    double slope = fit_line(x, y).first;
    bool slope_ok = std::abs(slope + 2.0) <= limits::c6_slope * 2.0;

    OracleReport o = oracle_report(rectangular(gain_for(0.05), per_us(20.0), 0.0, RelaxationModel::storage));
    double R = o.correlations.R.value;
    bool r_ok = o.correlations.R.finite() && relative(R, 121.0) <= limits::c6_R;
    return {slope_ok && r_ok, "log-log slope " + format_double(slope) + (slope_ok ? " ok" : " outside -2 +/- 1%") +
                                  "; oracle R(p=0.05)=" + format_double(R) + (r_ok ? " ok" : " off")};
}

Outcome check_memory_decay() {
    bool ok = true;
    std::string detail;
    const std::vector<double> delays = {0.0, 0.5, 1.0, 1.5, 2.0, 3.0};
    for (double gamma_c : {0.03, 0.3}) {
        std::ostringstream text;
        text << "stokes_target: 0.05\nrates: {beta: 20, gamma_c: " << gamma_c
             << "}\ntimeline: {T_W: 1.6, tau_d: 1.4, T_R: 1.0}\nmodel: storage\n"
                "sweep: {axis: tau_d, values: [0, 0.5, 1.0, 1.5, 2.0, 3.0]}\n";
        RunConfig cfg = parse_config(text.str(), "tau-sweep");
        auto rows = evaluate_sweep(cfg, *cfg.sweep, hardware_workers());
        std::vector<double> y;
        for (const auto &r : rows) {
            if (!r.summary || !r.summary->phi.R.finite()) {
                return {false, "sweep point tau_d=" + fmt(r.value) + " failed: " + r.error};
            }
            y.push_back(std::log(r.summary->phi.R.value));
        }
        double slope = fit_line(delays, y).first;
        double e = relative(slope, -gamma_c);
        ok = ok && e <= limits::c7_slope;
        detail += "gamma_c=" + fmt(gamma_c) + ": slope " + format_double(slope) + " err=" + fmt(e) + "; ";
    }
    double worst = 0.0;
    for (const auto &c : evaluate_figure(figure_spec("fig3b"), {})) {
        const auto &s = c.result.summary;
        worst = std::max(worst, relative(s.nsp_T2 / s.nsp_TW, std::exp(-0.3 * 1.4)));
    }
    ok = ok && worst <= limits::c7_ratio;
    detail += "fig3b between-pulse ratio err=" + fmt(worst);
    return {ok, detail};
}

Outcome check_conditional_single_photon() {
    const double gamma_c = 0.03;
    RateSchedule s = rectangular(gain_for(0.05), per_us(20.0), per_us(gamma_c), RelaxationModel::storage);
    OracleReport o = oracle_report(s);
    double expected = closed_form::g3(0.05, gamma_c * 1.4).value;
    double g3 = o.correlations.g3.value;
    double e = o.correlations.g3.finite() ? relative(g3, expected) : INFINITY;
    bool g3_ok = e <= limits::c8_g3;
    double root = stokes_probability_for_g3(0.3);
    bool root_ok = std::abs(root - limits::c8_root) <= limits::c8_root_tolerance;
    return {g3_ok && root_ok, "oracle g3=" + format_double(g3) + " closed form=" + format_double(expected) +
                                  " err=" + fmt(e) + "; root p(g3=0.3)=" + format_double(root) + " vs " +
                                  fmt(limits::c8_root) + (root_ok ? " ok" : " off")};
}

Outcome check_figure_shapes() {
    auto area_ok = [](const FigureCurveResult &c) {
        const auto &s = c.result.summary;
        return relative(c.stokes_area, s.n1_out_TW) <= limits::c9_area &&
               relative(c.anti_stokes_area, s.n2_out_end) <= limits::c9_area;
    };
    int fig2a = 0;
    for (const auto &c : evaluate_figure(figure_spec("fig2a"), {})) {
        fig2a += area_ok(c) ? 1 : 0;
    }
    int fig2b = 0;
    for (const auto &c : evaluate_figure(figure_spec("fig2b"), {})) {
        fig2b += area_ok(c) && std::abs(c.result.summary.n1_out_TW - 3.0) <= 1e-6 ? 1 : 0;
    }
    int retrieved = 0;
    int fast = 0;
    double worst = 0.0;
    for (const auto &c : evaluate_figure(figure_spec("fig3a"), {})) {
        const auto &s = c.result.summary;
        if (s.beta >= 100.0 * s.alpha * (1.0 - 1e-12)) {
            fast++;
            worst = std::max(worst, s.nsp_end);
            retrieved += s.nsp_end <= limits::c9_residual_spin ? 1 : 0;
        }
    }
    bool ok = fig2a >= limits::c9_min_curves && fig2b >= limits::c9_min_curves && fast > 0 && retrieved == fast;
    return {ok, "fig2a area law " + std::to_string(fig2a) + " curves, fig2b " + std::to_string(fig2b) +
                    " curves, fig3a N_sp(end) max " + fmt(worst) + " over " + std::to_string(fast) +
                    " curves with beta/alpha >= 100"};
}

struct Criterion {
    int id;
    const char *name;
    double seconds;  // 0: no runtime bound
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Acceptance checks"};
    int only = 0;
    app.add_option("--criterion", only, "run a single criterion (1-9)")->check(CLI::Range(1, 9));
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> criteria = {
        {1, "Stokes-spin correspondence", limits::c1_seconds, check_stokes_spin_correspondence},
        {2, "closed form vs ODE", limits::c2_seconds, check_closed_form_vs_ode},
        {3, "complete retrieval", limits::c3_seconds, check_complete_retrieval},
        {4, "Gaussian write-stage statistics", limits::c4_seconds, check_gaussian_statistics},
        {5, "cross-correlation", limits::c5_seconds, check_cross_correlation},
        {6, "Cauchy-Schwarz law", limits::c6_seconds, check_cauchy_schwarz_law},
        {7, "memory decay", limits::c7_seconds, check_memory_decay},
        {8, "conditional single photon", limits::c8_seconds, check_conditional_single_photon},
        {9, "figure shapes", 0.0, check_figure_shapes},
    };

    bool all = true;
    for (const auto &c : criteria) {
        if (only != 0 && c.id != only) {
            continue;
        }
        auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception &e) {
            out = {false, std::string("error: ") + e.what()};
        }
        double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        bool in_time = c.seconds == 0.0 || elapsed < c.seconds;
        bool pass = out.pass && in_time;
        all = all && pass;
        std::cout << "C" << c.id << " " << (pass ? "PASS" : "FAIL") << "  " << c.name << ": " << out.detail << " ["
                  << fmt(elapsed) << " s" << (c.seconds > 0.0 ? ", limit " + fmt(c.seconds) + " s" : "")
                  << (in_time ? "" : ", too slow") << "]" << std::endl;
    }
    return all ? 0 : 1;
}
