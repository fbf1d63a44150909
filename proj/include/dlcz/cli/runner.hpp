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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dlcz/cli/config.hpp"
#include "dlcz/cli/csv.hpp"
#include "dlcz/correlations.hpp"
#include "dlcz/dynamics.hpp"
#include "dlcz/fockoracle.hpp"
#include "dlcz/params.hpp"
#include "dlcz/units.hpp"

namespace dlcz::cli {

struct ScenarioSummary {
    double alpha = 0.0;  // SI
    double beta = 0.0;
    double gamma_c = 0.0;
    double tau_d = 0.0;
    double n1_out_TW = 0.0;
    double n2_out_end = 0.0;
    double nsp_TW = 0.0;
    double nsp_T2 = 0.0;
    double nsp_end = 0.0;
    CorrelationReport closed_form;
    CorrelationReport phi;
    std::vector<std::string> warnings;
};

struct ScenarioResult {
    RateSchedule schedule;
    Trajectory trajectory;
    ScenarioSummary summary;
};

/// params -> dynamics -> correlations for one schedule, without any I/O.
inline ScenarioResult evaluate_scenario(const RateSchedule &sched, const IntegratorConfig &integrator,
                                        const ReportTimes &times = {}) {
    Trajectory traj = evolve_meanfield(sched, integrator);
    PhiFunctions phi(sched);
    const Timeline &tl = sched.timeline();
    ScenarioSummary s;
    s.alpha = sched.peaks().stokes_gain;
    s.beta = sched.peaks().retrieval;
    s.gamma_c = sched.peaks().decoherence;
    s.tau_d = tl.delay;
    s.n1_out_TW = traj.at(tl.write, true).n1_out;
    s.n2_out_end = traj.at(tl.end(), true).n2_out;
    s.nsp_TW = traj.at(tl.write, true).nsp;
    s.nsp_T2 = traj.at(tl.read_start()).nsp;
    s.nsp_end = traj.at(tl.end(), true).nsp;
    s.closed_form = closed_form_report(sched, traj, times);
    s.phi = phi_report(phi, traj, times);
    s.warnings = sched.warnings();
    for (const auto &w : s.closed_form.warnings) {
        s.warnings.push_back("closed form: " + w);
    }
    for (const auto &w : s.phi.warnings) {
        s.warnings.push_back("moments: " + w);
    }
    return {sched, std::move(traj), std::move(s)};
}

inline std::string summary_text(const ScenarioSummary &s) {
    std::ostringstream out;
    auto line = [&](const std::string &name, const std::string &value) { out << name << " = " << value << "\n"; };
    line("alpha_per_us", format_double(units::to_per_us(s.alpha)));
    line("beta_per_us", format_double(units::to_per_us(s.beta)));
    line("gamma_c_per_us", format_double(units::to_per_us(s.gamma_c)));
    line("tau_d_us", format_double(units::to_us(s.tau_d)));
    line("n1_out(T_W)", format_double(s.n1_out_TW));
    line("n2_out(end)", format_double(s.n2_out_end));
    line("N_sp(T_W)", format_double(s.nsp_TW));
    line("N_sp(T2)", format_double(s.nsp_T2));
    line("N_sp(end)", format_double(s.nsp_end));
    for (const auto *r : {&s.closed_form, &s.phi}) {
        out << "[" << to_string(r->provenance) << "]\n";
        for (const auto &row : r->rows()) {
            line(row.quantity, format_estimate(row.value));
        }
    }
    for (const auto &w : s.warnings) {
        out << "warning: " << w << "\n";
    }
    return out.str();
}

inline std::filesystem::path prepare_output(const std::string &dir) {
    std::filesystem::path p(dir);
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec) {
        throw InputError("cannot create output directory " + dir + ": " + ec.message());
    }
    return p;
}

inline Table correlation_table(const ScenarioSummary &s) {
    Table t;
    append_correlations(t, s.closed_form);
    append_correlations(t, s.phi);
    return t;
}

/// Runs the configured scenario and writes trajectory, correlation and summary files.
inline ScenarioResult run_scenario(const RunConfig &cfg, const std::string &out_dir) {
    auto out = prepare_output(out_dir);
    ScenarioResult r = evaluate_scenario(cfg.schedule(), cfg.integrator, cfg.times);
    trajectory_table(r.trajectory).write((out / cfg.output.trajectory).string());
    correlation_table(r.summary).write((out / cfg.output.correlations).string());
    std::ofstream(out / cfg.output.summary, std::ios::binary) << summary_text(r.summary);
    return r;
}

/// Schedule for one sweep point. Sweeping p solves alpha for n1_out(T_W) = p;
/// an alpha sweep overrides any configured Stokes target.
inline RateSchedule sweep_schedule(const RunConfig &cfg, SweepAxis axis, double value) {
    RateSchedule s = cfg.base_schedule();
    std::optional<double> target = cfg.stokes_target;
    switch (axis) {
        case SweepAxis::alpha:
            s = s.with_stokes_gain(units::per_us(value));
            target.reset();
            break;
        case SweepAxis::beta:
            s = s.with_retrieval(units::per_us(value));
            break;
        case SweepAxis::gamma_c:
            s = s.with_decoherence(units::per_us(value));
            break;
        case SweepAxis::tau_d: {
            Timeline tl = s.timeline();
            tl.delay = units::us(value);
            s = RateSchedule(s.peaks(), s.write_envelope(), s.read_envelope(), tl, s.model());
            break;
        }
        case SweepAxis::p:
            target = value;
            break;
    }
    if (target) {
        s = s.with_stokes_gain(solve_stokes_gain(s, *target, cfg.integrator));
    }
    return s;
}

struct SweepRow {
    double value = 0.0;
    std::optional<ScenarioSummary> summary;
    std::string error;
};

inline const std::vector<std::string> &sweep_columns() {
    static const std::vector<std::string> cols = {
        "index",   "axis",    "value",   "alpha_per_us", "beta_per_us", "gamma_c_per_us", "tau_d_us", "p",
        "n1_out_TW", "n2_out_end", "nsp_TW", "nsp_T2",   "nsp_end",     "g11",            "g22",      "g22_end",
        "g12",     "R",       "R_end",   "g3",           "g3_full",     "R_closed_form",  "g3_closed_form", "error"};
    return cols;
}

/// Evaluates every grid point on `workers` threads. Rows come back in grid
/// order regardless of scheduling; a failing point records its error and the
/// sweep continues.
inline std::vector<SweepRow> evaluate_sweep(const RunConfig &cfg, const SweepSpec &sweep, int workers) {
    dlcz::detail::require(workers >= 1, "--workers must be >= 1");
    std::vector<SweepRow> rows(sweep.values.size());
    std::atomic<size_t> next{0};
    auto work = [&]() {
        for (size_t i = next++; i < rows.size(); i = next++) {
            rows[i].value = sweep.values[i];
            try {
                RateSchedule s = sweep_schedule(cfg, sweep.axis, sweep.values[i]);
                rows[i].summary = evaluate_scenario(s, cfg.integrator, cfg.times).summary;
            } catch (const std::exception &e) {
                rows[i].error = e.what();
            }
        }
    };
    int n = std::min<int>(workers, static_cast<int>(std::max<size_t>(rows.size(), 1)));
    std::vector<std::thread> pool;
    for (int k = 1; k < n; k++) {
        pool.emplace_back(work);
    }
    work();
    for (auto &t : pool) {
        t.join();
    }
    return rows;
}

inline Table sweep_table(const SweepSpec &sweep, const std::vector<SweepRow> &rows) {
    Table t;
    t.header = sweep_columns();
    for (size_t i = 0; i < rows.size(); i++) {
        const auto &r = rows[i];
        std::vector<std::string> cells = {std::to_string(i), to_string(sweep.axis), format_double(r.value)};
        if (r.summary) {
            const auto &s = *r.summary;
            const auto &c = s.phi;
            for (double v : {units::to_per_us(s.alpha), units::to_per_us(s.beta), units::to_per_us(s.gamma_c),
                             units::to_us(s.tau_d), c.p, s.n1_out_TW, s.n2_out_end, s.nsp_TW, s.nsp_T2, s.nsp_end}) {
                cells.push_back(format_double(v));
            }
            for (const Estimate *e : {&c.g11, &c.g22, &c.g22_end, &c.g12, &c.R, &c.R_end, &c.g3, &c.g3_full,
                                      &s.closed_form.R, &s.closed_form.g3}) {
                cells.push_back(format_estimate(*e));
            }
            cells.push_back("");
        } else {
            while (cells.size() + 1 < t.header.size()) {
                cells.push_back("nan");
            }
            std::string msg = r.error;
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            cells.push_back(msg);
        }
        t.rows.push_back(std::move(cells));
    }
    return t;
}

inline std::vector<SweepRow> run_sweep(const RunConfig &cfg, const std::string &out_dir, int workers) {
    if (!cfg.sweep) {
        throw ConfigError(cfg.source + ": the sweep command needs a 'sweep' section");
    }
    auto out = prepare_output(out_dir);
    auto rows = evaluate_sweep(cfg, *cfg.sweep, workers);
    sweep_table(*cfg.sweep, rows).write((out / cfg.output.sweep).string());
    return rows;
}

/// Least-squares slope and intercept of y against x.
inline std::pair<double, double> fit_line(const std::vector<double> &x, const std::vector<double> &y) {
    dlcz::detail::require(x.size() == y.size() && x.size() >= 2, "line fit needs at least two points");
    double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (size_t i = 0; i < x.size(); i++) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxx = 0.0;
    double sxy = 0.0;
    for (size_t i = 0; i < x.size(); i++) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    dlcz::detail::require(sxx > 0.0, "line fit needs distinct x values");
    double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

struct OracleCheckResult {
    OracleReport oracle;
    std::vector<std::pair<Provenance, DiffTable>> diffs;
    std::vector<std::string> notes;

    bool pass() const {
        return std::all_of(diffs.begin(), diffs.end(), [](const auto &d) { return d.second.pass(); });
    }
    double max_error() const {
        double worst = 0.0;
        for (const auto &d : diffs) {
            worst = std::max(worst, d.second.max_error());
        }
        return worst;
    }
};

/// Oracle vs moment propagation (always) and vs closed forms (when nothing
/// damps the write stage, the regime in which they are exact). Optical
/// pumping is switched off first since the oracle does not model it.
inline OracleCheckResult evaluate_oracle_check(const RateSchedule &configured, const IntegratorConfig &integrator,
                                               const ReportTimes &times, const OracleConfig &oracle,
                                               double tolerance) {
    OracleCheckResult res;
    RateSchedule sched = configured;
    if (configured.peaks().write_pumping > 0.0 || configured.peaks().read_pumping > 0.0) {
        sched = configured.without_optical_pumping();
        res.notes.push_back("optical pumping switched off for the oracle comparison");
    }
    ScenarioResult analytic = evaluate_scenario(sched, integrator, times);
    res.oracle = oracle_report(sched, times, oracle);
    res.diffs.push_back({Provenance::phi_propagation,
                         compare_report(analytic.summary.phi, analytic.trajectory, res.oracle, tolerance)});
    if (sched.write_stage_relaxation_free()) {
        res.diffs.push_back({Provenance::closed_form,
                             compare_report(analytic.summary.closed_form, analytic.trajectory, res.oracle, tolerance)});
    } else {
        res.notes.push_back("relaxation acts during the write pulse; closed forms not compared");
    }
    return res;
}

inline OracleCheckResult run_oracle_check(const RunConfig &cfg, const std::string &out_dir, double tolerance) {
    auto out = prepare_output(out_dir);
    OracleCheckResult res = evaluate_oracle_check(cfg.schedule(), cfg.integrator, cfg.times, cfg.oracle, tolerance);
    diff_table(res.diffs).write((out / cfg.output.oracle_diff).string());
    Table corr;
    append_correlations(corr, res.oracle.correlations);
    corr.write((out / cfg.output.correlations).string());
    return res;
}

/// Preset reproductions of the pulse-shape and spin-wave figures.
struct FigureCurve {
    std::string label;
    RateSchedule schedule;
};

struct FigureSpec {
    std::string id;
    std::vector<FigureCurve> curves;
};

inline const std::vector<std::string> &figure_ids() {
    static const std::vector<std::string> ids = {"fig2a", "fig2b", "fig3a", "fig3b"};
    return ids;
}

/// T_W = 1.6 us, tau_d = 1.4 us, T_R = 1 us, near-rectangular pulses with
/// 50 ns edges, decoherence from the end of the write pulse. fig2a varies
/// alpha; the others pin n1_out(T_W) = 3 and vary beta = alpha (Omega_R /
/// Omega_W)^2 over ratios 1, 2, 5, 10; fig3b uses ten times the decoherence.
inline FigureSpec figure_spec(const std::string &id, const IntegratorConfig &integrator = {}) {
    const Timeline tl{units::us(1.6), units::us(1.4), units::us(1.0)};
    const double rise = units::us(0.05);
    auto schedule = [&](double alpha, double beta, double gamma_c) {
        PeakRates p;
        p.stokes_gain = alpha;
        p.retrieval = beta;
        p.decoherence = gamma_c;
        return RateSchedule(p, PulseEnvelope::trapezoid(tl.write, rise), PulseEnvelope::trapezoid(tl.read, rise), tl,
                            RelaxationModel::storage);
    };
    FigureSpec spec{id, {}};
    if (id == "fig2a") {
        for (double a : {0.5, 1.0, 1.5, 2.0}) {
            spec.curves.push_back({"alpha=" + format_double(a) + "/us",
                                   schedule(units::per_us(a), units::per_us(10.0), units::per_us(0.03))});
        }
        return spec;
    }
    double gamma_c = 0.03;
    if (id == "fig3b") {
        gamma_c = 0.3;
    } else if (id != "fig2b" && id != "fig3a") {
        throw InputError("unknown figure '" + id + "' (fig2a, fig2b, fig3a, fig3b)");
    }
    RateSchedule base = schedule(0.0, 0.0, units::per_us(gamma_c));
    double alpha = solve_stokes_gain(base, 3.0, integrator);
    for (double ratio : {1.0, 2.0, 5.0, 10.0}) {
        spec.curves.push_back({"Omega_R/Omega_W=" + format_double(ratio),
                               schedule(alpha, alpha * ratio * ratio, units::per_us(gamma_c))});
    }
    return spec;
}

struct FigureCurveResult {
    std::string label;
    std::string file;
    ScenarioResult result;
    double stokes_area = 0.0;       // integral of flux1 over the write window
    double anti_stokes_area = 0.0;  // integral of flux2 over the read window
};

inline std::vector<FigureCurveResult> evaluate_figure(const FigureSpec &spec, const IntegratorConfig &integrator) {
    std::vector<FigureCurveResult> out;
    for (size_t k = 0; k < spec.curves.size(); k++) {
        const auto &c = spec.curves[k];
        ScenarioResult r = evaluate_scenario(c.schedule, integrator);
        const Timeline &tl = c.schedule.timeline();
        FigureCurveResult f{c.label, spec.id + "_curve" + std::to_string(k) + ".csv", std::move(r), 0.0, 0.0};
        f.stokes_area = flux_area(f.result.trajectory, Mode::stokes, 0.0, tl.write);
        f.anti_stokes_area = flux_area(f.result.trajectory, Mode::anti_stokes, tl.read_start(), tl.end());
        out.push_back(std::move(f));
    }
    return out;
}

inline Table figure_index(const std::vector<FigureCurveResult> &curves) {
    Table t;
    t.header = {"curve",   "label",       "file",       "alpha_per_us", "beta_per_us",      "gamma_c_per_us",
                "n1_out_TW", "n2_out_end", "nsp_TW",    "nsp_T2",       "nsp_end",          "stokes_flux_area",
                "anti_stokes_flux_area"};
    for (size_t k = 0; k < curves.size(); k++) {
        const auto &c = curves[k];
        const auto &s = c.result.summary;
        t.rows.push_back({std::to_string(k), c.label, c.file, format_double(units::to_per_us(s.alpha)),
                          format_double(units::to_per_us(s.beta)), format_double(units::to_per_us(s.gamma_c)),
                          format_double(s.n1_out_TW), format_double(s.n2_out_end), format_double(s.nsp_TW),
                          format_double(s.nsp_T2), format_double(s.nsp_end), format_double(c.stokes_area),
                          format_double(c.anti_stokes_area)});
    }
    return t;
}

inline std::vector<FigureCurveResult> run_figure(const std::string &id, const std::string &out_dir,
                                                 const IntegratorConfig &integrator = {}) {
    auto out = prepare_output(out_dir);
    auto curves = evaluate_figure(figure_spec(id, integrator), integrator);
    for (const auto &c : curves) {
        trajectory_table(c.result.trajectory).write((out / c.file).string());
    }
    figure_index(curves).write((out / (id + "_index.csv")).string());
    return curves;
}

}  // namespace dlcz::cli
