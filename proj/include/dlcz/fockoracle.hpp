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

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "dlcz/correlations.hpp"
#include "dlcz/dynamics.hpp"
#include "dlcz/errors.hpp"
#include "dlcz/integrate.hpp"
#include "dlcz/params.hpp"

namespace dlcz {

using CMatrix = Eigen::MatrixXcd;

struct OracleConfig {
    int truncation = 80;       // Fock levels 0..D-1
    double rate_step = 5e-3;   // h * fastest rate
    double stiffness = 0.75;   // h * D * fastest rate; keeps RK4 stable on the top levels
    int min_steps = 100;       // per kink-free segment
    double leakage_guard = 1e-8;
    double hermiticity_tolerance = 1e-12;
    double trace_tolerance = 1e-10;
    double positivity_tolerance = 1e-8;
    /// Use the literal matrix-product generator instead of the structured O(D^2) one.
    bool dense_generator = false;

    void validate() const {
        detail::require(truncation >= 3 && truncation <= 128, "oracle truncation must be in [3, 128] (got " +
                                                                  std::to_string(truncation) + ")");
        detail::require(rate_step > 0.0 && rate_step <= 1e-2, "oracle rate_step must be in (0, 1e-2]");
        detail::require(stiffness > 0.0 && stiffness <= 1.5, "oracle stiffness must be in (0, 1.5]");
        detail::require(min_steps >= 1, "oracle min_steps must be >= 1");
        detail::require(leakage_guard > 0.0 && leakage_guard < 1.0, "oracle leakage guard must be in (0, 1)");
    }

    StepPolicy policy() const {
        double h = std::min(rate_step, stiffness / truncation);
        return {rate_step, min_steps, rate_step / h, 0.0};
    }
};

/// Matrix representations of b and b+ on span{|0>, ..., |D-1>}. The
/// commutator [b, b+] is the identity except for -(D-1) in the last corner.
struct LadderOperators {
    CMatrix b;
    CMatrix bdag;

    explicit LadderOperators(int dim) : b(CMatrix::Zero(dim, dim)) {
        for (int k = 0; k + 1 < dim; k++) {
            b(k, k + 1) = std::sqrt(static_cast<double>(k + 1));
        }
        bdag = b.adjoint();
    }

    int dim() const {
        return static_cast<int>(b.rows());
    }
};

/// State (or unnormalized conditioned operator) of the spin-wave mode.
class DensityMatrix {
   public:
    explicit DensityMatrix(CMatrix m) : m_(std::move(m)) {
        detail::require(m_.rows() == m_.cols() && m_.rows() >= 1, "density matrix must be square");
    }

    static DensityMatrix vacuum(int dim) {
        CMatrix m = CMatrix::Zero(dim, dim);
        m(0, 0) = 1.0;
        return DensityMatrix(std::move(m));
    }

    static DensityMatrix fock(int dim, int level) {
        detail::require(level >= 0 && level < dim, "Fock level outside the truncated space");
        CMatrix m = CMatrix::Zero(dim, dim);
        m(level, level) = 1.0;
        return DensityMatrix(std::move(m));
    }

    /// Thermal state n^k/(1+n)^{k+1}, with the tail beyond D-1 dropped and the
    /// rest renormalized.
    static DensityMatrix thermal(int dim, double n) {
        detail::require(n >= 0.0, "thermal occupation must be >= 0");
        CMatrix m = CMatrix::Zero(dim, dim);
        double q = n / (1.0 + n);
        double total = 0.0;
        for (int k = 0; k < dim; k++) {
            double p = std::pow(q, k) / (1.0 + n);
            m(k, k) = p;
            total += p;
        }
        m /= total;
        return DensityMatrix(std::move(m));
    }

    const CMatrix &matrix() const {
        return m_;
    }
    int dim() const {
        return static_cast<int>(m_.rows());
    }
    std::complex<double> trace() const {
        return m_.trace();
    }
    /// Population of the highest retained level relative to the trace.
    double top_population() const {
        return m_(dim() - 1, dim() - 1).real() / m_.trace().real();
    }
    double population(int k) const {
        return m_(k, k).real() / m_.trace().real();
    }

    /// Hermiticity, trace (`expected_trace`), positivity and leakage checks.
    /// Positivity and leakage are judged on the trace-normalized matrix.
    void validate(const OracleConfig &cfg, double expected_trace = 1.0, const std::string &where = "") const {
        std::string at = where.empty() ? "" : " at " + where;
        if (!m_.allFinite()) {
            throw NumericalError("density matrix has non-finite entries" + at);
        }
        double scale = std::max(1.0, std::abs(expected_trace));
        double herm = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
        if (herm > cfg.hermiticity_tolerance * scale) {
            throw NumericalError("density matrix is not Hermitian (" + detail::describe(herm) + ")" + at);
        }
        double tr_err = std::abs(m_.trace() - std::complex<double>(expected_trace, 0.0));
        if (tr_err > cfg.trace_tolerance * scale) {
            throw NumericalError("density matrix trace drifted by " + detail::describe(tr_err) + at);
        }
        check_leakage(cfg, at);
        Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (m_ + m_.adjoint()), Eigen::EigenvaluesOnly);
        double lowest = eig.eigenvalues().minCoeff() / m_.trace().real();
        if (lowest < -cfg.positivity_tolerance) {
            throw NumericalError("density matrix has eigenvalue " + detail::describe(lowest) + at +
                                 "; reduce oracle rate_step");
        }
    }

    void check_leakage(const OracleConfig &cfg, const std::string &at = "") const {
        double top = top_population();
        if (!(top < cfg.leakage_guard)) {
            throw TruncationError("top Fock level holds population " + detail::describe(top) + at +
                                  " (guard " + detail::describe(cfg.leakage_guard) +
                                  "); increase oracle truncation above " + std::to_string(dim()));
        }
    }

   private:
    CMatrix m_;
};

/// Structured form of
///   d/dt x = alpha/2 L[b+]x + beta/2 L[b]x - gamma_c x + gamma_c Tr(x) rho0,
/// L[O]x = 2 O x O+ - O+O x - x O+O. For a state (Tr x = 1) the last two terms
/// are the reset channel -gamma_c (rho - rho0); for a conditioned operator they
/// are the same linear map, as quantum regression requires.
class FockGenerator {
   public:
    explicit FockGenerator(int dim) : dim_(dim), ops_(dim) {
        int m = dim - 1;
        anti_normal_ = CMatrix::Zero(dim, dim);
        number_sum_ = CMatrix::Zero(dim, dim);
        sandwich_ = CMatrix::Zero(m, m);
        auto c = [&](int i) { return i + 1 < dim ? static_cast<double>(i + 1) : 0.0; };  // diag of b b+
        for (int i = 0; i < dim; i++) {
            for (int j = 0; j < dim; j++) {
                anti_normal_(i, j) = c(i) + c(j);
                number_sum_(i, j) = static_cast<double>(i + j);
            }
        }
        for (int i = 0; i < m; i++) {
            for (int j = 0; j < m; j++) {
                sandwich_(i, j) = std::sqrt(static_cast<double>(i + 1) * static_cast<double>(j + 1));
            }
        }
    }

    int dim() const {
        return dim_;
    }
    const LadderOperators &ladder() const {
        return ops_;
    }

    CMatrix apply(const CMatrix &x, const RateSchedule::Rates &r, const CMatrix &rho0) const {
        const double alpha = r.gain;
        const double beta = r.retrieval;
        const double gamma = r.decoherence;
        const int m = dim_ - 1;
        CMatrix d = -((0.5 * alpha) * anti_normal_ + (0.5 * beta) * number_sum_).cwiseProduct(x) - gamma * x;
        if (gamma != 0.0) {
            d += (gamma * x.trace()) * rho0;
        }
        if (alpha != 0.0) {
            d.bottomRightCorner(m, m) += alpha * sandwich_.cwiseProduct(x.topLeftCorner(m, m));
        }
        if (beta != 0.0) {
            d.topLeftCorner(m, m) += beta * sandwich_.cwiseProduct(x.bottomRightCorner(m, m));
        }
        return d;
    }

    /// The same map built from explicit operator products.
    CMatrix apply_dense(const CMatrix &x, const RateSchedule::Rates &r, const CMatrix &rho0) const {
        const CMatrix &b = ops_.b;
        const CMatrix &bd = ops_.bdag;
        CMatrix bbd = b * bd;
        CMatrix bdb = bd * b;
        CMatrix gain = 2.0 * bd * x * b - bbd * x - x * bbd;
        CMatrix loss = 2.0 * b * x * bd - bdb * x - x * bdb;
        return (0.5 * r.gain) * gain + (0.5 * r.retrieval) * loss - r.decoherence * x +
               (r.decoherence * x.trace()) * rho0;
    }

   private:
    int dim_;
    LadderOperators ops_;
    CMatrix anti_normal_;
    CMatrix number_sum_;
    CMatrix sandwich_;
};

/// d rho / dt for the spin-wave mode. Only gain, retrieval and gamma_c enter;
/// the optical-pumping rates are not part of the bosonic model.
inline CMatrix liouvillian_step(const DensityMatrix &rho, const RateSchedule::Rates &r, const DensityMatrix &rho0) {
    FockGenerator gen(rho.dim());
    return gen.apply(rho.matrix(), r, rho0.matrix());
}

inline CMatrix liouvillian_step(const DensityMatrix &rho, const RateSchedule &sched, double t,
                                const DensityMatrix &rho0) {
    return liouvillian_step(rho, sched.at(t), rho0);
}

/// Propagates `x` (state or conditioned operator) from `from` to `to`.
/// Leakage is checked every step; the full invariant set at every segment edge.
inline DensityMatrix evolve_fock(const RateSchedule &sched, const DensityMatrix &x, double from, double to,
                                 const OracleConfig &cfg = {}) {
    cfg.validate();
    detail::require(x.dim() == cfg.truncation, "state dimension does not match the oracle truncation");
    detail::require(to >= from, "oracle propagation must run forward in time");
    if (to == from) {
        return x;
    }
    FockGenerator gen(cfg.truncation);
    const CMatrix rho0 = DensityMatrix::vacuum(cfg.truncation).matrix();
    const double expected_trace = x.trace().real();
    auto rhs = [&](const RateSchedule::Rates &r, const CMatrix &m) {
        return cfg.dense_generator ? gen.apply_dense(m, r, rho0) : gen.apply(m, r, rho0);
    };
    auto observe = [&](double t, RateSchedule::Window, const CMatrix &m, StepEvent ev) {
        DensityMatrix state(m);
        std::string where = "t = " + detail::describe(t) + " s";
        if (ev == StepEvent::segment_end) {
            state.validate(cfg, expected_trace, where);
        } else {
            if (!m.allFinite()) {
                throw NumericalError("oracle propagation produced non-finite entries at " + where);
            }
            state.check_leakage(cfg, " at " + where);
        }
    };
    x.validate(cfg, expected_trace, "start of propagation");
    CMatrix out = propagate(sched, from, to, x.matrix(), cfg.policy(), rhs, observe);
    return DensityMatrix(std::move(out));
}

/// States at each of the (ascending) `times`, starting from the vacuum at t = 0.
inline std::vector<DensityMatrix> evolve_fock(const RateSchedule &sched, const std::vector<double> &times,
                                              const OracleConfig &cfg = {}) {
    cfg.validate();
    std::vector<DensityMatrix> out;
    DensityMatrix rho = DensityMatrix::vacuum(cfg.truncation);
    double t = 0.0;
    for (double next : times) {
        detail::require(next >= t, "oracle sample times must be ascending and >= 0");
        rho = evolve_fock(sched, rho, t, next, cfg);
        t = next;
        out.push_back(rho);
    }
    return out;
}

enum class Ladder { b, bdag };

/// Parses words such as "b b+ b+ b" (also accepts "bdag" and "b†").
inline std::vector<Ladder> parse_word(const std::string &text) {
    std::vector<Ladder> word;
    size_t i = 0;
    while (i < text.size()) {
        if (text[i] == ' ' || text[i] == ',') {
            i++;
            continue;
        }
        if (text[i] != 'b') {
            throw InputError("bad operator word '" + text + "'");
        }
        i++;
        if (text.compare(i, 1, "+") == 0) {
            word.push_back(Ladder::bdag);
            i += 1;
        } else if (text.compare(i, 3, "dag") == 0) {
            word.push_back(Ladder::bdag);
            i += 3;
        } else if (text.compare(i, 3, "\xE2\x80\xA0") == 0) {
            word.push_back(Ladder::bdag);
            i += 3;
        } else {
            word.push_back(Ladder::b);
        }
    }
    return word;
}

/// Tr(O_1 O_2 ... O_n x) with the product taken in the written order.
inline std::complex<double> moment(const DensityMatrix &x, const std::vector<Ladder> &word) {
    detail::require(word.size() <= 6, "operator words longer than 6 are not supported");
    LadderOperators ops(x.dim());
    CMatrix product = CMatrix::Identity(x.dim(), x.dim());
    for (Ladder op : word) {
        product = product * (op == Ladder::b ? ops.b : ops.bdag);
    }
    return (product * x.matrix()).trace();
}

inline std::complex<double> moment(const DensityMatrix &x, const std::string &word) {
    return moment(x, parse_word(word));
}

/// b+ x b: the conditioned operator for a Stokes photon emitted at the time of x.
inline DensityMatrix herald(const DensityMatrix &x) {
    LadderOperators ops(x.dim());
    return DensityMatrix(ops.bdag * x.matrix() * ops.b);
}

enum class CorrelatorKind {
    cross,             // Tr(b+ b sigma(t2)), sigma = b+ rho(t1) b
    conditional_pair,  // Tr(b+^2 b^2 sigma(t2))
    anti_stokes_auto,  // Tr(b+^2 b^2 rho(t2))
};

/// Two-time correlator by quantum regression from the state at t1.
inline double regression_correlator(const DensityMatrix &rho_t1, CorrelatorKind kind, const RateSchedule &sched,
                                    double t1, double t2, const OracleConfig &cfg = {}) {
    const Timeline &tl = sched.timeline();
    detail::require(t1 <= tl.write && t2 >= tl.read_start(), "regression needs t1 <= T_W and t2 >= T2");
    if (kind == CorrelatorKind::anti_stokes_auto) {
        return moment(evolve_fock(sched, rho_t1, t1, t2, cfg), "b+ b+ b b").real();
    }
    DensityMatrix sigma = evolve_fock(sched, herald(rho_t1), t1, t2, cfg);
    return moment(sigma, kind == CorrelatorKind::cross ? "b+ b" : "b+ b+ b b").real();
}

/// Write-stage state compared with the thermal distribution of the same mean.
struct ThermalDeviation {
    double n = 0.0;
    double max_population_error = 0.0;
    double off_diagonal_norm = 0.0;
};

inline ThermalDeviation thermal_deviation(const DensityMatrix &rho) {
    ThermalDeviation d;
    d.n = moment(rho, "b+ b").real();
    CMatrix off = rho.matrix();
    off.diagonal().setZero();
    d.off_diagonal_norm = off.norm();
    for (int k = 0; k < rho.dim(); k++) {
        double expected = std::pow(d.n / (1.0 + d.n), k) / (1.0 + d.n);
        d.max_population_error = std::max(d.max_population_error, std::abs(rho.population(k) - expected));
    }
    return d;
}

struct OracleReport {
    std::string fingerprint;
    int truncation = 0;
    double nsp_t1 = 0.0;
    double nsp_t2 = 0.0;
    double nsp_end = 0.0;
    double phi1 = 0.0;    // <b b b+ b+>(t1)
    double phi12 = 0.0;   // Tr(b+ b sigma(t2))
    double phi122 = 0.0;  // Tr(b+^2 b^2 sigma(t2))
    double single_excitation_retrieval = 0.0;  // <b+ b>(t2) starting from |1> at t1
    double max_top_population = 0.0;
    CorrelationReport correlations;  // provenance oracle
};

/// Runs the oracle over one write/read cycle and assembles the same
/// normalized quantities as the analytic reports.
inline OracleReport oracle_report(const RateSchedule &sched, const ReportTimes &times = {},
                                  const OracleConfig &cfg = {}) {
    cfg.validate();
    const Timeline &tl = sched.timeline();
    auto [t1, t2] = times.resolve(tl);
    const int dim = cfg.truncation;

    OracleReport out;
    out.fingerprint = scenario_fingerprint(sched, t1, t2);
    out.truncation = dim;

    DensityMatrix rho1 = evolve_fock(sched, DensityMatrix::vacuum(dim), 0.0, t1, cfg);
    DensityMatrix rho2 = evolve_fock(sched, rho1, t1, t2, cfg);
    DensityMatrix rho_end = evolve_fock(sched, rho2, t2, tl.end(), cfg);
    DensityMatrix sigma2 = evolve_fock(sched, herald(rho1), t1, t2, cfg);
    DensityMatrix sigma_end = evolve_fock(sched, sigma2, t2, tl.end(), cfg);
    DensityMatrix single = evolve_fock(sched, DensityMatrix::fock(dim, 1), t1, t2, cfg);

    for (const auto *x : {&rho1, &rho2, &rho_end, &sigma2, &sigma_end}) {
        out.max_top_population = std::max(out.max_top_population, x->top_population());
    }

    out.nsp_t1 = moment(rho1, "b+ b").real();
    out.nsp_t2 = moment(rho2, "b+ b").real();
    out.nsp_end = moment(rho_end, "b+ b").real();
    out.phi1 = moment(rho1, "b b b+ b+").real();
    out.phi12 = moment(sigma2, "b+ b").real();
    out.phi122 = moment(sigma2, "b+ b+ b b").real();
    out.single_excitation_retrieval = moment(single, "b+ b").real();
    double m0 = sigma2.trace().real();
    double phi12_end = moment(sigma_end, "b+ b").real();
    double f2_t2 = moment(rho2, "b+ b+ b b").real();
    double f2_end = moment(rho_end, "b+ b+ b b").real();
    double anchor = moment(rho1, "b b+").real();

    CorrelationReport &r = out.correlations;
    r.provenance = Provenance::oracle;
    r.scenario = out.fingerprint;
    r.t1 = t1;
    r.t2 = t2;
    r.t_end = tl.end();
    r.p = out.nsp_t1;
    bool driven = sched.peaks().stokes_gain > 0.0;
    bool read = sched.peaks().retrieval > 0.0;
    if (!driven) {
        r.g11 = r.g22 = r.g22_end = r.g12 = r.g12_end = r.R = r.R_end = r.g3 = r.g3_full = Estimate::undefined();
        return out;
    }
    r.g11 = Estimate::ratio(out.phi1, anchor * anchor);
    if (!read) {
        r.g22 = r.g22_end = r.g12 = r.g12_end = r.R = r.R_end = r.g3 = r.g3_full = Estimate::undefined();
        return out;
    }
    auto auto2 = [](double f2, double n) { return n == 0.0 ? Estimate::undefined() : Estimate::ratio(f2, n * n); };
    r.g22 = auto2(f2_t2, out.nsp_t2);
    r.g22_end = auto2(f2_end, out.nsp_end);
    r.g12 = Estimate::ratio(out.phi12, m0 * out.nsp_t2);
    r.g12_end = Estimate::ratio(phi12_end, m0 * out.nsp_end);
    r.R = cauchy_schwarz_ratio(r.g11, r.g22, r.g12);
    r.R_end = cauchy_schwarz_ratio(r.g11, r.g22_end, r.g12_end);
    double kappa = out.single_excitation_retrieval;
    r.g3 = Estimate::ratio(out.phi122, m0 * kappa * kappa);
    r.g3_full = Estimate::ratio(m0 * out.phi122, out.phi12 * out.phi12);
    return out;
}

struct DiffRow {
    std::string quantity;
    Estimate analytic;
    Estimate oracle;
    double relative_error = 0.0;
    bool pass = false;
};

struct DiffTable {
    std::string fingerprint;
    double tolerance = 0.0;
    std::vector<DiffRow> rows;

    bool pass() const {
        return std::all_of(rows.begin(), rows.end(), [](const DiffRow &r) { return r.pass; });
    }
    double max_error() const {
        double worst = 0.0;
        for (const auto &r : rows) {
            worst = std::max(worst, r.relative_error);
        }
        return worst;
    }
};

namespace detail {

inline DiffRow diff(const std::string &name, const Estimate &a, const Estimate &o, double tolerance) {
    DiffRow row{name, a, o, 0.0, false};
    if (a.validity != o.validity) {
        row.relative_error = std::numeric_limits<double>::infinity();
    } else if (a.finite()) {
        double scale = std::abs(o.value);
        double delta = std::abs(a.value - o.value);
        row.relative_error = scale > 0.0 ? delta / scale : (delta == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    }
    row.pass = row.relative_error <= tolerance;
    return row;
}

}  // namespace detail

/// Per-quantity relative differences between an analytic report (with the
/// trajectory it came from) and an oracle run of the same scenario.
inline DiffTable compare_report(const CorrelationReport &analytic, const Trajectory &traj, const OracleReport &oracle,
                                double tolerance) {
    detail::require(tolerance > 0.0, "comparison tolerance must be > 0");
    if (analytic.scenario.empty() || analytic.scenario != oracle.fingerprint) {
        throw InputError("analytic and oracle reports were computed for different scenarios");
    }
    DiffTable table;
    table.fingerprint = oracle.fingerprint;
    table.tolerance = tolerance;
    auto &rows = table.rows;
    const CorrelationReport &o = oracle.correlations;
    rows.push_back(detail::diff("nsp_t1", Estimate::of(traj.at(analytic.t1, true).nsp), Estimate::of(oracle.nsp_t1),
                                tolerance));
    rows.push_back(detail::diff("nsp_t2", Estimate::of(traj.at(analytic.t2).nsp), Estimate::of(oracle.nsp_t2),
                                tolerance));
    rows.push_back(detail::diff("nsp_end", Estimate::of(traj.at(analytic.t_end, true).nsp),
                                Estimate::of(oracle.nsp_end), tolerance));
    auto a_rows = analytic.rows();
    auto o_rows = o.rows();
    for (size_t k = 0; k < a_rows.size(); k++) {
        if (a_rows[k].quantity == "p") {
            continue;
        }
        rows.push_back(detail::diff(a_rows[k].quantity, a_rows[k].value, o_rows[k].value, tolerance));
    }
    return table;
}

}  // namespace dlcz
