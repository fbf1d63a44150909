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

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dlcz/correlations.hpp"
#include "dlcz/dynamics.hpp"
#include "dlcz/errors.hpp"
#include "dlcz/fockoracle.hpp"
#include "dlcz/params.hpp"
#include "dlcz/units.hpp"

namespace dlcz::cli {

/// Configuration problems, with "file:line:column: " prefixed when known.
class ConfigError : public InputError {
   public:
    using InputError::InputError;
};

struct EnvelopeSpec {
    PulseEnvelope::Shape shape = PulseEnvelope::Shape::rectangular;
    double rise = 0.0;  // [s]
    std::vector<PulseEnvelope::Sample> samples;  // times in [s]

    PulseEnvelope build(double duration) const {
        switch (shape) {
            case PulseEnvelope::Shape::trapezoid:
                return PulseEnvelope::trapezoid(duration, rise);
            case PulseEnvelope::Shape::tabulated:
                return PulseEnvelope::tabulated(samples);
            case PulseEnvelope::Shape::rectangular:
                break;
        }
        return PulseEnvelope::rectangular(duration);
    }
};

enum class SweepAxis { alpha, beta, gamma_c, tau_d, p };

inline const char *to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::alpha:
            return "alpha";
        case SweepAxis::beta:
            return "beta";
        case SweepAxis::gamma_c:
            return "gamma_c";
        case SweepAxis::tau_d:
            return "tau_d";
        case SweepAxis::p:
            return "p";
    }
    return "?";
}

/// Grid values are in config units: 1/us for rates, us for tau_d.
struct SweepSpec {
    SweepAxis axis = SweepAxis::p;
    std::vector<double> values;
};

struct OutputSpec {
    std::string trajectory = "trajectory.csv";
    std::string correlations = "correlations.csv";
    std::string summary = "summary.txt";
    std::string sweep = "sweep.csv";
    std::string oracle_diff = "oracle_diff.csv";
};

struct RunConfig {
    std::string source = "<config>";
    std::optional<PeakRates> rates;  // SI
    std::optional<RawPhysicalParams> physical;
    std::optional<double> stokes_target;  // n1_out(T_W) to pin by solving for alpha
    Timeline timeline;                    // SI
    EnvelopeSpec write;
    EnvelopeSpec read;
    RelaxationModel model = RelaxationModel::physical;
    IntegratorConfig integrator;
    ReportTimes times;  // SI
    OracleConfig oracle;
    double oracle_tolerance = 1e-4;
    std::optional<SweepSpec> sweep;
    OutputSpec output;

    /// Schedule before any Stokes-target solve.
    RateSchedule base_schedule() const {
        PulseEnvelope w = write.build(timeline.write);
        PulseEnvelope r = read.build(timeline.read);
        if (physical) {
            return derive_rates(*physical, std::move(w), std::move(r), timeline, model);
        }
        return RateSchedule(*rates, std::move(w), std::move(r), timeline, model);
    }

    RateSchedule schedule() const {
        RateSchedule s = base_schedule();
        if (stokes_target) {
            return s.with_stokes_gain(solve_stokes_gain(s, *stokes_target, integrator));
        }
        return s;
    }
};

namespace detail {

class Reader {
   public:
    explicit Reader(std::string source) : source_(std::move(source)) {}

    std::string where(const YAML::Node &n) const {
        auto m = n.Mark();
        if (m.is_null()) {
            return source_;
        }
        return source_ + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
    }

    [[noreturn]] void fail(const YAML::Node &n, const std::string &message) const {
        throw ConfigError(where(n) + ": " + message);
    }

    void expect_map(const YAML::Node &n, const std::string &section) const {
        if (!n.IsMap()) {
            fail(n, "section '" + section + "' must be a mapping");
        }
    }

    void allow(const YAML::Node &map, std::initializer_list<const char *> keys, const std::string &section) const {
        expect_map(map, section);
        for (auto it = map.begin(); it != map.end(); ++it) {
            std::string key = it->first.as<std::string>();
            bool known = std::any_of(keys.begin(), keys.end(), [&](const char *k) { return key == k; });
            if (!known) {
                std::string list;
                for (const char *k : keys) {
                    list += list.empty() ? k : std::string(", ") + k;
                }
                fail(it->first, "unknown key '" + key + "' in " + section + " (expected one of: " + list + ")");
            }
        }
    }

    double number(const YAML::Node &n, const std::string &what) const {
        double v = 0.0;
        try {
            v = n.as<double>();
        } catch (const YAML::Exception &) {
            fail(n, what + " must be a number");
        }
        if (!std::isfinite(v)) {
            fail(n, what + " must be finite");
        }
        return v;
    }

    std::optional<double> optional_number(const YAML::Node &map, const char *key, const std::string &section) const {
        if (YAML::Node v = map[key]) {
            return number(v, section + "." + key);
        }
        return std::nullopt;
    }

    double required_number(const YAML::Node &map, const char *key, const std::string &section) const {
        YAML::Node v = map[key];
        if (!v) {
            fail(map, "missing required key '" + std::string(key) + "' in " + section);
        }
        return number(v, section + "." + key);
    }

    double non_negative(const YAML::Node &map, const char *key, const std::string &section, double fallback) const {
        auto v = optional_number(map, key, section);
        if (v && *v < 0.0) {
            fail(map[key], section + "." + key + " must be >= 0");
        }
        return v.value_or(fallback);
    }

    int integer(const YAML::Node &n, const std::string &what) const {
        int v = 0;
        try {
            v = n.as<int>();
        } catch (const YAML::Exception &) {
            fail(n, what + " must be an integer");
        }
        return v;
    }

    bool boolean(const YAML::Node &n, const std::string &what) const {
        bool v = false;
        try {
            v = n.as<bool>();
        } catch (const YAML::Exception &) {
            fail(n, what + " must be true or false");
        }
        return v;
    }

    std::string text(const YAML::Node &n, const std::string &what) const {
        if (!n.IsScalar()) {
            fail(n, what + " must be a string");
        }
        return n.as<std::string>();
    }

   private:
    std::string source_;
};

inline PeakRates read_rates(const Reader &in, const YAML::Node &n, bool has_target) {
    in.allow(n, {"alpha", "beta", "gamma_c", "Gamma1", "Gamma2", "k", "N"}, "rates");
    PeakRates p;
    auto rate = [&](const char *key, double fallback) {
        return units::per_us(in.non_negative(n, key, "rates", units::to_per_us(fallback)));
    };
    if (has_target && n["alpha"]) {
        in.fail(n["alpha"], "give either rates.alpha or stokes_target, not both");
    }
    p.stokes_gain = rate("alpha", 0.0);
    p.retrieval = units::per_us(in.non_negative(n, "beta", "rates", 0.0));
    p.decoherence = rate("gamma_c", 0.0);
    p.write_pumping = rate("Gamma1", 0.0);
    p.read_pumping = rate("Gamma2", 0.0);
    p.cavity_decay = rate("k", p.cavity_decay);
    if (p.cavity_decay <= 0.0) {
        in.fail(n["k"], "rates.k must be > 0");
    }
    p.atom_number = in.non_negative(n, "N", "rates", p.atom_number);
    return p;
}

inline RawPhysicalParams read_physical(const Reader &in, const YAML::Node &n) {
    in.allow(n,
             {"omega_W", "omega_R", "Omega_W", "Omega_R", "Delta_W", "Delta_R", "g_S", "g_AS", "dipoles", "gamma_32",
              "gamma_41", "gamma_c", "N", "k", "L"},
             "physical");
    const std::string s = "physical";
    RawPhysicalParams raw;
    raw.write_carrier = in.non_negative(n, "omega_W", s, 0.0);
    raw.read_carrier = in.non_negative(n, "omega_R", s, 0.0);
    raw.write_rabi = in.non_negative(n, "Omega_W", s, 0.0);
    raw.read_rabi = in.non_negative(n, "Omega_R", s, 0.0);
    raw.write_detuning = in.required_number(n, "Delta_W", s);
    raw.read_detuning = in.required_number(n, "Delta_R", s);
    raw.stokes_coupling = in.optional_number(n, "g_S", s);
    raw.anti_stokes_coupling = in.optional_number(n, "g_AS", s);
    if (YAML::Node d = n["dipoles"]) {
        in.allow(d, {"mu_32", "mu_41", "V", "omega_21"}, "physical.dipoles");
        DipoleCoupling dc;
        dc.stokes_dipole = in.required_number(d, "mu_32", "physical.dipoles");
        dc.anti_stokes_dipole = in.required_number(d, "mu_41", "physical.dipoles");
        dc.volume = in.required_number(d, "V", "physical.dipoles");
        dc.ground_splitting = in.non_negative(d, "omega_21", "physical.dipoles", 0.0);
        raw.dipoles = dc;
    }
    raw.decay_32 = in.non_negative(n, "gamma_32", s, 0.0);
    raw.decay_41 = in.non_negative(n, "gamma_41", s, 0.0);
    raw.decoherence = in.non_negative(n, "gamma_c", s, 0.0);
    raw.atom_number = in.required_number(n, "N", s);
    raw.cavity_decay = in.required_number(n, "k", s);
    raw.sample_length = in.non_negative(n, "L", s, 0.0);
    try {
        raw.validate();
    } catch (const InputError &e) {
        in.fail(n, e.what());
    }
    return raw;
}

inline EnvelopeSpec read_envelope(const Reader &in, const YAML::Node &n, const std::string &section) {
    in.allow(n, {"shape", "rise", "samples"}, section);
    EnvelopeSpec e;
    std::string shape = n["shape"] ? in.text(n["shape"], section + ".shape") : "rectangular";
    if (shape == "rectangular") {
        e.shape = PulseEnvelope::Shape::rectangular;
    } else if (shape == "trapezoid") {
        e.shape = PulseEnvelope::Shape::trapezoid;
        e.rise = units::us(in.required_number(n, "rise", section));
    } else if (shape == "tabulated") {
        e.shape = PulseEnvelope::Shape::tabulated;
        YAML::Node samples = n["samples"];
        if (!samples || !samples.IsSequence()) {
            in.fail(n, section + ".samples must be a list of [t_us, value] pairs");
        }
        for (const auto &pair : samples) {
            if (!pair.IsSequence() || pair.size() != 2) {
                in.fail(pair, section + ".samples entries must be [t_us, value] pairs");
            }
            e.samples.push_back({units::us(in.number(pair[0], section + " sample time")),
                                 in.number(pair[1], section + " sample value")});
        }
    } else {
        in.fail(n["shape"], "unknown pulse shape '" + shape + "' (rectangular, trapezoid or tabulated)");
    }
    if (e.shape != PulseEnvelope::Shape::trapezoid && n["rise"]) {
        in.fail(n["rise"], section + ".rise only applies to trapezoid pulses");
    }
    if (e.shape != PulseEnvelope::Shape::tabulated && n["samples"]) {
        in.fail(n["samples"], section + ".samples only applies to tabulated pulses");
    }
    return e;
}

inline std::vector<double> grid(double from, double to, int points, const std::string &spacing) {
    std::vector<double> v;
    for (int i = 0; i < points; i++) {
        double u = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
        if (spacing == "log") {
            v.push_back(std::exp(std::log(from) + u * (std::log(to) - std::log(from))));
        } else {
            v.push_back(from + u * (to - from));
        }
    }
    return v;
}

inline SweepSpec read_sweep(const Reader &in, const YAML::Node &n) {
    in.allow(n, {"axis", "values", "from", "to", "points", "spacing"}, "sweep");
    SweepSpec s;
    if (!n["axis"]) {
        in.fail(n, "sweep.axis is required (alpha, beta, gamma_c, tau_d or p)");
    }
    std::string axis = in.text(n["axis"], "sweep.axis");
    if (axis == "alpha") {
        s.axis = SweepAxis::alpha;
    } else if (axis == "beta") {
        s.axis = SweepAxis::beta;
    } else if (axis == "gamma_c") {
        s.axis = SweepAxis::gamma_c;
    } else if (axis == "tau_d") {
        s.axis = SweepAxis::tau_d;
    } else if (axis == "p") {
        s.axis = SweepAxis::p;
    } else {
        in.fail(n["axis"], "unknown sweep axis '" + axis + "' (alpha, beta, gamma_c, tau_d or p)");
    }
    bool listed = static_cast<bool>(n["values"]);
    bool ranged = n["from"] || n["to"] || n["points"] || n["spacing"];
    if (listed == ranged) {
        in.fail(n, "sweep needs either 'values' or 'from'/'to'/'points'");
    }
    if (listed) {
        if (!n["values"].IsSequence() || n["values"].size() == 0) {
            in.fail(n["values"], "sweep.values must be a non-empty list");
        }
        for (const auto &v : n["values"]) {
            s.values.push_back(in.number(v, "sweep value"));
        }
    } else {
        double from = in.required_number(n, "from", "sweep");
        double to = in.required_number(n, "to", "sweep");
        if (!n["points"]) {
            in.fail(n, "missing required key 'points' in sweep");
        }
        int points = in.integer(n["points"], "sweep.points");
        if (points < 1) {
            in.fail(n["points"], "sweep.points must be >= 1");
        }
        std::string spacing = n["spacing"] ? in.text(n["spacing"], "sweep.spacing") : "linear";
        if (spacing != "linear" && spacing != "log") {
            in.fail(n["spacing"], "sweep.spacing must be 'linear' or 'log'");
        }
        if (spacing == "log" && (from <= 0.0 || to <= 0.0)) {
            in.fail(n, "log-spaced sweeps need from, to > 0");
        }
        s.values = grid(from, to, points, spacing);
    }
    for (double v : s.values) {
        if (!std::isfinite(v) || v < 0.0 || (s.axis == SweepAxis::p && v == 0.0)) {
            in.fail(n, "sweep values must be finite and >= 0 (and > 0 for p)");
        }
    }
    return s;
}

}  // namespace detail

/// Parses a YAML run configuration. `source` names the document in diagnostics.
inline RunConfig parse_config(const std::string &text, const std::string &source = "<config>") {
    detail::Reader in(source);
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException &e) {
        throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                          ": " + e.msg);
    }
    if (!root || !root.IsMap()) {
        throw ConfigError(source + ": configuration must be a mapping of sections");
    }
    in.allow(root,
             {"rates", "physical", "stokes_target", "timeline", "pulses", "model", "integrator", "correlations",
              "oracle", "sweep", "output"},
             "the top level");

    RunConfig cfg;
    cfg.source = source;
    if (YAML::Node t = root["stokes_target"]) {
        double v = in.number(t, "stokes_target");
        if (v <= 0.0) {
            in.fail(t, "stokes_target must be > 0");
        }
        cfg.stokes_target = v;
    }
    bool has_rates = static_cast<bool>(root["rates"]);
    bool has_physical = static_cast<bool>(root["physical"]);
    if (has_rates == has_physical) {
        in.fail(root, "give exactly one of the 'rates' or 'physical' sections");
    }
    if (has_rates) {
        cfg.rates = detail::read_rates(in, root["rates"], cfg.stokes_target.has_value());
    } else {
        cfg.physical = detail::read_physical(in, root["physical"]);
    }

    YAML::Node tl = root["timeline"];
    if (!tl) {
        in.fail(root, "missing required section 'timeline'");
    }
    in.allow(tl, {"T_W", "tau_d", "T_R"}, "timeline");
    cfg.timeline.write = units::us(in.required_number(tl, "T_W", "timeline"));
    cfg.timeline.delay = units::us(in.required_number(tl, "tau_d", "timeline"));
    cfg.timeline.read = units::us(in.required_number(tl, "T_R", "timeline"));
    try {
        cfg.timeline.validate();
    } catch (const InputError &e) {
        in.fail(tl, e.what());
    }

    if (YAML::Node p = root["pulses"]) {
        in.allow(p, {"write", "read"}, "pulses");
        if (p["write"]) {
            cfg.write = detail::read_envelope(in, p["write"], "pulses.write");
        }
        if (p["read"]) {
            cfg.read = detail::read_envelope(in, p["read"], "pulses.read");
        }
    }

    if (YAML::Node m = root["model"]) {
        std::string model = in.text(m, "model");
        if (model == "physical") {
            cfg.model = RelaxationModel::physical;
        } else if (model == "storage") {
            cfg.model = RelaxationModel::storage;
        } else {
            in.fail(m, "model must be 'physical' or 'storage'");
        }
    }

    if (YAML::Node n = root["integrator"]) {
        in.allow(n,
                 {"rate_step", "min_steps", "output_stride", "incoherent_source", "explicit_cavity",
                  "cavity_rate_step", "refine", "refine_tolerance", "max_refinements"},
                 "integrator");
        auto &ic = cfg.integrator;
        ic.rate_step = in.optional_number(n, "rate_step", "integrator").value_or(ic.rate_step);
        if (n["min_steps"]) ic.min_steps = in.integer(n["min_steps"], "integrator.min_steps");
        if (n["output_stride"]) ic.output_stride = in.integer(n["output_stride"], "integrator.output_stride");
        if (n["incoherent_source"]) ic.incoherent_source = in.boolean(n["incoherent_source"], "integrator.incoherent_source");
        if (n["explicit_cavity"]) ic.explicit_cavity = in.boolean(n["explicit_cavity"], "integrator.explicit_cavity");
        ic.cavity_rate_step = in.optional_number(n, "cavity_rate_step", "integrator").value_or(ic.cavity_rate_step);
        if (n["refine"]) ic.refine = in.boolean(n["refine"], "integrator.refine");
        ic.refine_tolerance = in.optional_number(n, "refine_tolerance", "integrator").value_or(ic.refine_tolerance);
        if (n["max_refinements"]) ic.max_refinements = in.integer(n["max_refinements"], "integrator.max_refinements");
        try {
            ic.validate();
        } catch (const InputError &e) {
            in.fail(n, e.what());
        }
    }

    if (YAML::Node n = root["correlations"]) {
        in.allow(n, {"t1", "t2"}, "correlations");
        if (auto v = in.optional_number(n, "t1", "correlations")) cfg.times.t1 = units::us(*v);
        if (auto v = in.optional_number(n, "t2", "correlations")) cfg.times.t2 = units::us(*v);
        try {
            cfg.times.resolve(cfg.timeline);
        } catch (const InputError &e) {
            in.fail(n, e.what());
        }
    }

    if (YAML::Node n = root["oracle"]) {
        in.allow(n, {"truncation", "rate_step", "min_steps", "leakage_guard", "tolerance"}, "oracle");
        auto &oc = cfg.oracle;
        if (n["truncation"]) oc.truncation = in.integer(n["truncation"], "oracle.truncation");
        oc.rate_step = in.optional_number(n, "rate_step", "oracle").value_or(oc.rate_step);
        if (n["min_steps"]) oc.min_steps = in.integer(n["min_steps"], "oracle.min_steps");
        oc.leakage_guard = in.optional_number(n, "leakage_guard", "oracle").value_or(oc.leakage_guard);
        cfg.oracle_tolerance = in.optional_number(n, "tolerance", "oracle").value_or(cfg.oracle_tolerance);
        if (!(cfg.oracle_tolerance > 0.0)) {
            in.fail(n["tolerance"], "oracle.tolerance must be > 0");
        }
        try {
            oc.validate();
        } catch (const InputError &e) {
            in.fail(n, e.what());
        }
    }

    if (YAML::Node n = root["sweep"]) {
        cfg.sweep = detail::read_sweep(in, n);
    }

    if (YAML::Node n = root["output"]) {
        in.allow(n, {"trajectory", "correlations", "summary", "sweep", "oracle_diff"}, "output");
        auto name = [&](const char *key, std::string &slot) {
            if (n[key]) {
                slot = in.text(n[key], std::string("output.") + key);
                if (slot.empty()) {
                    in.fail(n[key], std::string("output.") + key + " must not be empty");
                }
            }
        };
        name("trajectory", cfg.output.trajectory);
        name("correlations", cfg.output.correlations);
        name("summary", cfg.output.summary);
        name("sweep", cfg.output.sweep);
        name("oracle_diff", cfg.output.oracle_diff);
    }

    // Envelope durations and rate sanity are checked by building the schedule once.
    try {
        cfg.base_schedule();
    } catch (const InputError &e) {
        throw ConfigError(source + ": " + e.what());
    }
    return cfg;
}

inline RunConfig load_config(const std::string &path) {
    std::ifstream f(path);
    if (!f) {
        throw ConfigError(path + ": cannot open configuration file");
    }
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), path);
}

}  // namespace dlcz::cli
