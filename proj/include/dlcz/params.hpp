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
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dlcz/errors.hpp"
#include "dlcz/units.hpp"

namespace dlcz {

namespace detail {

inline std::string describe(double v) {
    std::ostringstream ss;
    ss.precision(6);
    ss << v;
    return ss.str();
}

inline void require(bool ok, const std::string &message) {
    if (!ok) {
        throw InputError(message);
    }
}

inline void require_rate(double v, const char *name) {
    require(std::isfinite(v) && v >= 0.0, std::string(name) + " must be finite and >= 0 (got " + describe(v) + ")");
}

inline bool nearly_equal(double a, double b, double rel = 1e-9) {
    return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace detail

/// Temporal profile f(t) of a write or read pulse, in the pulse's own clock.
///
/// `operator()` is zero outside the half-open window [0, duration). `profile`
/// is the continuous shape on the closed window and is what integrators use
/// inside a window, so the value at the trailing edge is the limit from inside.
class PulseEnvelope {
   public:
    enum class Shape { rectangular, trapezoid, tabulated };

    struct Sample {
        double time;
        double value;
    };

    static PulseEnvelope rectangular(double duration) {
        PulseEnvelope e;
        e.shape_ = Shape::rectangular;
        e.duration_ = duration;
        e.validate();
        return e;
    }

    /// Linear ramps of length `rise` at both edges, plateau exactly 1.
    static PulseEnvelope trapezoid(double duration, double rise) {
        PulseEnvelope e;
        e.shape_ = Shape::trapezoid;
        e.duration_ = duration;
        e.rise_ = rise;
        e.validate();
        return e;
    }

    /// Piecewise-linear profile through (time, value) samples. The first sample
    /// must be at t = 0; the last sample's time is the pulse duration. Values
    /// are clamped into [0, 1].
    static PulseEnvelope tabulated(std::vector<Sample> samples) {
        PulseEnvelope e;
        e.shape_ = Shape::tabulated;
        detail::require(samples.size() >= 2, "tabulated envelope needs at least two samples");
        detail::require(samples.front().time == 0.0, "tabulated envelope must start at t = 0");
        for (size_t k = 1; k < samples.size(); k++) {
            detail::require(samples[k].time > samples[k - 1].time,
                            "tabulated envelope sample times must be strictly increasing (index " +
                                std::to_string(k) + ")");
        }
        for (auto &s : samples) {
            detail::require(std::isfinite(s.value), "tabulated envelope value must be finite");
            s.value = std::clamp(s.value, 0.0, 1.0);
        }
        e.duration_ = samples.back().time;
        e.samples_ = std::move(samples);
        e.validate();
        return e;
    }

    Shape shape() const {
        return shape_;
    }
    double duration() const {
        return duration_;
    }
    double rise() const {
        return rise_;
    }
    const std::vector<Sample> &samples() const {
        return samples_;
    }

    double operator()(double local) const {
        if (local < 0.0 || local >= duration_) {
            return 0.0;
        }
        return profile(local);
    }

    double profile(double local) const {
        local = std::clamp(local, 0.0, duration_);
        switch (shape_) {
            case Shape::rectangular:
                return 1.0;
            case Shape::trapezoid:
                if (local < rise_) {
                    return local / rise_;
                }
                if (local > duration_ - rise_) {
                    return (duration_ - local) / rise_;
                }
                return 1.0;
            case Shape::tabulated: {
                auto hi = std::upper_bound(samples_.begin(), samples_.end(), local,
                                           [](double t, const Sample &s) { return t < s.time; });
                if (hi == samples_.end()) {
                    return samples_.back().value;
                }
                auto lo = hi - 1;
                double w = (local - lo->time) / (hi->time - lo->time);
                return lo->value + w * (hi->value - lo->value);
            }
        }
        return 0.0;
    }

    /// Interior points where the profile has a kink.
    std::vector<double> breakpoints() const {
        std::vector<double> out;
        if (shape_ == Shape::trapezoid) {
            out = {rise_, duration_ - rise_};
            if (out[0] >= out[1]) {
                out.resize(1);
            }
        } else if (shape_ == Shape::tabulated) {
            for (size_t k = 1; k + 1 < samples_.size(); k++) {
                out.push_back(samples_[k].time);
            }
        }
        return out;
    }

   private:
    void validate() const {
        detail::require(std::isfinite(duration_) && duration_ > 0.0, "pulse duration must be > 0");
        if (shape_ == Shape::trapezoid) {
            detail::require(rise_ > 0.0 && 2.0 * rise_ <= duration_ * (1.0 + 1e-12),
                            "trapezoid rise time must be in (0, duration/2]");
        }
    }

    Shape shape_ = Shape::rectangular;
    double duration_ = 0.0;
    double rise_ = 0.0;
    std::vector<Sample> samples_;
};

/// Write window [0, T_W), delay, read window [T2, T2 + T_R) with T2 = T_W + delay.
struct Timeline {
    double write = 0.0;
    double delay = 0.0;
    double read = 0.0;

    double read_start() const {
        return write + delay;
    }
    double end() const {
        return write + delay + read;
    }

    void validate() const {
        detail::require(std::isfinite(write) && write > 0.0, "write duration T_W must be > 0");
        detail::require(std::isfinite(read) && read > 0.0, "read duration T_R must be > 0");
        detail::require(std::isfinite(delay), "delay must be finite");
        detail::require(delay >= 0.0, "write and read windows overlap by " + detail::describe(-delay) +
                                          " s (delay must be >= 0)");
    }
};

/// Dipole route to the atom-field couplings.
struct DipoleCoupling {
    double stokes_dipole = 0.0;       // mu_32 [C m]
    double anti_stokes_dipole = 0.0;  // mu_41 [C m]
    double volume = 0.0;              // quantization volume [m^3]
    double ground_splitting = 0.0;    // omega_21 [rad/s]; Stokes at omega_W - omega_21
};

/// Single-mode vacuum coupling g = mu * sqrt(omega / (2 hbar eps0 V)), in rad/s.
inline double coupling_from_dipole(double omega, double dipole, double volume) {
    detail::require(omega > 0.0 && volume > 0.0, "coupling needs omega > 0 and volume > 0");
    return dipole * std::sqrt(omega / (2.0 * units::hbar * units::vacuum_permittivity * volume));
}

/// Free-space limit: the cavity decay is the inverse transit time c / L.
inline double free_space_cavity_decay(double sample_length) {
    detail::require(sample_length > 0.0, "sample length must be > 0");
    return units::speed_of_light / sample_length;
}

/// Laboratory-level inputs. Couplings come either directly or from dipoles,
/// never both.
struct RawPhysicalParams {
    double write_carrier = 0.0;  // omega_W [rad/s]
    double read_carrier = 0.0;   // omega_R [rad/s]
    double write_rabi = 0.0;     // Omega_W [rad/s]
    double read_rabi = 0.0;      // Omega_R [rad/s]
    double write_detuning = 0.0;
    double read_detuning = 0.0;
    std::optional<double> stokes_coupling;       // g_S [rad/s]
    std::optional<double> anti_stokes_coupling;  // g_AS [rad/s]
    std::optional<DipoleCoupling> dipoles;
    double decay_32 = 0.0;  // partial decay |3> -> |2> [1/s]
    double decay_41 = 0.0;  // partial decay |4> -> |1> [1/s]
    double decoherence = 0.0;
    double atom_number = 1.0;
    double cavity_decay = 0.0;
    double sample_length = 0.0;  // informational; see free_space_cavity_decay

    void validate() const {
        using detail::require;
        using detail::require_rate;
        require_rate(write_carrier, "omega_W");
        require_rate(read_carrier, "omega_R");
        require_rate(write_rabi, "Omega_W");
        require_rate(read_rabi, "Omega_R");
        require(std::isfinite(write_detuning) && write_detuning != 0.0, "write detuning Delta_W must be nonzero");
        require(std::isfinite(read_detuning) && read_detuning != 0.0, "read detuning Delta_R must be nonzero");
        require_rate(decay_32, "gamma_32");
        require_rate(decay_41, "gamma_41");
        require_rate(decoherence, "gamma_c");
        require(std::isfinite(atom_number) && atom_number >= 1.0, "atom number N must be >= 1");
        require(std::isfinite(cavity_decay) && cavity_decay > 0.0, "cavity decay k must be > 0");
        require_rate(sample_length, "L");
        bool direct = stokes_coupling.has_value() || anti_stokes_coupling.has_value();
        require(direct != dipoles.has_value(),
                "supply couplings either directly (g_S, g_AS) or via dipoles, exactly one of the two");
        if (direct) {
            require(stokes_coupling.has_value() && anti_stokes_coupling.has_value(),
                    "direct coupling route needs both g_S and g_AS");
            require_rate(*stokes_coupling, "g_S");
            require_rate(*anti_stokes_coupling, "g_AS");
        } else {
            require_rate(dipoles->stokes_dipole, "mu_32");
            require_rate(dipoles->anti_stokes_dipole, "mu_41");
            require(dipoles->volume > 0.0, "quantization volume must be > 0");
        }
    }

    std::pair<double, double> couplings() const {
        if (!dipoles) {
            return {*stokes_coupling, *anti_stokes_coupling};
        }
        const auto &d = *dipoles;
        return {coupling_from_dipole(write_carrier - d.ground_splitting, d.stokes_dipole, d.volume),
                coupling_from_dipole(read_carrier + d.ground_splitting, d.anti_stokes_dipole, d.volume)};
    }
};

/// Which relaxation channels act where.
///
/// physical: damping gamma_c + Gamma1(t) + Gamma2(t) at all times.
/// storage: Gamma1, Gamma2 dropped; gamma_c acts only from the end of the write
/// pulse on, so every normally ordered spin moment decays at gamma_c measured
/// from T_W. This is the regime in which the closed-form statistics are exact.
enum class RelaxationModel { physical, storage };

inline const char *to_string(RelaxationModel m) {
    return m == RelaxationModel::physical ? "physical" : "storage";
}

/// Peak values of the model coefficients. All rates in 1/s.
struct PeakRates {
    double stokes_gain = 0.0;     // alpha
    double retrieval = 0.0;       // beta
    double decoherence = 0.0;     // gamma_c
    double write_pumping = 0.0;   // Gamma1
    double read_pumping = 0.0;    // Gamma2
    double cavity_decay = 3e9;    // k
    double atom_number = 1e12;    // N, only enters the |2> population pumping term

    void validate() const {
        detail::require_rate(stokes_gain, "alpha");
        detail::require_rate(retrieval, "beta");
        detail::require_rate(decoherence, "gamma_c");
        detail::require_rate(write_pumping, "Gamma1");
        detail::require_rate(read_pumping, "Gamma2");
        detail::require(std::isfinite(cavity_decay) && cavity_decay > 0.0, "cavity decay k must be > 0");
        detail::require(std::isfinite(atom_number) && atom_number >= 0.0, "atom number must be >= 0");
    }
};

/// Time-dependent coefficients alpha(t), beta(t), Gamma1(t), Gamma2(t), gamma_c(t).
class RateSchedule {
   public:
    enum class Window { write, delay, read, after };

    /// Instantaneous coefficients.
    struct Rates {
        double gain = 0.0;
        double retrieval = 0.0;
        double write_pumping = 0.0;
        double read_pumping = 0.0;
        double decoherence = 0.0;

        double total_damping() const {
            return decoherence + write_pumping + read_pumping;
        }
    };

    /// A stretch of time with a fixed window and a kink-free envelope.
    struct Segment {
        double begin;
        double end;
        Window window;
    };

    RateSchedule(PeakRates peaks, PulseEnvelope write, PulseEnvelope read, Timeline timeline,
                 RelaxationModel model = RelaxationModel::physical)
        : peaks_(peaks), write_(std::move(write)), read_(std::move(read)), timeline_(timeline), model_(model) {
        peaks_.validate();
        timeline_.validate();
        detail::require(detail::nearly_equal(write_.duration(), timeline_.write),
                        "write envelope lasts " + detail::describe(write_.duration()) +
                            " s but the write window T_W is " + detail::describe(timeline_.write) + " s");
        detail::require(detail::nearly_equal(read_.duration(), timeline_.read),
                        "read envelope lasts " + detail::describe(read_.duration()) +
                            " s but the read window T_R is " + detail::describe(timeline_.read) + " s");
        if (peaks_.stokes_gain > 1e-2 * peaks_.cavity_decay) {
            warnings_.push_back("Stokes gain is not << cavity decay; adiabatic elimination is questionable");
        }
        if (peaks_.retrieval > 1e-2 * peaks_.cavity_decay) {
            warnings_.push_back("retrieval rate is not << cavity decay; adiabatic elimination is questionable");
        }
    }

    const PeakRates &peaks() const {
        return peaks_;
    }
    const PulseEnvelope &write_envelope() const {
        return write_;
    }
    const PulseEnvelope &read_envelope() const {
        return read_;
    }
    const Timeline &timeline() const {
        return timeline_;
    }
    RelaxationModel model() const {
        return model_;
    }
    const std::vector<std::string> &warnings() const {
        return warnings_;
    }

    /// f_W(t) on the global clock.
    double write_profile(double t) const {
        return write_(t);
    }
    /// f_R(t) on the global clock.
    double read_profile(double t) const {
        return read_(t - timeline_.read_start());
    }

    Window window_at(double t) const {
        if (t < timeline_.write) {
            return Window::write;
        }
        if (t < timeline_.read_start()) {
            return Window::delay;
        }
        if (t < timeline_.end()) {
            return Window::read;
        }
        return Window::after;
    }

    Rates at(double t) const {
        return in(window_at(t), t);
    }

    /// Coefficients at t evaluated as part of window w (envelope on the closed window).
    Rates in(Window w, double t) const {
        Rates r;
        bool physical = model_ == RelaxationModel::physical;
        r.decoherence = peaks_.decoherence;
        switch (w) {
            case Window::write: {
                double f = write_.profile(t);
                r.gain = peaks_.stokes_gain * f;
                r.write_pumping = physical ? peaks_.write_pumping * f : 0.0;
                if (!physical) {
                    r.decoherence = 0.0;
                }
                break;
            }
            case Window::read: {
                double f = read_.profile(t - timeline_.read_start());
                r.retrieval = peaks_.retrieval * f;
                r.read_pumping = physical ? peaks_.read_pumping * f : 0.0;
                break;
            }
            case Window::delay:
            case Window::after:
                break;
        }
        return r;
    }

    /// Upper bound of the fastest rate active in window w.
    double peak_rate(Window w) const {
        bool physical = model_ == RelaxationModel::physical;
        switch (w) {
            case Window::write:
                return peaks_.stokes_gain + (physical ? peaks_.write_pumping + peaks_.decoherence : 0.0);
            case Window::read:
                return peaks_.retrieval + peaks_.decoherence + (physical ? peaks_.read_pumping : 0.0);
            default:
                return peaks_.decoherence;
        }
    }

    /// Kink-free pieces covering [from, to], split at window edges and envelope breakpoints.
    std::vector<Segment> segments(double from, double to) const {
        std::vector<double> cuts{0.0};
        for (double b : write_.breakpoints()) {
            cuts.push_back(b);
        }
        cuts.push_back(timeline_.write);
        cuts.push_back(timeline_.read_start());
        for (double b : read_.breakpoints()) {
            cuts.push_back(timeline_.read_start() + b);
        }
        cuts.push_back(timeline_.end());
        cuts.push_back(std::max(to, timeline_.end()));
        std::sort(cuts.begin(), cuts.end());

        std::vector<Segment> out;
        for (size_t k = 0; k + 1 < cuts.size(); k++) {
            double a = std::max(cuts[k], from);
            double b = std::min(cuts[k + 1], to);
            if (b <= a) {
                continue;
            }
            out.push_back({a, b, window_at(0.5 * (cuts[k] + cuts[k + 1]))});
        }
        return out;
    }

    RateSchedule with_peaks(const PeakRates &peaks) const {
        return RateSchedule(peaks, write_, read_, timeline_, model_);
    }
    RateSchedule with_stokes_gain(double alpha) const {
        PeakRates p = peaks_;
        p.stokes_gain = alpha;
        return with_peaks(p);
    }
    RateSchedule with_retrieval(double beta) const {
        PeakRates p = peaks_;
        p.retrieval = beta;
        return with_peaks(p);
    }
    RateSchedule with_decoherence(double gamma_c) const {
        PeakRates p = peaks_;
        p.decoherence = gamma_c;
        return with_peaks(p);
    }
    RateSchedule without_optical_pumping() const {
        PeakRates p = peaks_;
        p.write_pumping = 0.0;
        p.read_pumping = 0.0;
        return with_peaks(p);
    }
    RateSchedule with_model(RelaxationModel model) const {
        return RateSchedule(peaks_, write_, read_, timeline_, model);
    }

    /// True when nothing damps the spin wave during the write pulse, which is
    /// the condition under which the write-stage state stays exactly thermal.
    bool write_stage_relaxation_free() const {
        return peak_rate(Window::write) == peaks_.stokes_gain;
    }

   private:
    PeakRates peaks_;
    PulseEnvelope write_;
    PulseEnvelope read_;
    Timeline timeline_;
    RelaxationModel model_;
    std::vector<std::string> warnings_;
};

/// alpha = (2N/k)(g_S Omega_W/Delta_W)^2, beta = (2N/k)(g_AS Omega_R/Delta_R)^2,
/// Gamma1 = (Omega_W/Delta_W)^2 gamma_32, Gamma2 = (Omega_R/Delta_R)^2 gamma_41.
inline RateSchedule derive_rates(const RawPhysicalParams &raw, PulseEnvelope write, PulseEnvelope read,
                                 const Timeline &timeline, RelaxationModel model = RelaxationModel::physical) {
    raw.validate();
    auto [g_s, g_as] = raw.couplings();
    double write_ratio = raw.write_rabi / raw.write_detuning;
    double read_ratio = raw.read_rabi / raw.read_detuning;
    double enhancement = 2.0 * raw.atom_number / raw.cavity_decay;

    PeakRates p;
    p.stokes_gain = enhancement * (g_s * write_ratio) * (g_s * write_ratio);
    p.retrieval = enhancement * (g_as * read_ratio) * (g_as * read_ratio);
    p.write_pumping = write_ratio * write_ratio * raw.decay_32;
    p.read_pumping = read_ratio * read_ratio * raw.decay_41;
    p.decoherence = raw.decoherence;
    p.cavity_decay = raw.cavity_decay;
    p.atom_number = raw.atom_number;
    return RateSchedule(p, std::move(write), std::move(read), timeline, model);
}

struct SignalToNoise {
    Estimate write;  // alpha / Gamma1
    Estimate read;   // beta / Gamma2
};

inline SignalToNoise signal_to_noise(const RateSchedule &sched) {
    const auto &p = sched.peaks();
    return {Estimate::ratio(p.stokes_gain, p.write_pumping), Estimate::ratio(p.retrieval, p.read_pumping)};
}

}  // namespace dlcz
