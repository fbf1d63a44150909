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

#include <cmath>
#include <random>
#include <vector>

#include "dlcz/params.hpp"
#include "dlcz/units.hpp"

namespace dlcz::testing {

using units::per_us;
using units::us;

struct Scenario {
    double alpha = 0.0;  // 1/us
    double beta = 0.0;
    double gamma_c = 0.0;
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    double write = 1.6;  // us
    double delay = 1.4;
    double read = 1.0;
    RelaxationModel model = RelaxationModel::physical;
};

inline PeakRates peaks_of(const Scenario &s) {
    PeakRates p;
    p.stokes_gain = per_us(s.alpha);
    p.retrieval = per_us(s.beta);
    p.decoherence = per_us(s.gamma_c);
    p.write_pumping = per_us(s.gamma1);
    p.read_pumping = per_us(s.gamma2);
    return p;
}

inline Timeline timeline_of(const Scenario &s) {
    return {us(s.write), us(s.delay), us(s.read)};
}

inline RateSchedule rectangular(const Scenario &s) {
    return RateSchedule(peaks_of(s), PulseEnvelope::rectangular(us(s.write)), PulseEnvelope::rectangular(us(s.read)),
                        timeline_of(s), s.model);
}

inline RateSchedule trapezoid(const Scenario &s, double rise_us = 0.05) {
    return RateSchedule(peaks_of(s), PulseEnvelope::trapezoid(us(s.write), us(rise_us)),
                        PulseEnvelope::trapezoid(us(s.read), us(rise_us)), timeline_of(s), s.model);
}

/// Piecewise-linear envelope with `knots` interior points drawn from rng.
inline PulseEnvelope random_envelope(double duration, int knots, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> value(0.05, 1.0);
    std::vector<PulseEnvelope::Sample> samples;
    for (int k = 0; k <= knots + 1; k++) {
        samples.push_back({duration * k / (knots + 1), value(rng)});
    }
    return PulseEnvelope::tabulated(samples);
}

inline RateSchedule tabulated(const Scenario &s, std::mt19937_64 &rng, int knots = 6) {
    return RateSchedule(peaks_of(s), random_envelope(us(s.write), knots, rng),
                        random_envelope(us(s.read), knots, rng), timeline_of(s), s.model);
}

inline double relative(double a, double b) {
    return std::abs(a - b) / std::abs(b);
}

}  // namespace dlcz::testing
