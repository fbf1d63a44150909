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

#include "dlcz/params.hpp"

namespace dlcz {

/// How finely a kink-free segment is cut: h * (fastest rate) <= rate_step,
/// and never fewer than min_steps steps.
struct StepPolicy {
    double rate_step = 1e-3;
    int min_steps = 200;
    double rate_multiplier = 1.0;  // scales the schedule's peak rate (higher-order moments grow faster)
    double extra_rate = 0.0;       // rate not visible to the schedule, e.g. 2k when the cavity is explicit

    int steps(double length, double rate) const {
        double fastest = rate * rate_multiplier + extra_rate;
        double n = std::ceil(length * fastest / rate_step);
        return std::max(min_steps, static_cast<int>(std::min(n, 1e9)));
    }
};

enum class StepEvent { segment_start, step, segment_end };

/// Classical RK4. State needs `+` and scalar `*`.
template <class State, class F>
State rk4_step(const F &f, double t, const State &y, double h) {
    State k1 = f(t, y);
    State k2 = f(t + 0.5 * h, State(y + (0.5 * h) * k1));
    State k3 = f(t + 0.5 * h, State(y + (0.5 * h) * k2));
    State k4 = f(t + h, State(y + h * k3));
    return State(y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

/// Integrates `rhs(rates, state)` across the schedule from `from` to `to`,
/// restarting at every window edge and envelope kink so each RK4 run sees a
/// smooth right-hand side. `observe(t, window, state, event)` sees the state at
/// each segment start and after every step.
template <class State, class Rhs, class Observer>
State propagate(const RateSchedule &sched, double from, double to, State y, const StepPolicy &policy,
                const Rhs &rhs, Observer &&observe) {
    for (const auto &seg : sched.segments(from, to)) {
        auto f = [&](double t, const State &s) { return rhs(sched.in(seg.window, t), s); };
        int n = policy.steps(seg.end - seg.begin, sched.peak_rate(seg.window));
        double h = (seg.end - seg.begin) / n;
        observe(seg.begin, seg.window, y, StepEvent::segment_start);
        for (int i = 0; i < n; i++) {
            double t = seg.begin + i * h;
            y = rk4_step(f, t, y, h);
            double t_next = (i + 1 == n) ? seg.end : seg.begin + (i + 1) * h;
            observe(t_next, seg.window, y, i + 1 == n ? StepEvent::segment_end : StepEvent::step);
        }
    }
    return y;
}

template <class State, class Rhs>
State propagate(const RateSchedule &sched, double from, double to, State y, const StepPolicy &policy,
                const Rhs &rhs) {
    return propagate(sched, from, to, std::move(y), policy, rhs,
                     [](double, RateSchedule::Window, const State &, StepEvent) {});
}

}  // namespace dlcz
