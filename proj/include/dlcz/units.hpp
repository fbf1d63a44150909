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

// Everything in the library is SI (seconds, 1/s, rad/s). Microsecond helpers
// exist for the front-end, which reads and writes the lab units.

namespace dlcz::units {

inline constexpr double microsecond = 1e-6;
inline constexpr double per_microsecond = 1e6;

inline constexpr double speed_of_light = 299792458.0;      // m/s
inline constexpr double hbar = 1.054571817e-34;            // J s
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double elementary_charge = 1.602176634e-19;     // C
inline constexpr double bohr_radius = 5.29177210903e-11;         // m

constexpr double us(double v) {
    return v * microsecond;
}
constexpr double per_us(double v) {
    return v * per_microsecond;
}
constexpr double to_us(double seconds) {
    return seconds / microsecond;
}
constexpr double to_per_us(double rate) {
    return rate / per_microsecond;
}

}  // namespace dlcz::units
