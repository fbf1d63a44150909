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
#include <limits>
#include <stdexcept>
#include <string>

namespace dlcz {

/// Rejected inputs: invalid parameters, envelopes, timelines or configs.
class InputError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

/// Integration or quadrature produced values outside the model's invariants.
class NumericalError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// The truncated Fock space is too small for the state being evolved.
class TruncationError : public NumericalError {
   public:
    using NumericalError::NumericalError;
};

enum class Validity { finite, infinite, undefined };

inline const char *to_string(Validity v) {
    switch (v) {
        case Validity::finite:
            return "finite";
        case Validity::infinite:
            return "infinite";
        case Validity::undefined:
            return "undefined";
    }
    return "?";
}

/// A scalar result that may be legitimately infinite or undefined (0/0).
struct Estimate {
    double value = 0.0;
    Validity validity = Validity::finite;

    static Estimate of(double v) {
        return {v, Validity::finite};
    }
    static Estimate infinite() {
        return {std::numeric_limits<double>::infinity(), Validity::infinite};
    }
    static Estimate undefined() {
        return {std::numeric_limits<double>::quiet_NaN(), Validity::undefined};
    }
    /// num/den with the 0/0 and x/0 cases flagged instead of producing inf/nan silently.
    static Estimate ratio(double num, double den) {
        if (den == 0.0) {
            return num == 0.0 ? undefined() : infinite();
        }
        return of(num / den);
    }

    bool finite() const {
        return validity == Validity::finite;
    }
};

}  // namespace dlcz
