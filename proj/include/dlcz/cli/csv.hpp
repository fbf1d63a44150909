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

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dlcz/correlations.hpp"
#include "dlcz/dynamics.hpp"
#include "dlcz/errors.hpp"
#include "dlcz/fockoracle.hpp"
#include "dlcz/units.hpp"

namespace dlcz::cli {

/// Shortest text that reads back to the same double (17 significant digits).
inline std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_estimate(const Estimate &e) {
    switch (e.validity) {
        case Validity::infinite:
            return "inf";
        case Validity::undefined:
            return "nan";
        case Validity::finite:
            break;
    }
    return format_double(e.value);
}

inline double parse_double(const std::string &text) {
    if (text == "nan") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    if (text == "inf") {
        return std::numeric_limits<double>::infinity();
    }
    if (text == "-inf") {
        return -std::numeric_limits<double>::infinity();
    }
    errno = 0;
    char *end = nullptr;
    double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE) {
        throw InputError("not a number: '" + text + "'");
    }
    return v;
}

/// Minimal CSV table: header plus rows of already-formatted cells. Cells never
/// contain commas, so no quoting is needed.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string str() const {
        std::string out;
        auto line = [&](const std::vector<std::string> &cells) {
            for (size_t k = 0; k < cells.size(); k++) {
                if (k) {
                    out += ',';
                }
                out += cells[k];
            }
            out += '\n';
        };
        line(header);
        for (const auto &r : rows) {
            line(r);
        }
        return out;
    }

    void write(const std::string &path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) {
            throw InputError("cannot write " + path);
        }
        f << str();
        if (!f) {
            throw InputError("failed while writing " + path);
        }
    }

    static Table parse(const std::string &text) {
        Table t;
        std::istringstream in(text);
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            if (line.empty()) {
                continue;
            }
            std::vector<std::string> cells;
            size_t start = 0;
            for (size_t comma; (comma = line.find(',', start)) != std::string::npos; start = comma + 1) {
                cells.push_back(line.substr(start, comma - start));
            }
            cells.push_back(line.substr(start));
            if (first) {
                t.header = std::move(cells);
                first = false;
            } else {
                if (cells.size() != t.header.size()) {
                    throw InputError("CSV row has " + std::to_string(cells.size()) + " cells, header has " +
                                     std::to_string(t.header.size()));
                }
                t.rows.push_back(std::move(cells));
            }
        }
        return t;
    }

    static Table read(const std::string &path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) {
            throw InputError("cannot read " + path);
        }
        std::stringstream ss;
        ss << f.rdbuf();
        return parse(ss.str());
    }
};

inline const std::vector<std::string> &trajectory_columns() {
    static const std::vector<std::string> cols = {"t_us",   "f_W",    "f_R",    "nsp",          "s2",          "n1_in",
                                                  "n2_in",  "n1_out", "n2_out", "flux1_per_us", "flux2_per_us"};
    return cols;
}

inline Table trajectory_table(const Trajectory &traj) {
    Table t;
    t.header = trajectory_columns();
    for (const auto &s : traj.samples) {
        t.rows.push_back({format_double(units::to_us(s.t)), format_double(s.write_envelope),
                          format_double(s.read_envelope), format_double(s.nsp), format_double(s.s2),
                          format_double(s.n1_in), format_double(s.n2_in), format_double(s.n1_out),
                          format_double(s.n2_out), format_double(units::to_per_us(s.flux1)),
                          format_double(units::to_per_us(s.flux2))});
    }
    return t;
}

/// Reads a trajectory CSV back into SI samples. Window tags are not part of
/// the column contract and are left at their default.
inline std::vector<TrajectorySample> read_trajectory(const Table &t) {
    if (t.header != trajectory_columns()) {
        throw InputError("not a trajectory CSV (unexpected header)");
    }
    std::vector<TrajectorySample> out;
    for (const auto &r : t.rows) {
        TrajectorySample s;
        s.t = units::us(parse_double(r[0]));
        s.write_envelope = parse_double(r[1]);
        s.read_envelope = parse_double(r[2]);
        s.nsp = parse_double(r[3]);
        s.s2 = parse_double(r[4]);
        s.n1_in = parse_double(r[5]);
        s.n2_in = parse_double(r[6]);
        s.n1_out = parse_double(r[7]);
        s.n2_out = parse_double(r[8]);
        s.flux1 = units::per_us(parse_double(r[9]));
        s.flux2 = units::per_us(parse_double(r[10]));
        out.push_back(s);
    }
    return out;
}

inline void append_correlations(Table &t, const CorrelationReport &r) {
    if (t.header.empty()) {
        t.header = {"quantity", "t1_us", "t2_us", "value", "provenance"};
    }
    for (const auto &row : r.rows()) {
        t.rows.push_back({row.quantity, format_double(units::to_us(row.t1)), format_double(units::to_us(row.t2)),
                          format_estimate(row.value), to_string(r.provenance)});
    }
}

inline Table diff_table(const std::vector<std::pair<Provenance, DiffTable>> &diffs) {
    Table t;
    t.header = {"quantity", "analytic_provenance", "analytic", "oracle", "relative_error", "tolerance", "pass"};
    for (const auto &[prov, d] : diffs) {
        for (const auto &r : d.rows) {
            t.rows.push_back({r.quantity, to_string(prov), format_estimate(r.analytic), format_estimate(r.oracle),
                              format_double(r.relative_error), format_double(d.tolerance), r.pass ? "1" : "0"});
        }
    }
    return t;
}

}  // namespace dlcz::cli
