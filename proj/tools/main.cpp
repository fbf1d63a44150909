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
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "dlcz/cli/config.hpp"
#include "dlcz/cli/runner.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 1, kNumerical = 2, kMismatch = 3 };

void print_warnings(const std::vector<std::string> &warnings) {
    for (const auto &w : warnings) {
        std::cerr << "warning: " << w << "\n";
    }
}

}  // namespace

int main(int argc, char **argv) {
    using namespace dlcz;
    using namespace dlcz::cli;

    CLI::App app{"Photon-pair generation and spin-wave memory simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::optional<double> tolerance;
    std::string figure_id;

    auto add_common = [&](CLI::App *cmd, bool config_required) {
        auto *opt = cmd->add_option("--config", config_path, "YAML run configuration");
        if (config_required) {
            opt->required();
        }
        cmd->add_option("--out", out_dir, "output directory")->capture_default_str();
    };

    auto *simulate = app.add_subcommand("simulate", "run one scenario; write trajectory, correlations, summary");
    add_common(simulate, true);

    auto *sweep = app.add_subcommand("sweep", "run the configured parameter sweep");
    add_common(sweep, true);
    sweep->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();

    auto *oracle = app.add_subcommand("oracle-check", "compare analytic results with the Fock-space oracle");
    add_common(oracle, true);
    oracle->add_option("--tolerance", tolerance, "relative tolerance (overrides oracle.tolerance)")
        ->check(CLI::PositiveNumber);

    auto *figure = app.add_subcommand("figure", "emit curve data for a preset figure");
    figure->add_option("id", figure_id, "fig2a, fig2b, fig3a or fig3b")->required();
    add_common(figure, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (simulate->parsed()) {
            RunConfig cfg = load_config(config_path);
            ScenarioResult r = run_scenario(cfg, out_dir);
            std::cout << summary_text(r.summary);
            return kOk;
        }
        if (sweep->parsed()) {
            RunConfig cfg = load_config(config_path);
            auto rows = run_sweep(cfg, out_dir, workers);
            size_t failed = 0;
            for (const auto &r : rows) {
                if (!r.error.empty()) {
                    failed++;
                    std::cerr << "point " << format_double(r.value) << ": " << r.error << "\n";
                }
            }
            std::cout << rows.size() << " points, " << failed << " failed\n";
            return failed == 0 ? kOk : kNumerical;
        }
        if (oracle->parsed()) {
            RunConfig cfg = load_config(config_path);
            double tol = tolerance.value_or(cfg.oracle_tolerance);
            OracleCheckResult r = run_oracle_check(cfg, out_dir, tol);
            print_warnings(r.notes);
            for (const auto &[prov, table] : r.diffs) {
                for (const auto &row : table.rows) {
                    std::cout << (row.pass ? "ok   " : "FAIL ") << to_string(prov) << " " << row.quantity
                              << " rel_err=" << format_double(row.relative_error) << "\n";
                }
            }
            std::cout << (r.pass() ? "PASS" : "FAIL") << " max relative error " << format_double(r.max_error())
                      << " (tolerance " << format_double(tol) << ")\n";
            return r.pass() ? kOk : kMismatch;
        }
        if (figure->parsed()) {
            IntegratorConfig integrator;
            if (!config_path.empty()) {
                integrator = load_config(config_path).integrator;
            }
            auto curves = run_figure(figure_id, out_dir, integrator);
            for (const auto &c : curves) {
                std::cout << c.file << "  " << c.label << "  n1_out(T_W)=" << format_double(c.result.summary.n1_out_TW)
                          << "  n2_out(end)=" << format_double(c.result.summary.n2_out_end) << "\n";
            }
            return kOk;
        }
    } catch (const TruncationError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumerical;
    } catch (const NumericalError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumerical;
    } catch (const InputError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumerical;
    }
    return kOk;
}
