/// Batch front end: loads a study definition, runs one analysis, and emits
/// its tables.  Every command buffers its complete output before touching
/// stdout or any file, so a failed run never leaves partial results behind.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gma/caseio.hpp"
#include "gma/indices.hpp"
#include "gma/report.hpp"
#include "gma/simulate.hpp"
#include "gma/transfer.hpp"

namespace {

using namespace gma;

/// One buffered output: destination ("-" = stdout) plus finished content.
struct Emission {
    std::string destination;
    std::string content;
};

void emit_all(const std::vector<Emission>& outputs) {
    for (const Emission& e : outputs) {
        if (e.destination == "-") {
            std::cout << e.content;
        } else {
            std::ofstream f(e.destination, std::ios::binary | std::ios::trunc);
            if (!f) throw Error("cannot write " + e.destination);
            f << e.content;
        }
    }
}

/// Modes the way the tables show them: conjugate pairs collapsed to the
/// positive-frequency member, least damped first.
std::vector<ModeInfo> listed_modes(const SystemModel& model,
                                   std::optional<std::pair<double, double>> band) {
    std::vector<ModeInfo> all = system_modes(model, band);
    std::vector<ModeInfo> kept;
    for (const ModeInfo& m : all)
        if (m.omega >= 0.0) kept.push_back(m);
    std::stable_sort(kept.begin(), kept.end(), [](const ModeInfo& l, const ModeInfo& r) {
        if (l.zeta != r.zeta) return l.zeta < r.zeta;
        if (l.freq_hz != r.freq_hz) return l.freq_hz < r.freq_hz;
        return l.sigma < r.sigma;
    });
    return kept;
}

std::optional<std::pair<double, double>> parse_band(const std::string& text) {
    if (text.empty()) return std::nullopt;
    const size_t colon = text.find(':');
    if (colon == std::string::npos)
        throw CLI::ValidationError("--band", "expected LOW:HIGH in Hz");
    try {
        const double lo = std::stod(text.substr(0, colon));
        const double hi = std::stod(text.substr(colon + 1));
        return std::make_pair(lo, hi);
    } catch (const std::exception&) {
        throw CLI::ValidationError("--band", "expected LOW:HIGH in Hz");
    }
}

std::vector<int> name_indices(const std::vector<std::string>& names,
                              const std::string& csv, const char* what) {
    std::vector<int> idx;
    std::istringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto it = std::find(names.begin(), names.end(), item);
        if (it == names.end())
            throw ParameterError(std::string(what) + " port '" + item +
                                 "' is not a known signal name");
        idx.push_back(static_cast<int>(it - names.begin()));
    }
    if (idx.empty()) throw ParameterError(std::string(what) + " port list is empty");
    return idx;
}

int run(int argc, char** argv) {
    CLI::App app{"generalized modal analysis for converter-dominated grids"};
    app.require_subcommand(1);

    std::string case_path, out_path = "-", csv_path, json_path, band_text;
    int mode_index = 1;
    double zeta_max = ModeSelection{}.zeta_max;
    double f_max = ModeSelection{}.f_max_hz;
    double sigma_floor = ModeSelection{}.sigma_floor;
    bool include_real = false, no_timestamp = false;
    std::string inputs_csv, outputs_csv, pair_text;
    double fmin = 1.0, fmax = 100.0;
    int points = 200;
    int step_bus = 1;
    double magnitude = 0.05, t_step = 0.1, t_end = 2.0, dt = 2e-4;
    int fit_order = 8, fit_iters = FitOptions{}.max_iterations;

    const auto add_case = [&](CLI::App* cmd) {
        cmd->add_option("case", case_path, "study definition file")->required();
    };

    CLI::App* cmd_modes = app.add_subcommand("modes", "list system modes");
    add_case(cmd_modes);
    cmd_modes->add_option("--band", band_text, "keep modes inside LOW:HIGH Hz");
    cmd_modes->add_option("--csv", csv_path, "also write the table as CSV");

    CLI::App* cmd_participate =
        app.add_subcommand("participate", "state participation in one mode");
    add_case(cmd_participate);
    cmd_participate->add_option("--mode", mode_index,
                                "1-based row in the modes table");
    cmd_participate->add_option("--csv", csv_path, "also write the table as CSV");

    CLI::App* cmd_gma = app.add_subcommand(
        "gma", "eigenvalue sensitivity to a feedback transfer between ports");
    add_case(cmd_gma);
    cmd_gma->add_option("--mode", mode_index, "1-based row in the modes table");
    cmd_gma->add_option("--inputs", inputs_csv, "comma-separated input signal names")
        ->required();
    cmd_gma->add_option("--outputs", outputs_csv, "comma-separated output signal names")
        ->required();
    cmd_gma->add_option("--out", out_path, "output file ('-' = stdout)");

    CLI::App* cmd_scan = app.add_subcommand("scan", "impedance frequency sweep");
    add_case(cmd_scan);
    cmd_scan->add_option("--pair", pair_text, "observe,inject bus pair, e.g. 2,2")
        ->required();
    cmd_scan->add_option("--fmin", fmin, "sweep start, Hz");
    cmd_scan->add_option("--fmax", fmax, "sweep end, Hz");
    cmd_scan->add_option("--points", points, "sample count");
    cmd_scan->add_option("--out", out_path, "output file ('-' = stdout)");

    CLI::App* cmd_indices =
        app.add_subcommand("indices", "voltage-dominance and self-strength screening");
    add_case(cmd_indices);
    cmd_indices->add_option("--zeta-max", zeta_max, "damping-ratio cutoff");
    cmd_indices->add_option("--f-max", f_max, "frequency cutoff, Hz");
    cmd_indices->add_option("--sigma-floor", sigma_floor, "decay-rate floor, 1/s");
    cmd_indices->add_flag("--include-real", include_real, "screen real modes too");
    cmd_indices->add_option("--json", json_path, "write the JSON report here");
    cmd_indices->add_option("--csv", csv_path, "write the flat CSV here");
    cmd_indices->add_flag("--no-timestamp", no_timestamp,
                          "omit the timestamp for byte-identical reruns");

    CLI::App* cmd_simulate =
        app.add_subcommand("simulate", "step-disturbance time response");
    add_case(cmd_simulate);
    cmd_simulate->add_option("--step-bus", step_bus, "bus drawing the current step")
        ->required();
    cmd_simulate->add_option("--magnitude", magnitude, "d-axis current draw, pu");
    cmd_simulate->add_option("--t-step", t_step, "step time, s");
    cmd_simulate->add_option("--t-end", t_end, "end time, s");
    cmd_simulate->add_option("--dt", dt, "sample interval, s");
    cmd_simulate->add_option("--out", out_path, "output file ('-' = stdout)");

    CLI::App* cmd_fit =
        app.add_subcommand("fit", "rational approximation of sampled response data");
    cmd_fit->add_option("samples", case_path, "frequency-response CSV")->required();
    cmd_fit->add_option("--order", fit_order, "pole count");
    cmd_fit->add_option("--iters", fit_iters, "relocation iterations");
    cmd_fit->add_option("--out", out_path, "output file ('-' = stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    std::vector<Emission> outputs;

    if (cmd_fit->parsed()) {
        const std::vector<FrequencySample> samples = read_samples_csv(case_path);
        FitOptions opt;
        opt.max_iterations = fit_iters;
        const RationalFit fit = vector_fit(samples, fit_order, opt);
        outputs.push_back({out_path, fit_json(fit)});
        emit_all(outputs);
        return 0;
    }

    const LoadedCase lc = load_case(case_path);
    const SystemModel model = build_system(lc.def);

    if (cmd_modes->parsed()) {
        const std::vector<ModeInfo> modes = listed_modes(model, parse_band(band_text));
        outputs.push_back({"-", mode_table_text(modes)});
        if (!csv_path.empty()) outputs.push_back({csv_path, mode_table_csv(modes)});
    } else if (cmd_participate->parsed()) {
        const std::vector<ModeInfo> modes = listed_modes(model, std::nullopt);
        if (mode_index < 1 || mode_index > static_cast<int>(modes.size()))
            throw ParameterError("--mode must be between 1 and " +
                                 std::to_string(modes.size()));
        const int col = model.modal_index(modes[static_cast<size_t>(mode_index - 1)].lambda);
        const ComplexMatrix p = participation_matrix(model.modal());
        std::vector<ParticipationRow> rows;
        for (int k = 0; k < p.rows(); ++k)
            rows.push_back({model.whole.ss.state_names[static_cast<size_t>(k)], p(k, col)});
        std::stable_sort(rows.begin(), rows.end(),
                         [](const ParticipationRow& l, const ParticipationRow& r) {
                             return std::abs(l.p) > std::abs(r.p);
                         });
        outputs.push_back({"-", participation_csv(rows)});
        if (!csv_path.empty()) outputs.push_back({csv_path, participation_csv(rows)});
    } else if (cmd_gma->parsed()) {
        const std::vector<ModeInfo> modes = listed_modes(model, std::nullopt);
        if (mode_index < 1 || mode_index > static_cast<int>(modes.size()))
            throw ParameterError("--mode must be between 1 and " +
                                 std::to_string(modes.size()));
        const Complex lambda = modes[static_cast<size_t>(mode_index - 1)].lambda;
        const StateSpace& ss = model.whole.ss;
        const std::vector<int> in_idx = name_indices(ss.input_names, inputs_csv, "input");
        const std::vector<int> out_idx =
            name_indices(ss.output_names, outputs_csv, "output");
        const PortSelection sel = PortSelection::io_ports(ss, in_idx, out_idx);
        const int i = model.modal_index(lambda);
        const ComplexMatrix sens = gma_sensitivity(model.modal(), sel, i);
        std::vector<std::string> in_names, out_names;
        for (const int k : in_idx) in_names.push_back(ss.input_names[static_cast<size_t>(k)]);
        for (const int k : out_idx)
            out_names.push_back(ss.output_names[static_cast<size_t>(k)]);
        outputs.push_back({out_path, sensitivity_json(lambda, out_names, in_names, sens)});
    } else if (cmd_scan->parsed()) {
        const size_t comma = pair_text.find(',');
        if (comma == std::string::npos)
            throw ParameterError("--pair needs OBSERVE,INJECT bus numbers");
        const int observe = std::stoi(pair_text.substr(0, comma));
        const int inject = std::stoi(pair_text.substr(comma + 1));
        if (points < 2) throw ParameterError("--points must be at least 2");
        if (!(fmin > 0.0) || !(fmax > fmin))
            throw ParameterError("need 0 < fmin < fmax");
        std::vector<double> grid(static_cast<size_t>(points));
        for (int k = 0; k < points; ++k)
            grid[static_cast<size_t>(k)] = fmin + (fmax - fmin) * k / (points - 1);
        const std::vector<ScanPoint> pts = impedance_scan(model, observe, inject, grid);
        std::vector<ComplexMatrix> z;
        for (const ScanPoint& p : pts) z.push_back(p.z);
        outputs.push_back({out_path, scan_csv(grid, z)});
    } else if (cmd_indices->parsed()) {
        ModeSelection sel;
        sel.zeta_max = zeta_max;
        sel.f_max_hz = f_max;
        sel.sigma_floor = sigma_floor;
        sel.include_real = include_real;
        IndexReport rep = build_index_report(model, sel);
        rep.case_hash = lc.content_hash;
        if (!no_timestamp) rep.timestamp = timestamp_iso();
        const std::string json = index_report_json(rep, lc.def);
        if (json_path.empty() && csv_path.empty()) {
            outputs.push_back({"-", json});
        } else {
            if (!json_path.empty()) outputs.push_back({json_path, json});
            if (!csv_path.empty())
                outputs.push_back({csv_path, index_report_csv(rep, lc.def)});
        }
    } else if (cmd_simulate->parsed()) {
        if (step_bus < 1 || step_bus > model.buses())
            throw ParameterError("--step-bus out of range");
        if (!(magnitude == magnitude) || !(t_end > t_step) || !(dt > 0.0))
            throw ParameterError("need t_end > t_step and dt > 0");
        const StateSpace& ss = model.whole.ss;
        const int uidx = 2 * (step_bus - 1);
        const auto input = [&](double t) {
            Vector u = Vector::Zero(ss.r());
            if (t >= t_step) u(uidx) = -magnitude;
            return u;
        };
        const SimulationResult sim =
            simulate(ss, Vector::Zero(ss.n()), input, t_end, dt);
        outputs.push_back({out_path, trajectory_csv(sim, ss.output_names)});
    }

    emit_all(outputs);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CLI::ParseError& e) {
        CLI::App dummy;
        return dummy.exit(e);
    } catch (const CaseFormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
