#pragma once

#include <cinttypes>
#include <cstdio>
#include <ctime>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "gma/indices.hpp"
#include "gma/simulate.hpp"
#include "gma/vectorfit.hpp"

namespace gma {

/// All numeric output goes through this: fixed scientific notation, nine
/// significant digits, so reruns diff byte-for-byte.  Infinities (the
/// insensitive-pair sentinel) keep their sign as words.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0.0 ? "+inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.8e", v);
    return buf;
}

inline std::string format_hash(std::uint64_t h) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
    return buf;
}

/// Current UTC time, second resolution, ISO-8601.
inline std::string timestamp_iso() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Minimal deterministic JSON emitter: insertion-ordered keys, two-space
/// indent, numbers routed through format_number.  Arrays print inline by
/// default; pass wide=true for one element per line.
class JsonWriter {
public:
    void begin_object() {
        prefix();
        stack_.push_back({false, false, 0});
        out_ += '{';
    }
    void end_object() { close('}'); }
    void begin_array(bool wide = false) {
        prefix();
        stack_.push_back({true, wide, 0});
        out_ += '[';
    }
    void end_array() { close(']'); }

    void key(const std::string& k) {
        Level& l = stack_.back();
        out_ += l.items++ ? ",\n" : "\n";
        out_.append(2 * stack_.size(), ' ');
        out_ += '"' + escape(k) + "\": ";
        pending_key_ = true;
    }

    void value(const std::string& s) {
        prefix();
        out_ += '"' + escape(s) + '"';
    }
    void value(const char* s) { value(std::string(s)); }
    void value(double v) {
        prefix();
        const std::string f = format_number(v);
        if (std::isfinite(v))
            out_ += f;
        else
            out_ += '"' + f + '"';  // JSON has no literal for these
    }
    void value_int(long long v) {
        prefix();
        out_ += std::to_string(v);
    }
    void value(bool b) {
        prefix();
        out_ += b ? "true" : "false";
    }
    /// Complex values as two-element [re, im] arrays.
    void value(Complex z) {
        begin_array();
        value(z.real());
        value(z.imag());
        end_array();
    }

    std::string take() {
        out_ += '\n';
        return std::move(out_);
    }

private:
    struct Level {
        bool array;
        bool wide;
        int items;
    };

    void prefix() {
        if (stack_.empty()) return;
        if (pending_key_) {
            pending_key_ = false;
            return;
        }
        Level& l = stack_.back();
        if (l.array && !l.wide) {
            if (l.items++) out_ += ", ";
        } else {
            out_ += l.items++ ? ",\n" : "\n";
            out_.append(2 * stack_.size(), ' ');
        }
    }
    void close(char c) {
        const Level l = stack_.back();
        stack_.pop_back();
        if (l.items > 0 && (!l.array || l.wide)) {
            out_ += '\n';
            out_.append(2 * stack_.size(), ' ');
        }
        out_ += c;
        pending_key_ = false;
    }
    static std::string escape(const std::string& s) {
        std::string r;
        for (const char c : s) {
            if (c == '"' || c == '\\')
                r += std::string("\\") + c;
            else if (c == '\n')
                r += "\\n";
            else if (static_cast<unsigned char>(c) < 0x20) {
                char buf[8];
                std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                r += buf;
            } else
                r += c;
        }
        return r;
    }

    std::string out_;
    std::vector<Level> stack_;
    bool pending_key_ = false;
};

namespace repdetail {

inline void append_csv_row(std::string& out, const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
    }
    out += '\n';
}

}  // namespace repdetail

/// Mode table: one row per mode, least damped first.
inline std::string mode_table_csv(const std::vector<ModeInfo>& modes) {
    std::string out;
    repdetail::append_csv_row(out, {"sigma_1_per_s", "omega_rad_per_s", "f_Hz", "zeta"});
    for (const ModeInfo& m : modes)
        repdetail::append_csv_row(out, {format_number(m.sigma), format_number(m.omega),
                                        format_number(m.freq_hz), format_number(m.zeta)});
    return out;
}

inline std::string mode_table_text(const std::vector<ModeInfo>& modes) {
    std::ostringstream out;
    out << std::left << std::setw(18) << "sigma_1_per_s" << std::setw(18)
        << "omega_rad_per_s" << std::setw(18) << "f_Hz" << std::setw(18) << "zeta" << "\n";
    for (const ModeInfo& m : modes)
        out << std::setw(18) << format_number(m.sigma) << std::setw(18)
            << format_number(m.omega) << std::setw(18) << format_number(m.freq_hz)
            << std::setw(18) << format_number(m.zeta) << "\n";
    return out.str();
}

/// Participation of every state in one mode, largest share first.
struct ParticipationRow {
    std::string state;
    Complex p;
};

inline std::string participation_csv(const std::vector<ParticipationRow>& rows) {
    std::string out;
    repdetail::append_csv_row(out, {"state", "participation_mag", "participation_re",
                                    "participation_im"});
    for (const ParticipationRow& r : rows)
        repdetail::append_csv_row(out, {r.state, format_number(std::abs(r.p)),
                                        format_number(r.p.real()),
                                        format_number(r.p.imag())});
    return out;
}

/// Frequency sweep of a 2x2 dq transfer, magnitude/phase per element.
inline std::string scan_csv(const std::vector<double>& f_hz,
                            const std::vector<ComplexMatrix>& z, const char prefix = 'Z') {
    if (f_hz.size() != z.size())
        throw DimensionError("scan_csv: frequency grid and sample count differ");
    std::string out;
    const char* axis = "dq";
    std::vector<std::string> head = {"f_Hz"};
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            const std::string el = std::string(1, prefix) + axis[a] + axis[b];
            head.push_back(el + "_mag");
            head.push_back(el + "_phase_deg");
        }
    repdetail::append_csv_row(out, head);
    for (size_t k = 0; k < f_hz.size(); ++k) {
        std::vector<std::string> row = {format_number(f_hz[k])};
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                const Complex v = z[k](a, b);
                row.push_back(format_number(std::abs(v)));
                row.push_back(format_number(std::arg(v) * 180.0 / M_PI));
            }
        repdetail::append_csv_row(out, row);
    }
    return out;
}

/// Time series: one column per named output.
inline std::string trajectory_csv(const SimulationResult& sim,
                                  const std::vector<std::string>& output_names) {
    if (static_cast<Eigen::Index>(output_names.size()) != sim.outputs.rows())
        throw DimensionError("trajectory_csv: output name count does not match rows");
    std::string out;
    std::vector<std::string> head = {"t_s"};
    head.insert(head.end(), output_names.begin(), output_names.end());
    repdetail::append_csv_row(out, head);
    for (Eigen::Index k = 0; k < sim.times.size(); ++k) {
        std::vector<std::string> row = {format_number(sim.times(k))};
        for (Eigen::Index j = 0; j < sim.outputs.rows(); ++j)
            row.push_back(format_number(sim.outputs(j, k)));
        repdetail::append_csv_row(out, row);
    }
    return out;
}

/// Rational fit as JSON: poles, residues, constant/linear terms, error.
inline std::string fit_json(const RationalFit& fit) {
    JsonWriter w;
    w.begin_object();
    w.key("order");
    w.value_int(fit.order());
    w.key("rows");
    w.value_int(fit.rows());
    w.key("cols");
    w.value_int(fit.cols());
    w.key("rms_error");
    w.value(fit.rms);
    w.key("poles");
    w.begin_array(true);
    for (const Complex& p : fit.poles) w.value(p);
    w.end_array();
    w.key("residues");
    w.begin_array(true);
    for (const ComplexMatrix& r : fit.residues) {
        w.begin_array(true);
        for (int i = 0; i < r.rows(); ++i) {
            w.begin_array();
            for (int j = 0; j < r.cols(); ++j) w.value(r(i, j));
            w.end_array();
        }
        w.end_array();
    }
    w.end_array();
    w.key("constant_term");
    w.begin_array(true);
    for (int i = 0; i < fit.d.rows(); ++i) {
        w.begin_array();
        for (int j = 0; j < fit.d.cols(); ++j) w.value(fit.d(i, j));
        w.end_array();
    }
    w.end_array();
    w.key("linear_term");
    w.begin_array(true);
    for (int i = 0; i < fit.e.rows(); ++i) {
        w.begin_array();
        for (int j = 0; j < fit.e.cols(); ++j) w.value(fit.e(i, j));
        w.end_array();
    }
    w.end_array();
    w.end_object();
    return w.take();
}

namespace repdetail {

inline std::string mode_id(size_t index) { return "mode" + std::to_string(index + 1); }

inline void mode_fields(JsonWriter& w, const ModeInfo& m) {
    w.begin_object();
    w.key("sigma_1_per_s");
    w.value(m.sigma);
    w.key("omega_rad_per_s");
    w.value(m.omega);
    w.key("f_Hz");
    w.value(m.freq_hz);
    w.key("zeta");
    w.value(m.zeta);
    w.end_object();
}

}  // namespace repdetail

/// Screening report as JSON: modes, VDM tables keyed by source and bus
/// labels, STG per source, advisories.
inline std::string index_report_json(const IndexReport& rep, const NetworkCase& def) {
    JsonWriter w;
    w.begin_object();
    w.key("case");
    w.value(rep.case_name);
    w.key("case_hash");
    w.value(format_hash(rep.case_hash));
    if (!rep.timestamp.empty()) {
        w.key("timestamp");
        w.value(rep.timestamp);
    }
    w.key("thresholds");
    w.begin_object();
    w.key("zeta_max");
    w.value(rep.subset.thresholds.zeta_max);
    w.key("f_max_hz");
    w.value(rep.subset.thresholds.f_max_hz);
    w.key("sigma_floor");
    w.value(rep.subset.thresholds.sigma_floor);
    w.key("include_real");
    w.value(rep.subset.thresholds.include_real);
    w.end_object();
    w.key("modes");
    w.begin_object();
    for (size_t k = 0; k < rep.subset.modes.size(); ++k) {
        w.key(repdetail::mode_id(k));
        repdetail::mode_fields(w, rep.subset.modes[k]);
    }
    w.end_object();
    w.key("vdm");
    w.begin_object();
    for (size_t k = 0; k < rep.vdm_tables.size(); ++k) {
        w.key(repdetail::mode_id(k));
        w.begin_object();
        const Matrix& t = rep.vdm_tables[k];
        for (size_t a = 0; a < rep.source_labels.size(); ++a) {
            w.key(rep.source_labels[a]);
            w.begin_object();
            for (int j = 1; j <= t.cols(); ++j) {
                w.key(def.bus_label(j));
                w.value(t(static_cast<int>(a), j - 1));
            }
            w.end_object();
        }
        w.end_object();
    }
    w.end_object();
    w.key("stg");
    w.begin_object();
    for (size_t a = 0; a < rep.stg_rows.size(); ++a) {
        const StgResult& r = rep.stg_rows[a];
        w.key(r.label);
        w.begin_object();
        w.key("bus");
        w.value_int(r.source_bus);
        w.key("kind");
        w.value(rep.source_kinds[a]);
        w.key("value");
        w.value(r.value);
        size_t crit = 0;
        for (size_t k = 0; k < rep.subset.modes.size(); ++k)
            if (rep.subset.modes[k].lambda == r.argmin.lambda) crit = k;
        w.key("critical_mode");
        w.value(repdetail::mode_id(crit));
        w.end_object();
    }
    w.end_object();
    w.key("advisories");
    w.begin_array(true);
    for (const std::string& a : rep.advisories) w.value(a);
    w.end_array();
    w.end_object();
    return w.take();
}

/// Flat CSV twin of the JSON report: quantity, mode, source, target, value.
inline std::string index_report_csv(const IndexReport& rep, const NetworkCase& def) {
    std::string out;
    repdetail::append_csv_row(out, {"quantity", "mode", "source", "target", "value"});
    for (size_t k = 0; k < rep.subset.modes.size(); ++k) {
        const ModeInfo& m = rep.subset.modes[k];
        repdetail::append_csv_row(out, {"mode_sigma", repdetail::mode_id(k), "", "",
                                        format_number(m.sigma)});
        repdetail::append_csv_row(out, {"mode_f_Hz", repdetail::mode_id(k), "", "",
                                        format_number(m.freq_hz)});
        repdetail::append_csv_row(out, {"mode_zeta", repdetail::mode_id(k), "", "",
                                        format_number(m.zeta)});
    }
    for (size_t k = 0; k < rep.vdm_tables.size(); ++k) {
        const Matrix& t = rep.vdm_tables[k];
        for (size_t a = 0; a < rep.source_labels.size(); ++a)
            for (int j = 1; j <= t.cols(); ++j)
                repdetail::append_csv_row(
                    out, {"vdm", repdetail::mode_id(k), rep.source_labels[a],
                          def.bus_label(j), format_number(t(static_cast<int>(a), j - 1))});
    }
    for (size_t a = 0; a < rep.stg_rows.size(); ++a) {
        const StgResult& r = rep.stg_rows[a];
        size_t crit = 0;
        for (size_t k = 0; k < rep.subset.modes.size(); ++k)
            if (rep.subset.modes[k].lambda == r.argmin.lambda) crit = k;
        repdetail::append_csv_row(out, {"stg", repdetail::mode_id(crit), r.label, "",
                                        format_number(r.value)});
    }
    return out;
}

/// Port-sensitivity report for one mode: how the eigenvalue moves per unit
/// of feedback transfer between the selected outputs and inputs.
inline std::string sensitivity_json(Complex lambda, const std::vector<std::string>& outputs,
                                    const std::vector<std::string>& inputs,
                                    const ComplexMatrix& sens) {
    JsonWriter w;
    w.begin_object();
    w.key("lambda");
    w.value(lambda);
    w.key("outputs");
    w.begin_array(true);
    for (const std::string& s : outputs) w.value(s);
    w.end_array();
    w.key("inputs");
    w.begin_array(true);
    for (const std::string& s : inputs) w.value(s);
    w.end_array();
    w.key("sensitivity");
    w.begin_array(true);
    for (int i = 0; i < sens.rows(); ++i) {
        w.begin_array();
        for (int j = 0; j < sens.cols(); ++j) w.value(sens(i, j));
        w.end_array();
    }
    w.end_array();
    w.end_object();
    return w.take();
}

}  // namespace gma
