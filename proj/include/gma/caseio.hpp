#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gma/network.hpp"

namespace gma {

namespace iodetail {

/// Maps every value in a well-formed JSON document to its 1-based source
/// line, keyed by a human-readable path ("branches[2].x").  Parsed documents
/// lose their positions, so schema diagnostics rebuild them from this index.
inline std::map<std::string, int> index_locations(const std::string& text) {
    std::map<std::string, int> out;
    int line = 1;
    size_t i = 0;
    const size_t n = text.size();

    const auto skip_ws = [&] {
        while (i < n && (text[i] == ' ' || text[i] == '\t' || text[i] == '\r' ||
                         text[i] == '\n')) {
            if (text[i] == '\n') ++line;
            ++i;
        }
    };
    const auto read_string = [&]() -> std::string {
        std::string s;
        ++i;  // opening quote
        while (i < n && text[i] != '"') {
            if (text[i] == '\\' && i + 1 < n) {
                s += text[i];
                s += text[i + 1];
                i += 2;
            } else {
                if (text[i] == '\n') ++line;
                s += text[i];
                ++i;
            }
        }
        if (i < n) ++i;  // closing quote
        return s;
    };

    const std::function<void(const std::string&)> value = [&](const std::string& path) {
        skip_ws();
        if (i >= n) return;
        out.emplace(path, line);
        const char c = text[i];
        if (c == '{') {
            ++i;
            skip_ws();
            if (i < n && text[i] == '}') {
                ++i;
                return;
            }
            while (i < n) {
                skip_ws();
                const std::string key = read_string();
                skip_ws();
                if (i < n) ++i;  // ':'
                value(path.empty() ? key : path + "." + key);
                skip_ws();
                if (i < n && text[i] == ',') {
                    ++i;
                    continue;
                }
                if (i < n) ++i;  // '}'
                break;
            }
        } else if (c == '[') {
            ++i;
            skip_ws();
            if (i < n && text[i] == ']') {
                ++i;
                return;
            }
            int idx = 0;
            while (i < n) {
                value(path + "[" + std::to_string(idx++) + "]");
                skip_ws();
                if (i < n && text[i] == ',') {
                    ++i;
                    continue;
                }
                if (i < n) ++i;  // ']'
                break;
            }
        } else if (c == '"') {
            read_string();
        } else {
            while (i < n && text[i] != ',' && text[i] != '}' && text[i] != ']' &&
                   text[i] != ' ' && text[i] != '\t' && text[i] != '\r' && text[i] != '\n')
                ++i;
        }
    };
    value("");
    return out;
}

struct SourceInfo {
    std::string display;              // file name used in diagnostics
    std::map<std::string, int> lines;  // path -> line
};

/// A JSON node plus the breadcrumbs needed for precise error messages.
/// Every accessor throws CaseFormatError with "file:line: path: problem".
class Cursor {
public:
    Cursor(const nlohmann::json& node, std::string path,
           std::shared_ptr<const SourceInfo> src)
        : node_(&node), path_(std::move(path)), src_(std::move(src)) {}

    [[noreturn]] void fail(const std::string& msg) const {
        std::string where = src_->display + ":" + std::to_string(line_of(path_)) + ": ";
        where += path_.empty() ? "top level" : path_;
        throw CaseFormatError(where + ": " + msg);
    }

    const nlohmann::json& raw() const { return *node_; }
    const std::string& path() const { return path_; }

    void require_object() const {
        if (!node_->is_object()) fail("expected an object");
    }
    void require_array() const {
        if (!node_->is_array()) fail("expected an array");
    }
    size_t size() const { return node_->size(); }
    bool has(const std::string& key) const {
        return node_->is_object() && node_->contains(key);
    }

    /// Rejects keys outside the allowed set, pointing at the offending line.
    void check_keys(std::initializer_list<const char*> allowed) const {
        require_object();
        for (const auto& item : node_->items()) {
            const bool known = std::any_of(allowed.begin(), allowed.end(),
                                           [&](const char* a) { return item.key() == a; });
            if (!known) {
                const std::string child = join(item.key());
                std::string w = src_->display + ":" + std::to_string(line_of(child)) + ": " +
                                child;
                throw CaseFormatError(w + ": unknown key");
            }
        }
    }

    Cursor child(const std::string& key) const {
        if (!has(key)) fail("missing required key \"" + key + "\"");
        return Cursor(node_->at(key), join(key), src_);
    }
    Cursor child(size_t index) const {
        return Cursor(node_->at(index), path_ + "[" + std::to_string(index) + "]", src_);
    }

    double as_number() const {
        if (!node_->is_number()) fail("expected a number");
        return node_->get<double>();
    }
    int as_integer() const {
        if (!node_->is_number_integer()) fail("expected an integer");
        return node_->get<int>();
    }
    std::string as_string() const {
        if (!node_->is_string()) fail("expected a string");
        return node_->get<std::string>();
    }

    double number(const std::string& key) const { return child(key).as_number(); }
    double number_or(const std::string& key, double fallback) const {
        return has(key) ? child(key).as_number() : fallback;
    }
    int integer(const std::string& key) const { return child(key).as_integer(); }
    std::string str(const std::string& key) const { return child(key).as_string(); }
    std::string str_or(const std::string& key, const std::string& fallback) const {
        return has(key) ? child(key).as_string() : fallback;
    }

    /// Exactly-one-of accessor for aliased quantities; `scale` converts the
    /// second spelling into the first (e.g. inductance into reactance).
    double aliased(const std::string& primary, const std::string& alt, double scale,
                   std::optional<double> fallback = std::nullopt) const {
        const bool a = has(primary), b = has(alt);
        if (a && b)
            fail("\"" + primary + "\" and \"" + alt + "\" are two spellings of the same "
                 "quantity; give only one");
        if (a) return child(primary).as_number();
        if (b) return scale * child(alt).as_number();
        if (fallback) return *fallback;
        fail("needs \"" + primary + "\" or \"" + alt + "\"");
    }

private:
    std::string join(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }
    int line_of(const std::string& path) const {
        const auto it = src_->lines.find(path);
        return it == src_->lines.end() ? 1 : it->second;
    }

    const nlohmann::json* node_;
    std::string path_;
    std::shared_ptr<const SourceInfo> src_;
};

inline std::string read_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw CaseFormatError("cannot open " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace iodetail

/// Frequency-response samples from CSV: first column f in Hz, then Re/Im
/// interleaved per matrix element in row-major order.  The port matrix must
/// be square, so the column count fixes its size.  An optional header line
/// is skipped.
inline std::vector<FrequencySample> read_samples_csv(const std::filesystem::path& file) {
    const std::string text = iodetail::read_file(file);
    std::vector<FrequencySample> out;
    std::istringstream lines(text);
    std::string linebuf;
    int lineno = 0;
    int ports = -1;
    while (std::getline(lines, linebuf)) {
        ++lineno;
        if (linebuf.empty() || linebuf.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        std::vector<double> fields;
        std::istringstream cells(linebuf);
        std::string cell;
        bool numeric = true;
        while (std::getline(cells, cell, ',')) {
            try {
                size_t used = 0;
                fields.push_back(std::stod(cell, &used));
                if (cell.find_first_not_of(" \t\r", used) != std::string::npos)
                    numeric = false;
            } catch (const std::exception&) {
                numeric = false;
            }
            if (!numeric) break;
        }
        if (!numeric) {
            if (out.empty() && ports < 0) continue;  // header row
            throw CaseFormatError(file.string() + ":" + std::to_string(lineno) +
                                  ": non-numeric cell in sample table");
        }
        if (fields.size() < 3 || (fields.size() - 1) % 2 != 0)
            throw CaseFormatError(file.string() + ":" + std::to_string(lineno) +
                                  ": expected f_Hz plus Re/Im pairs per element");
        const int elems = static_cast<int>((fields.size() - 1) / 2);
        const int r = static_cast<int>(std::lround(std::sqrt(double(elems))));
        if (r * r != elems)
            throw CaseFormatError(file.string() + ":" + std::to_string(lineno) +
                                  ": " + std::to_string(elems) +
                                  " elements do not form a square port matrix");
        if (ports < 0) ports = r;
        if (r != ports)
            throw CaseFormatError(file.string() + ":" + std::to_string(lineno) +
                                  ": inconsistent column count");
        FrequencySample s;
        s.omega = 2.0 * M_PI * fields[0];
        s.value.resize(ports, ports);
        for (int e = 0; e < elems; ++e)
            s.value(e / ports, e % ports) = Complex(fields[1 + 2 * e], fields[2 + 2 * e]);
        out.push_back(std::move(s));
    }
    if (out.empty()) throw CaseFormatError(file.string() + ": no samples found");
    return out;
}

namespace iodetail {

inline OperatingPoint parse_op(const Cursor& c) {
    c.check_keys({"v", "theta", "theta_deg", "p", "q"});
    OperatingPoint op;
    op.v = c.number_or("v", 1.0);
    op.theta = c.aliased("theta", "theta_deg", M_PI / 180.0, 0.0);
    op.p = c.number_or("p", 0.0);
    op.q = c.number_or("q", 0.0);
    return op;
}

inline DeviceSpec parse_device_spec(const Cursor& dev, const std::string& kind,
                                    const std::filesystem::path& base_dir) {
    if (kind == "data") {
        const std::filesystem::path rel = dev.str("samples");
        const std::filesystem::path full = rel.is_absolute() ? rel : base_dir / rel;
        const int order = dev.has("order") ? dev.child("order").as_integer() : 8;
        try {
            return admittance_from_samples(read_samples_csv(full), order);
        } catch (const FitError& e) {
            dev.fail(std::string("sample fit failed: ") + e.what());
        }
    }
    Cursor p = dev.has("params") ? dev.child("params") : dev;
    const bool bare = !dev.has("params");
    // with no params block the defaults apply; any tuning keys then live in
    // a "params" object, keeping the device entry itself flat and checkable
    if (kind == "gfl") {
        GflParams g;
        if (!bare) {
            p.check_keys({"r_f", "x_f", "f_current", "pll_kp", "pll_ki", "s_rated"});
            g.r_f = p.number_or("r_f", g.r_f);
            g.x_f = p.number_or("x_f", g.x_f);
            g.f_current = p.number_or("f_current", g.f_current);
            g.pll_kp = p.number_or("pll_kp", g.pll_kp);
            g.pll_ki = p.number_or("pll_ki", g.pll_ki);
            g.s_rated = p.number_or("s_rated", g.s_rated);
        }
        return g;
    }
    if (kind == "gfm") {
        GfmParams g;
        if (!bare) {
            p.check_keys(
                {"r_f", "x_f", "f_current", "f_voltage", "droop_mp", "s_rated", "v_set"});
            g.r_f = p.number_or("r_f", g.r_f);
            g.x_f = p.number_or("x_f", g.x_f);
            g.f_current = p.number_or("f_current", g.f_current);
            g.f_voltage = p.number_or("f_voltage", g.f_voltage);
            g.droop_mp = p.number_or("droop_mp", g.droop_mp);
            g.s_rated = p.number_or("s_rated", g.s_rated);
            if (p.has("v_set")) g.v_set = p.number("v_set");
        }
        return g;
    }
    if (kind == "sg") {
        SgParams g;
        if (!bare) {
            p.check_keys({"r_a", "x_d_prime", "h", "d", "s_rated"});
            g.r_a = p.number_or("r_a", g.r_a);
            g.x_d_prime = p.number_or("x_d_prime", g.x_d_prime);
            g.h = p.number_or("h", g.h);
            g.d = p.number_or("d", g.d);
            g.s_rated = p.number_or("s_rated", g.s_rated);
        }
        return g;
    }
    dev.child("kind").fail("unknown device kind \"" + kind +
                           "\" (expected gfl, gfm, sg, or data)");
}

}  // namespace iodetail

/// Parses a study definition from structured text.  `display` names the
/// source in diagnostics; `base_dir` anchors relative sample paths.
inline NetworkCase parse_case(const std::string& text, const std::string& display,
                              const std::filesystem::path& base_dir) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const size_t upto = std::min(e.byte > 0 ? e.byte - 1 : 0, text.size());
        const int line =
            1 + static_cast<int>(std::count(text.begin(), text.begin() + upto, '\n'));
        throw CaseFormatError(display + ":" + std::to_string(line) +
                              ": not well-formed: " + e.what());
    }
    auto src = std::make_shared<iodetail::SourceInfo>();
    src->display = display;
    src->lines = iodetail::index_locations(text);
    const iodetail::Cursor root(doc, "", src);
    root.check_keys({"name", "system", "buses", "branches", "loads", "devices"});

    NetworkCase def;
    def.name = root.str_or("name", "case");

    const iodetail::Cursor system = root.child("system");
    system.check_keys({"f_base_hz", "s_base_mva", "eps"});
    def.base.f_base_hz = system.number("f_base_hz");
    def.base.s_base_mva = system.number_or("s_base_mva", 100.0);
    def.eps = system.number_or("eps", 1e-6);
    if (!(def.base.f_base_hz > 0.0))
        system.child("f_base_hz").fail("base frequency must be positive");
    const double w = def.base.omega_base();

    const iodetail::Cursor buses = root.child("buses");
    if (buses.raw().is_number_integer()) {
        def.buses = buses.as_integer();
    } else if (buses.raw().is_array()) {
        def.buses = static_cast<int>(buses.size());
        for (size_t i = 0; i < buses.size(); ++i)
            def.bus_labels.push_back(buses.child(i).as_string());
    } else {
        buses.fail("expected a bus count or an array of bus labels");
    }

    const iodetail::Cursor branches = root.child("branches");
    branches.require_array();
    for (size_t i = 0; i < branches.size(); ++i) {
        const iodetail::Cursor br = branches.child(i);
        br.check_keys({"from", "to", "r", "x", "l", "b", "c_shunt"});
        Branch b;
        b.from = br.integer("from");
        b.to = br.integer("to");
        b.r = br.number_or("r", 0.0);
        b.x = br.aliased("x", "l", w);           // reactance, or inductance * w
        b.b = br.aliased("b", "c_shunt", w, 0.0);  // susceptance, or capacitance * w
        def.branches.push_back(b);
    }

    if (root.has("loads")) {
        const iodetail::Cursor loads = root.child("loads");
        loads.require_array();
        for (size_t i = 0; i < loads.size(); ++i) {
            const iodetail::Cursor ld = loads.child(i);
            ld.check_keys({"bus", "r", "x", "l"});
            Load l;
            l.bus = ld.integer("bus");
            l.r = ld.number_or("r", 0.0);
            l.x = ld.aliased("x", "l", w, 0.0);
            def.loads.push_back(l);
        }
    }

    if (root.has("devices")) {
        const iodetail::Cursor devices = root.child("devices");
        devices.require_array();
        for (size_t i = 0; i < devices.size(); ++i) {
            const iodetail::Cursor dev = devices.child(i);
            dev.check_keys({"bus", "kind", "label", "op", "params", "samples", "order"});
            const std::string kind = dev.str("kind");
            if (kind == "data") {
                if (dev.has("op") || dev.has("params"))
                    dev.fail("a data-driven device carries its own behavior; "
                             "\"op\" and \"params\" do not apply");
            } else if (dev.has("samples") || dev.has("order")) {
                dev.fail("\"samples\"/\"order\" only apply to kind \"data\"");
            }
            DevicePlacement dp;
            dp.bus = dev.integer("bus");
            dp.label = dev.str_or("label", "");
            dp.device = iodetail::parse_device_spec(dev, kind, base_dir);
            if (dev.has("op")) dp.op = iodetail::parse_op(dev.child("op"));
            def.devices.push_back(std::move(dp));
        }
    }

    try {
        def.validate();
    } catch (const ParameterError& e) {
        throw CaseFormatError(display + ": " + e.what());
    }
    return def;
}

/// 64-bit FNV-1a of a byte string; stamped into reports so a result can be
/// traced back to the exact case file that produced it.
inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

struct LoadedCase {
    NetworkCase def;
    std::uint64_t content_hash = 0;
    std::filesystem::path path;
};

inline LoadedCase load_case(const std::filesystem::path& file) {
    const std::string text = iodetail::read_file(file);
    LoadedCase lc;
    lc.def = parse_case(text, file.filename().string(), file.parent_path());
    lc.content_hash = fnv1a64(text);
    lc.path = file;
    return lc;
}

}  // namespace gma
