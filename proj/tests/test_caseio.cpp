#include "gma/caseio.hpp"

#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "gma/report.hpp"

namespace gma {
namespace {

namespace fs = std::filesystem;

class TempDir {
public:
    TempDir() {
        root_ = fs::temp_directory_path() /
                ("gma_caseio_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter_++));
        fs::create_directories(root_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(root_, ec);
    }
    fs::path write(const std::string& name, const std::string& text) const {
        const fs::path p = root_ / name;
        std::ofstream(p, std::ios::binary) << text;
        return p;
    }
    const fs::path& path() const { return root_; }

private:
    static inline int counter_ = 0;
    fs::path root_;
};

const char* kFullCase = R"({
  "name": "two_bus",
  "system": {"f_base_hz": 60.0, "s_base_mva": 200.0, "eps": 2e-6},
  "buses": ["sending", "receiving"],
  "branches": [
    {"from": 1, "to": 0, "r": 0.02, "x": 0.30, "b": 0.04},
    {"from": 1, "to": 2, "r": 0.01, "l": 5.3051648e-04, "c_shunt": 2.1220659e-04}
  ],
  "loads": [
    {"bus": 2, "r": 2.0, "l": 1.3262912e-03}
  ],
  "devices": [
    {"bus": 1, "kind": "gfl", "label": "plant_a",
     "op": {"v": 1.02, "theta_deg": 5.0, "p": 0.5, "q": 0.1},
     "params": {"f_current": 350.0, "s_rated": 0.8}},
    {"bus": 2, "kind": "sg",
     "op": {"v": 1.0, "theta": 0.02, "p": 0.3, "q": 0.05}}
  ]
})";

TEST(CaseParse, ReadsEverySection) {
    const NetworkCase def = parse_case(kFullCase, "two_bus.json", ".");
    EXPECT_EQ(def.name, "two_bus");
    EXPECT_DOUBLE_EQ(def.base.f_base_hz, 60.0);
    EXPECT_DOUBLE_EQ(def.base.s_base_mva, 200.0);
    EXPECT_DOUBLE_EQ(def.eps, 2e-6);
    ASSERT_EQ(def.buses, 2);
    EXPECT_EQ(def.bus_label(1), "sending");
    EXPECT_EQ(def.bus_label(2), "receiving");

    ASSERT_EQ(def.branches.size(), 2u);
    const double w = def.base.omega_base();
    EXPECT_NEAR(def.branches[1].x, w * 5.3051648e-04, 1e-9);   // inductance spelling
    EXPECT_NEAR(def.branches[1].b, w * 2.1220659e-04, 1e-9);   // capacitance spelling
    EXPECT_DOUBLE_EQ(def.branches[0].x, 0.30);                  // reactance spelling

    ASSERT_EQ(def.loads.size(), 1u);
    EXPECT_NEAR(def.loads[0].x, w * 1.3262912e-03, 1e-9);

    ASSERT_EQ(def.devices.size(), 2u);
    EXPECT_EQ(def.label_of(0), "plant_a");
    EXPECT_EQ(def.label_of(1), "sg2");
    EXPECT_NEAR(def.devices[0].op.theta, 5.0 * M_PI / 180.0, 1e-15);
    EXPECT_DOUBLE_EQ(def.devices[1].op.theta, 0.02);
    const auto& gfl = std::get<GflParams>(def.devices[0].device);
    EXPECT_DOUBLE_EQ(gfl.f_current, 350.0);  // overridden
    EXPECT_DOUBLE_EQ(gfl.s_rated, 0.8);
    EXPECT_DOUBLE_EQ(gfl.r_f, GflParams{}.r_f);  // untouched default
    EXPECT_TRUE(std::holds_alternative<SgParams>(def.devices[1].device));

    // the parsed case is immediately buildable
    EXPECT_NO_THROW(build_system(def));
}

TEST(CaseParse, UnknownKeyPointsAtItsLine) {
    const std::string text = R"({
  "system": {"f_base_hz": 60.0},
  "buses": 1,
  "branches": [
    {"from": 1, "to": 0,
     "xx": 0.1}
  ]
})";
    try {
        parse_case(text, "case.json", ".");
        FAIL() << "expected CaseFormatError";
    } catch (const CaseFormatError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("case.json:6"), std::string::npos) << msg;
        EXPECT_NE(msg.find("branches[0].xx"), std::string::npos) << msg;
        EXPECT_NE(msg.find("unknown key"), std::string::npos) << msg;
    }
}

TEST(CaseParse, MalformedTextReportsTheLine) {
    const std::string text = "{\n  \"system\": {\"f_base_hz\": 60.0},\n  oops\n}";
    try {
        parse_case(text, "case.json", ".");
        FAIL() << "expected CaseFormatError";
    } catch (const CaseFormatError& e) {
        EXPECT_NE(std::string(e.what()).find("case.json:3"), std::string::npos)
            << e.what();
    }
}

TEST(CaseParse, SchemaViolations) {
    const auto expect_reject = [](const std::string& text, const std::string& needle) {
        try {
            parse_case(text, "case.json", ".");
            FAIL() << "accepted: " << text;
        } catch (const CaseFormatError& e) {
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    const std::string head = R"({"system": {"f_base_hz": 60.0}, "buses": 1, )";
    expect_reject(head + R"("branches": [{"from":1,"to":0,"x":0.1,"l":1e-3}]})",
                  "only one");
    expect_reject(head + R"("branches": [{"from":1,"to":0}]})", "needs \"x\" or \"l\"");
    expect_reject(head + R"("branches": [{"from":1,"to":0,"x":"big"}]})",
                  "expected a number");
    expect_reject(head + R"("branches": [{"from":1.5,"to":0,"x":0.1}]})",
                  "expected an integer");
    expect_reject(R"({"buses": 1, "branches": [{"from":1,"to":0,"x":0.1}]})",
                  "missing required key \"system\"");
    expect_reject(
        head + R"("branches": [{"from":1,"to":0,"x":0.1}], "devices": [{"bus":1,"kind":"vsc"}]})",
        "unknown device kind");
    expect_reject(
        head +
            R"("branches": [{"from":1,"to":0,"x":0.1}], "devices": [{"bus":1,"kind":"gfl","samples":"a.csv"}]})",
        "only apply to kind \"data\"");
    // semantic validation failures surface as format errors too
    expect_reject(R"({"system": {"f_base_hz": 60.0}, "buses": 2, )"
                  R"("branches": [{"from":1,"to":0,"x":0.1}]})",
                  "not connected");
}

TEST(SampleCsv, RoundTripAndErrors) {
    TempDir tmp;
    std::string csv = "f_Hz,ReY11,ImY11,ReY12,ImY12,ReY21,ImY21,ReY22,ImY22\n";
    csv += "1.0,0.1,-0.2,0.0,0.3,0.5,0.0,1.0,2.0\n";
    csv += "10.0,0.2,-0.4,0.1,0.6,1.0,0.1,2.0,4.0\n";
    const fs::path p = tmp.write("y.csv", csv);
    const std::vector<FrequencySample> samples = read_samples_csv(p);
    ASSERT_EQ(samples.size(), 2u);
    EXPECT_NEAR(samples[0].omega, 2.0 * M_PI, 1e-12);
    ASSERT_EQ(samples[1].value.rows(), 2);
    EXPECT_EQ(samples[1].value(0, 1), Complex(0.1, 0.6));
    EXPECT_EQ(samples[1].value(1, 0), Complex(1.0, 0.1));

    EXPECT_THROW(read_samples_csv(tmp.write("rag.csv", "1.0,0.1,0.2\n2.0,0.1\n")),
                 CaseFormatError);
    EXPECT_THROW(read_samples_csv(tmp.write("rect.csv", "1.0,1,2,3,4,5,6,7,8,9,10,11,12\n")),
                 CaseFormatError);
    EXPECT_THROW(read_samples_csv(tmp.write("empty.csv", "f_Hz\n")), CaseFormatError);
    EXPECT_THROW(read_samples_csv(tmp.path() / "missing.csv"), CaseFormatError);
}

TEST(CaseParse, DataDeviceLoadsSamplesNextToTheCase) {
    TempDir tmp;
    // sample a series RL admittance so a low order fits it exactly
    const double w = 2.0 * M_PI * 60.0, r = 0.05, x = 0.5;
    Matrix a(2, 2), b(2, 2), c(2, 2);
    a << -w * r / x, w, -w, -w * r / x;
    b = (w / x) * Matrix::Identity(2, 2);
    c = Matrix::Identity(2, 2);
    const DqTransfer truth(StateSpace(a, b, c, Matrix::Zero(2, 2)));
    std::string csv;
    for (double f = 5.0; f <= 200.0; f += 5.0) {
        const ComplexMatrix y = truth.eval(Complex(0.0, 2.0 * M_PI * f));
        csv += format_number(f);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                csv += "," + format_number(y(i, j).real()) + "," +
                       format_number(y(i, j).imag());
        csv += "\n";
    }
    tmp.write("grid_y.csv", csv);
    const std::string text = R"({
  "system": {"f_base_hz": 60.0},
  "buses": 2,
  "branches": [{"from": 1, "to": 0, "r": 0.02, "x": 0.3},
               {"from": 1, "to": 2, "r": 0.01, "x": 0.1}],
  "devices": [{"bus": 2, "kind": "data", "samples": "grid_y.csv", "order": 4}]
})";
    const LoadedCase lc = load_case(tmp.write("case.json", text));
    ASSERT_EQ(lc.def.devices.size(), 1u);
    const auto* fitted = std::get_if<DqTransfer>(&lc.def.devices[0].device);
    ASSERT_NE(fitted, nullptr);
    for (double f : {12.0, 47.0, 133.0}) {
        const Complex s(0.0, 2.0 * M_PI * f);
        EXPECT_LT((fitted->eval(s) - truth.eval(s)).norm(), 1e-6);
    }
    EXPECT_EQ(lc.def.label_of(0), "data2");
    EXPECT_NO_THROW(build_system(lc.def));
}

TEST(CaseHash, TracksContentExactly) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);  // published FNV-1a vector
    EXPECT_NE(fnv1a64(kFullCase), fnv1a64(std::string(kFullCase) + " "));
    TempDir tmp;
    const LoadedCase lc = load_case(tmp.write("c.json", kFullCase));
    EXPECT_EQ(lc.content_hash, fnv1a64(kFullCase));
    EXPECT_EQ(lc.path.filename(), "c.json");
}

TEST(Format, NineSignificantDigitsAlways) {
    EXPECT_EQ(format_number(1.0), "1.00000000e+00");
    EXPECT_EQ(format_number(-0.000123456789), "-1.23456789e-04");
    EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "+inf");
    EXPECT_EQ(format_number(-std::numeric_limits<double>::infinity()), "-inf");
    EXPECT_EQ(format_hash(0xcbf29ce484222325ull), "cbf29ce484222325");
}

TEST(Format, JsonWriterShapes) {
    JsonWriter w;
    w.begin_object();
    w.key("k");
    w.value(2.0);
    w.key("arr");
    w.begin_array();
    w.value(1.0);
    w.value(Complex(0.0, -3.0));
    w.end_array();
    w.key("empty");
    w.begin_object();
    w.end_object();
    w.end_object();
    EXPECT_EQ(w.take(),
              "{\n  \"k\": 2.00000000e+00,\n  \"arr\": [1.00000000e+00, "
              "[0.00000000e+00, -3.00000000e+00]],\n  \"empty\": {}\n}\n");
}

TEST(Format, TablesHaveStableShapes) {
    ModeInfo m;
    m.lambda = Complex(-2.0, 180.0);
    m.sigma = -2.0;
    m.omega = 180.0;
    m.freq_hz = 180.0 / (2.0 * M_PI);
    m.zeta = 2.0 / std::abs(m.lambda);
    const std::string csv = mode_table_csv({m});
    EXPECT_EQ(csv, "sigma_1_per_s,omega_rad_per_s,f_Hz,zeta\n"
                   "-2.00000000e+00,1.80000000e+02,2.86478898e+01,1.11104253e-02\n");
    EXPECT_NE(mode_table_text({m}).find("-2.00000000e+00"), std::string::npos);

    std::vector<ComplexMatrix> z(2, ComplexMatrix::Zero(2, 2));
    z[0] << Complex(1.0, 0.0), Complex(0.0, 1.0), Complex(-1.0, 0.0), Complex(3.0, 4.0);
    z[1] = z[0] * 2.0;
    const std::string scan = scan_csv({10.0, 20.0}, z);
    EXPECT_NE(scan.find("f_Hz,Zdd_mag,Zdd_phase_deg,Zdq_mag,Zdq_phase_deg,"
                        "Zqd_mag,Zqd_phase_deg,Zqq_mag,Zqq_phase_deg"),
              std::string::npos);
    EXPECT_NE(scan.find("5.00000000e+00,5.31301024e+01"), std::string::npos);  // |3+4j|, arg
    EXPECT_THROW(scan_csv({1.0}, z), DimensionError);

    SimulationResult sim;
    sim.times = Vector::LinSpaced(3, 0.0, 0.2);
    sim.outputs = Matrix::Zero(2, 3);
    sim.outputs << 1, 2, 3, 4, 5, 6;
    const std::string traj = trajectory_csv(sim, {"va", "vb"});
    EXPECT_NE(traj.find("t_s,va,vb"), std::string::npos);
    EXPECT_NE(traj.find("1.00000000e-01,2.00000000e+00,5.00000000e+00"),
              std::string::npos);
    EXPECT_THROW(trajectory_csv(sim, {"only_one"}), DimensionError);
}

TEST(Format, FitJsonIsWellFormed) {
    RationalFit fit;
    fit.poles = ComplexVector(2);
    fit.poles << Complex(-3.0, 25.0), Complex(-3.0, -25.0);
    fit.residues = {ComplexMatrix::Identity(2, 2), ComplexMatrix::Identity(2, 2)};
    fit.d = Matrix::Zero(2, 2);
    fit.e = Matrix::Zero(2, 2);
    fit.rms = 1.25e-10;
    const std::string text = fit_json(fit);
    const nlohmann::json doc = nlohmann::json::parse(text);  // must re-parse cleanly
    EXPECT_EQ(doc.at("order"), 2);
    EXPECT_EQ(doc.at("poles").size(), 2u);
    EXPECT_DOUBLE_EQ(doc.at("poles")[0][1].get<double>(), 25.0);
    EXPECT_NEAR(doc.at("rms_error").get<double>(), 1.25e-10, 1e-20);
}

TEST(Format, IndexReportSerializesDeterministically) {
    NetworkCase def = parse_case(kFullCase, "two_bus.json", ".");
    const SystemModel model = build_system(def);
    ModeSelection wide;
    wide.zeta_max = 0.95;
    wide.sigma_floor = 700.0;
    IndexReport rep = build_index_report(model, wide);
    rep.case_hash = fnv1a64(kFullCase);
    ASSERT_FALSE(rep.subset.modes.empty());

    const std::string j1 = index_report_json(rep, def);
    const std::string j2 = index_report_json(rep, def);
    EXPECT_EQ(j1, j2);
    const nlohmann::json doc = nlohmann::json::parse(j1);
    EXPECT_EQ(doc.at("case"), "two_bus");
    EXPECT_FALSE(doc.contains("timestamp"));  // suppressed when empty
    ASSERT_TRUE(doc.at("vdm").contains("mode1"));
    ASSERT_TRUE(doc.at("vdm").at("mode1").contains("plant_a"));
    EXPECT_TRUE(doc.at("vdm").at("mode1").at("plant_a").contains("receiving"));
    EXPECT_TRUE(doc.at("stg").contains("plant_a"));
    EXPECT_EQ(doc.at("stg").at("plant_a").at("bus"), 1);

    rep.timestamp = "2026-01-01T00:00:00Z";
    EXPECT_NE(index_report_json(rep, def).find("2026-01-01T00:00:00Z"),
              std::string::npos);

    const std::string csv = index_report_csv(rep, def);
    EXPECT_NE(csv.find("quantity,mode,source,target,value"), std::string::npos);
    EXPECT_NE(csv.find("vdm,mode1,plant_a,sending,"), std::string::npos);
    EXPECT_NE(csv.find("stg,"), std::string::npos);
    const std::string ts = timestamp_iso();
    EXPECT_EQ(ts.size(), 20u);
    EXPECT_EQ(ts.back(), 'Z');
}

}  // namespace
}  // namespace gma
