#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "rfc/cli.hpp"
#include "rfc/errors.hpp"

using namespace rfc;
using namespace rfc::cli;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("rfc_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const auto p = dir / "config.json";
    std::ofstream(p, std::ios::binary) << text;
    return p;
}

int run_cli(std::vector<std::string> args) {
    std::vector<char*> argv;
    static std::string prog = "rfc-cert";
    argv.push_back(prog.data());
    for (auto& a : args) argv.push_back(a.data());
    return main_entry(static_cast<int>(argv.size()), argv.data());
}

Json read_json(const fs::path& p) { return Json::parse(slurp(p)); }

std::string config_error(const std::string& text) {
    try {
        config_from_string(text, ".");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

const char* kSmallLyap = R"({
  "seed": 9,
  "model": {"field_id": "scalar_rfc", "lip_bound": "catalog"},
  "family": {"R": 1.0, "delta": 0.5, "lattice": 3, "N": 3, "horizon": 4.0},
  "grids": {"r_grid": {"from": 0.001, "to": 6.0, "count": 80, "log": true},
            "t_grid": {"from": 0.001, "to": 6.0, "count": 80, "log": true}},
  "tolerances": {"integrator": 1e-10},
  "construction": {"R_work": 2.0, "t_points": 128},
  "check_lyap": {"n_states": 40, "sandwich_states": 100}
})";

}  // namespace

TEST_CASE("config syntax errors carry line and column") {
    const auto msg = config_error("{\n  \"seed\": 1,\n  \"model\": {\"field_id\": }\n}");
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("column") != std::string::npos);
}

TEST_CASE("config field diagnostics") {
    CHECK(config_error(R"({"model": {}})").find("'seed'") != std::string::npos);
    CHECK(config_error(R"({"seed": 1, "famliy": {}})").find("'famliy': unknown") != std::string::npos);
    CHECK(config_error(R"({"seed": -1})").find("'seed'") != std::string::npos);
    CHECK(config_error(R"({"seed": 1, "tolerances": {"integrator": 0}})").find("'tolerances.integrator': must be positive") !=
          std::string::npos);
    CHECK(config_error(R"({"seed": 1, "jobs": 0})").find("'jobs'") != std::string::npos);
    CHECK(config_error(R"({"seed": 1})").empty());

    const auto cfg = config_from_string(R"({"seed": 1, "family": {"R": "big"}, "grids": {"r_grid": [0, 2, 1]}})", ".");
    std::string what;
    try {
        cfg.section("family").number("R");
    } catch (const ConfigError& e) {
        what = e.what();
    }
    CHECK(what.find("'family.R': expected a number") != std::string::npos);
    CHECK_THROWS_AS(cfg.section("grids").grid("r_grid"), ConfigError);
    CHECK_THROWS_AS(cfg.section("grids").grid("t_grid"), ConfigError);
}

TEST_CASE("grid shorthand") {
    const auto cfg = config_from_string(
        R"({"seed": 1, "grids": {"a": {"from": 0, "to": 1, "count": 5}, "b": {"from": 0.01, "to": 1, "count": 3, "log": true}}})",
        ".");
    const auto a = cfg.section("grids").grid("a");
    CHECK(a == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
    const auto b = cfg.section("grids").grid("b");
    REQUIRE(b.size() == 3);
    CHECK(b[1] == doctest::Approx(0.1));
    CHECK(b[2] == 1.0);
}

TEST_CASE("overrides and relative paths") {
    const auto dir = scratch("paths");
    const auto p = write_config(dir, R"({"seed": 1, "output_dir": "results", "jobs": 2})");
    auto cfg = load_config(p);
    CHECK(cfg.out_dir == fs::absolute(p).parent_path() / "results");
    CHECK(cfg.jobs == 2);
    cfg = load_config(p, {dir / "other", 77, 3});
    CHECK(cfg.seed == 77);
    CHECK(cfg.jobs == 3);
    CHECK(cfg.out_dir == dir / "other");
}

TEST_CASE("exit codes") {
    const auto dir = scratch("exit");
    CHECK(run_cli({"closure", "--config", (dir / "missing.json").string()}) == kConfigError);
    const auto bad = write_config(dir, R"({"seed": 1, "model": {"field_id": "nope"}})");
    CHECK(run_cli({"closure", "--config", bad.string()}) == kConfigError);
    CHECK(run_cli({"frobnicate", "--config", bad.string()}) == kConfigError);
    CHECK(run_cli({"closure"}) == kConfigError);
}

TEST_CASE("closure on a sup-norm family passes") {
    const auto dir = scratch("closure");
    const auto p = write_config(dir, R"({"seed": 5, "output_dir": "out", "model": {"field_id": "scalar_rfc"},
                                        "family": {"R": 1.0, "N": 6}, "closure": {"norm": "sup"}})");
    CHECK(run_cli({"closure", "--config", p.string()}) == kPass);
    const auto j = read_json(dir / "out" / "closure.json");
    CHECK(j["closed"] == true);
    CHECK(j["schema_version"] == 1);

    const auto q = write_config(dir, R"({"seed": 5, "output_dir": "out1", "model": {"field_id": "scalar_rfc"},
        "family": {"R": 1.0, "delta": 1.0, "lattice_values": [0.0, 1.0],
                   "members": [{"switch_times": [1.0], "values": [[1.0]], "tail": [0.0]}]},
        "closure": {"norm": "lp", "p": 1}})");
    CHECK(run_cli({"closure", "--config", q.string()}) == kFail);
    const auto j1 = read_json(dir / "out1" / "closure.json");
    CHECK(j1["closed"] == false);
    CHECK(j1["witness"]["norm"].get<double>() == doctest::Approx(2.0));
}

TEST_CASE("diverge on scalar_xu reproduces e^R") {
    const auto dir = scratch("diverge");
    const auto p = write_config(dir, R"({"seed": 3, "output_dir": "out", "model": {"field_id": "scalar_xu"},
                                        "diverge": {"R": [1, 2, 4], "t": 1.0, "x0": [1.0]}})");
    CHECK(run_cli({"diverge", "--config", p.string()}) == kPass);
    std::istringstream csv(slurp(dir / "out" / "diverge.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "R,value,blew_up,t_esc,tol");
    for (double R : {1.0, 2.0, 4.0}) {
        REQUIRE(std::getline(csv, line));
        const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
        CHECK(std::stod(line.substr(0, c1)) == R);
        CHECK(std::stod(line.substr(c1 + 1, c2 - c1 - 1)) == doctest::Approx(std::exp(R)).epsilon(1e-4));
    }
}

TEST_CASE("outputs are byte-identical across runs and job counts, and no temp files remain") {
    const auto dir = scratch("determinism");
    const auto p = write_config(dir, R"({"seed": 2, "model": {"field_id": "decay_plus_input"},
                                        "family": {"R": 1.0, "lattice": 5, "N": 6},
                                        "grids": {"r_grid": [0.5, 1.0, 2.0], "t_grid": [0.0, 0.5, 1.0]},
                                        "brs": {"n_cases": 40, "state_radius": 2.0}})");
    for (const std::string sub : {"brs", "envelope", "axioms"}) {
        CHECK(run_cli({sub, "--config", p.string(), "--out", (dir / "a").string(), "--jobs", "1"}) == kPass);
        CHECK(run_cli({sub, "--config", p.string(), "--out", (dir / "b").string(), "--jobs", "3"}) == kPass);
    }
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir / "a")) {
        ++files;
        CHECK(e.path().extension() != ".tmp");
        CHECK(slurp(e.path()) == slurp(dir / "b" / e.path().filename()));
    }
    CHECK(files == 6);  // brs.csv, brs.json, envelope.csv/.json/.svg, axioms.json
    const auto csv = slurp(dir / "a" / "envelope.csv");
    CHECK(csv.rfind("r\\t,0,0.5,1\n", 0) == 0);
    CHECK(csv.find('\r') == std::string::npos);
    CHECK(slurp(dir / "a" / "envelope.svg").rfind("<svg", 0) == 0);
}

TEST_CASE("check-lyap on the scalar_rfc construction passes, also from a saved bundle") {
    const auto dir = scratch("lyap");
    const auto p = write_config(dir, kSmallLyap);
    CHECK(run_cli({"construct-lyap", "--config", p.string(), "--out", (dir / "built").string()}) == kPass);
    CHECK(run_cli({"check-lyap", "--config", p.string(), "--out", (dir / "built").string()}) == kPass);
    const auto j = read_json(dir / "built" / "check_lyap.json");
    CHECK(j["pass"] == true);
    CHECK(j["dissipation"]["records"] == 40);
    CHECK(j["sandwich"]["states"] == 100);

    auto doc = Json::parse(kSmallLyap);
    doc["construction"]["bundle"] = (dir / "built" / "construction.json").string();
    const auto q = dir / "bundle.json";
    std::ofstream(q, std::ios::binary) << doc.dump();
    CHECK(run_cli({"check-lyap", "--config", q.string(), "--out", (dir / "loaded").string()}) == kPass);
    CHECK(slurp(dir / "built" / "dissipation.csv") == slurp(dir / "loaded" / "dissipation.csv"));
    CHECK(slurp(dir / "built" / "sandwich.csv") == slurp(dir / "loaded" / "sandwich.csv"));
}

TEST_CASE("JSON round trips") {
    const auto f = MonotoneFn::sample([](double s) { return s * s + s; }, {10.0, 64, 1e-3});
    const auto g = monotone_fn_from_json(Json::parse(to_json(f).dump()));
    for (double s : {0.0, 0.01, 1.0, 9.0, 50.0}) CHECK(g(s) == f(s));

    const Signal u({0.5, 1.0}, {Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)}, Vec::Constant(1, 0.0));
    const auto v = signal_from_json(Json::parse(to_json(u).dump()));
    CHECK(v.switch_times().size() == 2);
    for (double t : {0.0, 0.7, 3.0}) CHECK(v.at(t) == u.at(t));

    const auto fam = sample_family({1.0, 0.5, 3, 4, 2.0, 8, 1});
    const auto fam2 = family_from_json(Json::parse(to_json(fam).dump()));
    CHECK(fam2.size() == fam.size());
    CHECK(fam2.seed() == 8);
    CHECK(to_json(fam2) == to_json(fam));

    Eigen::MatrixXd A(2, 2), B(2, 1);
    A << 0, 1, -1, 0;
    B << 0, 1;
    const auto m = model_from_json(Json::parse(to_json(SystemModel::linear(A, B)).dump()));
    CHECK(m.field == FieldId::Linear);
    CHECK(m.A == A);
    CHECK_THROWS(model_from_json(Json::parse(R"({"field_id": "scalar_rfc", "n": 2})")));

    const XiForm xi{MonotoneFn::linear(2.0), 0.5, 0.25, std::nullopt, 3.0, INFINITY};
    const auto xi2 = xi_from_json(Json::parse(to_json(xi).dump()));
    CHECK(xi2.c == 0.5);
    CHECK(xi2.r_valid == 3.0);
    CHECK(std::isinf(xi2.t_valid));
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(-INFINITY) == "-inf");
}
