#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "faslab/experiments.hpp"
#include "faslab/io.hpp"

using namespace faslab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("faslab_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

nlohmann::json small_arrival_config(const std::string& out) {
    return nlohmann::json{
        {"name", "arrival-smoke"},
        {"pipeline", "arrival"},
        {"deterministic", true},
        {"medium",
         {{"kind", "density"},
          {"dimension", 2},
          {"delta", 0.1},
          {"bumps", {{{"amplitude", 0.2}, {"center", {0.0, 0.0}}, {"radius", 0.5}}}}}},
        {"omega", {1.0, 0.0}},
        {"params",
         {{"h", 0.05}, {"dt", 0.017}, {"T", 3.3}, {"fan_spacing", 0.025},
          {"boundary_samples", 64}}},
        {"out", out}};
}

nlohmann::json small_rho_config(const std::string& out, double amplitude, double T) {
    nlohmann::json medium = {{"kind", "density"}, {"dimension", 2}, {"delta", 0.1}};
    if (amplitude != 0)
        medium["bumps"] = {{{"amplitude", amplitude}, {"center", {0.0, 0.0}}, {"radius", 0.5}}};
    return nlohmann::json{
        {"name", "rho-smoke"},
        {"pipeline", "rho-rigidity"},
        {"deterministic", true},
        {"medium", medium},
        {"omega", {1.0, 0.0}},
        {"params",
         {{"h", 0.05}, {"dt", 0.0176}, {"T", T}, {"boundary_samples", 64}}},
        {"out", out}};
}

} // namespace

TEST_CASE("sha256 matches known vectors") {
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("fmt_double round trips doubles exactly") {
    CHECK(fmt_double(0.1) == "0.10000000000000001");
    for (double v : {0.1, 1.0 / 3.0, 6.02e23, -1.7e-300, 0.0})
        CHECK(std::stod(fmt_double(v)) == v);
}

TEST_CASE("pgm writer produces a valid header and payload") {
    const Grid<2> g = Grid<2>::centered_cube(1.0, 0.25);
    std::vector<double> vals(static_cast<std::size_t>(g.size()));
    g.for_each([&](const std::array<int, 2>& idx, std::int64_t f) {
        vals[static_cast<std::size_t>(f)] = g.point(idx)[0];
    });
    const fs::path dir = temp_dir("pgm");
    write_pgm(dir / "x.pgm", g, vals);
    const std::string content = read_text_file(dir / "x.pgm");
    CHECK(content.rfind("P5\n9 9\n255\n", 0) == 0);
    CHECK(content.size() == std::string("P5\n9 9\n255\n").size() + 81);
}

TEST_CASE("config validation reports named constraints") {
    auto cfg = small_rho_config((temp_dir("val") / "out").string(), 0.2, 2.0);
    // T = 2.0 violates T > 4*sqrt(1.2)-1 = 3.38...
    const auto rep = validate_experiment(cfg, false);
    CHECK_FALSE(rep.ok);
    bool named = false;
    for (const auto& v : rep.violations)
        named |= v.find("4*sqrt(g_max)-1") != std::string::npos;
    CHECK(named);
    // the same config passes with the short-horizon override
    const auto rep2 = validate_experiment(cfg, true);
    CHECK(rep2.ok);

    auto cfg_dt = small_rho_config((temp_dir("val2") / "out").string(), 0.2, 3.9);
    cfg_dt["params"]["dt"] = 0.05;
    const auto rep3 = validate_experiment(cfg_dt, false);
    CHECK_FALSE(rep3.ok);
    bool cfl_named = false;
    for (const auto& v : rep3.violations)
        cfl_named |= v.find("0.5*h*sqrt(g_min)/sqrt(n)") != std::string::npos;
    CHECK(cfl_named);
}

TEST_CASE("missing required parameters are named") {
    auto cfg = small_arrival_config((temp_dir("missing") / "out").string());
    cfg["params"].erase("dt");
    const auto rep = validate_experiment(cfg, false);
    CHECK_FALSE(rep.ok);
    bool named = false;
    for (const auto& v : rep.violations) named |= v.find("params.dt") != std::string::npos;
    CHECK(named);
}

TEST_CASE("validation of a metric pipeline reports the direction count") {
    nlohmann::json cfg = {
        {"name", "metric-val"},
        {"pipeline", "metric-rigidity"},
        {"medium",
         {{"kind", "metric"},
          {"dimension", 2},
          {"delta", 0.1},
          {"diffeo",
           {{"displacements",
             {{{"type", "rotation"}, {"amplitude", 0.1}, {"center", {0.0, 0.0}},
               {"radius", 0.8}, {"axes", {0, 1}}}}}}}}},
        {"params", {{"h", 0.05}, {"dt", 0.015}, {"T", 4.0}}},
        {"out", "unused"}};
    const auto rep = validate_experiment(cfg, false);
    CHECK(rep.ok);
    bool found = false;
    for (const auto& [k, v] : rep.derived)
        if (k.find("omega_count") != std::string::npos) found = v == "3";
    CHECK(found);
}

TEST_CASE("arrival pipeline runs and produces a complete hashed manifest") {
    const fs::path out = temp_dir("run_arrival") / "out";
    const auto cfg = small_arrival_config(out.string());
    const int code = run_experiment(cfg, "", false, 1);
    CHECK(code == 0);
    const Manifest m =
        Manifest::from_json(nlohmann::json::parse(read_text_file(out / "manifest.json")));
    CHECK(m.hashes.count("alpha_sweeping.csv") == 1);
    CHECK(m.hashes.count("summary.json") == 1);
    for (const auto& [name, hash] : m.hashes) {
        CHECK(fs::exists(out / name));
        CHECK(sha256_file(out / name) == hash);
    }
}

TEST_CASE("identical configs give byte-identical artifacts") {
    const fs::path out_a = temp_dir("det_a") / "out";
    const fs::path out_b = temp_dir("det_b") / "out";
    const auto cfg = small_arrival_config("");
    CHECK(run_experiment(cfg, out_a.string(), false, 1) == 0);
    CHECK(run_experiment(cfg, out_b.string(), false, 1) == 0);
    const Manifest ma =
        Manifest::from_json(nlohmann::json::parse(read_text_file(out_a / "manifest.json")));
    const Manifest mb =
        Manifest::from_json(nlohmann::json::parse(read_text_file(out_b / "manifest.json")));
    REQUIRE(ma.hashes.size() == mb.hashes.size());
    for (const auto& [name, hash] : ma.hashes) CHECK(mb.hashes.at(name) == hash);
}

TEST_CASE("compare of a run against itself reports all-zero diffs") {
    const fs::path out = temp_dir("cmp") / "out";
    const auto cfg = small_arrival_config(out.string());
    REQUIRE(run_experiment(cfg, "", false, 1) == 0);
    const auto rep = compare_runs(out / "manifest.json", out / "manifest.json");
    CHECK(rep.artifact_changes.empty());
    CHECK(rep.check_flips.empty());
    for (const auto& row : rep.metric_diffs) CHECK(row.a == row.b);
}

TEST_CASE("compare of disjoint manifests is fatal") {
    const fs::path dir = temp_dir("cmp_disjoint");
    Manifest a, b;
    a.experiment = "a";
    a.parameters = nlohmann::json::object();
    a.hashes["only_a.csv"] = "0";
    b.experiment = "b";
    b.parameters = nlohmann::json::object();
    b.hashes["only_b.csv"] = "1";
    write_text_file(dir / "ma.json", a.to_json().dump());
    write_text_file(dir / "mb.json", b.to_json().dump());
    CHECK_THROWS_AS(compare_runs(dir / "ma.json", dir / "mb.json"), Error);
}

TEST_CASE("rho pipeline exit codes: consistent and distinguishable are success") {
    const fs::path out_e = temp_dir("rho_e") / "out";
    CHECK(run_experiment(small_rho_config(out_e.string(), 0.0, 3.2), "", false, 1) == 0);
    const auto summary = nlohmann::json::parse(read_text_file(out_e / "summary.json"));
    CHECK(summary.at("verdict").get<std::string>().find("consistent") != std::string::npos);

    const fs::path out_b = temp_dir("rho_b") / "out";
    CHECK(run_experiment(small_rho_config(out_b.string(), 0.2, 3.9), "", false, 1) == 0);
    const auto sb = nlohmann::json::parse(read_text_file(out_b / "summary.json"));
    CHECK(sb.at("verdict").get<std::string>().find("distinguishable") != std::string::npos);
}

TEST_CASE("run with a horizon violation throws a named error") {
    const fs::path out = temp_dir("rho_short") / "out";
    const auto cfg = small_rho_config(out.string(), 0.2, 2.0);
    CHECK_THROWS_AS(run_experiment(cfg, "", false, 1), Error);
}

TEST_CASE("trace csv carries the config header block") {
    const Grid<2> g = Grid<2>::centered_cube(1.0, 0.5);
    BoundaryTrace<2> trace;
    trace.omega = Vec<2>::axis(0);
    trace.points = {Vec<2>{{1.0, 0.0}}};
    trace.times = {0.0, 0.5};
    trace.values = {0.25, 0.75};
    const fs::path dir = temp_dir("trace");
    write_trace_csv(dir / "t.csv", trace, nlohmann::json{{"h", 0.5}, {"T", 1.0}});
    const std::string body = read_text_file(dir / "t.csv");
    CHECK(body.find("# T = 1.0") != std::string::npos);
    CHECK(body.find("# h = 0.5") != std::string::npos);
    CHECK(body.find("sample,p0,p1,t,u") != std::string::npos);
}
