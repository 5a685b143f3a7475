#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "snwe/cli_io.hpp"

using namespace snwe;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("snwe_cli_test_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::vector<std::string> problems_of(const json& j)
{
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        return e.problems();
    }
    return {};
}

bool has_rule(const std::vector<std::string>& problems, const std::string& rule)
{
    for (const auto& p : problems)
        if (p.rfind(rule + ":", 0) == 0) return true;
    return false;
}

json linear_config()
{
    return json{{"subcommand", "simulate"},
                {"basis", {{"cutoff", 3}}},
                {"solver", {{"T", 2.0 * std::numbers::pi}, {"steps", 2000}}},
                {"initial", {{"u0", json::array({json::array({1, 1, 1.0})})}}},
                {"output", {{"modes", 2}}}};
}

}  // namespace

TEST_CASE("minimal config is accepted with defaults")
{
    const RunConfig c = parse_config(json::object());
    CHECK(c.subcommand == "simulate");
    CHECK(c.triple().r == doctest::Approx(5.0 / 12.0).epsilon(1e-15));
    CHECK(c.time_steps == 1000);
    CHECK(c.dt() == doctest::Approx(1e-3));
}

TEST_CASE("validation names every violated rule")
{
    const auto p1 = problems_of({{"exponents", {{"p", 4}, {"q", 8}}}});
    CHECK(has_rule(p1, "admissible-triple"));

    const auto p2 = problems_of({{"solver", {{"M", 0.3}, {"M_prime", 0.5}}}});
    CHECK(has_rule(p2, "cutoff-radii"));

    const auto all = problems_of({{"exponents", {{"p", 4}, {"q", 8}, {"r", 0.5}}},
                                  {"solver", {{"M", 0.3}, {"M_prime", 0.5}, {"gamma", 2.5}, {"dt", 0.3}}},
                                  {"nonlinearity", {{"f", "exponential"}}},
                                  {"initial", {{"u0", json::array({json::array({40, 40, 1.0})})}}},
                                  {"typo", true}});
    CHECK(has_rule(all, "admissible-triple"));
    CHECK(has_rule(all, "cutoff-radii"));
    CHECK(has_rule(all, "gamma-bound"));
    CHECK(has_rule(all, "r-derived"));
    CHECK(has_rule(all, "time-grid"));
    CHECK(has_rule(all, "initial-modes"));
    CHECK(has_rule(all, "unknown-key"));

    const auto ball = problems_of({{"nonlinearity", {{"f", "exponential"}}},
                                   {"initial", {{"u0", json::array({json::array({1, 1, 0.5})})}}}});
    CHECK(has_rule(ball, "initial-ball"));
    // the linear problem has no ball constraint
    CHECK(problems_of({{"initial", {{"u0", json::array({json::array({1, 1, 1.0})})}}}}).empty());

    const auto types = problems_of({{"seed", "abc"}, {"domain", 3}, {"subcommand", "fly"}});
    CHECK(has_rule(types, "json-type"));
    CHECK(has_rule(types, "json-structure"));
    CHECK(has_rule(types, "subcommand"));

    const auto sweep = problems_of({{"subcommand", "verify-cluster"}, {"sweep", {{"samples", 0}}}});
    CHECK(has_rule(sweep, "sweep"));
}

TEST_CASE("dt and steps describe the same time grid")
{
    CHECK(parse_config({{"solver", {{"T", 2}, {"dt", 0.01}}}}).time_steps == 200);
    CHECK(has_rule(problems_of({{"solver", {{"T", 2}, {"dt", 0.01}, {"steps", 100}}}}), "time-grid"));
}

TEST_CASE("canonical hash ignores workers and output location")
{
    RunConfig a = parse_config(linear_config());
    RunConfig b = a;
    b.threads = 16;
    b.output_dir = "/elsewhere";
    CHECK(config_hash(a) == config_hash(b));
    b.seed = 2;
    CHECK(config_hash(a) != config_hash(b));
    CHECK(parse_config(canonical_config(a)).time_steps == a.time_steps);
    CHECK(config_hash(parse_config(canonical_config(a))) == config_hash(a));
    CHECK(provenance_line(a).rfind("# config_hash=" + config_hash(a) + " seed=1\n", 0) == 0);
}

TEST_CASE("SHA-256 known answers")
{
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("binary trajectory dump round trip")
{
    auto basis = build_basis(std::numbers::pi, std::numbers::pi, Boundary::Neumann, 3.0);
    TrajectoryRecord t(basis, 0.25, 5);
    for (Eigen::Index k = 0; k < t.u.cols(); ++k)
        for (Eigen::Index j = 0; j < t.u.rows(); ++j) {
            t.u(j, k) = std::sin(0.3 * static_cast<double>(j + 7 * k));
            t.ut(j, k) = -1.0 / (1.0 + static_cast<double>(j * k));
        }
    std::stringstream buf;
    write_trajectory_binary(buf, t);
    const TrajectoryRecord back = read_trajectory_binary(buf);
    CHECK(back.dt == t.dt);
    CHECK(back.u == t.u);
    CHECK(back.ut == t.ut);
    CHECK(back.basis->same_as(*basis));
}

TEST_CASE("admissible report")
{
    const std::string r = admissible_report(8.0, 8.0);
    CHECK(r.find("r=0.625") != std::string::npos);
    CHECK(r.find("admissible: yes") != std::string::npos);
    CHECK(admissible_report(4.0, 8.0).find("admissible: no") != std::string::npos);
    CHECK(admissible_report(kInf, kInf).find("r=1\n") != std::string::npos);

    RunConfig c;
    c.subcommand = "admissible";
    c.p = 4.0;
    c.q = 8.0;
    std::ostringstream log;
    CHECK(run(c, log).exit_code == 2);
}

TEST_CASE("simulate writes the linear rotation and replays byte-identically")
{
    const fs::path d1 = scratch_dir("sim1");
    const fs::path d2 = scratch_dir("sim2");
    RunConfig c = parse_config(linear_config());
    c.output_dir = d1.string();
    std::ostringstream log;
    const RunOutcome o1 = run(c, log);
    REQUIRE(o1.exit_code == 0);

    std::ifstream csv(d1 / "trajectory_path0.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line.rfind("# config_hash=", 0) == 0);
    std::getline(csv, line);
    CHECK(line == "t,c_1_1,c_1_2,Z,Y");
    double worst = 0.0;
    while (std::getline(csv, line)) {
        std::istringstream row(line);
        std::string t, c11;
        std::getline(row, t, ',');
        std::getline(row, c11, ',');
        worst = std::max(worst, std::abs(std::stod(c11) - std::cos(std::sqrt(2.0) * std::stod(t))));
    }
    CHECK(worst < 1e-10);

    RunConfig replay = load_config(d1 / "manifest.json");
    replay.output_dir = d2.string();
    replay.threads = 4;
    const RunOutcome o2 = run(replay, log);
    REQUIRE(o2.exit_code == 0);
    CHECK(o2.manifest.config_hash == o1.manifest.config_hash);
    REQUIRE(o1.manifest.files.size() == o2.manifest.files.size());
    for (std::size_t i = 0; i < o1.manifest.files.size(); ++i) {
        CHECK(o1.manifest.files[i].name == o2.manifest.files[i].name);
        CHECK(o1.manifest.files[i].sha256 == o2.manifest.files[i].sha256);
        CHECK(slurp(d1 / o1.manifest.files[i].name) == slurp(d2 / o2.manifest.files[i].name));
        CHECK(file_sha256(d1 / o1.manifest.files[i].name) == o1.manifest.files[i].sha256);
    }

    const RunManifest m = RunManifest::from_json(json::parse(slurp(d1 / "manifest.json")));
    CHECK(m.to_json() == o1.manifest.to_json());
}

TEST_CASE("exit codes: contract failure and errors")
{
    const fs::path dir = scratch_dir("codes");
    json j = linear_config();
    j["nonlinearity"] = {{"f", {{"kind", "polynomial"}, {"coefficients", {0.0, 0.0, 0.0, 3.0}}}}};
    j["initial"] = {{"u0", json::array({json::array({1, 1, 0.1})})}};
    j["solver"] = {{"T", 1.0}, {"steps", 100}, {"max_iter", 1}, {"tol_fp", 1e-14}};
    RunConfig c = parse_config(j);
    c.output_dir = dir.string();
    std::ostringstream log;
    CHECK(run(c, log).exit_code == 2);

    RunConfig bad = c;
    bad.cutoffs.M = 2.0;
    CHECK(run(bad, log).exit_code == 1);
    CHECK(log.str().find("cutoff-radii") != std::string::npos);
}

TEST_CASE("output directory falls back to the environment")
{
    const fs::path dir = scratch_dir("env");
    ::setenv(kOutputDirEnv, dir.string().c_str(), 1);
    RunConfig c = parse_config(linear_config());
    c.time_steps = 50;
    std::ostringstream log;
    CHECK(run(c, log).exit_code == 0);
    CHECK(fs::exists(dir / "manifest.json"));
    ::unsetenv(kOutputDirEnv);
}

TEST_CASE("verify-stopped through the driver")
{
    const fs::path dir = scratch_dir("stopped");
    RunConfig c = parse_config({{"subcommand", "verify-stopped"},
                                {"basis", {{"cutoff", 6}}},
                                {"noise", {{"channels", 2}}},
                                {"sweep", {{"cutoffs", {6.0}}, {"path_counts", {20}}, {"steps_per_unit", 20}}},
                                {"output_dir", dir.string()}});
    std::ostringstream log;
    const RunOutcome o = run(c, log);
    CHECK(o.exit_code == 0);
    CHECK(slurp(dir / "stopped.csv").find("paths,max_discrepancy,triggered\n20,") != std::string::npos);
}
