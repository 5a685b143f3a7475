#pragma once

// Run configuration, validation, canonical hashing, manifests and the
// subcommand driver behind the `snwe` executable.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "snwe/mild_solver.hpp"
#include "snwe/nonlinearity.hpp"
#include "snwe/spectral_domain.hpp"
#include "snwe/verify_harness.hpp"

namespace snwe {

inline constexpr const char* kToolVersion = "0.1.0";
/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "SNWE_OUTPUT_DIR";

/// Every violated rule, each prefixed by its rule name.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    std::vector<std::string> problems_;
};

struct ModeValue {
    int jx = 0;
    int jy = 0;
    double value = 0.0;
    bool operator==(const ModeValue&) const = default;
};

struct RunConfig {
    std::string subcommand = "simulate";
    double lx = 3.141592653589793;
    double ly = 3.141592653589793;
    Boundary bc = Boundary::Dirichlet;
    double cutoff = 16.0;
    double p = 4.0;
    double q = 4.0;
    NonlinearityKind f_kind = ZeroNonlinearity{};
    NonlinearityKind g_kind = ZeroNonlinearity{};
    std::size_t channels = 0;
    double noise_decay = 2.0;
    std::uint64_t seed = 1;
    double horizon = 1.0;
    /// time steps on [0, T]; the config may give either "steps" or "dt"
    std::size_t time_steps = 1000;
    CutoffParams cutoffs;
    double gamma = 0.1;
    double tol_fp = 1e-8;
    std::size_t max_iter = 50;
    std::size_t paths = 1;
    std::vector<ModeValue> u0;
    std::vector<ModeValue> u1;
    /// sweep section as given; domain, seed and threads are filled in by sweep_spec()
    nlohmann::json sweep = nlohmann::json::object();
    /// coefficient columns written per trajectory CSV
    std::size_t output_modes = 8;
    /// not part of the hash: worker count never changes results
    std::size_t threads = 1;
    std::string output_dir;

    ExponentTriple triple() const { return ExponentTriple::admissible(p, q); }
    double dt() const noexcept { return horizon / static_cast<double>(time_steps); }
    BasisPtr basis() const;
    SolverConfig solver_config() const;
    SweepSpec sweep_spec() const;
};

/// Parses and validates. Throws ConfigError listing all problems.
RunConfig parse_config(const nlohmann::json& j);
/// Reads a config file, or the config embedded in a run manifest.
RunConfig load_config(const std::filesystem::path& path);

/// Re-checks the cross-field rules of an already built config (after flag
/// overrides). Throws ConfigError.
void validate_config(const RunConfig& config);

/// Sorted-key JSON of every result-relevant field. Worker count and output
/// directory are left out.
nlohmann::json canonical_config(const RunConfig& config);
std::string config_hash(const RunConfig& config);

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::filesystem::path& path);

struct ManifestFile {
    std::string name;
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunManifest {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string tool_version = kToolVersion;
    nlohmann::json resolution = nlohmann::json::object();
    std::string started_utc;
    std::string finished_utc;
    int exit_code = 0;
    std::vector<ManifestFile> files;
    nlohmann::json config = nlohmann::json::object();
    nlohmann::json ledger;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

struct RunOutcome {
    int exit_code = 0;
    RunManifest manifest;
};

/// "# config_hash=<hex> seed=<n>" provenance line opening every CSV.
std::string provenance_line(const RunConfig& config);

/// Flat little-endian doubles after a one-line JSON header describing the
/// layout (u, then ut when present, both modes x nodes in column order).
void write_trajectory_binary(std::ostream& out, const TrajectoryRecord& traj);
TrajectoryRecord read_trajectory_binary(std::istream& in);

/// Text report of `admissible --p --q`.
std::string admissible_report(double p, double q);

/// Executes the subcommand, writes outputs and manifest.json into the output
/// directory. Exit code: 0 success, 2 failed contract, 1 error. `admissible`
/// only prints its report and returns 2 for an inadmissible pair.
RunOutcome run(const RunConfig& config, std::ostream& log);

}  // namespace snwe
