#include "snwe/cli_io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace snwe {

namespace {

constexpr const char* kModule = "cli_io";

using nlohmann::json;

const std::set<std::string> kSubcommands{"simulate",        "verify-cluster", "verify-strichartz", "verify-stochastic",
                                         "verify-stopped",  "admissible",     "ledger"};

std::string join_problems(const std::vector<std::string>& problems)
{
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  - " + p;
    return msg;
}

// Typed field readers that record a problem instead of throwing.
class Reader {
public:
    explicit Reader(std::vector<std::string>& problems) : problems_(problems) {}

    const json* section(const json& root, const char* key, std::initializer_list<const char*> allowed)
    {
        if (!root.contains(key)) return nullptr;
        const json& s = root.at(key);
        if (!s.is_object()) {
            problems_.push_back(std::string("json-structure: section \"") + key + "\" must be an object");
            return nullptr;
        }
        unknown_keys(s, allowed, key);
        return &s;
    }

    void unknown_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where)
    {
        const std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& [k, v] : obj.items())
            if (!ok.contains(k))
                problems_.push_back("unknown-key: \"" + k + "\"" + (where.empty() ? "" : " in section \"" + where + "\""));
    }

    template <typename T>
    void read(const json* obj, const char* key, T& dst)
    {
        if (!obj || !obj->contains(key)) return;
        try {
            dst = obj->at(key).get<T>();
        } catch (const json::exception&) {
            problems_.push_back(std::string("json-type: \"") + key + "\" has the wrong type");
        }
    }

    void read_exponent(const json* obj, const char* key, double& dst)
    {
        if (!obj || !obj->contains(key)) return;
        try {
            dst = exponent_from_json(obj->at(key));
        } catch (const Error& e) {
            problems_.push_back(std::string("json-type: \"") + key + "\": " + e.what());
        }
    }

    void read_modes(const json* obj, const char* key, std::vector<ModeValue>& dst)
    {
        if (!obj || !obj->contains(key)) return;
        const json& arr = obj->at(key);
        if (!arr.is_array()) {
            problems_.push_back(std::string("json-type: \"") + key + "\" must be a list of [jx, jy, value]");
            return;
        }
        dst.clear();
        for (const auto& e : arr) {
            try {
                if (e.is_array() && e.size() == 3)
                    dst.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<double>()});
                else if (e.is_object())
                    dst.push_back({e.at("jx").get<int>(), e.at("jy").get<int>(), e.at("value").get<double>()});
                else
                    throw std::invalid_argument("shape");
            } catch (const std::exception&) {
                problems_.push_back(std::string("json-type: entries of \"") + key + "\" must be [jx, jy, value]");
            }
        }
    }

    void read_nonlinearity(const json* obj, const char* key, NonlinearityKind& dst)
    {
        if (!obj || !obj->contains(key)) return;
        try {
            dst = nonlinearity_from_json(obj->at(key));
        } catch (const std::exception& e) {
            problems_.push_back(std::string("nonlinearity: \"") + key + "\": " + e.what());
        }
    }

private:
    std::vector<std::string>& problems_;
};

json modes_json(const std::vector<ModeValue>& modes)
{
    json arr = json::array();
    for (const auto& m : modes) arr.push_back(json::array({m.jx, m.jy, m.value}));
    return arr;
}

Eigen::VectorXd modes_to_coeffs(const SpectralBasis& basis, const std::vector<ModeValue>& modes)
{
    if (modes.empty()) return {};
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.size()));
    for (const auto& m : modes) {
        const auto idx = basis.index_of({m.jx, m.jy});
        if (!idx) throw DomainError(kModule, "mode (" + std::to_string(m.jx) + "," + std::to_string(m.jy) + ") not in basis");
        c[static_cast<Eigen::Index>(*idx)] += m.value;
    }
    return c;
}

std::string utc_now()
{
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

bool is_verify(const std::string& sub)
{
    return sub.rfind("verify-", 0) == 0 || sub == "ledger";
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : Error(kModule, join_problems(problems)), problems_(std::move(problems))
{}

// ---------------------------------------------------------------------------
// RunConfig

BasisPtr RunConfig::basis() const
{
    return build_basis(lx, ly, bc, cutoff);
}

SolverConfig RunConfig::solver_config() const
{
    SolverConfig s;
    s.basis = basis();
    s.horizon = horizon;
    s.steps = time_steps;
    s.triple = triple();
    s.cutoffs = cutoffs;
    s.f_kind = f_kind;
    s.g_kind = g_kind;
    s.noise_channels = channels;
    s.noise_decay = noise_decay;
    s.seed = seed;
    s.paths = paths;
    s.tol_fp = tol_fp;
    s.max_iter = max_iter;
    s.gamma = gamma;
    s.u0 = modes_to_coeffs(*s.basis, u0);
    s.u1 = modes_to_coeffs(*s.basis, u1);
    return s;
}

SweepSpec RunConfig::sweep_spec() const
{
    json j = sweep;
    if (!j.contains("lx")) j["lx"] = lx;
    if (!j.contains("ly")) j["ly"] = ly;
    if (!j.contains("bc")) j["bc"] = to_string(bc);
    if (!j.contains("exponents")) j["exponents"] = json::array({json::array({exponent_to_json(p), exponent_to_json(q)})});
    if (!j.contains("channels") && channels > 0) j["channels"] = channels;
    if (!j.contains("noise_decay")) j["noise_decay"] = noise_decay;
    j["seed"] = seed;
    j["threads"] = threads;
    return SweepSpec::from_json(j);
}

void validate_config(const RunConfig& c)
{
    std::vector<std::string> problems;
    if (!kSubcommands.contains(c.subcommand)) problems.push_back("subcommand: unknown subcommand \"" + c.subcommand + "\"");
    if (!(c.lx > 0.0 && c.ly > 0.0 && std::isfinite(c.lx) && std::isfinite(c.ly)))
        problems.emplace_back("domain-positive: side lengths Lx, Ly must be positive and finite");
    const bool cutoff_ok = c.cutoff > 0.0 && std::isfinite(c.cutoff);
    if (!cutoff_ok) problems.emplace_back("cutoff-positive: Lambda must be positive and finite");
    try {
        (void)admissible_r(c.p, c.q);
    } catch (const DomainError&) {
        problems.push_back("admissible-triple: need 2 <= q <= p <= inf, got p = " + format_double(c.p) +
                           ", q = " + format_double(c.q));
    }
    if (!(c.cutoffs.M_prime > 0.0 && c.cutoffs.M_prime < c.cutoffs.M && c.cutoffs.M < 1.0))
        problems.push_back("cutoff-radii: need 0 < M' < M < 1, got M' = " + format_double(c.cutoffs.M_prime) +
                           ", M = " + format_double(c.cutoffs.M));
    if (!(c.cutoffs.n > 0.0)) problems.emplace_back("truncation-level: n must be positive");
    if (!(c.gamma > 0.0 && 2.0 * c.gamma < c.p))
        problems.push_back("gamma-bound: need 0 < 2 gamma < p, got gamma = " + format_double(c.gamma));
    if (!(c.horizon > 0.0 && std::isfinite(c.horizon))) problems.emplace_back("time-grid: T must be positive");
    if (c.time_steps == 0) problems.emplace_back("time-grid: at least one time step");
    if (!(c.tol_fp > 0.0)) problems.emplace_back("tolerance: tol_fp must be positive");
    if (c.max_iter == 0) problems.emplace_back("tolerance: max_iter must be positive");
    if (c.paths == 0) problems.emplace_back("paths-positive: at least one path");
    if (c.threads == 0) problems.emplace_back("threads-positive: at least one worker");
    if (c.output_modes == 0) problems.emplace_back("output-modes: at least one coefficient column");
    if (!(c.noise_decay >= 0.0)) problems.emplace_back("noise-decay: must be non-negative");

    if (cutoff_ok && c.lx > 0.0 && c.ly > 0.0) {
        const BasisPtr basis = c.basis();
        if (c.channels > basis->size()) problems.emplace_back("noise-channels: more channels than basis modes");
        bool modes_ok = true;
        for (const auto* list : {&c.u0, &c.u1}) {
            for (const auto& m : *list) {
                if (!basis->index_of({m.jx, m.jy})) {
                    modes_ok = false;
                    problems.push_back("initial-modes: mode (" + std::to_string(m.jx) + "," + std::to_string(m.jy) +
                                       ") is not in the basis");
                }
            }
        }
        const bool nonlinear = !is_zero(c.f_kind) || (c.channels > 0 && !is_zero(c.g_kind));
        if (modes_ok && nonlinear && !c.u0.empty()) {
            const double h = ha_norm(*basis, modes_to_coeffs(*basis, c.u0));
            if (!(h < c.cutoffs.M_prime))
                problems.push_back("initial-ball: need ||u0||_{H_A} < M' for a nonlinear problem, got " + format_double(h));
        }
    }
    if (is_verify(c.subcommand)) {
        try {
            c.sweep_spec().validate();
        } catch (const Error& e) {
            problems.push_back(std::string("sweep: ") + e.what());
        }
    }
    if (!problems.empty()) throw ConfigError(problems);
}

RunConfig parse_config(const json& j)
{
    std::vector<std::string> problems;
    if (!j.is_object()) throw ConfigError({"json-structure: config must be a JSON object"});
    Reader rd(problems);
    rd.unknown_keys(j,
                    {"subcommand", "domain", "basis", "exponents", "nonlinearity", "noise", "seed", "solver", "initial",
                     "sweep", "output", "threads", "output_dir"},
                    "");
    RunConfig c;
    const json* root = &j;
    rd.read(root, "subcommand", c.subcommand);
    rd.read(root, "seed", c.seed);
    rd.read(root, "threads", c.threads);
    rd.read(root, "output_dir", c.output_dir);

    if (const json* d = rd.section(j, "domain", {"lx", "ly", "bc"})) {
        rd.read(d, "lx", c.lx);
        rd.read(d, "ly", c.ly);
        if (d->contains("bc")) {
            try {
                c.bc = boundary_from_string(d->at("bc").get<std::string>());
            } catch (const std::exception& e) {
                problems.push_back(std::string("boundary: ") + e.what());
            }
        }
    }
    rd.read(rd.section(j, "basis", {"cutoff"}), "cutoff", c.cutoff);
    if (const json* e = rd.section(j, "exponents", {"p", "q", "r"})) {
        rd.read_exponent(e, "p", c.p);
        rd.read_exponent(e, "q", c.q);
        if (e->contains("r")) problems.emplace_back("r-derived: r is derived from (p, q) and must not be supplied");
    }
    if (const json* n = rd.section(j, "nonlinearity", {"f", "g"})) {
        rd.read_nonlinearity(n, "f", c.f_kind);
        rd.read_nonlinearity(n, "g", c.g_kind);
    }
    if (const json* n = rd.section(j, "noise", {"channels", "decay"})) {
        rd.read(n, "channels", c.channels);
        rd.read(n, "decay", c.noise_decay);
    }
    if (const json* s = rd.section(j, "solver", {"T", "dt", "steps", "n", "M", "M_prime", "shape", "gamma", "tol_fp",
                                                 "max_iter", "paths"})) {
        rd.read(s, "T", c.horizon);
        rd.read(s, "steps", c.time_steps);
        if (s->contains("dt")) {
            double dt = 0.0;
            rd.read(s, "dt", dt);
            const double ratio = dt > 0.0 ? c.horizon / dt : 0.0;
            if (!(ratio >= 1.0) || std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
                problems.emplace_back("time-grid: T must be a positive integer multiple of dt");
            else if (s->contains("steps") && c.time_steps != static_cast<std::size_t>(std::llround(ratio)))
                problems.emplace_back("time-grid: \"dt\" and \"steps\" disagree");
            else
                c.time_steps = static_cast<std::size_t>(std::llround(ratio));
        }
        rd.read(s, "n", c.cutoffs.n);
        rd.read(s, "M", c.cutoffs.M);
        rd.read(s, "M_prime", c.cutoffs.M_prime);
        if (s->contains("shape")) {
            try {
                c.cutoffs.shape = cutoff_shape_from_string(s->at("shape").get<std::string>());
            } catch (const std::exception& e) {
                problems.push_back(std::string("cutoff-shape: ") + e.what());
            }
        }
        rd.read(s, "gamma", c.gamma);
        rd.read(s, "tol_fp", c.tol_fp);
        rd.read(s, "max_iter", c.max_iter);
        rd.read(s, "paths", c.paths);
    }
    if (const json* i = rd.section(j, "initial", {"u0", "u1"})) {
        rd.read_modes(i, "u0", c.u0);
        rd.read_modes(i, "u1", c.u1);
    }
    if (j.contains("sweep")) {
        if (j.at("sweep").is_object())
            c.sweep = j.at("sweep");
        else
            problems.emplace_back("json-structure: section \"sweep\" must be an object");
    }
    rd.read(rd.section(j, "output", {"modes"}), "modes", c.output_modes);

    try {
        validate_config(c);
    } catch (const ConfigError& e) {
        problems.insert(problems.end(), e.problems().begin(), e.problems().end());
    }
    if (!problems.empty()) throw ConfigError(problems);
    return c;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError({"config-file: cannot open \"" + path.string() + "\""});
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("json-syntax: ") + e.what()});
    }
    // A manifest carries the canonical config of the run that produced it.
    if (j.is_object() && j.contains("config_hash") && j.contains("config")) {
        RunConfig c = parse_config(j.at("config"));
        return c;
    }
    return parse_config(j);
}

json canonical_config(const RunConfig& c)
{
    return json{{"subcommand", c.subcommand},
                {"domain", {{"lx", c.lx}, {"ly", c.ly}, {"bc", to_string(c.bc)}}},
                {"basis", {{"cutoff", c.cutoff}}},
                {"exponents", {{"p", exponent_to_json(c.p)}, {"q", exponent_to_json(c.q)}}},
                {"nonlinearity", {{"f", to_json(c.f_kind)}, {"g", to_json(c.g_kind)}}},
                {"noise", {{"channels", c.channels}, {"decay", c.noise_decay}}},
                {"seed", c.seed},
                {"solver",
                 {{"T", c.horizon},
                  {"steps", c.time_steps},
                  {"n", c.cutoffs.n},
                  {"M", c.cutoffs.M},
                  {"M_prime", c.cutoffs.M_prime},
                  {"shape", to_string(c.cutoffs.shape)},
                  {"gamma", c.gamma},
                  {"tol_fp", c.tol_fp},
                  {"max_iter", c.max_iter},
                  {"paths", c.paths}}},
                {"initial", {{"u0", modes_json(c.u0)}, {"u1", modes_json(c.u1)}}},
                {"sweep", c.sweep},
                {"output", {{"modes", c.output_modes}}}};
}

std::string sha256_hex(const std::string& bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error(kModule, "SHA-256 digest failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return os.str();
}

std::string file_sha256(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(kModule, "cannot read \"" + path.string() + "\"");
    std::ostringstream buf;
    buf << in.rdbuf();
    return sha256_hex(buf.str());
}

std::string config_hash(const RunConfig& config)
{
    return sha256_hex(canonical_config(config).dump());
}

std::string provenance_line(const RunConfig& config)
{
    return "# config_hash=" + config_hash(config) + " seed=" + std::to_string(config.seed) + "\n";
}

// ---------------------------------------------------------------------------
// Manifest

json RunManifest::to_json() const
{
    json fl = json::array();
    for (const auto& f : files) fl.push_back({{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    json j{{"config_hash", config_hash}, {"seed", seed},         {"tool_version", tool_version},
           {"resolution", resolution},   {"started_utc", started_utc}, {"finished_utc", finished_utc},
           {"exit_code", exit_code},     {"files", fl},          {"config", config}};
    if (!ledger.is_null()) j["ledger"] = ledger;
    return j;
}

RunManifest RunManifest::from_json(const json& j)
{
    RunManifest m;
    try {
        m.config_hash = j.at("config_hash").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.tool_version = j.at("tool_version").get<std::string>();
        m.resolution = j.at("resolution");
        m.started_utc = j.at("started_utc").get<std::string>();
        m.finished_utc = j.at("finished_utc").get<std::string>();
        m.exit_code = j.at("exit_code").get<int>();
        for (const auto& f : j.at("files"))
            m.files.push_back({f.at("name").get<std::string>(), f.at("sha256").get<std::string>(),
                               f.at("bytes").get<std::uintmax_t>()});
        m.config = j.at("config");
        if (j.contains("ledger")) m.ledger = j.at("ledger");
    } catch (const json::exception& e) {
        throw Error(kModule, std::string("malformed manifest: ") + e.what());
    }
    return m;
}

// ---------------------------------------------------------------------------
// Binary trajectories

namespace {

void put_double(std::ostream& out, double v)
{
    auto bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char buf[8];
    std::memcpy(buf, &bits, 8);
    out.write(buf, 8);
}

double get_double(std::istream& in)
{
    char buf[8];
    if (!in.read(buf, 8)) throw Error(kModule, "truncated trajectory dump");
    std::uint64_t bits = 0;
    std::memcpy(&bits, buf, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    return std::bit_cast<double>(bits);
}

}  // namespace

void write_trajectory_binary(std::ostream& out, const TrajectoryRecord& traj)
{
    const json header{{"format", "snwe-trajectory"},
                      {"version", 1},
                      {"endianness", "little"},
                      {"modes", traj.u.rows()},
                      {"nodes", traj.u.cols()},
                      {"dt", traj.dt},
                      {"velocity", traj.has_velocity()},
                      {"basis", traj.basis->to_json()}};
    out << header.dump() << '\n';
    for (Eigen::Index k = 0; k < traj.u.cols(); ++k)
        for (Eigen::Index j = 0; j < traj.u.rows(); ++j) put_double(out, traj.u(j, k));
    if (traj.has_velocity())
        for (Eigen::Index k = 0; k < traj.ut.cols(); ++k)
            for (Eigen::Index j = 0; j < traj.ut.rows(); ++j) put_double(out, traj.ut(j, k));
}

TrajectoryRecord read_trajectory_binary(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) throw Error(kModule, "missing trajectory header");
    const json h = json::parse(line);
    if (h.value("format", "") != "snwe-trajectory") throw Error(kModule, "not a trajectory dump");
    const BasisPtr basis = SpectralBasis::from_json(h.at("basis"));
    const auto nodes = h.at("nodes").get<std::size_t>();
    const bool vel = h.at("velocity").get<bool>();
    TrajectoryRecord traj(basis, h.at("dt").get<double>(), nodes, vel);
    for (Eigen::Index k = 0; k < traj.u.cols(); ++k)
        for (Eigen::Index j = 0; j < traj.u.rows(); ++j) traj.u(j, k) = get_double(in);
    if (vel)
        for (Eigen::Index k = 0; k < traj.ut.cols(); ++k)
            for (Eigen::Index j = 0; j < traj.ut.rows(); ++j) traj.ut(j, k) = get_double(in);
    return traj;
}

// ---------------------------------------------------------------------------
// Subcommands

std::string admissible_report(double p, double q)
{
    std::ostringstream os;
    os << "p=" << format_double(p) << " q=" << format_double(q);
    double r = 0.0;
    try {
        r = admissible_r(p, q);
    } catch (const DomainError&) {
        os << "\nadmissible: no (rule admissible-triple: need 2 <= q <= p <= inf)\n";
        return os.str();
    }
    os << " r=" << format_double(r) << "\nadmissible: yes\n";
    os << "branch: " << (q < 8.0 ? "low (q <= 8)" : q > 8.0 ? "high (q >= 8)" : "both (q = 8)") << '\n';
    os << "rho(q)=" << format_double(cluster_exponent(q)) << '\n';
    os << "pair condition (q > 2, 0 < r < min{1, (q-2)/2}, r != 1 - 1/q): "
       << (validate_pair_condition(q, r) ? "satisfied" : "violated") << '\n';
    return os.str();
}

namespace {

class OutputSink {
public:
    OutputSink(std::filesystem::path dir, RunManifest& manifest) : dir_(std::move(dir)), manifest_(manifest)
    {
        std::filesystem::create_directories(dir_);
    }

    void write(const std::string& name, const std::string& bytes)
    {
        const auto path = dir_ / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(kModule, "cannot write \"" + path.string() + "\"");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        if (!out) throw Error(kModule, "write failed for \"" + path.string() + "\"");
        manifest_.files.push_back({name, sha256_hex(bytes), bytes.size()});
    }

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    RunManifest& manifest_;
};

std::filesystem::path output_directory(const RunConfig& c)
{
    if (!c.output_dir.empty()) return c.output_dir;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
    return "snwe_out";
}

int run_simulate(const RunConfig& c, OutputSink& sink, RunManifest& manifest, std::ostream& log)
{
    const SolverConfig sc = c.solver_config();
    const MildSolver solver(sc);
    std::vector<SolveResult> results(c.paths);
    parallel_for(c.paths, c.threads, [&](std::size_t path) { results[path] = solver.solve_truncated(path); });

    const std::string prov = provenance_line(c);
    const std::size_t modes = std::min(c.output_modes, sc.basis->size());
    std::ostringstream diag;
    diag << prov << "path,iterations,converged,residual,tau_index,tau_time,trigger\n";
    int code = 0;
    for (std::size_t path = 0; path < c.paths; ++path) {
        const SolveResult& r = results[path];
        std::ostringstream csv;
        csv << prov;
        write_trajectory_csv(csv, r.trajectory, modes);
        sink.write("trajectory_path" + std::to_string(path) + ".csv", csv.str());
        std::ostringstream bin;
        write_trajectory_binary(bin, r.trajectory);
        sink.write("trajectory_path" + std::to_string(path) + ".bin", bin.str());

        const StoppingReport stop = detect_stopping(r.trajectory, c.cutoffs.n, c.cutoffs.M_prime);
        diag << path << ',' << r.diagnostics.iterations << ',' << (r.diagnostics.converged ? 1 : 0) << ','
             << format_double(r.diagnostics.residual) << ',' << (stop.tau ? std::to_string(*stop.tau) : "") << ','
             << format_double(stop.time) << ',' << to_string(stop.trigger) << '\n';
        if (!r.diagnostics.converged || !(r.diagnostics.residual < 10.0 * c.tol_fp)) {
            log << "path " << path << ": fixed point not reached (residual " << format_double(r.diagnostics.residual)
                << ")\n";
            code = 2;
        }
    }
    sink.write("picard.csv", diag.str());
    manifest.resolution = {{"Lambda", c.cutoff},
                           {"r", sc.triple.r},
                           {"modes", sc.basis->size()},
                           {"grid", json::array({solver.norms().grid().nx, solver.norms().grid().ny})},
                           {"dt", sc.dt()},
                           {"steps", sc.steps},
                           {"paths", c.paths}};
    log << "simulate: " << c.paths << " path(s), " << sc.steps << " steps, " << sc.basis->size() << " modes\n";
    return code;
}

void sweep_resolution(RunManifest& manifest, const SweepSpec& s)
{
    manifest.resolution = {{"cutoffs", s.cutoffs},
                           {"horizons", s.horizons},
                           {"steps_per_unit", s.steps_per_unit},
                           {"samples", s.samples},
                           {"path_counts", s.path_counts},
                           {"grid_refine", s.grid_refine}};
}

void write_ledger(OutputSink& sink, RunManifest& manifest, const ConstantsLedger& ledger)
{
    manifest.ledger = ledger.to_json();
    sink.write("ledger.json", manifest.ledger.dump(2) + "\n");
}

int run_cluster(const RunConfig& c, OutputSink& sink, RunManifest& manifest, std::ostream& log)
{
    const SweepSpec s = c.sweep_spec();
    const ClusterReport r = verify_cluster(s);
    std::ostringstream csv;
    csv << provenance_line(c);
    write_cluster_csv(csv, r);
    sink.write("cluster.csv", csv.str());
    write_ledger(sink, manifest, build_ledger({ledger_entries(r, s)}));
    sweep_resolution(manifest, s);
    for (const auto& series : r.series) {
        log << "q=" << format_double(series.q) << " slope=" << format_double(series.slope)
            << " bound=" << format_double(series.rho + series.tolerance) << (series.pass ? " PASS" : " FAIL") << '\n';
    }
    return r.pass() ? 0 : 2;
}

int run_strichartz(const RunConfig& c, OutputSink& sink, RunManifest& manifest, std::ostream& log)
{
    const SweepSpec s = c.sweep_spec();
    const StrichartzReport hom = verify_homogeneous_strichartz(s);
    const StrichartzReport inh = verify_inhomogeneous_strichartz(s);
    for (const auto* rep : {&hom, &inh}) {
        std::ostringstream csv;
        csv << provenance_line(c);
        write_strichartz_csv(csv, *rep);
        sink.write(rep->inhomogeneous ? "strichartz_inhomogeneous.csv" : "strichartz_homogeneous.csv", csv.str());
    }
    write_ledger(sink, manifest, build_ledger({ledger_entries(hom, s), ledger_entries(inh, s)}));
    sweep_resolution(manifest, s);

    bool ok = hom.stable() && inh.stable();
    for (double e : hom.oracle_errors) ok = ok && e < 1e-8;
    for (double e : inh.oracle_errors) ok = ok && e < 1e-6;
    // inhomogeneous maxima must not decrease along the horizon list
    const std::size_t nh = s.horizons.size();
    for (std::size_t i = 0; i + 1 < inh.rows.size(); ++i)
        if ((i + 1) % nh != 0 && inh.rows[i + 1].max_ratio < inh.rows[i].max_ratio) ok = false;
    for (std::size_t i = 0; i < hom.refinement_factors.size(); ++i)
        log << "homogeneous triple " << i << ": refinement factor " << format_double(hom.refinement_factors[i]) << '\n';
    log << "verify-strichartz: " << (ok ? "PASS" : "FAIL") << '\n';
    return ok ? 0 : 2;
}

int run_stochastic(const RunConfig& c, OutputSink& sink, RunManifest& manifest, std::ostream& log)
{
    const SweepSpec s = c.sweep_spec();
    const StochasticReport r = verify_stochastic(s);
    std::ostringstream csv;
    csv << provenance_line(c);
    write_stochastic_csv(csv, r);
    sink.write("stochastic.csv", csv.str());
    write_ledger(sink, manifest, build_ledger({ledger_entries(r, s)}));
    sweep_resolution(manifest, s);
    const bool ok = r.finite() && r.intervals_overlap();
    log << "verify-stochastic: finite=" << r.finite() << " overlap=" << r.intervals_overlap() << '\n';
    return ok ? 0 : 2;
}

int run_stopped(const RunConfig& c, OutputSink& sink, RunManifest& manifest, std::ostream& log)
{
    const SweepSpec s = c.sweep_spec();
    const StoppedReport r = verify_stopped_identity(s);
    std::ostringstream csv;
    csv << provenance_line(c) << "paths,max_discrepancy,triggered\n"
        << r.paths << ',' << format_double(r.max_discrepancy) << ',' << r.triggered << '\n';
    sink.write("stopped.csv", csv.str());
    sweep_resolution(manifest, s);
    log << "verify-stopped: max discrepancy " << format_double(r.max_discrepancy) << " over " << r.paths << " paths\n";
    return r.max_discrepancy < 1e-12 ? 0 : 2;
}

int run_ledger(const RunConfig& c, OutputSink& sink, RunManifest& manifest, std::ostream& log)
{
    const SweepSpec s = c.sweep_spec();
    LipschitzBudget budget;
    budget.M = c.cutoffs.M;
    budget.M_prime = c.cutoffs.M_prime;
    std::vector<std::vector<LedgerEntry>> parts;
    parts.push_back(ledger_entries(verify_cluster(s), s));
    parts.push_back(ledger_entries(verify_homogeneous_strichartz(s), s));
    parts.push_back(ledger_entries(verify_inhomogeneous_strichartz(s), s));
    parts.push_back(ledger_entries(verify_stochastic(s), s));
    const NonlinearityKind f = is_zero(c.f_kind) ? NonlinearityKind{ExponentialCritical{}} : c.f_kind;
    const NonlinearityKind g = is_zero(c.g_kind) ? NonlinearityKind{ExponentialCritical{}} : c.g_kind;
    parts.push_back(ledger_entries(estimate_functional_constants(s, budget, f, g), s));
    const ConstantsLedger ledger = build_ledger(parts);
    write_ledger(sink, manifest, ledger);
    sweep_resolution(manifest, s);
    log << "ledger: " << ledger.entries.size() << " entries\n";
    return 0;
}

}  // namespace

RunOutcome run(const RunConfig& config, std::ostream& log)
{
    RunOutcome outcome;
    RunManifest& manifest = outcome.manifest;
    manifest.started_utc = utc_now();
    manifest.seed = config.seed;
    if (config.subcommand == "admissible") {
        const std::string report = admissible_report(config.p, config.q);
        log << report;
        outcome.exit_code = report.find("admissible: yes") != std::string::npos ? 0 : 2;
        manifest.exit_code = outcome.exit_code;
        return outcome;
    }
    try {
        validate_config(config);
        manifest.config_hash = config_hash(config);
        manifest.config = canonical_config(config);
        OutputSink sink(output_directory(config), manifest);
        const std::string& sub = config.subcommand;
        if (sub == "simulate") {
            outcome.exit_code = run_simulate(config, sink, manifest, log);
        } else if (sub == "verify-cluster") {
            outcome.exit_code = run_cluster(config, sink, manifest, log);
        } else if (sub == "verify-strichartz") {
            outcome.exit_code = run_strichartz(config, sink, manifest, log);
        } else if (sub == "verify-stochastic") {
            outcome.exit_code = run_stochastic(config, sink, manifest, log);
        } else if (sub == "verify-stopped") {
            outcome.exit_code = run_stopped(config, sink, manifest, log);
        } else if (sub == "ledger") {
            outcome.exit_code = run_ledger(config, sink, manifest, log);
        }
        manifest.finished_utc = utc_now();
        manifest.exit_code = outcome.exit_code;
        const std::string text = manifest.to_json().dump(2) + "\n";
        std::ofstream out(sink.dir() / "manifest.json", std::ios::trunc);
        out << text;
        if (!out) throw Error(kModule, "cannot write manifest.json");
    } catch (const std::exception& e) {
        // Error subclasses carry their module name at the front of what()
        log << "error: " << e.what() << '\n';
        outcome.exit_code = 1;
    }
    manifest.exit_code = outcome.exit_code;
    return outcome;
}

}  // namespace snwe
