// Batch workbench over the rydssh headers: each subcommand composes the
// library modules into one dataset run and writes CSV or JSON with a
// reproducibility header (tool version, canonical config hash, seed).
//
// Exit codes: 0 success, 2 configuration/validation error, 3 numerical
// failure, 4 resource ceiling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <rydssh/engine.hpp>
#include <rydssh/geometry.hpp>
#include <rydssh/io.hpp>
#include <rydssh/mbcore.hpp>
#include <rydssh/noise.hpp>
#include <rydssh/observables.hpp>
#include <rydssh/protocols.hpp>
#include <rydssh/spmodel.hpp>
#include <rydssh/sptlab.hpp>
#include <rydssh/version.hpp>

namespace {

namespace fs = std::filesystem;
using rydssh::io::config_view;
using rydssh::io::format_g17;
using rydssh::io::json;

// ---------------------------------------------------------------------------
// shared option plumbing

struct run_options {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::string> format;  // csv unless set

    std::string fmt() const { return format.value_or("csv"); }
    std::optional<std::uint64_t> seed;
    std::optional<int> realizations;
    std::optional<std::string> errors_mode;  // "on" / "off"
    int threads = 1;
    bool records = false;
};

void add_common_flags(CLI::App* cmd, run_options& opt) {
    cmd->add_option("--config", opt.config_path, "JSON run configuration");
    cmd->add_option("--out", opt.out_dir, "output directory, created if absent");
    cmd->add_option("--seed", opt.seed, "seed override for stochastic runs");
    cmd->add_option("--threads", opt.threads, "worker cap for grid scans")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--realizations", opt.realizations, "realization count override")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--format", opt.format, "output format")
        ->check(CLI::IsMember({"csv", "json"}));
}

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i)
        out[i] = (n == 1) ? lo : lo + (hi - lo) * double(i) / double(n - 1);
    return out;
}

// ---------------------------------------------------------------------------
// config assembly: defaults <- file <- flags, then schema/physics validation

json effective_config(const run_options& opt, json defaults) {
    if (!opt.config_path.empty()) {
        const json user = rydssh::io::load_json_file(opt.config_path);
        if (!user.is_object())
            throw rydssh::config_error(opt.config_path + ": top level must be a JSON object");
        defaults.merge_patch(user);
    }
    return defaults;
}

bool is_probability(const json& v) {
    return v.is_number() && v.get<double>() >= 0.0 && v.get<double>() <= 1.0;
}

void check_number(const json& sec, const std::string& where, const std::string& key,
                  std::vector<std::string>& diag) {
    if (sec.contains(key) && !sec[key].is_number())
        diag.push_back(where + "/" + key + ": expected a number");
}

// schema plus physics checks; returns one diagnostic per violation, each
// referencing the offending config path
std::vector<std::string> validate_config(const json& cfg) {
    std::vector<std::string> diag;
    if (!cfg.is_object()) {
        diag.push_back("/: top level must be a JSON object");
        return diag;
    }
    static const std::vector<std::string> sections = {
        "chain",   "geometry_file", "hamiltonian",   "schedule", "noise",
        "probe",   "grid",          "spectrum",      "transfer", "sweep",
        "perturbation", "haldane",  "classify",      "hybridization"};
    for (auto it = cfg.begin(); it != cfg.end(); ++it)
        if (std::find(sections.begin(), sections.end(), it.key()) == sections.end())
            diag.push_back("/" + it.key() + ": unknown section");

    int n_sites = 0;
    if (cfg.contains("chain")) {
        const json& c = cfg["chain"];
        if (!c.is_object()) {
            diag.push_back("/chain: expected an object");
        } else {
            if (c.contains("n_sites")) {
                if (!c["n_sites"].is_number_integer())
                    diag.push_back("/chain/n_sites: expected an integer");
                else {
                    n_sites = c["n_sites"].get<int>();
                    if (n_sites < 4) diag.push_back("/chain/n_sites: need at least 4 sites");
                    if (n_sites % 2 != 0)
                        diag.push_back("/chain/n_sites: must be even (whole unit cells)");
                }
            }
            check_number(c, "/chain", "j_mhz", diag);
            check_number(c, "/chain", "j_prime_mhz", diag);
            check_number(c, "/chain", "j_pp_mhz", diag);
            if (c.contains("j_mhz") && c.contains("j_prime_mhz") && c["j_mhz"].is_number() &&
                c["j_prime_mhz"].is_number() &&
                !(std::abs(c["j_mhz"].get<double>()) > std::abs(c["j_prime_mhz"].get<double>())))
                diag.push_back("/chain/j_prime_mhz: dimerization requires |j_mhz| > |j_prime_mhz|");
            if (c.contains("topological") && !c["topological"].is_boolean())
                diag.push_back("/chain/topological: expected a boolean");
            if (c.contains("coupling_model") && c["coupling_model"] != "full_dipolar" &&
                c["coupling_model"] != "nearest_neighbor")
                diag.push_back("/chain/coupling_model: one of full_dipolar, nearest_neighbor");
        }
    }
    double drive = 0.0;
    if (cfg.contains("hamiltonian")) {
        const json& h = cfg["hamiltonian"];
        check_number(h, "/hamiltonian", "drive_mhz", diag);
        check_number(h, "/hamiltonian", "detuning_mhz", diag);
        if (h.contains("drive_mhz") && h["drive_mhz"].is_number())
            drive = h["drive_mhz"].get<double>();
    }
    if (cfg.contains("spectrum")) {
        const json& s = cfg["spectrum"];
        if (s.contains("kind") && s["kind"] != "single_particle" && s["kind"] != "many_body")
            diag.push_back("/spectrum/kind: one of single_particle, many_body");
        if (s.contains("levels") &&
            (!s["levels"].is_number_integer() || s["levels"].get<int>() < 1))
            diag.push_back("/spectrum/levels: positive integer");
        if (s.contains("sector")) {
            if (!s["sector"].is_number_integer() || s["sector"].get<int>() < 0 ||
                (n_sites > 0 && s["sector"].get<int>() > n_sites))
                diag.push_back("/spectrum/sector: integer in [0, n_sites]");
            if (drive != 0.0)
                diag.push_back("/spectrum/sector: a fixed particle sector requires zero drive"
                               " (the drive does not conserve particle number)");
        }
    }
    if (cfg.contains("schedule")) {
        const json& s = cfg["schedule"];
        if (s.contains("legs")) {
            if (!s["legs"].is_array() || s["legs"].size() != 3)
                diag.push_back("/schedule/legs: expected three leg durations");
            else
                for (std::size_t i = 0; i < 3; ++i)
                    if (!s["legs"][i].is_number() || !(s["legs"][i].get<double>() > 0.0))
                        diag.push_back("/schedule/legs/" + std::to_string(i) +
                                       ": positive duration in microseconds");
        }
        check_number(s, "/schedule", "rabi_mhz", diag);
        check_number(s, "/schedule", "delta_start_mhz", diag);
        check_number(s, "/schedule", "delta_end_mhz", diag);
    }
    if (cfg.contains("noise")) {
        const json& m = cfg["noise"];
        for (const char* key : {"eta", "eps", "eps_prime"})
            if (m.contains(key) && !is_probability(m[key]))
                diag.push_back(std::string("/noise/") + key + ": probability must lie in [0, 1]");
        if (m.contains("realizations") &&
            (!m["realizations"].is_number_integer() || m["realizations"].get<int>() < 1))
            diag.push_back("/noise/realizations: positive integer");
        if (m.contains("shots_per_realization") &&
            (!m["shots_per_realization"].is_number_integer() ||
             m["shots_per_realization"].get<int>() < 2))
            diag.push_back("/noise/shots_per_realization: integer >= 2"
                           " (shots split between the two measurement bases)");
        if (m.contains("seed") && (!m["seed"].is_number_integer() || m["seed"].get<double>() < 0))
            diag.push_back("/noise/seed: non-negative integer");
    }
    if (cfg.contains("probe")) {
        const json& p = cfg["probe"];
        if (p.contains("rabi_mhz") &&
            (!p["rabi_mhz"].is_number() || !(p["rabi_mhz"].get<double>() > 0.0)))
            diag.push_back("/probe/rabi_mhz: positive probe drive");
        if (p.contains("duration_us") &&
            (!p["duration_us"].is_number() || !(p["duration_us"].get<double>() > 0.0)))
            diag.push_back("/probe/duration_us: positive duration");
        if (p.contains("n_points") &&
            (!p["n_points"].is_number_integer() || p["n_points"].get<int>() < 1))
            diag.push_back("/probe/n_points: positive integer");
        if (p.contains("delta_min_mhz") && p.contains("delta_max_mhz") &&
            p["delta_min_mhz"].is_number() && p["delta_max_mhz"].is_number() &&
            p["delta_min_mhz"].get<double>() > p["delta_max_mhz"].get<double>())
            diag.push_back("/probe/delta_min_mhz: must not exceed delta_max_mhz");
    }
    if (cfg.contains("grid")) {
        const json& g = cfg["grid"];
        for (const char* key : {"rabi_points", "delta_points"})
            if (g.contains(key) && (!g[key].is_number_integer() || g[key].get<int>() < 1))
                diag.push_back(std::string("/grid/") + key + ": positive integer");
        if (g.contains("rabi_min_mhz") && g.contains("rabi_max_mhz") &&
            g["rabi_min_mhz"].is_number() && g["rabi_max_mhz"].is_number() &&
            g["rabi_min_mhz"].get<double>() > g["rabi_max_mhz"].get<double>())
            diag.push_back("/grid/rabi_min_mhz: must not exceed rabi_max_mhz");
        if (g.contains("delta_min_mhz") && g.contains("delta_max_mhz") &&
            g["delta_min_mhz"].is_number() && g["delta_max_mhz"].is_number() &&
            g["delta_min_mhz"].get<double>() > g["delta_max_mhz"].get<double>())
            diag.push_back("/grid/delta_min_mhz: must not exceed delta_max_mhz");
    }
    if (cfg.contains("transfer")) {
        const json& t = cfg["transfer"];
        if (t.contains("start_site") &&
            (!t["start_site"].is_number_integer() || t["start_site"].get<int>() < 0 ||
             (n_sites > 0 && t["start_site"].get<int>() >= n_sites)))
            diag.push_back("/transfer/start_site: site index in [0, n_sites)");
        if (t.contains("t_max_us") &&
            (!t["t_max_us"].is_number() || !(t["t_max_us"].get<double>() > 0.0)))
            diag.push_back("/transfer/t_max_us: positive duration");
        if (t.contains("n_samples") &&
            (!t["n_samples"].is_number_integer() || t["n_samples"].get<int>() < 8))
            diag.push_back("/transfer/n_samples: integer >= 8");
    }
    if (cfg.contains("sweep")) {
        const json& s = cfg["sweep"];
        if (s.contains("n_samples") &&
            (!s["n_samples"].is_number_integer() || s["n_samples"].get<int>() < 2))
            diag.push_back("/sweep/n_samples: integer >= 2");
    }
    if (cfg.contains("perturbation")) {
        const json& p = cfg["perturbation"];
        if (p.contains("j_mhz") && (!p["j_mhz"].is_number() || p["j_mhz"].get<double>() == 0.0))
            diag.push_back("/perturbation/j_mhz: nonzero strong coupling");
        if (p.contains("grid_points") &&
            (!p["grid_points"].is_number_integer() || p["grid_points"].get<int>() < 2))
            diag.push_back("/perturbation/grid_points: integer >= 2");
        for (const char* key : {"j_prime_max_mhz", "j_pp_max_mhz"})
            if (p.contains(key) && (!p[key].is_number() || !(p[key].get<double>() > 0.0)))
                diag.push_back(std::string("/perturbation/") + key + ": positive bound");
    }
    if (cfg.contains("haldane")) {
        const json& h = cfg["haldane"];
        if (h.contains("ramp") && h["ramp"] != "delta" && h["ramp"] != "k")
            diag.push_back("/haldane/ramp: one of delta, k");
        if (h.contains("cells") && (!h["cells"].is_number_integer() || h["cells"].get<int>() < 2))
            diag.push_back("/haldane/cells: integer >= 2");
        if (h.contains("points") &&
            (!h["points"].is_number_integer() || h["points"].get<int>() < 2))
            diag.push_back("/haldane/points: integer >= 2");
        if (h.contains("levels") &&
            (!h["levels"].is_number_integer() || h["levels"].get<int>() < 1))
            diag.push_back("/haldane/levels: positive integer");
    }
    if (cfg.contains("hybridization")) {
        const json& h = cfg["hybridization"];
        if (h.contains("n_min") && (!h["n_min"].is_number_integer() || h["n_min"].get<int>() < 4))
            diag.push_back("/hybridization/n_min: integer >= 4");
        if (h.contains("n_min") && h.contains("n_max") && h["n_min"].is_number_integer() &&
            h["n_max"].is_number_integer() &&
            h["n_max"].get<int>() < h["n_min"].get<int>())
            diag.push_back("/hybridization/n_max: must be >= n_min");
        if (h.contains("model") && h["model"] != "full_dipolar" && h["model"] != "nearest_neighbor")
            diag.push_back("/hybridization/model: one of full_dipolar, nearest_neighbor");
    }
    if (cfg.contains("classify")) {
        const json& c = cfg["classify"];
        if (c.contains("phi_samples") &&
            (!c["phi_samples"].is_array() || c["phi_samples"].size() < 3))
            diag.push_back("/classify/phi_samples: need at least 3 sample angles");
    }
    return diag;
}

void require_valid(const json& cfg) {
    const auto diag = validate_config(cfg);
    if (diag.empty()) return;
    for (const auto& d : diag) std::fprintf(stderr, "%s\n", d.c_str());
    throw rydssh::config_error("configuration rejected with " + std::to_string(diag.size()) +
                               " diagnostic(s)");
}

// ---------------------------------------------------------------------------
// output helpers

fs::path output_path(const run_options& opt, const std::string& name) {
    fs::create_directories(opt.out_dir);
    return fs::path(opt.out_dir) / (name + (opt.fmt() == "csv" ? ".csv" : ".json"));
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw rydssh::config_error(path.string() + ": cannot open for writing");
    return os;
}

void write_json_output(const fs::path& path, const json& results, std::uint64_t hash,
                       std::optional<std::uint64_t> seed) {
    json doc;
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    doc["meta"] = {{"tool", std::string("rydssh ") + RYDSSH_VERSION_STRING},
                   {"config_hash", buf}};
    if (seed) doc["meta"]["seed"] = *seed;
    doc["results"] = results;
    auto os = open_output(path);
    os << doc.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// model assembly from a validated config

struct chain_setup {
    rydssh::chain_geometry geometry;
    Eigen::MatrixXd coupling;
    int n_sites = 0;
};

chain_setup make_chain(const config_view& root) {
    chain_setup out;
    rydssh::coupling_options copt;
    if (root.has("geometry_file")) {
        const json g = rydssh::io::load_json_file(root.text("geometry_file"));
        out.geometry = rydssh::io::geometry_from_json(g);
        out.n_sites = out.geometry.n();
    } else {
        const auto chain = root.at("chain");
        out.n_sites = static_cast<int>(chain.integer("n_sites"));
        rydssh::magic_chain_config mcfg;
        mcfg.trivial_order = !chain.boolean("topological", true);
        const auto built = rydssh::build_magic_chain(
            out.n_sites, chain.number("j_mhz", 2.42), chain.number("j_prime_mhz", -0.92), mcfg);
        out.geometry = built.geometry;
        const double jpp = chain.number("j_pp_mhz", 0.0);
        if (jpp != 0.0) out.geometry = rydssh::perturb_edge(out.geometry, jpp).geometry;
        if (chain.text("coupling_model", "full_dipolar") == "nearest_neighbor")
            copt.nearest_neighbor_only = true;
    }
    out.coupling = rydssh::coupling_matrix(out.geometry, copt);
    return out;
}

rydssh::hamiltonian_spec make_spec(const chain_setup& cs, const config_view& root) {
    rydssh::hamiltonian_spec spec(cs.n_sites);
    spec.hopping = cs.coupling;
    if (root.has("hamiltonian")) {
        const auto h = root.at("hamiltonian");
        spec.drive_mhz = h.number("drive_mhz", 0.0);
        spec.detuning_mhz = h.number("detuning_mhz", 0.0);
    }
    return spec;
}

rydssh::sweep_schedule make_schedule(const config_view& root, int n_sites) {
    if (!root.has("schedule")) return rydssh::canonical_sweep_schedule(n_sites);
    const auto s = root.at("schedule");
    if (s.boolean("preset", false) || !s.has("legs"))
        return rydssh::canonical_sweep_schedule(n_sites);
    const auto legs = s.number_array("legs");
    if (legs.size() != 3)
        throw rydssh::config_error(s.where() + "/legs: expected three leg durations");
    return rydssh::three_leg_schedule(legs[0], legs[1], legs[2], s.number("rabi_mhz", 2.0),
                                      s.number("delta_start_mhz", -4.0),
                                      s.number("delta_end_mhz", 1.0));
}

// ---------------------------------------------------------------------------
// spectrum

void run_spectrum(const run_options& opt) {
    json cfg = effective_config(opt, json{{"chain",
                                           {{"n_sites", 14},
                                            {"j_mhz", 2.42},
                                            {"j_prime_mhz", -0.92},
                                            {"topological", true}}},
                                          {"spectrum", {{"kind", "single_particle"}}}});
    require_valid(cfg);
    const std::uint64_t hash = rydssh::io::config_hash(cfg);
    const config_view root(cfg);
    const auto cs = make_chain(root);
    const auto sc = root.at("spectrum");
    const std::string kind = sc.text("kind", "single_particle");

    Eigen::VectorXd energies;
    json extra;
    if (kind == "single_particle") {
        const auto sp = rydssh::single_particle_spectrum(cs.coupling);
        energies = sp.values;
        extra["chiral_residual_mhz"] = sp.chiral_residual_mhz;
        extra["bulk_band_gap_mhz"] = rydssh::bulk_band_gap(cs.coupling);
        try {
            const auto em = rydssh::edge_modes(cs.coupling);
            if (em.count == 2)
                extra["edge_modes"] = {{"e_lower_mhz", em.e_lower},
                                       {"e_upper_mhz", em.e_upper},
                                       {"e_hyb_mhz", em.e_hyb}};
        } catch (const std::exception&) {
            // no isolated mid-gap pair for this coupling matrix
        }
    } else {
        const auto spec = make_spec(cs, root);
        const int sector = static_cast<int>(sc.integer("sector", cs.n_sites / 2));
        const int levels = static_cast<int>(sc.integer("levels", 6));
        const auto basis = rydssh::make_sector_basis(cs.n_sites, sector);
        const rydssh::boson_operator op(spec, basis);
        const auto eig = rydssh::lowest_eigenpairs(op, levels);
        energies = eig.values;
        extra["sector"] = sector;
        extra["dim"] = basis->dim();
    }

    const auto path = output_path(opt, "spectrum");
    if (opt.fmt() == "csv") {
        auto os = open_output(path);
        rydssh::io::csv_writer w(os, {"mode", "energy_mhz"}, {hash, {}});
        for (int k = 0; k < energies.size(); ++k)
            w.write_row({std::to_string(k), format_g17(energies[k])});
    } else {
        json res = extra;
        res["kind"] = kind;
        res["energies_mhz"] = std::vector<double>(energies.data(),
                                                  energies.data() + energies.size());
        write_json_output(path, res, hash, {});
    }
    std::printf("spectrum: %s, %d levels, range [%.6f, %.6f] MHz -> %s\n", kind.c_str(),
                static_cast<int>(energies.size()), energies.minCoeff(), energies.maxCoeff(),
                path.string().c_str());
}

// ---------------------------------------------------------------------------
// spectroscopy

void run_spectroscopy(const run_options& opt) {
    json cfg = effective_config(
        opt, json{{"chain",
                   {{"n_sites", 14}, {"j_mhz", 2.42}, {"j_prime_mhz", -0.92}, {"topological", true}}},
                  {"probe",
                   {{"rabi_mhz", 0.05},
                    {"duration_us", 10.0},
                    {"delta_min_mhz", -4.5},
                    {"delta_max_mhz", 4.5},
                    {"n_points", 61}}}});
    require_valid(cfg);
    const std::uint64_t hash = rydssh::io::config_hash(cfg);
    const config_view root(cfg);
    const auto cs = make_chain(root);
    const auto spec = make_spec(cs, root);
    const auto pr = root.at("probe");

    rydssh::spectroscopy_config scfg;
    scfg.probe_rabi_mhz = pr.number("rabi_mhz", 0.05);
    scfg.duration_us = pr.number("duration_us", 10.0);
    scfg.detunings_mhz = linspace(pr.number("delta_min_mhz", -4.5), pr.number("delta_max_mhz", 4.5),
                                  static_cast<int>(pr.integer("n_points", 61)));
    scfg.threads = opt.threads;

    const auto basis = rydssh::make_full_basis(cs.n_sites);
    Eigen::VectorXcd vacuum = Eigen::VectorXcd::Zero(basis->dim());
    vacuum[basis->rank(0u)] = 1.0;
    const auto result = rydssh::spectroscopy_scan(spec, vacuum, scfg);

    const auto path = output_path(opt, "spectroscopy");
    if (opt.fmt() == "csv") {
        auto os = open_output(path);
        rydssh::io::csv_writer w(os, {"delta_mhz", "site", "occupancy"}, {hash, {}});
        for (const auto& p : result.points)
            for (int s = 0; s < p.occupancy.size(); ++s)
                w.write_row({format_g17(p.detuning_mhz), std::to_string(s),
                             format_g17(p.occupancy[s])});
    } else {
        json points = json::array();
        for (const auto& p : result.points)
            points.push_back({{"delta_mhz", p.detuning_mhz},
                              {"total", p.total},
                              {"occupancy",
                               std::vector<double>(p.occupancy.data(),
                                                   p.occupancy.data() + p.occupancy.size())}});
        write_json_output(path, json{{"points", points}}, hash, {});
    }
    double peak_total = 0.0, peak_delta = 0.0;
    for (const auto& p : result.points)
        if (p.total > peak_total) {
            peak_total = p.total;
            peak_delta = p.detuning_mhz;
        }
    std::printf("spectroscopy: %zu detunings, strongest response %.4f at %.4f MHz -> %s\n",
                result.points.size(), peak_total, peak_delta, path.string().c_str());
}

// ---------------------------------------------------------------------------
// hybridization

struct hybridization_flags {
    std::optional<int> n_min, n_max;
    std::optional<std::string> model;
    std::optional<double> j, j_prime;
};

void run_hybridization(const run_options& opt, const hybridization_flags& fl) {
    json cfg = effective_config(
        opt, json{{"chain", {{"n_sites", 14}, {"j_mhz", 2.42}, {"j_prime_mhz", -0.92}}},
                  {"hybridization", {{"n_min", 4}, {"n_max", 60}, {"model", "full_dipolar"}}}});
    if (fl.n_min) cfg["hybridization"]["n_min"] = *fl.n_min;
    if (fl.n_max) cfg["hybridization"]["n_max"] = *fl.n_max;
    if (fl.model) {
        std::string m = *fl.model;
        if (m == "full") m = "full_dipolar";
        if (m == "nn") m = "nearest_neighbor";
        cfg["hybridization"]["model"] = m;
    }
    if (fl.j) cfg["chain"]["j_mhz"] = *fl.j;
    if (fl.j_prime) cfg["chain"]["j_prime_mhz"] = *fl.j_prime;
    require_valid(cfg);
    const std::uint64_t hash = rydssh::io::config_hash(cfg);
    const config_view root(cfg);
    const auto chain = root.at("chain");
    const auto hy = root.at("hybridization");
    const auto model = hy.text("model", "full_dipolar") == "nearest_neighbor"
                           ? rydssh::coupling_model::nearest_neighbor
                           : rydssh::coupling_model::full_dipolar;
    const auto scan = rydssh::hybridization_scan(
        chain.number("j_mhz", 2.42), chain.number("j_prime_mhz", -0.92),
        static_cast<int>(hy.integer("n_min", 4)), static_cast<int>(hy.integer("n_max", 60)),
        model);

    const auto path = output_path(opt, "hybridization");
    if (opt.fmt() == "csv") {
        auto os = open_output(path);
        rydssh::io::csv_writer w(os, {"n", "e_hyb_mhz"}, {hash, {}});
        for (std::size_t i = 0; i < scan.n_sites.size(); ++i)
            w.write_row({std::to_string(scan.n_sites[i]), format_g17(scan.e_hyb_mhz[i])});
    } else {
        json res = {{"n", scan.n_sites},
                    {"e_hyb_mhz", scan.e_hyb_mhz},
                    {"exp_slope_per_cell", scan.exp_slope_per_cell},
                    {"ideal_slope", scan.ideal_slope}};
        if (std::isfinite(scan.loglog_slope)) res["loglog_slope"] = scan.loglog_slope;
        write_json_output(path, res, hash, {});
    }
    std::printf("hybridization: %zu sizes, slope/cell %.4f (ideal %.4f)", scan.n_sites.size(),
                scan.exp_slope_per_cell, scan.ideal_slope);
    if (std::isfinite(scan.loglog_slope)) std::printf(", log-log tail %.3f", scan.loglog_slope);
    std::printf(" -> %s\n", path.string().c_str());
}

// ---------------------------------------------------------------------------
// transfer

void run_transfer(const run_options& opt) {
    json cfg = effective_config(
        opt, json{{"chain",
                   {{"n_sites", 14}, {"j_mhz", 2.42}, {"j_prime_mhz", -0.92}, {"topological", true}}},
                  {"transfer", {{"start_site", 0}, {"t_max_us", 250.0}, {"n_samples", 1024}}}});
    require_valid(cfg);
    const std::uint64_t hash = rydssh::io::config_hash(cfg);
    const config_view root(cfg);
    const auto cs = make_chain(root);
    const auto spec = make_spec(cs, root);
    const auto tr = root.at("transfer");

    rydssh::transfer_config tcfg;
    tcfg.start_site = static_cast<int>(tr.integer("start_site", 0));
    tcfg.t_max_us = tr.number("t_max_us", 250.0);
    tcfg.n_samples = static_cast<int>(tr.integer("n_samples", 1024));
    const auto result = rydssh::transfer_dynamics(spec, tcfg);

    const auto path = output_path(opt, "transfer");
    if (opt.fmt() == "csv") {
        auto os = open_output(path);
        rydssh::io::csv_writer w(os, {"t_us", "left", "right", "bulk"}, {hash, {}});
        for (std::size_t i = 0; i < result.times.size(); ++i)
            w.write_row({format_g17(result.times[i]), format_g17(result.left[i]),
                         format_g17(result.right[i]), format_g17(result.bulk[i])});
    } else {
        write_json_output(path,
                          json{{"t_us", result.times},
                               {"left", result.left},
                               {"right", result.right},
                               {"bulk", result.bulk},
                               {"dominant_freq_mhz", result.dominant_freq_mhz}},
                          hash, {});
    }
    std::printf("transfer: start site %d, dominant frequency %.6f MHz, right-edge peak %.4f -> %s\n",
                tcfg.start_site, result.dominant_freq_mhz,
                *std::max_element(result.right.begin(), result.right.end()),
                path.string().c_str());
}

// ---------------------------------------------------------------------------
// sweep

void run_sweep(const run_options& opt) {
    json cfg = effective_config(
        opt, json{{"chain",
                   {{"n_sites", 10}, {"j_mhz", 2.42}, {"j_prime_mhz", -0.92}, {"topological", true}}},
                  {"schedule", {{"preset", true}}},
                  {"sweep", {{"n_samples", 120}}}});
    require_valid(cfg);
    const std::uint64_t hash = rydssh::io::config_hash(cfg);
    const config_view root(cfg);
    const auto cs = make_chain(root);
    const auto spec = make_spec(cs, root);
    const auto schedule = make_schedule(root, cs.n_sites);
    const int n_samples = static_cast<int>(root.at("sweep").integer("n_samples", 120));

    // overlap target: ground state of the end-of-sweep Hamiltonian in the
    // sector selected by the final detuning, embedded into the full basis
    const auto full = rydssh::make_full_basis(cs.n_sites);
    rydssh::hamiltonian_spec end_spec = spec;
    end_spec.drive_mhz = 0.0;
    end_spec.detuning_mhz = schedule.points.back().nu_delta_mhz;
    const int sector = cs.n_sites / 2 + 1;
    const auto sector_basis = rydssh::make_sector_basis(cs.n_sites, sector);
    const rydssh::boson_operator end_op(end_spec, sector_basis);
    const auto end_eig = rydssh::lowest_eigenpairs(end_op, 1);
    Eigen::VectorXcd target = Eigen::VectorXcd::Zero(full->dim());
    for (std::uint64_t r = 0; r < sector_basis->dim(); ++r)
        target[full->rank(sector_basis->unrank(r))] = end_eig.vectors[0][r];

    const auto result =
        rydssh::adiabatic_sweep(spec, full, schedule, rydssh::sweep_controls(), n_samples, &target);

    const auto path = output_path(opt, "sweep");
    const int n_cols = static_cast<int>(result.pn_trajectory.cols());
    if (opt.fmt() == "csv") {
        auto os = open_output(path);
        rydssh::io::csv_writer w(os, {"t_us", "n", "p_n"}, {hash, {}});
        for (std::size_t i = 0; i < result.times.size(); ++i)
            for (int n = 0; n < n_cols; ++n)
                w.write_row({format_g17(result.times[i]), std::to_string(n),
                             format_g17(result.pn_trajectory(static_cast<int>(i), n))});
    } else {
        json rows = json::array();
        for (std::size_t i = 0; i < result.times.size(); ++i) {
            std::vector<double> pn(n_cols);
            for (int n = 0; n < n_cols; ++n) pn[n] = result.pn_trajectory(static_cast<int>(i), n);
            rows.push_back({{"t_us", result.times[i]}, {"p_n", pn}});
        }
        json res = {{"trajectory", rows},
                    {"target_sector", sector},
                    {"final_overlap", result.overlap_trajectory.back()},
                    {"substeps", result.stats.substeps}};
        write_json_output(path, res, hash, {});
    }
    int modal = 0;
    const auto last = result.pn_trajectory.row(result.pn_trajectory.rows() - 1);
    for (int n = 1; n < n_cols; ++n)
        if (last[n] > last[modal]) modal = n;
    std::printf("sweep: %.2f us schedule, final overlap %.6f with the %d-particle ground state,"
                " modal n %d -> %s\n",
                schedule.t_end(), result.overlap_trajectory.back(), sector, modal,
                path.string().c_str());
}

// ---------------------------------------------------------------------------
// phase-map

void run_phase_map(const run_options& opt) {
    json cfg = effective_config(
        opt, json{{"chain",
                   {{"n_sites", 10}, {"j_mhz", 2.42}, {"j_prime_mhz", -0.92}, {"topological", true}}},
                  {"grid",
                   {{"rabi_min_mhz", 0.0},
                    {"rabi_max_mhz", 4.0},
                    {"rabi_points", 41},
                    {"delta_min_mhz", -4.0},
                    {"delta_max_mhz", 4.0},
                    {"delta_points", 41}}}});
    require_valid(cfg);
    const std::uint64_t hash = rydssh::io::config_hash(cfg);
    const config_view root(cfg);
    const auto cs = make_chain(root);
    const auto spec = make_spec(cs, root);
    const auto gr = root.at("grid");

    rydssh::phase_map_config pcfg;
    pcfg.rabi_grid_mhz = linspace(gr.number("rabi_min_mhz", 0.0), gr.number("rabi_max_mhz", 4.0),
                                  static_cast<int>(gr.integer("rabi_points", 41)));
    pcfg.delta_grid_mhz = linspace(gr.number("delta_min_mhz", -4.0), gr.number("delta_max_mhz", 4.0),
                                   static_cast<int>(gr.integer("delta_points", 41)));
    pcfg.threads = opt.threads;
    const auto result = rydssh::phase_map(spec, pcfg);

    const auto path = output_path(opt, "phase-map");
    if (opt.fmt() == "csv") {
        auto os = open_output(path);
        rydssh::io::csv_writer w(os, {"rabi_mhz", "delta_mhz", "n_particles", "gap_mhz"},
                                 {hash, {}});
        for (std::size_t r = 0; r < result.rabi_grid_mhz.size(); ++r)
            for (std::size_t d = 0; d < result.delta_grid_mhz.size(); ++d)
                w.write_row({format_g17(result.rabi_grid_mhz[r]),
                             format_g17(result.delta_grid_mhz[d]),
                             format_g17(result.n_particles(static_cast<int>(r), static_cast<int>(d))),
                             format_g17(result.gap_mhz(static_cast<int>(r), static_cast<int>(d)))});
    } else {
        json np = json::array(), gap = json::array();
        for (std::size_t r = 0; r < result.rabi_grid_mhz.size(); ++r) {
            std::vector<double> nrow(result.delta_grid_mhz.size()), grow(result.delta_grid_mhz.size());
            for (std::size_t d = 0; d < result.delta_grid_mhz.size(); ++d) {
                nrow[d] = result.n_particles(static_cast<int>(r), static_cast<int>(d));
                grow[d] = result.gap_mhz(static_cast<int>(r), static_cast<int>(d));
            }
            np.push_back(nrow);
            gap.push_back(grow);
        }
        write_json_output(path,
                          json{{"rabi_mhz", result.rabi_grid_mhz},
                               {"delta_mhz", result.delta_grid_mhz},
                               {"n_particles", np},
                               {"gap_mhz", gap}},
                          hash, {});
    }
    std::printf("phase-map: %zu x %zu grid on %d sites -> %s\n", result.rabi_grid_mhz.size(),
                result.delta_grid_mhz.size(), cs.n_sites, path.string().c_str());
}

// ---------------------------------------------------------------------------
// correlators

void run_correlators(const run_options& opt) {
    json cfg = effective_config(
        opt, json{{"chain",
                   {{"n_sites", 14}, {"j_mhz", 2.42}, {"j_prime_mhz", -0.92}, {"topological", true}}},
                  {"schedule", {{"preset", true}}},
                  {"noise",
                   {{"enabled", false},
                    {"eta", 0.06},
                    {"eps", 0.05},
                    {"eps_prime", 0.05},
                    {"seed", 0},
                    {"realizations", 1000},
                    {"shots_per_realization", 100}}}});
    if (opt.errors_mode) cfg["noise"]["enabled"] = (*opt.errors_mode == "on");
    if (opt.seed) cfg["noise"]["seed"] = *opt.seed;
    if (opt.realizations) cfg["noise"]["realizations"] = *opt.realizations;
    require_valid(cfg);
    const std::uint64_t hash = rydssh::io::config_hash(cfg);
    const config_view root(cfg);
    const auto cs = make_chain(root);
    const auto schedule = make_schedule(root, cs.n_sites);
    const auto noise = root.at("noise");
    const bool with_errors = noise.boolean("enabled", false);
    if (opt.records && !with_errors)
        throw rydssh::config_error("--records requires the error model (noise/enabled true)");

    const auto path = output_path(opt, "correlators");
    const int a = 1, b = cs.n_sites - 2;  // string endpoints

    if (!with_errors) {
        const auto spec = make_spec(cs, root);
        const auto full = rydssh::make_full_basis(cs.n_sites);
        const auto swept =
            rydssh::adiabatic_sweep(spec, full, schedule, rydssh::sweep_controls(), 0);
        const auto& psi = swept.final_state;
        const auto zmap = rydssh::build_correlation_map(psi, *full, rydssh::pauli_basis::z);
        const auto xmap = rydssh::build_correlation_map(psi, *full, rydssh::pauli_basis::x);
        const auto zs = rydssh::string_order(psi, *full, rydssh::pauli_basis::z);
        const auto xs = rydssh::string_order(psi, *full, rydssh::pauli_basis::x);
        const auto pairs = rydssh::interior_dimer_pairs(cs.n_sites);
        double cz = 0.0, cx = 0.0;
        for (const auto& [i, j] : pairs) {
            cz += zmap.table(i, j);
            cx += xmap.table(i, j);
        }
        cz /= static_cast<double>(pairs.size());
        cx /= static_cast<double>(pairs.size());

        if (opt.fmt() == "csv") {
            auto os = open_output(path);
            rydssh::io::csv_writer w(os, {"i", "j", "basis", "value"}, {hash, {}});
            for (const auto& [i, j] : pairs) {
                w.write_row({std::to_string(i), std::to_string(j), "z",
                             format_g17(zmap.table(i, j))});
                w.write_row({std::to_string(i), std::to_string(j), "x",
                             format_g17(xmap.table(i, j))});
            }
            // pooled scalars: i = j = -1 marks the average over interior dimers
            w.write_row({"-1", "-1", "z_dimer", format_g17(cz)});
            w.write_row({"-1", "-1", "x_dimer", format_g17(cx)});
            w.write_row({std::to_string(a), std::to_string(b), "z_string", format_g17(zs.value)});
            w.write_row({std::to_string(a), std::to_string(b), "x_string", format_g17(xs.value)});
        } else {
            json pj = json::array();
            for (const auto& [i, j] : pairs)
                pj.push_back(
                    {{"i", i}, {"j", j}, {"z", zmap.table(i, j)}, {"x", xmap.table(i, j)}});
            write_json_output(path,
                              json{{"c_z", cz},
                                   {"c_x", cx},
                                   {"z_string", zs.value},
                                   {"x_string", xs.value},
                                   {"pairs", pj}},
                              hash, {});
        }
        std::printf("correlators (error-free): c_z %.4f, c_x %.4f, z-string %.4f, x-string %.4f"
                    " -> %s\n",
                    cz, cx, zs.value, xs.value, path.string().c_str());
        return;
    }

    rydssh::noisy_sweep_config ncfg;
    ncfg.coupling = cs.coupling;
    ncfg.schedule = schedule;
    ncfg.model.eta = noise.number("eta", 0.06);
    ncfg.model.eps = noise.number("eps", 0.05);
    ncfg.model.eps_prime = noise.number("eps_prime", 0.05);
    ncfg.model.seed = static_cast<std::uint64_t>(noise.integer("seed", 0));
    ncfg.realizations = static_cast<int>(noise.integer("realizations", 1000));
    ncfg.shots_per_realization = static_cast<int>(noise.integer("shots_per_realization", 100));

    std::function<void(const rydssh::shot_record&)> sink;
    std::unique_ptr<std::ofstream> rec_os;
    std::unique_ptr<rydssh::io::csv_writer> rec_writer;
    if (opt.records) {
        fs::create_directories(opt.out_dir);
        rec_os = std::make_unique<std::ofstream>(fs::path(opt.out_dir) / "records.csv",
                                                 std::ios::binary);
        if (!*rec_os) throw rydssh::config_error("records.csv: cannot open for writing");
        rec_writer = std::make_unique<rydssh::io::csv_writer>(
            *rec_os, std::vector<std::string>{"realization", "shot", "x_basis", "site", "bit"},
            rydssh::io::csv_metadata{hash, ncfg.model.seed});
        const int n = cs.n_sites;
        sink = [&rec_writer, n](const rydssh::shot_record& r) {
            for (int s = 0; s < n; ++s)
                rec_writer->write_row({std::to_string(r.realization), std::to_string(r.shot),
                                       r.x_basis ? "1" : "0", std::to_string(s),
                                       (r.bits >> s & 1u) ? "1" : "0"});
        };
    }
    const auto est = rydssh::run_noisy_sweep(ncfg, sink);

    if (opt.fmt() == "csv") {
        auto os = open_output(path);
        rydssh::io::csv_writer w(os, {"i", "j", "basis", "value"}, {hash, ncfg.model.seed});
        w.write_row({"-1", "-1", "z_dimer", format_g17(est.cz_dimer)});
        w.write_row({"-1", "-1", "x_dimer", format_g17(est.cx_dimer)});
        w.write_row({std::to_string(a), std::to_string(b), "z_string", format_g17(est.z_string)});
        w.write_row({std::to_string(a), std::to_string(b), "x_string", format_g17(est.x_string)});
    } else {
        std::vector<double> pn(est.pn_detected.data(),
                               est.pn_detected.data() + est.pn_detected.size());
        write_json_output(path,
                          json{{"c_z", est.cz_dimer},
                               {"c_x", est.cx_dimer},
                               {"z_string", est.z_string},
                               {"x_string", est.x_string},
                               {"c_z_sem", est.cz_sem},
                               {"c_x_sem", est.cx_sem},
                               {"z_string_sem", est.zs_sem},
                               {"x_string_sem", est.xs_sem},
                               {"p_n_detected", pn},
                               {"realizations", est.realizations},
                               {"shots_per_realization", est.shots_per_realization},
                               {"distinct_defect_masks", est.distinct_masks}},
                          hash, ncfg.model.seed);
    }
    std::printf("correlators (noisy, %d x %d shots): c_z %.4f(%.4f), c_x %.4f(%.4f),"
                " z-string %.4f(%.4f), x-string %.4f(%.4f) -> %s\n",
                est.realizations, est.shots_per_realization, est.cz_dimer, est.cz_sem,
                est.cx_dimer, est.cx_sem, est.z_string, est.zs_sem, est.x_string, est.xs_sem,
                path.string().c_str());
}

// ---------------------------------------------------------------------------
// perturbation

void run_perturbation(const run_options& opt) {
    json cfg = effective_config(opt, json{{"perturbation",
                                           {{"j_mhz", 2.42},
                                            {"j_prime_max_mhz", 0.242},
                                            {"j_pp_max_mhz", 0.242},
                                            {"grid_points", 10}}}});
    require_valid(cfg);
    const std::uint64_t hash = rydssh::io::config_hash(cfg);
    const config_view root(cfg);
    const auto pe = root.at("perturbation");
    const double j = pe.number("j_mhz", 2.42);
    const double jp_max = pe.number("j_prime_max_mhz", 0.242);
    const double jpp_max = pe.number("j_pp_max_mhz", 0.242);
    const int points = static_cast<int>(pe.integer("grid_points", 10));

    // 3-site exact splittings: strong bond on (1,2), weak edge couplings
    // J' on (0,1) and J'' on (0,2); one- vs two-particle ground energies
    const auto ed_splitting = [j](double jp, double jpp, bool fermionic) {
        Eigen::MatrixXd hop = Eigen::MatrixXd::Zero(3, 3);
        hop(1, 2) = hop(2, 1) = j;
        hop(0, 1) = hop(1, 0) = jp;
        hop(0, 2) = hop(2, 0) = jpp;
        rydssh::hamiltonian_spec spec(3);
        spec.hopping = hop;
        double e[2];
        for (int np = 1; np <= 2; ++np) {
            const auto basis = rydssh::make_sector_basis(3, np);
            const auto dim = static_cast<Eigen::Index>(basis->dim());
            const auto apply_column = [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) {
                if (fermionic)
                    rydssh::fermion_operator(hop, basis).apply(x.data(), y.data());
                else
                    rydssh::boson_operator(spec, basis).apply(x.data(), y.data());
            };
            Eigen::MatrixXcd dense(dim, dim);
            Eigen::VectorXcd unit = Eigen::VectorXcd::Zero(dim), out(dim);
            for (Eigen::Index c = 0; c < dim; ++c) {
                unit.setZero();
                unit[c] = 1.0;
                apply_column(unit, out);
                dense.col(c) = out;
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(dense);
            e[np - 1] = eig.eigenvalues().minCoeff();
        }
        return e[0] - e[1];
    };

    struct row {
        double jp, jpp, boson_ed, boson_formula, fermion_ed, fermion_formula;
    };
    std::vector<row> rows;
    double max_err = 0.0, tol_at_max = 0.0;
    for (int a = 1; a <= points; ++a)
        for (int b = 1; b <= points; ++b) {
            const double jp = jp_max * double(a) / points;
            const double jpp = jpp_max * double(b) / points;
            const auto bo = rydssh::perturbative_oracle(j, jp, jpp, rydssh::statistics_tag::boson);
            const auto fe =
                rydssh::perturbative_oracle(j, jp, jpp, rydssh::statistics_tag::fermion);
            row r;
            r.jp = jp;
            r.jpp = jpp;
            r.boson_formula = bo.e2_empty_mhz - bo.e2_filled_mhz;
            r.fermion_formula = fe.e2_empty_mhz - fe.e2_filled_mhz;
            r.boson_ed = ed_splitting(jp, jpp, false);
            r.fermion_ed = ed_splitting(jp, jpp, true);
            rows.push_back(r);
            const double tol =
                5.0 * std::pow(std::max(std::abs(jp), std::abs(jpp)), 3) / (j * j);
            const double err = std::max(std::abs(r.boson_ed - r.boson_formula),
                                        std::abs(r.fermion_ed - r.fermion_formula));
            if (err > max_err) {
                max_err = err;
                tol_at_max = tol;
            }
        }

    const auto path = output_path(opt, "perturbation");
    if (opt.fmt() == "csv") {
        auto os = open_output(path);
        rydssh::io::csv_writer w(
            os, {"j_prime_mhz", "j_pp_mhz", "statistics", "splitting_ed_mhz",
                 "splitting_formula_mhz"},
            {hash, {}});
        for (const auto& r : rows) {
            w.write_row({format_g17(r.jp), format_g17(r.jpp), "boson", format_g17(r.boson_ed),
                         format_g17(r.boson_formula)});
            w.write_row({format_g17(r.jp), format_g17(r.jpp), "fermion", format_g17(r.fermion_ed),
                         format_g17(r.fermion_formula)});
        }
    } else {
        json rj = json::array();
        for (const auto& r : rows)
            rj.push_back({{"j_prime_mhz", r.jp},
                          {"j_pp_mhz", r.jpp},
                          {"boson_ed_mhz", r.boson_ed},
                          {"boson_formula_mhz", r.boson_formula},
                          {"fermion_ed_mhz", r.fermion_ed},
                          {"fermion_formula_mhz", r.fermion_formula}});
        write_json_output(path, json{{"rows", rj}, {"max_error_mhz", max_err}}, hash, {});
    }
    std::printf("perturbation: %d x %d grid, worst |ED - formula| %.3e MHz"
                " (third-order bound there %.3e) -> %s\n",
                points, points, max_err, tol_at_max, path.string().c_str());
}

// ---------------------------------------------------------------------------
// haldane-path

void run_haldane_path(const run_options& opt) {
    json cfg = effective_config(
        opt,
        json{{"haldane", {{"ramp", "delta"}, {"cells", 5}, {"points", 21}, {"levels", 5}}}});
    require_valid(cfg);
    const std::uint64_t hash = rydssh::io::config_hash(cfg);
    const config_view root(cfg);
    const auto ha = root.at("haldane");
    const auto ramp = ha.text("ramp", "delta") == "k" ? rydssh::haldane_ramp::k_ramp
                                                      : rydssh::haldane_ramp::delta_ramp;
    const int cells = static_cast<int>(ha.integer("cells", 5));
    const int points = static_cast<int>(ha.integer("points", 21));
    const int levels = static_cast<int>(ha.integer("levels", 5));
    const auto result = rydssh::haldane_path(ramp, linspace(0.0, 1.0, points), cells, levels);

    const auto path = output_path(opt, "haldane-path");
    if (opt.fmt() == "csv") {
        auto os = open_output(path);
        // energies in units of |J| along the interpolation (J = -1 convention)
        rydssh::io::csv_writer w(os, {"parameter", "level", "energy"}, {hash, {}});
        for (std::size_t g = 0; g < result.parameter.size(); ++g)
            for (int k = 0; k < levels; ++k)
                w.write_row({format_g17(result.parameter[g]), std::to_string(k),
                             format_g17(result.energies(static_cast<int>(g), k))});
    } else {
        json rows = json::array();
        for (std::size_t g = 0; g < result.parameter.size(); ++g) {
            std::vector<double> ev(levels);
            for (int k = 0; k < levels; ++k) ev[k] = result.energies(static_cast<int>(g), k);
            rows.push_back({{"parameter", result.parameter[g]}, {"energies", ev}});
        }
        write_json_output(path, json{{"rows", rows}}, hash, {});
    }
    double min_gap = std::numeric_limits<double>::infinity(), max_spread = 0.0;
    if (levels >= 5)
        for (std::size_t g = 0; g < result.parameter.size(); ++g) {
            max_spread =
                std::max(max_spread, result.energies(static_cast<int>(g), 3) -
                                         result.energies(static_cast<int>(g), 0));
            min_gap = std::min(min_gap, result.energies(static_cast<int>(g), 4) -
                                            result.energies(static_cast<int>(g), 3));
        }
    std::printf("haldane-path: %s ramp, %d cells, cluster spread <= %.4f, gap >= %.4f -> %s\n",
                ha.text("ramp", "delta").c_str(), cells, max_spread, min_gap,
                path.string().c_str());
}

// ---------------------------------------------------------------------------
// classify

void run_classify(const run_options& opt) {
    json cfg = effective_config(
        opt, json{{"classify",
                   {{"phi_samples", {rydssh::pi / 7.0, 1.0, rydssh::pi / 2.0, 2.5}}}}});
    require_valid(cfg);
    const std::uint64_t hash = rydssh::io::config_hash(cfg);
    const config_view root(cfg);
    const auto phis = root.at("classify").number_array("phi_samples");

    const auto pair = rydssh::mps_ground_states();
    const rydssh::group_element s_elem{0.0, true};
    const auto describe = [&](const rydssh::mps& m) {
        json out;
        out["tag"] = rydssh::classify(m, phis) == rydssh::phase_tag::topological ? "topological"
                                                                                 : "trivial";
        const rydssh::projective_rep rep(m);
        json samples = json::array();
        for (double phi : phis) {
            const auto chi = rydssh::cocycle(rep, s_elem, rydssh::group_element{phi, false});
            samples.push_back({{"phi", phi}, {"re", chi.real()}, {"im", chi.imag()}});
        }
        out["chi"] = samples;
        return out;
    };
    const json topo = describe(pair.topological);
    const json triv = describe(pair.trivial);

    const auto path = output_path(opt, "classify");
    if (opt.fmt() == "csv") {
        auto os = open_output(path);
        rydssh::io::csv_writer w(os, {"state", "phi", "chi_re", "chi_im", "tag"}, {hash, {}});
        for (const auto& [name, desc] :
             std::vector<std::pair<std::string, const json*>>{{"strong_bond_paired", &topo},
                                                              {"intra_cell_dimer", &triv}})
            for (const auto& s : (*desc)["chi"])
                w.write_row({name, format_g17(s["phi"].get<double>()),
                             format_g17(s["re"].get<double>()),
                             format_g17(s["im"].get<double>()),
                             (*desc)["tag"].get<std::string>()});
    } else {
        write_json_output(path, json{{"strong_bond_paired", topo}, {"intra_cell_dimer", triv}},
                          hash, {});
    }
    std::printf("classify: strong-bond-paired state -> %s, intra-cell dimer state -> %s -> %s\n",
                topo["tag"].get<std::string>().c_str(), triv["tag"].get<std::string>().c_str(),
                path.string().c_str());
}

// ---------------------------------------------------------------------------
// validate + reproduce

int run_validate(const std::string& path) {
    const json cfg = rydssh::io::load_json_file(path);
    const auto diag = validate_config(cfg);
    if (diag.empty()) {
        std::printf("%s: ok\n", path.c_str());
        return 0;
    }
    for (const auto& d : diag) std::fprintf(stderr, "%s: %s\n", path.c_str(), d.c_str());
    return 2;
}

using runner_fn = std::function<void(const run_options&)>;

const std::vector<std::pair<std::string, runner_fn>>& runner_table() {
    static const std::vector<std::pair<std::string, runner_fn>> table = {
        {"spectrum", run_spectrum},
        {"spectroscopy", run_spectroscopy},
        {"hybridization",
         [](const run_options& o) { run_hybridization(o, hybridization_flags{}); }},
        {"transfer", run_transfer},
        {"sweep", run_sweep},
        {"phase-map", run_phase_map},
        {"correlators", run_correlators},
        {"perturbation", run_perturbation},
        {"haldane-path", run_haldane_path},
        {"classify", run_classify},
    };
    return table;
}

void run_reproduce(run_options opt, const std::string& target, bool list_only) {
    const fs::path registry_path = fs::path(RYDSSH_REPO_ROOT) / "configs" / "registry.json";
    const json registry = rydssh::io::load_json_file(registry_path.string());
    if (!registry.contains("targets") || !registry["targets"].is_object())
        throw rydssh::config_error(registry_path.string() + "/targets: missing required object");
    const json& targets = registry["targets"];

    if (list_only) {
        for (auto it = targets.begin(); it != targets.end(); ++it)
            std::printf("%-24s %s\n", it.key().c_str(),
                        it.value().value("description", std::string{}).c_str());
        return;
    }
    if (target.empty()) throw rydssh::config_error("reproduce: name a target or pass --list");
    if (!targets.contains(target))
        throw rydssh::config_error("reproduce: unknown target '" + target +
                                   "' (see reproduce --list)");
    const json& entry = targets[target];
    const std::string subcommand = entry.value("subcommand", std::string{});
    const std::string config_rel = entry.value("config", std::string{});
    if (subcommand.empty() || config_rel.empty())
        throw rydssh::config_error(registry_path.string() + "/targets/" + target +
                                   ": needs subcommand and config");
    opt.config_path = (fs::path(RYDSSH_REPO_ROOT) / config_rel).string();
    if (entry.contains("format") && !opt.format)
        opt.format = entry["format"].get<std::string>();
    for (const auto& [name, fn] : runner_table())
        if (name == subcommand) {
            fn(opt);
            return;
        }
    throw rydssh::config_error(registry_path.string() + "/targets/" + target +
                               ": unknown subcommand '" + subcommand + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dimerized Rydberg chain workbench: spectra, dynamics, phase maps,"
                 " correlators, and symmetry classification"};
    app.set_version_flag("--version", RYDSSH_VERSION_STRING);
    app.require_subcommand(1);

    run_options opt;
    hybridization_flags hfl;
    std::string validate_path, reproduce_target;
    bool reproduce_list = false;

    auto* c_spectrum = app.add_subcommand(
        "spectrum", "single-particle or sector eigenvalues of a dimerized chain");
    add_common_flags(c_spectrum, opt);
    c_spectrum->callback([&] { run_spectrum(opt); });

    auto* c_spectroscopy = app.add_subcommand(
        "spectroscopy", "weak-probe site occupancy versus detuning from the empty chain");
    add_common_flags(c_spectroscopy, opt);
    c_spectroscopy->callback([&] { run_spectroscopy(opt); });

    auto* c_hybrid =
        app.add_subcommand("hybridization", "edge-pair splitting versus chain length");
    add_common_flags(c_hybrid, opt);
    c_hybrid->add_option("--n-min", hfl.n_min, "smallest chain size (even)");
    c_hybrid->add_option("--n-max", hfl.n_max, "largest chain size (even)");
    c_hybrid->add_option("--model", hfl.model, "coupling range")
        ->check(CLI::IsMember({"full", "nn", "full_dipolar", "nearest_neighbor"}));
    c_hybrid->add_option("--j", hfl.j, "strong coupling in MHz");
    c_hybrid->add_option("--j-prime", hfl.j_prime, "weak coupling in MHz");
    c_hybrid->callback([&] { run_hybridization(opt, hfl); });

    auto* c_transfer = app.add_subcommand(
        "transfer", "single-particle edge-to-edge dynamics from a localized start");
    add_common_flags(c_transfer, opt);
    c_transfer->callback([&] { run_transfer(opt); });

    auto* c_sweep =
        app.add_subcommand("sweep", "adiabatic preparation sweep with particle-number tracking");
    add_common_flags(c_sweep, opt);
    c_sweep->callback([&] { run_sweep(opt); });

    auto* c_phase = app.add_subcommand(
        "phase-map", "ground-state particle number and gap over a drive/detuning grid");
    add_common_flags(c_phase, opt);
    c_phase->callback([&] { run_phase_map(opt); });

    auto* c_corr = app.add_subcommand(
        "correlators", "dimer and string correlators of the swept state, exact or sampled");
    add_common_flags(c_corr, opt);
    c_corr->add_option("--errors", opt.errors_mode, "toggle the preparation/detection error model")
        ->check(CLI::IsMember({"on", "off"}));
    c_corr->add_flag("--records", opt.records, "also write per-shot detection records");
    c_corr->callback([&] { run_correlators(opt); });

    auto* c_pert = app.add_subcommand(
        "perturbation", "3-site exact splittings against second-order formulas");
    add_common_flags(c_pert, opt);
    c_pert->callback([&] { run_perturbation(opt); });

    auto* c_haldane = app.add_subcommand(
        "haldane-path", "low levels along the anisotropy/coupling interpolation");
    add_common_flags(c_haldane, opt);
    c_haldane->callback([&] { run_haldane_path(opt); });

    auto* c_classify = app.add_subcommand(
        "classify", "projective symmetry classification of the fixed-point states");
    add_common_flags(c_classify, opt);
    c_classify->callback([&] { run_classify(opt); });

    auto* c_reproduce =
        app.add_subcommand("reproduce", "run a pinned dataset configuration by name");
    c_reproduce->add_option("target", reproduce_target, "registry entry to run");
    c_reproduce->add_flag("--list", reproduce_list, "list registry targets");
    add_common_flags(c_reproduce, opt);
    c_reproduce->get_option("--config")->excludes(c_reproduce->get_option("target"));
    c_reproduce->add_option("--errors", opt.errors_mode, "toggle the error model")
        ->check(CLI::IsMember({"on", "off"}));
    c_reproduce->add_flag("--records", opt.records, "also write per-shot detection records");
    c_reproduce->callback([&] { run_reproduce(opt, reproduce_target, reproduce_list); });

    auto* c_validate =
        app.add_subcommand("validate", "schema and physics checks without running");
    c_validate->add_option("config", validate_path, "configuration file to check")->required();
    int validate_rc = 0;
    c_validate->callback([&] { validate_rc = run_validate(validate_path); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const rydssh::resource_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const rydssh::numerical_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const rydssh::config_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::bad_alloc&) {
        std::fprintf(stderr, "error: allocation failed\n");
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return validate_rc;
}
