// drouc: unit commitment for a microgrid under joint net-load/price
// ambiguity. Subcommands cover the pipeline end to end: synth -> ingest ->
// cluster -> solve/sweep.
//
// Exit codes: 0 ok, 2 i/o failure, 3 malformed input, 4 solver did not
// converge. Errors are one line on stderr, "error: <kind>: <detail>".

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "drouc/clustering.hpp"
#include "drouc/dates.hpp"
#include "drouc/dispatch.hpp"
#include "drouc/dro_solver.hpp"
#include "drouc/errors.hpp"
#include "drouc/evaluation.hpp"
#include "drouc/market_data.hpp"
#include "drouc/synth.hpp"

namespace {

using drouc::io_error;
using drouc::schema_error;

// Everything the run needs, config-file defaults overridden by flags.
struct RunOptions {
    std::string config_path;
    std::string out_dir = ".";
    unsigned long long seed = 1;
    int threads = 1;

    std::string data_path;       // ingest/cluster/sweep csv input
    std::string instance_path;   // solve/sweep microgrid json
    std::string scenarios_path;  // solve/sweep scenario json
    int horizon = 24;

    // ingest
    double surcharge = 0.0;
    std::string split_date;

    // cluster
    int s_fixed = 0;  // 0 = scan the range instead
    std::string s_range = "1..12";
    double gamma = 1.0;
    double elbow_threshold = 0.01;

    // solve / sweep
    double rho = 0.0;
    std::vector<double> rho_list;
    double tol = 1e-5;
    double k_max = 50.0;
    int max_iter = 400;
    bool benchmark_suc = false;
    bool dump_lp = false;

    // synth
    int days = 92;
    double spike_prob = 0.08;
    double spike_scale = 1.0;
};

void apply_config(const std::string& path, RunOptions& o) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw schema_error("config " + path + ": " + e.what());
    }
    if (!j.is_object()) throw schema_error("config " + path + ": expected a JSON object");
    auto get = [&](const char* key, auto& slot) {
        if (j.contains(key)) slot = j.at(key).get<std::decay_t<decltype(slot)>>();
    };
    try {
        get("out_dir", o.out_dir);
        get("seed", o.seed);
        get("threads", o.threads);
        get("data", o.data_path);
        get("instance", o.instance_path);
        get("scenarios", o.scenarios_path);
        get("horizon", o.horizon);
        get("surcharge", o.surcharge);
        get("split_date", o.split_date);
        get("s", o.s_fixed);
        get("s_range", o.s_range);
        get("gamma", o.gamma);
        get("elbow_threshold", o.elbow_threshold);
        get("rho", o.rho);
        get("rho_list", o.rho_list);
        get("tol", o.tol);
        get("kmax", o.k_max);
        get("max_iter", o.max_iter);
        get("days", o.days);
        get("spike_prob", o.spike_prob);
        get("spike_scale", o.spike_scale);
    } catch (const nlohmann::json::exception& e) {
        throw schema_error("config " + path + ": " + e.what());
    }
}

std::string join(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

// All artifacts land via temp-file + rename so readers never see a torn
// write and a failed run never clobbers the previous artifact.
void commit_temp(const std::string& tmp, const std::string& path) {
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw io_error("cannot move " + tmp + " to " + path + ": " + ec.message());
    }
}

void atomic_write(const std::string& path, const std::string& body) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw io_error("cannot open " + tmp + " for writing");
        out << body;
        if (!out.good()) throw io_error("failed writing " + tmp);
    }
    commit_temp(tmp, path);
}

template <typename WriteFn>
void atomic_via(const std::string& path, WriteFn&& write) {
    const std::string tmp = path + ".tmp";
    write(tmp);
    commit_temp(tmp, path);
}

void note_artifact(const std::string& path) { std::cout << "wrote " << path << "\n"; }

drouc::SolverConfig solver_config(const RunOptions& o) {
    if (!(o.tol > 0.0)) throw schema_error("tol must be positive");
    if (o.max_iter < 1) throw schema_error("max-iter must be at least 1");
    if (!(o.k_max > 0.0)) throw schema_error("kmax must be positive");
    drouc::SolverConfig cfg;
    cfg.tol = o.tol;
    cfg.max_iter = o.max_iter;
    cfg.threads = o.threads;
    cfg.ambiguity.k_max = o.k_max;
    return cfg;
}

int cmd_synth(const RunOptions& o) {
    drouc::SynthConfig cfg;
    cfg.days = o.days;
    cfg.horizon = o.horizon;
    cfg.seed = o.seed;
    cfg.spike_prob = o.spike_prob;
    cfg.spike_scale = o.spike_scale;
    drouc::Dataset ds = drouc::synth_dataset(cfg);
    const std::string path = join(o.out_dir, "synth.csv");
    atomic_via(path, [&](const std::string& tmp) { drouc::write_profiles(ds, tmp, {}); });
    note_artifact(path);
    return 0;
}

int cmd_ingest(const RunOptions& o) {
    if (o.data_path.empty()) throw schema_error("ingest needs --data <csv>");
    drouc::Dataset ds = drouc::load_profiles(o.data_path, {}, o.horizon);
    if (o.surcharge != 0.0) ds = drouc::apply_surcharge(ds, o.surcharge);
    if (!o.split_date.empty()) {
        drouc::Date boundary;
        try {
            boundary = drouc::parse_date(o.split_date);
        } catch (const std::invalid_argument& e) {
            throw schema_error(std::string("--split-date: ") + e.what());
        }
        auto [train, test] = drouc::split_dataset(ds, boundary);
        if (train.profiles.empty() || test.profiles.empty())
            throw schema_error("--split-date " + o.split_date +
                               " leaves an empty train or test side");
        const std::string train_path = join(o.out_dir, "train.csv");
        const std::string test_path = join(o.out_dir, "test.csv");
        atomic_via(train_path,
                   [&](const std::string& tmp) { drouc::write_profiles(train, tmp, {}); });
        atomic_via(test_path,
                   [&](const std::string& tmp) { drouc::write_profiles(test, tmp, {}); });
        note_artifact(train_path);
        note_artifact(test_path);
    } else {
        const std::string path = join(o.out_dir, "dataset.csv");
        atomic_via(path, [&](const std::string& tmp) { drouc::write_profiles(ds, tmp, {}); });
        note_artifact(path);
    }
    return 0;
}

std::string elbow_csv(const drouc::ElbowReport& report) {
    std::string out;
    out += "# variance_captured = 1 - SS_within/SS_total on flattened z-scored day vectors\n";
    out += "# chosen_S = " + std::to_string(report.chosen_S) + "\n";
    out += "S,variance_captured\n";
    char buf[64];
    for (const auto& row : report.rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g\n", row.S, row.variance_captured);
        out += buf;
    }
    return out;
}

int cmd_cluster(const RunOptions& o) {
    if (o.data_path.empty()) throw schema_error("cluster needs --data <csv>");
    int s_min = 0, s_max = 0;
    if (o.s_fixed > 0) {
        s_min = s_max = o.s_fixed;
    } else {
        auto dots = o.s_range.find("..");
        try {
            if (dots == std::string::npos) throw std::invalid_argument("no '..'");
            std::size_t used = 0;
            s_min = std::stoi(o.s_range.substr(0, dots), &used);
            if (used != dots) throw std::invalid_argument("junk before '..'");
            std::string hi = o.s_range.substr(dots + 2);
            s_max = std::stoi(hi, &used);
            if (used != hi.size()) throw std::invalid_argument("junk after '..'");
        } catch (const std::exception&) {
            throw schema_error("--s-range wants LO..HI, got '" + o.s_range + "'");
        }
        if (s_min < 1 || s_max < s_min)
            throw schema_error("--s-range wants 1 <= LO <= HI, got '" + o.s_range + "'");
    }
    if (!(o.elbow_threshold >= 0.0)) throw schema_error("elbow-threshold must be >= 0");
    if (!(o.gamma > 0.0)) throw schema_error("gamma must be positive");

    drouc::Dataset train = drouc::load_profiles(o.data_path, {}, o.horizon);
    drouc::NormalizationStats stats = drouc::normalization_stats(train);
    std::vector<drouc::SeriesPoint> points = drouc::normalize_dataset(train, stats);
    if (static_cast<int>(points.size()) < s_max)
        throw schema_error("only " + std::to_string(points.size()) + " training days for S up to " +
                           std::to_string(s_max));

    drouc::KmeansConfig kcfg;
    kcfg.gamma = o.gamma;
    kcfg.seed = o.seed;
    std::vector<drouc::Clustering> kept;
    drouc::ElbowReport report =
        drouc::elbow_scan(points, s_min, s_max, kcfg, o.elbow_threshold, 4, &kept);
    const drouc::Clustering& chosen = kept.at(report.chosen_S - s_min);
    drouc::ScenarioSet scen = drouc::build_scenario_set(train, chosen, stats);

    const std::string scen_path = join(o.out_dir, "scenarios.json");
    const std::string elbow_path = join(o.out_dir, "elbow.csv");
    atomic_via(scen_path,
               [&](const std::string& tmp) { drouc::save_scenario_set(scen, tmp); });
    atomic_write(elbow_path, elbow_csv(report));
    note_artifact(scen_path);
    note_artifact(elbow_path);
    std::cout << "chose S=" << report.chosen_S << " of [" << s_min << ".." << s_max << "]\n";
    return 0;
}

int cmd_solve(const RunOptions& o) {
    if (o.instance_path.empty()) throw schema_error("solve needs --instance <json>");
    if (o.scenarios_path.empty()) throw schema_error("solve needs --scenarios <json>");
    if (o.rho < 0.0) throw schema_error("rho must be >= 0");
    drouc::MicrogridInstance inst = drouc::load_instance(o.instance_path);
    drouc::ScenarioSet scen = drouc::load_scenario_set(o.scenarios_path);
    drouc::SolverConfig cfg = solver_config(o);
    cfg.ambiguity.rho = o.rho;

    drouc::UcSolution sol =
        o.benchmark_suc ? drouc::solve_suc(inst, scen, cfg) : drouc::solve_rkl_muc(inst, scen, cfg);

    const std::string path =
        join(o.out_dir, o.benchmark_suc ? "solution_suc.json" : "solution.json");
    atomic_via(path, [&](const std::string& tmp) { drouc::save_solution(sol, tmp); });
    note_artifact(path);

    if (o.dump_lp) {
        std::string text;
        for (std::size_t w = 0; w < scen.scenarios.size(); ++w)
            text += drouc::dispatch_lp_text(sol.schedule, drouc::scenario_profile(scen.scenarios[w]),
                                            inst, "scenario " + std::to_string(w));
        const std::string lp_path = join(o.out_dir, "dispatch_lp.txt");
        atomic_write(lp_path, text);
        note_artifact(lp_path);
    }

    char line[160];
    std::snprintf(line, sizeof(line), "rho=%g objective=%.10g status=%s iterations=%d\n", sol.rho,
                  sol.objective, sol.trace.status.c_str(), sol.trace.iterations);
    std::cout << line;
    if (sol.trace.status != "converged") {
        std::fprintf(stderr, "error: solver: %s after %d iterations (gap %g)\n",
                     sol.trace.status.c_str(), sol.trace.iterations, sol.ub - sol.lb);
        return 4;
    }
    return 0;
}

int cmd_sweep(const RunOptions& o) {
    if (o.instance_path.empty()) throw schema_error("sweep needs --instance <json>");
    if (o.scenarios_path.empty()) throw schema_error("sweep needs --scenarios <json>");
    if (o.data_path.empty()) throw schema_error("sweep needs --data <test csv>");
    drouc::MicrogridInstance inst = drouc::load_instance(o.instance_path);
    drouc::ScenarioSet scen = drouc::load_scenario_set(o.scenarios_path);
    drouc::Dataset test = drouc::load_profiles(o.data_path, {}, o.horizon);

    std::vector<double> rhos = o.rho_list;
    if (rhos.empty()) rhos = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    drouc::SweepReport report;
    try {
        report = drouc::rho_sweep(inst, scen, rhos, test, solver_config(o));
    } catch (const std::invalid_argument& e) {
        throw schema_error(e.what());
    }

    const std::string csv_path = join(o.out_dir, "sweep.csv");
    const std::string svg_path = join(o.out_dir, "sweep.svg");
    atomic_via(csv_path, [&](const std::string& tmp) { drouc::save_sweep_csv(report, tmp); });
    atomic_via(svg_path, [&](const std::string& tmp) { drouc::save_sweep_svg(report, tmp); });
    note_artifact(csv_path);
    note_artifact(svg_path);

    int failed = 0;
    for (const auto& row : report.rows) failed += row.failed ? 1 : 0;
    failed += report.suc.failed ? 1 : 0;
    if (failed > 0)
        std::fprintf(stderr, "warning: %d of %zu sweep rows failed; report is partial\n", failed,
                     report.rows.size() + 1);
    if (failed == static_cast<int>(report.rows.size()) + 1) {
        std::fprintf(stderr, "error: solver: every sweep row failed\n");
        return 4;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    RunOptions o;
    // The config file seeds the defaults, so it has to be read before CLI11
    // assigns flag values over them.
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--config" && i + 1 < argc)
            o.config_path = argv[i + 1];
        else if (a.rfind("--config=", 0) == 0)
            o.config_path = a.substr(9);
    }
    try {
        if (!o.config_path.empty()) apply_config(o.config_path, o);
    } catch (const io_error& e) {
        std::fprintf(stderr, "error: io: %s\n", e.what());
        return 2;
    } catch (const schema_error& e) {
        std::fprintf(stderr, "error: schema: %s\n", e.what());
        return 3;
    }

    CLI::App app{"microgrid unit commitment under net-load/price ambiguity"};
    app.require_subcommand(1);
    app.fallthrough();  // globals like --out-dir also parse after the subcommand
    std::string config_sink;  // parsed by the prescan above
    app.add_option("--config", config_sink, "JSON config file; flags override its values");
    app.add_option("--seed", o.seed, "seed for every random draw in the run");
    app.add_option("--out-dir", o.out_dir, "directory artifacts are written into");
    app.add_option("--threads", o.threads, "worker threads for scenario evaluation")
        ->check(CLI::Range(1, 256));

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic hourly csv dataset");
    synth->add_option("--days", o.days, "days to generate")->check(CLI::Range(1, 4000));
    synth->add_option("--horizon", o.horizon, "hours per day")->check(CLI::Range(1, 48));
    synth->add_option("--spike-prob", o.spike_prob, "per-day price spike probability");
    synth->add_option("--spike-scale", o.spike_scale, "price spike multiplier");

    CLI::App* ingest = app.add_subcommand("ingest", "load a csv, add surcharge, split train/test");
    ingest->add_option("--data", o.data_path, "hourly csv (date,hour,load_kw,pv_kw,price_mwh)");
    ingest->add_option("--surcharge", o.surcharge, "grid surcharge added per MWh");
    ingest->add_option("--split-date", o.split_date,
                       "YYYY-MM-DD; days before it go to train.csv, the rest to test.csv");
    ingest->add_option("--horizon", o.horizon, "hours per day")->check(CLI::Range(1, 48));

    CLI::App* cluster = app.add_subcommand("cluster", "build scenarios from a training csv");
    cluster->add_option("--data", o.data_path, "training csv");
    cluster->add_option("--s", o.s_fixed, "fixed scenario count (skips the elbow choice)")
        ->check(CLI::Range(1, 64));
    cluster->add_option("--s-range", o.s_range, "LO..HI scan range for the elbow rule");
    cluster->add_option("--gamma", o.gamma, "soft-DTW smoothing");
    cluster->add_option("--seed", o.seed, "seed for k-means restarts");
    cluster->add_option("--elbow-threshold", o.elbow_threshold,
                        "variance-captured gain below which the scan stops");
    cluster->add_option("--horizon", o.horizon, "hours per day")->check(CLI::Range(1, 48));

    CLI::App* solve = app.add_subcommand("solve", "solve one commitment problem");
    solve->add_option("--instance", o.instance_path, "microgrid json");
    solve->add_option("--scenarios", o.scenarios_path, "scenario json from cluster");
    solve->add_option("--rho", o.rho, "KL radius of the ambiguity ball");
    solve->add_option("--tol", o.tol, "absolute optimality gap target");
    solve->add_option("--kmax", o.k_max, "cap on the scaled exponent in the master");
    solve->add_option("--max-iter", o.max_iter, "iteration cap per phase");
    solve->add_flag("--benchmark-suc", o.benchmark_suc,
                    "solve the risk-neutral benchmark instead");
    solve->add_flag("--dump-lp", o.dump_lp, "write the per-scenario dispatch LP as text");

    CLI::App* sweep = app.add_subcommand("sweep", "rho sweep with out-of-sample costs");
    sweep->add_option("--instance", o.instance_path, "microgrid json");
    sweep->add_option("--scenarios", o.scenarios_path, "scenario json from cluster");
    sweep->add_option("--data", o.data_path, "held-out test csv");
    sweep->add_option("--rho", o.rho_list, "KL radii to sweep (default 0,0.2,...,1.0)");
    sweep->add_option("--tol", o.tol, "absolute optimality gap target");
    sweep->add_option("--kmax", o.k_max, "cap on the scaled exponent in the master");
    sweep->add_option("--max-iter", o.max_iter, "iteration cap per phase");
    sweep->add_option("--horizon", o.horizon, "hours per day")->check(CLI::Range(1, 48));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        // Top-level --help lists every flag of every subcommand.
        if (app.get_subcommands().empty()) {
            std::cout << app.help("", CLI::AppFormatMode::All);
            return 0;
        }
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        std::filesystem::create_directories(o.out_dir);
        if (synth->parsed()) return cmd_synth(o);
        if (ingest->parsed()) return cmd_ingest(o);
        if (cluster->parsed()) return cmd_cluster(o);
        if (solve->parsed()) return cmd_solve(o);
        if (sweep->parsed()) return cmd_sweep(o);
        std::fprintf(stderr, "error: schema: no subcommand\n");
        return 3;
    } catch (const io_error& e) {
        std::fprintf(stderr, "error: io: %s\n", e.what());
        return 2;
    } catch (const schema_error& e) {
        std::fprintf(stderr, "error: schema: %s\n", e.what());
        return 3;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "error: schema: %s\n", e.what());
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "error: io: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
