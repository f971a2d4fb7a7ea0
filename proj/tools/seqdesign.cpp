// seqdesign command-line tool. Exit codes: 0 success, 1 runtime failure,
// 2 usage error.
#include "seqdesign/config.hpp"
#include "seqdesign/interactive.hpp"
#include "seqdesign/report.hpp"
#include "seqdesign/simharness.hpp"
#include "seqdesign/solver.hpp"
#include "seqdesign/suites.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace seqdesign;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string preset;
    std::string config_file;
    std::vector<std::string> settings;
    std::string out_dir;
    std::string manifest;
    std::int64_t seed = -1;
    int replications = -1;

    // solve
    std::string model_id;
    std::string criterion = "D";
    double tol = 1e-7;
    int grid_points = 0;
    int max_iter = 50000;

    // interactive
    std::string session;
    bool resume = false;

    // report
    std::string report_dir;
};

fs::path output_dir(const Options& o) {
    if (!o.out_dir.empty()) return o.out_dir;
    if (const char* env = std::getenv("SEQDESIGN_OUT_DIR"); env && *env) return env;
    return "seqdesign-out";
}

ExperimentConfig load_config(const Options& o) {
    try {
        ExperimentConfig c;
        if (!o.preset.empty()) c = preset_config(o.preset);
        if (!o.config_file.empty()) {
            if (!fs::exists(o.config_file)) throw UsageError("config file not found: " + o.config_file);
            c = parse_config(read_text_file(o.config_file), c);
        }
        for (const auto& s : o.settings) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
            auto trim = [](std::string v) {
                const auto b = v.find_first_not_of(" \t");
                const auto e = v.find_last_not_of(" \t");
                return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
            };
            apply_setting(c, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
        }
        if (o.seed >= 0) c.sim.seed = static_cast<std::uint64_t>(o.seed);
        if (o.replications >= 0) c.sim.replications = o.replications;
        c.sim.validate();
        return c;
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

std::string solve_text(const ModelSpec& model, const Criterion& crit, const SolveReport& r) {
    std::ostringstream os;
    os << "model: " << model.id() << '\n'
       << "criterion: " << crit.name() << '\n'
       << std::setprecision(10)
       << "criterion_value: " << r.criterion_value << '\n'
       << "equivalence_gap: " << r.equivalence_gap << '\n'
       << "iterations: " << r.iterations << '\n'
       << "converged: " << (r.converged ? "true" : "false") << '\n'
       << "design:\n"
       << design_to_text(r.design, model.space().axis_names());
    return os.str();
}

int cmd_solve(const Options& o, Manifest& m) {
    ModelSpec model = [&] {
        try {
            return builtin_model(o.model_id);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }();
    Criterion crit = [&] {
        try {
            return Criterion::parse(o.criterion);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }();
    std::vector<Point> grid = model.candidate_grid();
    if (o.grid_points > 0) {
        const DesignSpace& space = model.space();
        if (space.is_finite()) throw UsageError("--grid-points needs a box design space");
        std::vector<int> levels(static_cast<std::size_t>(space.dim()), o.grid_points);
        grid = space.lattice(levels, std::vector<bool>(static_cast<std::size_t>(space.dim()), true));
    }
    SolveOptions opts;
    opts.tol = o.tol;
    opts.max_iter = o.max_iter;
    const SolveReport r = solve_locally_optimal(model, crit, grid, opts);
    const std::string text = solve_text(model, crit, r);
    std::cout << text;
    const fs::path dir = output_dir(o);
    fs::create_directories(dir);
    write_text_file(dir / "solve.txt", text);
    m.outputs.push_back("solve.txt");
    std::ostringstream cfg;
    cfg << "model = " << o.model_id << "\ncriterion = " << crit.name() << "\ntol = " << o.tol
        << "\ngrid_points = " << o.grid_points << "\nmax_iter = " << o.max_iter << '\n';
    m.config_text = cfg.str();
    if (!r.converged) {
        std::cerr << "solver did not converge (gap " << r.equivalence_gap << ")\n";
        return 1;
    }
    return 0;
}

std::string trial_text(const TrialResult& t, const Study& study) {
    std::ostringstream os;
    os << std::setprecision(6) << "stage\tarm\trho\tn\tselected\n";
    for (std::size_t i = 0; i < t.records.size(); ++i) {
        const auto& r = t.records[i];
        os << r.t << '\t' << model_label(r.arm) << '\t' << r.rho << '\t' << t.stage_sizes[i] << '\t'
           << (r.scores.selected ? model_label(*r.scores.selected) : std::string("-")) << '\n';
    }
    os << "efficiency\t" << t.metrics.efficiency << "\nfinal_model\t" << model_label(t.metrics.final_model)
       << "\nmisselections\t" << t.metrics.misselections << "\ncost\t" << t.metrics.cost << "\nn\t" << t.metrics.n
       << "\naggregate design:\n"
       << design_to_text(t.aggregate, study.suite.candidates.front().space().axis_names());
    return os.str();
}

int cmd_run(const ExperimentConfig& config, const Options& o, Manifest& m) {
    const fs::path dir = output_dir(o);
    fs::create_directories(dir);
    for (int truth : config.true_models) {
        SimConfig sim = config.sim;
        sim.true_index = truth;
        const Study study = build_study(sim);
        const TrialResult t = run_trial(sim, study, 0);
        std::string lines;
        for (const auto& r : t.records) lines += record_to_json_line(r) + "\n";
        const std::string label = model_label(truth);
        write_text_file(dir / ("stages_" + label + ".jsonl"), lines);
        const std::string text = trial_text(t, study);
        write_text_file(dir / ("trial_" + label + ".txt"), text);
        m.outputs.push_back("stages_" + label + ".jsonl");
        m.outputs.push_back("trial_" + label + ".txt");
        std::cout << "true model " << label << '\n' << text << '\n';
    }
    return 0;
}

int cmd_replicate(const ExperimentConfig& config, const Options& o, Manifest& m) {
    const fs::path dir = output_dir(o);
    std::vector<TrueModelResult> results;
    for (int truth : config.true_models) {
        SimConfig sim = config.sim;
        sim.true_index = truth;
        std::cerr << "replicating " << model_label(truth) << " (" << sim.replications << " trials)\n";
        results.emplace_back(truth, replicate(sim, sim.replications, sim.seed));
    }
    const auto written = write_replication_outputs(dir, config, results);
    m.outputs.insert(m.outputs.end(), written.begin(), written.end());
    std::cout << summary_text(config, results);
    return 0;
}

int cmd_interactive(const ExperimentConfig& config, const Options& o, Manifest& m) {
    const fs::path dir = output_dir(o);
    fs::create_directories(dir);
    const fs::path file = o.session.empty() ? dir / "session.json" : fs::path(o.session);
    if (o.resume && !fs::exists(file)) throw UsageError("no session file at " + file.string());
    InteractiveSession session = o.resume ? InteractiveSession::resume(file) : InteractiveSession(config, file);
    if (o.resume) std::cout << "resuming at stage " << session.state().t << '\n';
    m.config_text = config_to_text(session.config());
    m.seed = session.config().sim.seed;
    const bool done = session.run(std::cin, std::cout);
    m.outputs.push_back(file.string());
    if (!done) std::cout << "session saved to " << file.string() << "; rerun with --resume to continue\n";
    return 0;
}

int cmd_report(const Options& o, Manifest& m) {
    const fs::path dir = o.report_dir.empty() ? output_dir(o) : fs::path(o.report_dir);
    if (!fs::exists(dir / "efficiency_by_n.tsv")) throw UsageError("no replication outputs in " + dir.string());
    std::vector<std::string> written;
    std::cout << regenerate_report(dir, written);
    m.outputs = written;
    return 0;
}

// Replaces the options with what the manifest recorded; the config snapshot
// wins over presets and files.
std::string apply_manifest(Options& o, ExperimentConfig& config) {
    const Manifest rec = read_manifest(o.manifest);
    if (rec.command == "solve") {
        std::istringstream in(rec.config_text);
        std::string line;
        while (std::getline(in, line)) {
            const auto eq = line.find(" = ");
            if (eq == std::string::npos) continue;
            const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
            if (key == "model") o.model_id = value;
            else if (key == "criterion") o.criterion = value;
            else if (key == "tol") o.tol = std::stod(value);
            else if (key == "grid_points") o.grid_points = std::stoi(value);
            else if (key == "max_iter") o.max_iter = std::stoi(value);
        }
    } else {
        try {
            config = parse_config(rec.config_text);
        } catch (const std::invalid_argument& e) {
            throw UsageError(std::string("manifest config: ") + e.what());
        }
    }
    return rec.command;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential experimental design under model uncertainty"};
    app.require_subcommand(0, 1);
    app.fallthrough();
    Options o;
    app.add_option("--out-dir", o.out_dir, "Output directory (default: $SEQDESIGN_OUT_DIR or ./seqdesign-out)");
    app.add_option("--manifest", o.manifest, "Replay the command recorded in a manifest.json");

    auto add_config_flags = [&](CLI::App* sub) {
        sub->add_option("--preset", o.preset, "Start from a preset: fig1-snr375, fig1-snr135, robust-512, multivar-gof");
        sub->add_option("--config", o.config_file, "Config file (key = value lines)");
        sub->add_option("--set", o.settings, "Override one config key, key=value")->allow_extra_args(false);
        sub->add_option("--seed", o.seed, "Master seed");
        sub->add_option("--replications", o.replications, "Number of replicates");
    };

    auto* solve = app.add_subcommand("solve", "Locally optimal design for one model");
    solve->add_option("model", o.model_id, "Model id, e.g. emax:delta=3")->required();
    solve->add_option("criterion", o.criterion, "D, A or phi:q=<q>");
    solve->add_option("--tol", o.tol, "Equivalence gap tolerance");
    solve->add_option("--grid-points", o.grid_points, "Equispaced levels per axis instead of the default grid");
    solve->add_option("--max-iter", o.max_iter, "Multiplicative iteration cap");

    auto* run = app.add_subcommand("run", "One sequential trial per true model");
    add_config_flags(run);
    auto* rep = app.add_subcommand("replicate", "Monte Carlo replication study");
    add_config_flags(rep);
    auto* inter = app.add_subcommand("interactive", "Stage-by-stage session with typed-in responses");
    add_config_flags(inter);
    inter->add_option("--session", o.session, "Session file (default: <out-dir>/session.json)");
    inter->add_flag("--resume", o.resume, "Continue a saved session");
    auto* report = app.add_subcommand("report", "Rebuild charts and the summary table of a replicate output directory");
    report->add_option("dir", o.report_dir, "Output directory of a replicate run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    Manifest manifest;
    manifest.started = utc_timestamp();
    for (int i = 1; i < argc; ++i) manifest.arguments.emplace_back(argv[i]);
    try {
        std::string command;
        ExperimentConfig config;
        if (!o.manifest.empty()) {
            command = apply_manifest(o, config);
        } else {
            if (app.get_subcommands().empty()) throw UsageError("a subcommand is required; see --help");
            command = app.get_subcommands().front()->get_name();
            if (command == "run" || command == "replicate" || command == "interactive") config = load_config(o);
        }
        manifest.command = command;
        if (command != "solve" && command != "report") {
            manifest.config_text = config_to_text(config);
            manifest.seed = config.sim.seed;
        }
        int code = 0;
        if (command == "solve") code = cmd_solve(o, manifest);
        else if (command == "run") code = cmd_run(config, o, manifest);
        else if (command == "replicate") code = cmd_replicate(config, o, manifest);
        else if (command == "interactive") code = cmd_interactive(config, o, manifest);
        else if (command == "report") code = cmd_report(o, manifest);
        else throw UsageError("unknown command in manifest: " + command);
        manifest.finished = utc_timestamp();
        write_manifest(command == "report" && !o.report_dir.empty() ? fs::path(o.report_dir) : output_dir(o), manifest);
        return code;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
