// Acceptance run: one PASS/FAIL line per criterion. Exits 0 unless --strict
// is given and some criterion fails, so a known shortfall stays visible
// without breaking the test suite.
#include "seqdesign/config.hpp"
#include "seqdesign/report.hpp"
#include "seqdesign/simharness.hpp"
#include "seqdesign/solver.hpp"
#include "seqdesign/suites.hpp"

#include <CLI11.hpp>

#include <Eigen/LU>

#include <algorithm>
#include <chrono>
#include <functional>
#include <cmath>
#include <iomanip>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace seqdesign;

namespace {

// Everything printed also goes here, for the optional report file.
std::ostringstream transcript;

struct Check {
    std::string what;
    bool ok = false;
};

class Outcome {
public:
    explicit Outcome(int id, std::string title) : id_(id), title_(std::move(title)) {}
    void add(std::string what, bool ok) { checks_.push_back({std::move(what), ok}); }
    bool passed() const {
        for (const auto& c : checks_) {
            if (!c.ok) return false;
        }
        return !checks_.empty();
    }
    void print(double seconds) const {
        std::ostringstream os;
        os << "criterion " << id_ << ": " << (passed() ? "PASS" : "FAIL") << "  " << title_ << "  (" << std::fixed
           << std::setprecision(1) << seconds << " s)\n";
        for (const auto& c : checks_) os << "    [" << (c.ok ? "ok" : "FAIL") << "] " << c.what << '\n';
        std::cout << os.str() << std::flush;
        transcript << os.str();
    }

private:
    int id_;
    std::string title_;
    std::vector<Check> checks_;
};

std::string fmt(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

Point pt1(double d) {
    Point x(1);
    x[0] = d;
    return x;
}

Design design1(std::vector<double> xs, std::vector<double> ws) {
    std::vector<Point> pts;
    for (double x : xs) pts.push_back(pt1(x));
    return Design(pts, ws);
}

bool three_point(const Design& raw, double interior, double tol, std::string& got) {
    const Design d = prune(raw);
    std::ostringstream os;
    for (std::size_t i = 0; i < d.size(); ++i) os << (i ? ", " : "") << fmt(d.point(i)[0], 5) << ':' << fmt(d.weight(i), 4);
    got = "{" + os.str() + "}";
    if (d.size() != 3) return false;
    bool ok = std::abs(d.point(0)[0]) < 1e-9 && std::abs(d.point(2)[0] - 1) < 1e-9 &&
              std::abs(d.point(1)[0] - interior) <= tol;
    for (double w : d.weights()) ok = ok && std::abs(w - 1.0 / 3) < 1e-6;
    return ok;
}

// ---------------------------------------------------------------- 1
void criterion1(Outcome& c) {
    const Criterion D = Criterion::d();
    struct Golden {
        const char* id;
        double x;
    };
    for (const Golden g : {Golden{"emax:delta=3", 0.14285}, Golden{"emax:delta=5", 0.14285},
                           Golden{"exponential:delta=3", 0.67682}, Golden{"exponential:delta=5", 0.70560}}) {
        const ModelSpec m = builtin_model(g.id);
        std::string got;
        const bool ok = three_point(solve_locally_optimal(m, D, m.candidate_grid()).design, g.x, 1e-3, got);
        c.add(std::string(g.id) + " optimum " + got + ", expected interior " + fmt(g.x, 5), ok);
    }
    {
        const ModelSpec m = builtin_model("linear-dose");
        const Design d = prune(solve_locally_optimal(m, D, m.candidate_grid()).design);
        const bool ok = d.size() == 2 && std::abs(d.point(0)[0]) < 1e-9 && std::abs(d.point(1)[0] - 1) < 1e-9 &&
                        std::abs(d.weight(0) - 0.5) < 1e-6;
        c.add("linear-dose optimum is {0, 1; 1/2, 1/2}", ok);
    }
    {
        const auto models = builtin_suite("dose-response:delta=3").candidates;
        const auto grid = common_grid(models);
        const Design d = prune(robust_geometric_mean_design(models, D, grid).design);
        const std::vector<double> px{0, 0.131, 0.678, 1}, pw{14. / 46, 9. / 46, 9. / 46, 14. / 46};
        bool ok = d.size() == 4;
        std::ostringstream os;
        for (std::size_t i = 0; i < d.size(); ++i) {
            os << (i ? ", " : "") << fmt(d.point(i)[0], 3) << ':' << fmt(d.weight(i), 3);
            if (ok) ok = std::abs(d.point(i)[0] - px[i]) <= 5e-3 && std::abs(d.weight(i) - pw[i]) <= 5e-3;
        }
        const Design tabled = design1(px, pw);
        auto score = [&](const Design& x) {
            double s = 0;
            for (const auto& m : models) s += std::log(criterion_value(D, m, x)) / 3;
            return std::exp(s);
        };
        c.add("robust geometric-mean design at delta=3 is {0, .131, .678, 1; 14/46, 9/46, 9/46, 14/46}; solved {" +
                  os.str() + "}; geometric-mean phi solved " + fmt(score(d), 5) + " vs tabled " + fmt(score(tabled), 5),
              ok);
    }
    {
        const ModelSpec m = builtin_model("robust-parameter:M1");
        const Design d = prune(solve_locally_optimal(m, D, m.candidate_grid()).design);
        bool ok = d.size() == 8;
        std::set<std::vector<int>> corners;
        for (std::size_t i = 0; ok && i < d.size(); ++i) {
            std::vector<int> corner;
            for (Eigen::Index k = 0; k < d.point(i).size(); ++k) {
                if (is_uncontrolled(d.point(i)[k])) continue;
                ok = ok && std::abs(std::abs(d.point(i)[k]) - 1) < 1e-9;
                corner.push_back(d.point(i)[k] > 0);
            }
            ok = ok && corner.size() == 3 && std::abs(d.weight(i) - 0.125) < 1e-6;
            corners.insert(corner);
        }
        c.add("robust-parameter M1 optimum is the 2^3 factorial in the control factors", ok && corners.size() == 8);
    }
    {
        const auto mv = builtin_suite("multivariate-linear").candidates;
        const Design cube = uniform_design(mv[0].space(), 8);
        c.add("2^3 factorial leaves multivariate M2 and M6 inestimable",
              !is_estimable(mv[1], cube) && !is_estimable(mv[5], cube) && is_estimable(mv[0], cube));
    }
}

// ---------------------------------------------------------------- 2
void criterion2(Outcome& c) {
    const Criterion D = Criterion::d();
    double worst = -1e300;
    int solved = 0;
    for (const char* suite : {"dose-response:delta=3", "dose-response:delta=5", "robust-parameter", "multivariate-linear"}) {
        const Suite s = builtin_suite(suite);
        for (const auto& m : s.candidates) {
            const auto grid = m.candidate_grid();
            const SolveReport r = solve_locally_optimal(m, D, grid);
            worst = std::max(worst, equivalence_gap(m, D, r.design, grid));
            ++solved;
        }
        const auto grid = common_grid(s.candidates);
        const SolveReport r = robust_geometric_mean_design(s.candidates, D, grid);
        worst = std::max(worst, compound_equivalence_gap(s.candidates, D, r.design, grid));
        ++solved;
    }
    c.add("max equivalence gap over " + std::to_string(solved) + " solver outputs = " + fmt(worst, 10) + " <= 1e-6",
          worst <= 1e-6);

    // fixed comparison designs against every single-model optimum
    int checked = 0, positive = 0;
    for (const char* suite : {"dose-response:delta=3", "dose-response:delta=5"}) {
        SimConfig cfg;
        cfg.suite = suite;
        const Study study = build_study(cfg);
        for (const auto& named : study.comparisons) {
            for (const auto& m : study.suite.candidates) {
                ++checked;
                positive += equivalence_gap(m, D, named.design, m.candidate_grid()) > 0;
            }
            if (named.name == "robust") {
                ++checked;
                const auto grid = common_grid(study.suite.candidates);
                positive += compound_equivalence_gap(study.suite.candidates, D, named.design, grid) > 0;
            }
        }
    }
    c.add("tabled comparison designs with a positive gap: " + std::to_string(positive) + " / " + std::to_string(checked),
          positive == checked);
}

// ---------------------------------------------------------------- 3 and 4
std::vector<TrueModelResult> fig1_results;

void run_fig1(int R) {
    ExperimentConfig cfg = preset_config("fig1-snr375");
    for (int truth : cfg.true_models) {
        SimConfig sim = cfg.sim;
        sim.true_index = truth;
        fig1_results.emplace_back(truth, replicate(sim, R, sim.seed));
    }
}

void criterion3(Outcome& c) {
    for (const auto& [truth, s] : fig1_results) {
        std::ostringstream os;
        bool above = true;
        for (const auto& comp : s.comparisons) {
            os << ' ' << comp.name << '=' << fmt(comp.efficiency);
            above = above && s.mean_efficiency > comp.efficiency;
        }
        c.add(model_label(truth) + ": sequential " + fmt(s.mean_efficiency) + " above" + os.str(), above);
        if (truth <= 1) {
            c.add(model_label(truth) + ": sequential " + fmt(s.mean_efficiency) + " >= 0.85", s.mean_efficiency >= 0.85);
        }
    }
}

void criterion4(Outcome& c) {
    for (const auto& [truth, s] : fig1_results) {
        const auto& e = s.efficiency_by_n;
        double best_fixed = 0.0;
        for (const auto& comp : s.comparisons) best_fixed = std::max(best_fixed, comp.efficiency);
        // first checkpoint from which the series stays above every fixed design
        std::size_t from = e.size();
        while (from > 0 && e[from - 1] > best_fixed) --from;
        std::ostringstream series;
        for (std::size_t i = 0; i < e.size(); ++i) series << (i ? " " : "") << fmt(e[i], 3);
        c.add(model_label(truth) + ": series [" + series.str() + "] ends above the best fixed design " +
                  fmt(best_fixed) + (from < e.size() ? " from n=" + std::to_string(s.checkpoints[from]) : ""),
              !e.empty() && from < e.size());
        if (truth <= 1) {
            c.add(model_label(truth) + ": last - first = " + fmt(e.back() - e.front()) + " >= 0.1",
                  e.back() >= e.front() + 0.1);
        }
    }
}

// ---------------------------------------------------------------- 5
void criterion5(Outcome& c, int R) {
    ExperimentConfig cfg = preset_config("fig1-snr375");
    SimConfig sim = cfg.sim;
    sim.true_index = 0;
    sim.comparison_accuracy = false;
    const Study study = build_study(sim);
    std::vector<double> miss;
    const std::vector<int> Ts{10, 20, 40, 80};
    std::ostringstream os;
    for (int T : Ts) {
        sim.T = T;
        const ReplicationSummary s = replicate(sim, study, R, sim.seed);
        miss.push_back(s.mean_misselections);
        os << " T=" << T << ':' << fmt(s.mean_misselections, 3);
    }
    c.add("M1 mean misselections" + os.str() + "; T=80 below twice T=20", miss[3] < 2 * miss[1]);

    sim.T = 50;
    std::ostringstream acc;
    bool acc_ok = true;
    for (int truth : cfg.true_models) {
        sim.true_index = truth;
        const ReplicationSummary s = replicate(sim, study, R, sim.seed);
        acc << ' ' << model_label(truth) << '=' << fmt(s.final_model_accuracy, 3);
        acc_ok = acc_ok && s.final_model_accuracy >= 0.95;
    }
    c.add("final-model accuracy at T=50:" + acc.str() + " (>= 0.95)", acc_ok);

    sim.true_index = 0;
    sim.T = 10;
    const AlphaEstimate a = estimate_alpha(sim, study, R, sim.seed);
    if (a.alpha_hat > 0.2) {
        bool ok = true;
        std::ostringstream b;
        for (std::size_t i = 0; i < Ts.size(); ++i) {
            const double bound = theory_bounds(3, std::min(a.alpha_hat, 0.499), Ts[i]).misselect_bound;
            b << " T=" << Ts[i] << ':' << fmt(bound, 1);
            ok = ok && miss[i] <= bound;
        }
        c.add("alpha_hat = " + fmt(a.alpha_hat, 3) + "; observed misselections within the bound" + b.str(), ok);
    } else {
        c.add("alpha_hat = " + fmt(a.alpha_hat, 3) + " <= 0.2, bound comparison not required", true);
    }
}

// ---------------------------------------------------------------- 6
void criterion6(Outcome& c, int R) {
    ExperimentConfig cfg = preset_config("robust-512");
    SimConfig sim = cfg.sim;
    sim.true_index = 0;
    sim.comparison_accuracy = false;
    const ReplicationSummary s = replicate(sim, R, sim.seed);
    c.add("sequential cost " + fmt(s.mean_cost, 1) + " <= 1.1 x optimal cost " + fmt(s.optimal_cost, 1) + " (ratio " +
              fmt(s.mean_cost / s.optimal_cost, 2) + ")",
          s.mean_cost <= 1.1 * s.optimal_cost);
    for (const auto& comp : s.comparisons) {
        if (comp.name != "robust") continue;
        c.add("robust product design cost " + fmt(comp.cost, 1) + " >= 4 x optimal cost", comp.cost >= 4 * s.optimal_cost);
    }
}

// ---------------------------------------------------------------- 7
void criterion7(Outcome& c, int R_gof, int R_trials) {
    SimConfig sim = preset_config("multivar-gof").sim;
    const Study study = build_study(sim);
    const auto& models = study.suite.candidates;
    std::ostringstream os;
    bool ok = true;
    for (std::size_t j = 0; j < models.size(); ++j) {
        // the stage design a true-arm pull produces at rho = 1/2
        const Design d = mix(std::vector<Design>{study.optimal[j], study.uniform}, std::vector<double>{0.5, 0.5});
        const auto runs = round_design(d, sim.n_t);
        int rejected = 0;
        for (int r = 0; r < R_gof; ++r) {
            Rng rng = make_rng(sim.seed, {0x60F, j, static_cast<std::uint64_t>(r)});
            ObservationSet data;
            for (const auto& run : runs) {
                for (int k = 0; k < run.runs; ++k) data.rows.push_back(simulate_response(models[j], run.point, rng));
            }
            rejected += pearson_gof(models[j], data, sim.gof_level, sim.gof_reference).reject;
        }
        const double rate = rejected / double(R_gof);
        os << ' ' << model_label(static_cast<int>(j)) << '=' << fmt(rate, 4);
        ok = ok && std::abs(rate - 0.05) <= 0.02;
    }
    c.add("rejection rate under the true model, n_t=36, " + std::to_string(R_gof) + " replicates:" + os.str(), ok);

    int stages = 0, violations = 0;
    for (std::size_t truth = 0; truth < models.size(); ++truth) {
        sim.true_index = static_cast<int>(truth);
        for (int r = 0; r < R_trials / static_cast<int>(models.size()) + (static_cast<int>(truth) < R_trials % 6); ++r) {
            const TrialResult t = run_trial(sim, study, static_cast<std::uint64_t>(r));
            for (const auto& rec : t.records) {
                ++stages;
                const auto& s = rec.scores;
                bool bad = !s.valid();
                for (std::size_t j = 0; j < s.size(); ++j) bad = bad || (s.zeta[j] == 1 && (!s.checked[j] || s.rejected[j]));
                violations += bad;
            }
        }
    }
    c.add("zeta=1 never given to a rejected or inestimable model: " + std::to_string(violations) + " violations in " +
              std::to_string(stages) + " stages of " + std::to_string(R_trials) + " trials",
          violations == 0 && stages > 0);
}

// ---------------------------------------------------------------- 8
void criterion8(Outcome& c) {
    Rng rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Criterion D = Criterion::d();

    double fd_err = 0.0;
    for (const char* id : {"emax:delta=3", "exponential:delta=5", "linear-dose", "robust-parameter:M6",
                           "multivariate-linear:M6", "trigonometric:degree=2"}) {
        const ModelSpec m = builtin_model(id);
        const DesignSpace& s = m.space();
        for (int rep = 0; rep < 100; ++rep) {
            Point x(s.dim());
            for (int k = 0; k < s.dim(); ++k) x[k] = s.lower()[k] + u(rng) * (s.upper()[k] - s.lower()[k]);
            Eigen::VectorXd beta = m.beta();
            for (Eigen::Index k = 0; k < beta.size(); ++k) beta[k] *= 0.5 + u(rng);
            const Eigen::VectorXd g = m.grad(x, beta);
            for (Eigen::Index k = 0; k < beta.size(); ++k) {
                const double h = 1e-6 * std::max(1.0, std::abs(beta[k]));
                Eigen::VectorXd up = beta, down = beta;
                up[k] += h;
                down[k] -= h;
                const double fd = (m.mean(x, up) - m.mean(x, down)) / (2 * h);
                fd_err = std::max(fd_err, std::abs(fd - g[k]) / std::max(1.0, std::abs(g[k])));
            }
        }
    }
    c.add("gradient vs central differences, max relative error " + fmt(fd_err * 1e6, 4) + "e-6 < 1e-6", fd_err < 1e-6);

    auto random_design = [&](const std::vector<Point>& grid, int m) {
        std::vector<Point> pts;
        std::vector<double> ws;
        for (int i = 0; i < m; ++i) {
            pts.push_back(grid[static_cast<std::size_t>(u(rng) * static_cast<double>(grid.size())) % grid.size()]);
            ws.push_back(0.1 + u(rng));
        }
        return Design::normalized(pts, ws);
    };

    double lin_err = 0.0, hom_err = 0.0, concave_slack = 0.0;
    const std::vector<Criterion> crits{Criterion::d(), Criterion::a(), Criterion::phi(-2), Criterion::phi(0.5)};
    for (const char* id : {"emax:delta=5", "multivariate-linear:M6", "robust-parameter:M4"}) {
        const ModelSpec m = builtin_model(id);
        const auto grid = m.candidate_grid();
        for (int rep = 0; rep < 50; ++rep) {
            const Design a = random_design(grid, 12), b = random_design(grid, 12);
            const double al = u(rng);
            const Design mixed = mix(std::vector<Design>{a, b}, std::vector<double>{al, 1 - al});
            const Eigen::MatrixXd ia = info_matrix(m, a), ib = info_matrix(m, b);
            lin_err = std::max(lin_err, (info_matrix(m, mixed) - (al * ia + (1 - al) * ib)).cwiseAbs().maxCoeff());
            for (const auto& cr : crits) {
                const double va = criterion_value(cr, ia), vb = criterion_value(cr, ib);
                concave_slack = std::min(concave_slack, criterion_value(cr, m, mixed) - (al * va + (1 - al) * vb));
                const double s = 0.1 + 10 * u(rng);
                hom_err = std::max(hom_err, std::abs(criterion_value(cr, s * ia) - s * va) / std::max(1.0, s * va));
            }
        }
    }
    c.add("information linear under mix, max deviation " + fmt(lin_err * 1e12, 4) + "e-12 < 1e-12", lin_err < 1e-12);
    c.add("criteria homogeneous (max relative error " + fmt(hom_err * 1e10, 3) + "e-10) and concave (min slack " +
              fmt(concave_slack * 1e9, 3) + "e-9 >= -1e-9)",
          hom_err < 1e-9 && concave_slack >= -1e-9);

    bool round_ok = true;
    {
        const auto grid = builtin_model("emax:delta=3").candidate_grid();
        for (int rep = 0; rep < 500; ++rep) {
            const Design d = random_design(grid, 1 + rep % 9);
            const int n = static_cast<int>(d.size()) + static_cast<int>(u(rng) * 200);
            double smallest = 1.0;
            for (double w : d.weights()) smallest = std::min(smallest, w);
            for (bool all : {false, true}) {
                // the one-run floor can only move counts when some n*w < 1
                const bool bounded = !all || n * smallest >= 1.0;
                int total = 0;
                const auto runs = round_design(d, n, all);
                for (std::size_t i = 0; i < runs.size(); ++i) {
                    total += runs[i].runs;
                    if (bounded) round_ok = round_ok && std::abs(runs[i].runs - n * d.weight(i)) < 1.0;
                    if (all) round_ok = round_ok && runs[i].runs >= 1;
                }
                round_ok = round_ok && total == n;
            }
        }
    }
    c.add("rounding sums to n with every count within one run of n*w (500 designs)", round_ok);

    bool onehot = true;
    {
        SimConfig sim;
        const Study study = build_study(sim);
        for (int r = 0; r < 30; ++r) {
            for (const auto& rec : run_trial(sim, study, static_cast<std::uint64_t>(r)).records) onehot = onehot && rec.scores.valid();
        }
        SimConfig mv = preset_config("multivar-gof").sim;
        const Study mstudy = build_study(mv);
        for (int r = 0; r < 10; ++r) {
            for (const auto& rec : run_trial(mv, mstudy, static_cast<std::uint64_t>(r)).records) onehot = onehot && rec.scores.valid();
        }
    }
    c.add("one-hot score invariant on every stage of 40 trials", onehot);

    {
        SimConfig sim;
        sim.true_index = 1;
        const Study study = build_study(sim);
        auto stream = [&] {
            std::string out;
            for (int r = 0; r < 5; ++r) {
                for (const auto& rec : run_trial(sim, study, static_cast<std::uint64_t>(r)).records) out += record_to_json_line(rec) + '\n';
            }
            sim.threads = 3;
            const ReplicationSummary s = replicate(sim, study, 9, 11);
            std::ostringstream os;
            os << std::setprecision(17) << s.mean_efficiency << ' ' << s.selection_accuracy;
            for (double e : s.efficiency_by_n) os << ' ' << e;
            sim.threads = 1;
            return out + os.str();
        };
        const std::string a = stream();
        const std::string b = stream();
        c.add("identical seeds give byte-identical stage records and summaries (" + std::to_string(a.size()) + " bytes)",
              a == b);
    }

    for (const char* id : {"linear-dose", "emax:delta=3"}) {
        const ModelSpec m = builtin_model(id);
        const auto grid = m.space().lattice({201}, {true});
        const SolveReport r = solve_locally_optimal(m, D, grid);
        std::vector<Eigen::VectorXd> g;
        for (const auto& x : grid) g.push_back(m.grad(x));
        double best = 0.0;
        const std::size_t n = grid.size();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i; j < n; ++j) {
                const Eigen::MatrixXd mij = g[i] * g[i].transpose() + g[j] * g[j].transpose();
                for (std::size_t k = j; k < n; ++k) {
                    const double det = ((mij + g[k] * g[k].transpose()) / 3.0).determinant();
                    if (det > 0) best = std::max(best, std::pow(det, 1.0 / m.num_params()));
                }
            }
        }
        c.add(std::string(id) + ": brute-force 3-point best " + fmt(best, 8) + " <= solver " + fmt(r.criterion_value, 8) + " + 1e-6",
              best <= r.criterion_value + 1e-6);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance run"};
    bool strict = false;
    std::vector<int> only;
    int fig_R = 500, theory_R = 200, cost_R = 100, gof_R = 2000, gof_trials = 200;
    std::string report;
    app.add_flag("--strict", strict, "Exit 1 when a criterion fails");
    app.add_option("--report", report, "Also write the result lines to this file");
    app.add_option("--only", only, "Run just these criteria");
    app.add_option("--fig-replications", fig_R, "Replicates for the efficiency figures");
    app.add_option("--theory-replications", theory_R, "Replicates for the misselection study");
    app.add_option("--cost-replications", cost_R, "Replicates for the cost study");
    app.add_option("--gof-replications", gof_R, "Replicates for the test calibration");
    app.add_option("--gof-trials", gof_trials, "Trials checked for the filtered selection rule");
    CLI11_PARSE(app, argc, argv);

    auto wanted = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };
    int passed = 0, run = 0;
    auto go = [&](int id, const std::string& title, const std::function<void(Outcome&)>& body) {
        if (!wanted(id)) return;
        Outcome c(id, title);
        const auto start = std::chrono::steady_clock::now();
        try {
            body(c);
        } catch (const std::exception& e) {
            c.add(std::string("exception: ") + e.what(), false);
        }
        c.print(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        ++run;
        passed += c.passed();
    };

    go(1, "golden designs", criterion1);
    go(2, "equivalence certificates", criterion2);
    if (wanted(3) || wanted(4)) {
        const auto start = std::chrono::steady_clock::now();
        run_fig1(fig_R);
        std::ostringstream os;
        os << "(efficiency study at delta=5, R=" << fig_R << ": " << std::fixed << std::setprecision(1)
           << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() << " s)\n";
        std::cout << os.str();
        transcript << os.str();
    }
    go(3, "sequential design beats the fixed designs at n=150", criterion3);
    go(4, "efficiency grows with n", criterion4);
    go(5, "misselections grow slowly", [&](Outcome& c) { criterion5(c, theory_R); });
    go(6, "cost with the cheap model true", [&](Outcome& c) { criterion6(c, cost_R); });
    go(7, "goodness-of-fit calibration and filtering", [&](Outcome& c) { criterion7(c, gof_R, gof_trials); });
    go(8, "property suites", criterion8);

    const std::string tail = "acceptance: " + std::to_string(passed) + " / " + std::to_string(run) + " criteria passed\n";
    std::cout << tail;
    if (!report.empty()) {
        std::ofstream out(report);
        out << transcript.str() << tail;
        if (!out) std::cerr << "could not write " << report << '\n';
    }
    return strict && passed != run ? 1 : 0;
}
