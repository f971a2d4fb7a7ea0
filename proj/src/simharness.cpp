#include "seqdesign/simharness.hpp"

#include "seqdesign/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace seqdesign {

namespace {

constexpr std::uint64_t kComparisonTag = 1'000'000;
constexpr std::uint64_t kAlphaTag = 0xA1FA;

Point scalar_point(double x) {
    Point p(1);
    p[0] = x;
    return p;
}

Design table_design(std::initializer_list<double> xs, std::initializer_list<double> ws) {
    std::vector<Point> pts;
    for (double x : xs) pts.push_back(scalar_point(x));
    return Design::normalized(std::move(pts), std::vector<double>(ws));
}

bool has_param(const std::string& id, const std::string& key, double value) {
    const std::string token = key + "=";
    const auto pos = id.find(token);
    if (pos == std::string::npos) return value == 3.0;  // suite default
    return std::stod(id.substr(pos + token.size())) == value;
}

std::string suite_head(const std::string& id) { return id.substr(0, id.find(':')); }

Design mixture_of(std::span<const Design> designs) {
    const std::vector<double> alphas(designs.size(), 1.0 / static_cast<double>(designs.size()));
    return mix(designs, alphas);
}

Design solved_robust(const Suite& suite) {
    const auto grid = common_grid(suite.candidates);
    return robust_geometric_mean_design(suite.candidates, Criterion::d(), grid).design;
}

// Runs body(i) for i in [0, count) on a pool of threads.
void parallel_for(int count, int threads, const std::function<void(int)>& body) {
    if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::min(threads, std::max(count, 1));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

ObservationSet simulate_runs(const ModelSpec& truth, const std::vector<RoundedRun>& runs, Rng& rng) {
    ObservationSet data;
    for (const auto& run : runs) {
        for (int r = 0; r < run.runs; ++r) data.rows.push_back(simulate_response(truth, run.point, rng));
    }
    return data;
}

double planned_cost(const std::vector<RoundedRun>& runs, const DesignSpace& space) {
    double total = 0.0;
    for (const auto& run : runs) total += run.runs * (1.0 + 5.0 * controlled_noise(space, run.point));
    return total;
}

double safe_efficiency(const Criterion& crit, const ModelSpec& model, const Design& design,
                       const Design& reference) {
    return std::clamp(efficiency(crit, model, design, reference), 0.0, 1.0 + 1e-9);
}

int stage_size(const SimConfig& config, int arm) {
    const int base = config.n_per_arm.empty() ? config.n_t : config.n_per_arm[static_cast<std::size_t>(arm)];
    return base - config.pretest_n;
}

}  // namespace

void SimConfig::validate() const {
    const Suite suite_models = builtin_suite(suite);
    const int k = static_cast<int>(suite_models.candidates.size());
    if (true_index < 0 || true_index >= k) {
        throw std::invalid_argument("true_model: index out of range for suite " + suite);
    }
    if (T < 1) throw std::invalid_argument("T: must be >= 1");
    if (n_t < 1) throw std::invalid_argument("n_t: must be >= 1");
    if (!n_per_arm.empty() && static_cast<int>(n_per_arm.size()) != k) {
        throw std::invalid_argument("n_per_arm: need one size per candidate model");
    }
    for (int v : n_per_arm) {
        if (v < 1) throw std::invalid_argument("n_per_arm: sizes must be positive");
    }
    if (budget < 0) throw std::invalid_argument("budget: must be >= 0");
    if (!n_per_arm.empty() && budget == 0) {
        throw std::invalid_argument("budget: per-arm stage sizes need a total budget");
    }
    if (pretest_n < 0) throw std::invalid_argument("pretest_n: must be >= 0");
    for (int j = 0; j < k; ++j) {
        if (stage_size(*this, j) < 1) {
            throw std::invalid_argument("pretest_n: must be smaller than every stage size");
        }
    }
    if (!(gof_level > 0.0 && gof_level < 1.0)) throw std::invalid_argument("gof_level: must lie in (0,1)");
    if (replications < 1) throw std::invalid_argument("replications: must be >= 1");
    if (eval == EvalMode::plain_bic && pretest_n == 0) {
        int pmax = 0;
        for (const auto& m : suite_models.candidates) pmax = std::max(pmax, m.num_params());
        const int smallest = n_per_arm.empty() ? n_t : *std::min_element(n_per_arm.begin(), n_per_arm.end());
        if (smallest < pmax) throw std::invalid_argument("n_t: must be at least the largest parameter count");
    }
    if (threads < 0) throw std::invalid_argument("threads: must be >= 0");
}

std::vector<NamedDesign> comparison_table(const Suite& suite, std::span<const Design> optimal) {
    std::vector<NamedDesign> out;
    const std::string head = suite_head(suite.id);
    const DesignSpace& space = suite.candidates.front().space();
    if (head == "dose-response") {
        out.push_back({"uniform", uniform_design(space, 5)});
        out.push_back({"standard", table_design({0.0, 0.05, 0.2, 0.6, 1.0}, {0.2, 0.2, 0.2, 0.2, 0.2})});
        const bool d3 = has_param(suite.id, "delta", 3.0);
        const bool d5 = has_param(suite.id, "delta", 5.0);
        if (d3 || d5) {
            const double x_exp = d3 ? 0.67682 : 0.70560;
            out.push_back({"hybrid", table_design({0.0, 0.14285, x_exp, 1.0},
                                                  {7.0 / 18, 2.0 / 18, 2.0 / 18, 7.0 / 18})});
            out.push_back({"robust", d3 ? table_design({0.0, 0.131, 0.678, 1.0},
                                                       {14.0 / 46, 9.0 / 46, 9.0 / 46, 14.0 / 46})
                                        : table_design({0.0, 0.129, 0.726, 1.0},
                                                       {14.0 / 46, 9.0 / 46, 9.0 / 46, 14.0 / 46})});
        } else {
            out.push_back({"hybrid", mixture_of(optimal)});
            out.push_back({"robust", solved_robust(suite)});
        }
    } else if (head == "robust-parameter") {
        std::vector<bool> controls(static_cast<std::size_t>(space.dim()));
        for (int k = 0; k < space.dim(); ++k) controls[static_cast<std::size_t>(k)] = !space.is_noise_axis(k);
        out.push_back({"uniform-64", uniform_design(space, 64, controls)});
        out.push_back({"hybrid", mixture_of(optimal)});
        out.push_back({"robust", solved_robust(suite)});
    } else if (head == "multivariate-linear") {
        out.push_back({"uniform", uniform_design(space, 8)});
        out.push_back({"hybrid", mixture_of(optimal)});
        out.push_back({"robust", solved_robust(suite)});
    } else {
        out.push_back({"hybrid", mixture_of(optimal)});
    }
    return out;
}

Study build_study(const SimConfig& config) {
    config.validate();
    Study study;
    study.suite = builtin_suite(config.suite);
    for (const auto& model : study.suite.candidates) {
        const SolveReport& report = global_design_cache().get(model, config.criterion);
        if (!report.converged) {
            throw std::runtime_error("optimal design for " + model.id() + " did not converge");
        }
        study.optimal.push_back(report.design);
        study.minimal_support.push_back(prune(report.design).size());
    }
    const std::string head = suite_head(config.suite);
    const DesignSpace& space = study.suite.candidates.front().space();
    if (head == "robust-parameter") {
        std::vector<bool> controls(static_cast<std::size_t>(space.dim()));
        for (int k = 0; k < space.dim(); ++k) controls[static_cast<std::size_t>(k)] = !space.is_noise_axis(k);
        study.uniform = uniform_design(space, 64, controls);
    } else if (head == "multivariate-linear") {
        study.uniform = uniform_design(space, 8);
    } else if (space.dim() == 1) {
        study.uniform = uniform_design(space, 5);
    } else {
        study.uniform = uniform_design(space, static_cast<std::size_t>(1) << space.dim());
    }
    auto all = comparison_table(study.suite, study.optimal);
    if (config.comparison_designs.empty()) {
        study.comparisons = std::move(all);
    } else {
        for (const auto& name : config.comparison_designs) {
            const auto it = std::find_if(all.begin(), all.end(), [&](const NamedDesign& d) { return d.name == name; });
            if (it == all.end()) throw std::invalid_argument("comparison_designs: unknown design '" + name + "'");
            study.comparisons.push_back(*it);
        }
    }
    study.cost_axes.assign(static_cast<std::size_t>(space.dim()), false);
    for (int k = 0; k < space.dim(); ++k) study.cost_axes[static_cast<std::size_t>(k)] = space.is_noise_axis(k);
    return study;
}

StageContext make_stage_context(const SimConfig& config, const Study& study, const ModelSpec* truth) {
    StageContext ctx;
    ctx.models = study.suite.candidates;
    ctx.optimal = study.optimal;
    ctx.uniform = study.uniform;
    ctx.rho = config.rho;
    ctx.eval = config.eval;
    ctx.gof_level = config.gof_level;
    ctx.gof_reference = config.gof_reference;
    ctx.true_model = truth;
    ctx.minimal_support = study.minimal_support[static_cast<std::size_t>(config.true_index)];
    ctx.criterion = config.criterion;
    return ctx;
}

std::pair<int, bool> next_stage_size(const SimConfig& config, int arm, int used) {
    int n = stage_size(config, arm);
    if (config.budget > 0 && used + n > config.budget) return {config.budget - used, false};
    return {n, true};
}

bool stages_remaining(const SimConfig& config, int stages_done, int used) {
    if (config.budget > 0) return used < config.budget;
    return stages_done < config.T;
}

std::vector<RoundedRun> pretest_runs(const SimConfig& config, const Study& study) {
    if (config.pretest_n <= 0) return {};
    return round_design(study.uniform, config.pretest_n,
                        static_cast<std::size_t>(config.pretest_n) >= study.uniform.size());
}

Observation simulate_response(const ModelSpec& true_model, const Point& x, Rng& rng) {
    const DesignSpace& space = true_model.space();
    Observation obs;
    obs.x = x;
    for (int k = 0; k < static_cast<int>(x.size()); ++k) {
        if (!is_uncontrolled(x[k])) continue;
        const int partner = space.noise_partner(k);
        if (partner < 0) throw std::invalid_argument("simulate_response: uncontrolled control axis");
        const double c = x[partner];
        const double lo = std::min(c, 0.0);
        const double hi = std::max(c, 0.0);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        obs.x[k] = lo + (hi - lo) * u(rng);
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    const double z = normal(rng);
    obs.y = true_model.mean(obs.x) + true_model.noise_sd() * z;
    return obs;
}

int controlled_noise(const DesignSpace& space, const Point& x) {
    int m = 0;
    for (int k = 0; k < static_cast<int>(x.size()); ++k) {
        if (space.is_noise_axis(k) && !is_uncontrolled(x[k])) ++m;
    }
    return m;
}

double cost(const Design& design, int n, const DesignSpace& space) {
    const bool all = static_cast<std::size_t>(n) >= design.size();
    return planned_cost(round_design(design, n, all), space);
}

double cost(const ObservationSet& planned, const DesignSpace& space) {
    double total = 0.0;
    for (const auto& row : planned.rows) total += 1.0 + 5.0 * controlled_noise(space, row.x);
    return total;
}

TrialResult run_trial(const SimConfig& config, const Study& study, std::uint64_t trial) {
    const auto& models = study.suite.candidates;
    const auto K = static_cast<int>(models.size());
    const ModelSpec& truth = models[static_cast<std::size_t>(config.true_index)];
    const Design& best_true = study.optimal[static_cast<std::size_t>(config.true_index)];
    const DesignSpace& space = truth.space();

    StageContext ctx = make_stage_context(config, study, &truth);

    TrialResult result;
    TrialMetrics& m = result.metrics;
    if (config.pretest_n > 0) {
        Rng rng = make_rng(config.seed, {trial, 0, kPretestStream});
        const auto runs = pretest_runs(config, study);
        ctx.pretest = simulate_runs(truth, runs, rng);
        m.cost += planned_cost(runs, space);
    }

    result.state = init(K);
    int used = config.pretest_n;
    for (int s = 1; stages_remaining(config, s - 1, used); ++s) {
        Rng select_rng = make_rng(config.seed, {trial, static_cast<std::uint64_t>(s), kSelectionStream});
        Rng response_rng = make_rng(config.seed, {trial, static_cast<std::uint64_t>(s), kResponseStream});
        const StageSizer sizer = [&](int arm) { return next_stage_size(config, arm, used); };
        const StagePlan plan = plan_stage(result.state, ctx, sizer, select_rng);
        ObservationSet data = simulate_runs(truth, plan.runs, response_rng);
        result.records.push_back(complete_stage(result.state, ctx, plan, std::move(data)));
        result.stage_sizes.push_back(plan.n_runs);
        m.cost += planned_cost(plan.runs, space);
        used += plan.n_runs;
        m.arms.push_back(plan.arm);
        if (plan.arm != config.true_index) ++m.misselections;
    }
    m.stages = static_cast<int>(result.records.size());
    m.n = used;

    // aggregate design, the pretest counted as a uniform block
    std::vector<Design> parts;
    std::vector<int> sizes;
    if (config.pretest_n > 0) {
        parts.push_back(study.uniform);
        sizes.push_back(config.pretest_n);
    }
    for (std::size_t i = 0; i < result.records.size(); ++i) {
        parts.push_back(result.records[i].hybrid);
        sizes.push_back(result.stage_sizes[i]);
    }
    auto mix_prefix = [&](int runs) {
        std::vector<Design> ds;
        std::vector<double> ws;
        int left = runs;
        for (std::size_t i = 0; i < parts.size() && left > 0; ++i) {
            const int take = std::min(left, sizes[i]);
            ds.push_back(parts[i]);
            ws.push_back(static_cast<double>(take) / runs);
            left -= take;
        }
        return mix(ds, ws);
    };
    result.aggregate = mix_prefix(used);
    m.efficiency = safe_efficiency(config.criterion, truth, result.aggregate, best_true);

    if (config.n_per_arm.empty()) {
        int cum = config.pretest_n;
        for (int size : result.stage_sizes) {
            cum += size;
            m.checkpoints.push_back(cum);
        }
    } else {
        int unit = 0;
        for (int j = 0; j < K; ++j) unit = std::gcd(unit, stage_size(config, j));
        for (int c = config.pretest_n + unit; c <= used; c += unit) m.checkpoints.push_back(c);
        if (m.checkpoints.empty() || m.checkpoints.back() != used) m.checkpoints.push_back(used);
    }
    for (int c : m.checkpoints) {
        m.efficiency_by_n.push_back(safe_efficiency(config.criterion, truth, mix_prefix(c), best_true));
    }

    std::vector<double> arm_eff(static_cast<std::size_t>(K));
    for (int j = 0; j < K; ++j) {
        arm_eff[static_cast<std::size_t>(j)] =
            safe_efficiency(config.criterion, truth, study.optimal[static_cast<std::size_t>(j)], best_true);
    }
    const bool pure_stages = config.pretest_n > 0 || config.rho.kind == RhoSchedule::Kind::zero;
    for (std::size_t i = 0; i < result.records.size(); ++i) {
        const double share = pure_stages ? 1.0 : result.records[i].rho;
        m.proof_side += static_cast<double>(result.stage_sizes[i]) / used * share *
                        arm_eff[static_cast<std::size_t>(result.records[i].arm)];
    }

    m.final_model = final_model(result.state);
    m.final_correct = m.final_model == config.true_index;
    ObservationSet pooled;
    if (ctx.pretest) pooled = *ctx.pretest;
    for (const auto& rec : result.records) pooled.append(rec.data);
    const ScoreVector acc = select_bic(models, pooled);
    m.acc_selected = acc.selected;
    m.acc_correct = acc.selected && *acc.selected == config.true_index;

    if (config.comparison_accuracy) {
        for (std::size_t k = 0; k < study.comparisons.size(); ++k) {
            Rng rng = make_rng(config.seed, {trial, kComparisonTag + k, kResponseStream});
            const Design& d = study.comparisons[k].design;
            const auto runs = round_design(d, used, static_cast<std::size_t>(used) >= d.size());
            const ScoreVector sv = select_bic(models, simulate_runs(truth, runs, rng));
            m.comparison_acc.push_back(sv.selected && *sv.selected == config.true_index);
        }
    }
    return result;
}

ReplicationSummary replicate(const SimConfig& config, int R, std::uint64_t seed) {
    const Study study = build_study(config);
    return replicate(config, study, R, seed);
}

ReplicationSummary replicate(const SimConfig& config, const Study& study, int R, std::uint64_t seed) {
    if (R < 1) throw std::invalid_argument("replicate: R must be >= 1");
    SimConfig cfg = config;
    cfg.seed = seed;
    ReplicationSummary out;
    out.replications = R;
    out.trials.resize(static_cast<std::size_t>(R));
    parallel_for(R, config.threads, [&](int r) {
        out.trials[static_cast<std::size_t>(r)] = run_trial(cfg, study, static_cast<std::uint64_t>(r)).metrics;
    });

    // fixed-order reduction
    const double inv = 1.0 / R;
    std::size_t series = 0;
    int max_stages = 0;
    for (const auto& t : out.trials) {
        series = std::max(series, t.efficiency_by_n.size());
        max_stages = std::max(max_stages, t.stages);
    }
    out.efficiency_by_n.assign(series, 0.0);
    out.misselect_by_stage.assign(static_cast<std::size_t>(max_stages), 0.0);
    double mean_n = 0.0;
    for (const auto& t : out.trials) {
        if (t.checkpoints.size() == series) out.checkpoints = t.checkpoints;
        out.mean_efficiency += inv * t.efficiency;
        out.selection_accuracy += inv * (t.acc_correct ? 1.0 : 0.0);
        out.final_model_accuracy += inv * (t.final_correct ? 1.0 : 0.0);
        out.mean_misselections += inv * t.misselections;
        out.mean_cost += inv * t.cost;
        out.mean_proof_side += inv * t.proof_side;
        mean_n += inv * t.n;
        for (std::size_t i = 0; i < series; ++i) {
            // a shorter series holds its final value
            const double v = t.efficiency_by_n.empty() ? 0.0
                                                       : t.efficiency_by_n[std::min(i, t.efficiency_by_n.size() - 1)];
            out.efficiency_by_n[i] += inv * v;
        }
    }
    for (const auto& t : out.trials) {
        int running = 0;
        for (int s = 0; s < max_stages; ++s) {
            if (s < t.stages && t.arms[static_cast<std::size_t>(s)] != config.true_index) ++running;
            out.misselect_by_stage[static_cast<std::size_t>(s)] += inv * running;
        }
    }

    const ModelSpec& truth = study.suite.candidates[static_cast<std::size_t>(config.true_index)];
    const Design& best_true = study.optimal[static_cast<std::size_t>(config.true_index)];
    const auto n_round = static_cast<int>(std::lround(mean_n));
    out.optimal_cost = cost(best_true, n_round, truth.space());
    const auto grid = truth.candidate_grid();
    for (std::size_t k = 0; k < study.comparisons.size(); ++k) {
        ComparisonSummary c;
        c.name = study.comparisons[k].name;
        c.efficiency = safe_efficiency(config.criterion, truth, study.comparisons[k].design, best_true);
        c.cost = cost(study.comparisons[k].design, n_round, truth.space());
        try {
            c.gap = equivalence_gap(truth, config.criterion, study.comparisons[k].design, grid);
        } catch (const std::invalid_argument&) {
            // singular for the true model
        }
        if (config.comparison_accuracy) {
            double acc = 0.0;
            for (const auto& t : out.trials) acc += inv * (t.comparison_acc[k] ? 1.0 : 0.0);
            c.accuracy = acc;
        }
        out.comparisons.push_back(c);
    }
    return out;
}

AlphaEstimate estimate_alpha(const SimConfig& config, int R, std::uint64_t seed) {
    const Study study = build_study(config);
    return estimate_alpha(config, study, R, seed);
}

AlphaEstimate estimate_alpha(const SimConfig& config, const Study& study, int R, std::uint64_t seed) {
    if (R < 1) throw std::invalid_argument("estimate_alpha: R must be >= 1");
    const auto& models = study.suite.candidates;
    const auto K = static_cast<int>(models.size());
    const ModelSpec& truth = models[static_cast<std::size_t>(config.true_index)];
    const bool pure = config.pretest_n > 0 || config.rho.kind == RhoSchedule::Kind::zero;
    const std::vector<double> rhos = pure ? std::vector<double>{1.0} : std::vector<double>{0.0, 0.5, 2.0 / 3.0, 0.75};

    struct Cell {
        int arm;
        std::size_t rho_index;
    };
    std::vector<Cell> cells;
    for (int l = 0; l < K; ++l) {
        for (std::size_t i = 0; i < rhos.size(); ++i) cells.push_back({l, i});
    }
    // counts[cell][j]: stages where model j was selected
    std::vector<std::vector<int>> counts(cells.size(), std::vector<int>(static_cast<std::size_t>(K), 0));
    parallel_for(static_cast<int>(cells.size()), config.threads, [&](int c) {
        const Cell cell = cells[static_cast<std::size_t>(c)];
        const Design& best = study.optimal[static_cast<std::size_t>(cell.arm)];
        const double rho = rhos[cell.rho_index];
        Design hybrid = best;
        if (rho < 1.0) {
            const std::vector<Design> parts{best, study.uniform};
            const std::vector<double> alphas{rho, 1.0 - rho};
            hybrid = rho == 0.0 ? study.uniform : mix(parts, alphas);
        }
        const int n = stage_size(config, cell.arm);
        const auto runs = round_design(hybrid, n, static_cast<std::size_t>(n) >= hybrid.size());
        std::vector<RoundedRun> pre;
        if (config.pretest_n > 0) pre = round_design(study.uniform, config.pretest_n, false);
        for (int r = 0; r < R; ++r) {
            Rng rng = make_rng(seed, {kAlphaTag, static_cast<std::uint64_t>(cell.arm), cell.rho_index,
                                      static_cast<std::uint64_t>(r)});
            ObservationSet data = simulate_runs(truth, pre, rng);
            data.append(simulate_runs(truth, runs, rng));
            const ScoreVector s = evaluate_stage(models, data, config.eval, config.gof_level, config.gof_reference);
            if (s.selected) ++counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(*s.selected)];
        }
    });
    AlphaEstimate est;
    est.min_true = 1.0;
    est.max_false = 0.0;
    for (const auto& row : counts) {
        for (int j = 0; j < K; ++j) {
            const double theta = static_cast<double>(row[static_cast<std::size_t>(j)]) / R;
            if (j == config.true_index) est.min_true = std::min(est.min_true, theta);
            else est.max_false = std::max(est.max_false, theta);
        }
    }
    est.c_hat = 0.5 * (est.min_true + est.max_false);
    est.alpha_hat = std::max(0.0, 0.5 * (est.min_true - est.max_false));
    return est;
}

}  // namespace seqdesign
