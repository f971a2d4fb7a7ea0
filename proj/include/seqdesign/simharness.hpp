#pragma once

#include "seqdesign/bandit.hpp"
#include "seqdesign/design.hpp"
#include "seqdesign/model.hpp"
#include "seqdesign/rng.hpp"
#include "seqdesign/selection.hpp"
#include "seqdesign/suites.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace seqdesign {

struct SimConfig {
    std::string suite = "dose-response:delta=5";
    int true_index = 0;  // 0-based
    Criterion criterion = Criterion::d();
    int T = 10;
    int n_t = 15;
    // Per-arm stage sizes; empty means n_t for every arm.
    std::vector<int> n_per_arm;
    // Total run cap; the stage that crosses it is cut to the remaining runs.
    // 0 means T stages of full size.
    int budget = 0;
    RhoSchedule rho;
    EvalMode eval = EvalMode::plain_bic;
    double gof_level = 0.05;
    GofReference gof_reference = GofReference::lack_of_fit_f;
    int pretest_n = 0;
    int replications = 500;
    std::uint64_t seed = 20240501;
    // Names from the suite's comparison table; empty means all of them.
    std::vector<std::string> comparison_designs;
    // Simulate BIC accuracy of the comparison designs as well.
    bool comparison_accuracy = true;
    int threads = 0;  // 0: hardware concurrency

    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

struct NamedDesign {
    std::string name;
    Design design;
};

/// Precomputed per-suite material: optimal designs, the uniform design used
/// in hybrids and the fixed comparison designs.
struct Study {
    Suite suite;
    std::vector<Design> optimal;
    std::vector<std::size_t> minimal_support;
    Design uniform;
    std::vector<NamedDesign> comparisons;
    // Axes that count towards the unit cost (noise axes).
    std::vector<bool> cost_axes;
};

Study build_study(const SimConfig& config);

// Comparison designs of a suite, transcribed or solved; see the README table.
std::vector<NamedDesign> comparison_table(const Suite& suite, std::span<const Design> optimal);

/// Stage context shared by simulated and interactive runs. The true model is
/// attached only when given (it drives the logged stage reward).
StageContext make_stage_context(const SimConfig& config, const Study& study, const ModelSpec* truth);

// Runs for the next stage given the arm and the runs used so far; the flag is
// false when the budget cuts the stage short.
std::pair<int, bool> next_stage_size(const SimConfig& config, int arm, int used);
bool stages_remaining(const SimConfig& config, int stages_done, int used);

// Pretest runs on the uniform design.
std::vector<RoundedRun> pretest_runs(const SimConfig& config, const Study& study);

/// Completes uncontrolled noise coordinates (uniform between 0 and the
/// partner control value) and draws y = f(x) + sigma * N(0,1).
Observation simulate_response(const ModelSpec& true_model, const Point& x, Rng& rng);

// Number of controlled noise coordinates of a point.
int controlled_noise(const DesignSpace& space, const Point& x);

/// Sum over the rounded runs of 1 + 5 m_z(x).
double cost(const Design& design, int n, const DesignSpace& space);
double cost(const ObservationSet& planned, const DesignSpace& space);

struct TrialMetrics {
    double efficiency = 0.0;            // aggregate design vs the true optimum
    double proof_side = 0.0;            // sum (n_t/n) rho_t Eff(xi*_tau_t)
    std::vector<double> efficiency_by_n;
    std::vector<int> checkpoints;       // cumulative run counts
    int misselections = 0;              // stages whose arm is not the true model
    std::vector<int> arms;              // arm pulled at each stage
    int final_model = 0;
    bool final_correct = false;
    bool acc_correct = false;           // BIC on the pooled data
    std::optional<int> acc_selected;
    double cost = 0.0;
    int n = 0;
    int stages = 0;
    std::vector<bool> comparison_acc;   // per comparison design
};

struct TrialResult {
    std::vector<StageRecord> records;
    std::vector<int> stage_sizes;
    Design aggregate;
    BanditState state;
    TrialMetrics metrics;
};

/// One replicate of the sequential procedure. Seeds derive from
/// (config.seed, trial) only.
TrialResult run_trial(const SimConfig& config, const Study& study, std::uint64_t trial);

struct ComparisonSummary {
    std::string name;
    double efficiency = 0.0;
    double cost = 0.0;
    double accuracy = std::numeric_limits<double>::quiet_NaN();
    double gap = std::numeric_limits<double>::quiet_NaN();  // equivalence gap for the true model
};

struct ReplicationSummary {
    int replications = 0;
    double mean_efficiency = 0.0;
    std::vector<int> checkpoints;
    std::vector<double> efficiency_by_n;
    double selection_accuracy = 0.0;
    double final_model_accuracy = 0.0;
    double mean_misselections = 0.0;
    std::vector<double> misselect_by_stage;  // mean cumulative count after each stage
    double mean_cost = 0.0;
    double mean_proof_side = 0.0;
    double optimal_cost = 0.0;  // cost of the true model's optimal design at the mean n
    std::vector<ComparisonSummary> comparisons;
    std::vector<TrialMetrics> trials;
};

/// R independent trials, run in parallel; the result does not depend on
/// scheduling.
ReplicationSummary replicate(const SimConfig& config, int R, std::uint64_t seed);
ReplicationSummary replicate(const SimConfig& config, const Study& study, int R, std::uint64_t seed);

struct AlphaEstimate {
    double alpha_hat = 0.0;
    double c_hat = 0.0;
    double min_true = 0.0;   // smallest selection probability of the true model
    double max_false = 0.0;  // largest selection probability of another model
};

/// Monte Carlo estimate of the separation constants: selection frequencies
/// for each arm's hybrid at rho in {0, 1/2, 2/3, 3/4}.
AlphaEstimate estimate_alpha(const SimConfig& config, int R, std::uint64_t seed);
AlphaEstimate estimate_alpha(const SimConfig& config, const Study& study, int R, std::uint64_t seed);

}  // namespace seqdesign
