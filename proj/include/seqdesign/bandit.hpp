#pragma once

#include "seqdesign/design.hpp"
#include "seqdesign/model.hpp"
#include "seqdesign/rng.hpp"
#include "seqdesign/selection.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace seqdesign {

/// Beta posterior counters of the Thompson sampler. a[j] - 1 counts the stages
/// where model j was selected, b[j] - 1 those where it was checked and not
/// selected.
struct BanditState {
    std::vector<int> a;
    std::vector<int> b;
    std::vector<int> N;  // pulls per arm
    int t = 1;           // index of the next stage

    int arms() const { return static_cast<int>(a.size()); }
};

BanditState init(int K);

/// Draws eta_j ~ Beta(a_j, b_j) and returns the argmax (lowest index on ties).
int select_arm(const BanditState& state, Rng& rng);

/// Share of the stage taken from the arm's optimal design.
struct RhoSchedule {
    enum class Kind { pulls, zero, constant };
    // Whether the pull count includes the current stage: exclusive gives
    // N/(N+1) with N the earlier pulls (0 on a first pull), inclusive gives
    // (N+1)/(N+2).
    enum class Count { exclusive, inclusive };
    // zero: stages run the optimal design alone (no uniform component).
    Kind kind = Kind::pulls;
    Count count = Count::exclusive;
    double c = 0.0;

    static RhoSchedule parse(const std::string& text);  // "default", "inclusive", "zero", "constant:0.5"
    std::string name() const;
};

double rho_schedule(const BanditState& state, int arm, const RhoSchedule& schedule);

/// Everything a stage needs besides the state and the responses.
struct StageContext {
    std::span<const ModelSpec> models;
    std::span<const Design> optimal;  // one per arm
    Design uniform;
    RhoSchedule rho;
    EvalMode eval = EvalMode::plain_bic;
    double gof_level = 0.05;
    GofReference gof_reference = GofReference::lack_of_fit_f;
    // One-off observations added to every stage's data. When present each
    // stage runs the arm's optimal design alone.
    std::optional<ObservationSet> pretest;
    // Diagnostics only: the stage reward needs the true model.
    const ModelSpec* true_model = nullptr;
    std::size_t minimal_support = 0;
    Criterion criterion = Criterion::d();
};

struct StagePlan {
    int t = 0;
    int arm = 0;
    double rho = 0.0;
    Design hybrid;
    std::vector<RoundedRun> runs;
    int n_runs = 0;
};

struct StageRecord {
    int t = 0;
    int arm = 0;
    double rho = 0.0;
    Design hybrid;
    ObservationSet data;  // the stage's own runs, pretest excluded
    ScoreVector scores;
    double stage_reward = 0.0;
    std::vector<int> a_after;
    std::vector<int> b_after;
};

/// Maps a planned point to the completed observation: uncontrolled
/// coordinates filled in, response attached.
using Responder = std::function<Observation(const Point& planned)>;

StagePlan plan_stage(const BanditState& state, const StageContext& ctx, int n_t, Rng& rng,
                     bool require_all = true);

/// Stage size chosen after the arm: returns the run count and whether every
/// support point must receive a run (false for a stage cut short by a budget).
using StageSizer = std::function<std::pair<int, bool>(int arm)>;
StagePlan plan_stage(const BanditState& state, const StageContext& ctx, const StageSizer& sizer,
                     Rng& rng);

/// Scores the stage data and applies the posterior update. Models with
/// checked = false keep their counters.
StageRecord complete_stage(BanditState& state, const StageContext& ctx, const StagePlan& plan,
                           ObservationSet data);

StageRecord run_stage(BanditState& state, const StageContext& ctx, int n_t,
                      const Responder& responder, Rng& rng, bool require_all = true);
StageRecord run_stage(BanditState& state, const StageContext& ctx, const StageSizer& sizer,
                      const Responder& responder, Rng& rng);

/// sum_t (n_t / n) hybrid_t.
Design aggregate(std::span<const StageRecord> records, std::span<const int> n_per_stage);

// Most pulled arm, lowest index on ties.
int final_model(const BanditState& state);

struct TheoryBounds {
    double misselect_bound = 0.0;
    double eff_bound_plain = 0.0;
    double eff_bound_gof = 0.0;
};

/// Expected misselections K(2 + 2/a^2) + 8 log T / a^2 and the two efficiency
/// lower bounds. Requires 0 < alpha < 1/2 and T >= 2.
TheoryBounds theory_bounds(int K, double alpha, int T);

// One JSON object per line.
std::string record_to_json_line(const StageRecord& record);
StageRecord record_from_json_line(const std::string& line);

}  // namespace seqdesign
