#include "helpers.hpp"

#include "seqdesign/simharness.hpp"
#include "seqdesign/solver.hpp"
#include "seqdesign/suites.hpp"

#include <doctest.h>

#include <cmath>

using namespace seqdesign;
using testing::pt;
using testing::pt1;

namespace {

std::string trial_fingerprint(const TrialResult& t) {
    std::string out;
    for (const auto& r : t.records) out += record_to_json_line(r) + "\n";
    return out + design_to_text(t.aggregate);
}

}  // namespace

TEST_CASE("simulated responses") {
    const ModelSpec m = builtin_model("emax:delta=5");
    Rng rng(1);
    double sum = 0;
    const int R = 100000;
    for (int r = 0; r < R; ++r) sum += simulate_response(m, pt1(0.3), rng).y;
    CHECK(std::abs(sum / R - m.mean(pt1(0.3))) < 3 * m.noise_sd() / std::sqrt(double(R)));

    // a noise factor paired with a zero control is pinned at zero
    const ModelSpec rp = builtin_model("robust-parameter:M2");
    const DesignSpace& s = rp.space();
    Point x = Point::Constant(s.dim(), 0.0);
    for (int k = 0; k < s.dim(); ++k) {
        if (s.is_noise_axis(k)) x[k] = std::numeric_limits<double>::quiet_NaN();
    }
    const Observation o = simulate_response(rp, x, rng);
    for (int k = 0; k < s.dim(); ++k) {
        if (s.is_noise_axis(k)) CHECK(o.x[k] == 0.0);
    }
}

TEST_CASE("noiseless responses equal the mean") {
    const ModelSpec m = builtin_model("custom-linear:lower=0,upper=1,dim=1,sd=0,terms=1+x1");
    Rng rng(1);
    CHECK(simulate_response(m, pt1(0.4), rng).y == doctest::Approx(m.mean(pt1(0.4))));
}

TEST_CASE("unit costs") {
    const ModelSpec m1 = builtin_model("robust-parameter:M1");
    const Design fact = prune(solve_locally_optimal(m1, Criterion::d(), m1.candidate_grid()).design);
    CHECK(cost(fact, 512, m1.space()) == doctest::Approx(512));
    const ModelSpec full = builtin_model("robust-parameter:Mfull");
    std::vector<Point> pts;
    for (int i = 0; i < 64; ++i) {
        Point x(6);
        for (int k = 0; k < 6; ++k) x[k] = (i >> k) & 1 ? 1.0 : -1.0;
        pts.push_back(x);
    }
    const Design product = Design::normalized(pts, std::vector<double>(64, 1.0));
    CHECK(cost(product, 512, full.space()) == doctest::Approx(512 * 16));
    const ModelSpec lin = builtin_model("linear-dose");
    CHECK(cost(uniform_design(lin.space(), 5), 150, lin.space()) == doctest::Approx(150));
}

TEST_CASE("trials are reproducible and respect the stage plan") {
    SimConfig cfg;
    cfg.T = 6;
    cfg.true_index = 2;
    const Study study = build_study(cfg);
    const TrialResult a = run_trial(cfg, study, 3);
    const TrialResult b = run_trial(cfg, study, 3);
    CHECK(trial_fingerprint(a) == trial_fingerprint(b));
    CHECK(a.records.size() == 6);
    CHECK(a.metrics.n == 90);
    CHECK(a.metrics.efficiency >= 0.0);
    CHECK(a.metrics.efficiency <= 1.0 + 1e-9);
    for (double e : a.metrics.efficiency_by_n) {
        CHECK(e >= 0.0);
        CHECK(e <= 1.0 + 1e-9);
    }
    CHECK(trial_fingerprint(run_trial(cfg, study, 4)) != trial_fingerprint(a));
}

TEST_CASE("budget truncates the last stage") {
    SimConfig cfg;
    cfg.suite = "robust-parameter";
    cfg.T = 100;
    cfg.n_per_arm = {16, 16, 16, 16, 32, 32, 32};
    cfg.budget = 100;
    cfg.rho = RhoSchedule::parse("zero");
    cfg.comparison_accuracy = false;
    const Study study = build_study(cfg);
    const TrialResult t = run_trial(cfg, study, 0);
    CHECK(t.metrics.n == 100);
    int total = 0;
    for (int n : t.stage_sizes) total += n;
    CHECK(total == 100);
}

TEST_CASE("a single candidate mixes towards its optimum on schedule") {
    SimConfig cfg;
    cfg.T = 5;
    cfg.rho = RhoSchedule::parse("inclusive");
    Study study = build_study(cfg);
    study.suite.candidates.erase(study.suite.candidates.begin() + 1, study.suite.candidates.end());
    study.optimal.resize(1);
    study.minimal_support.resize(1);
    const TrialResult t = run_trial(cfg, study, 0);
    std::vector<Design> parts;
    std::vector<double> w;
    for (int s = 1; s <= 5; ++s) {
        const double rho = s / (s + 1.0);
        parts.push_back(mix(std::vector<Design>{study.optimal[0], study.uniform}, std::vector<double>{rho, 1 - rho}));
        w.push_back(0.2);
    }
    const Design expect = mix(parts, w);
    const ModelSpec& m = study.suite.candidates[0];
    CHECK((info_matrix(m, t.aggregate) - info_matrix(m, expect)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(t.metrics.misselections == 0);
}

TEST_CASE("well separated models are found quickly") {
    // Benchmark: the same schedule with the true arm pulled at every stage.
    // The uniform share of the early hybrids keeps even this below 1.
    SimConfig cfg;
    cfg.suite = "dose-response:delta=20";
    cfg.comparison_accuracy = false;
    const Study study = build_study(cfg);
    for (int truth = 0; truth < 3; ++truth) {
        cfg.true_index = truth;
        const ModelSpec& m = study.suite.candidates[static_cast<std::size_t>(truth)];
        const Design& opt = study.optimal[static_cast<std::size_t>(truth)];
        std::vector<Design> parts;
        for (int s = 1; s <= cfg.T; ++s) {
            const double rho = (s - 1.0) / s;
            parts.push_back(mix(std::vector<Design>{opt, study.uniform}, std::vector<double>{rho, 1 - rho}));
        }
        const double bench = efficiency(Criterion::d(), m, mix(parts, std::vector<double>(parts.size(), 1.0 / cfg.T)), opt);
        int good = 0, correct = 0;
        for (int r = 0; r < 100; ++r) {
            const TrialMetrics t = run_trial(cfg, study, static_cast<std::uint64_t>(r)).metrics;
            good += t.efficiency >= bench - 0.05;
            correct += t.final_correct;
        }
        CAPTURE(truth);
        CAPTURE(bench);
        CHECK(good >= 90);
        CHECK(correct >= 95);
    }
}

TEST_CASE("replication does not depend on the thread count") {
    SimConfig cfg;
    cfg.T = 4;
    cfg.true_index = 1;
    cfg.comparison_accuracy = true;
    cfg.threads = 1;
    const ReplicationSummary a = replicate(cfg, 12, 5);
    cfg.threads = 4;
    const ReplicationSummary b = replicate(cfg, 12, 5);
    CHECK(a.mean_efficiency == b.mean_efficiency);
    CHECK(a.selection_accuracy == b.selection_accuracy);
    CHECK(a.efficiency_by_n == b.efficiency_by_n);
    REQUIRE(a.trials.size() == b.trials.size());
    for (std::size_t i = 0; i < a.trials.size(); ++i) CHECK(a.trials[i].arms == b.trials[i].arms);
    REQUIRE(a.comparisons.size() == b.comparisons.size());
    for (std::size_t i = 0; i < a.comparisons.size(); ++i) CHECK(a.comparisons[i].accuracy == b.comparisons[i].accuracy);
}

TEST_CASE("a single replicate summarises its trial") {
    SimConfig cfg;
    cfg.T = 4;
    const Study study = build_study(cfg);
    const ReplicationSummary s = replicate(cfg, study, 1, cfg.seed);
    REQUIRE(s.trials.size() == 1);
    CHECK(s.mean_efficiency == s.trials[0].efficiency);
    CHECK(s.mean_misselections == s.trials[0].misselections);
    CHECK(s.mean_cost == s.trials[0].cost);
    // comparison designs are fixed, so their efficiencies do not move with R
    const ReplicationSummary s3 = replicate(cfg, study, 3, cfg.seed);
    for (std::size_t i = 0; i < s.comparisons.size(); ++i) CHECK(s.comparisons[i].efficiency == s3.comparisons[i].efficiency);
}

TEST_CASE("comparison table reproduces the transcribed designs") {
    SimConfig cfg;
    cfg.suite = "dose-response:delta=3";
    const Study study = build_study(cfg);
    bool found = false;
    for (const auto& c : study.comparisons) {
        if (c.name != "hybrid") continue;
        found = true;
        REQUIRE(c.design.size() == 4);
        CHECK(c.design.weight(0) == doctest::Approx(7.0 / 18).epsilon(1e-6));
        CHECK(c.design.weight(1) == doctest::Approx(2.0 / 18).epsilon(1e-6));
    }
    CHECK(found);
}

TEST_CASE("separation estimates") {
    SimConfig cfg;
    cfg.suite = "dose-response:delta=20";
    cfg.n_t = 60;
    const AlphaEstimate sep = estimate_alpha(cfg, 100, 1);
    CHECK(sep.alpha_hat > 0.3);

    // an exact copy of the true model cannot be told apart from it
    SimConfig dup;
    dup.true_index = 1;
    Study study = build_study(dup);
    study.suite.candidates.insert(study.suite.candidates.begin(), study.suite.candidates[1]);
    study.optimal.insert(study.optimal.begin(), study.optimal[1]);
    study.minimal_support.insert(study.minimal_support.begin(), study.minimal_support[1]);
    dup.true_index = 2;
    CHECK(estimate_alpha(dup, study, 50, 1).alpha_hat == 0.0);
}

TEST_CASE("config validation names the field") {
    SimConfig cfg;
    cfg.T = 0;
    try {
        cfg.validate();
        FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("T") != std::string::npos);
    }
}
